#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mln/core/rng.hpp"
#include "mln/net/infer.hpp"
#include "mln/net/swin_unet.hpp"
#include "mln/train/loss.hpp"

using namespace mln;
using net::NetConfig;
using net::SwinUnet;

namespace {

NetConfig tiny_config(int domains = 2) {
    NetConfig cfg;
    cfg.input_h = cfg.input_w = 32;
    cfg.patch_size = 4;
    cfg.embed_dim = 8;
    cfg.depths = {2, 2};
    cfg.heads = {2, 2};
    cfg.window_size = 4;
    cfg.num_domains = domains;
    return cfg;
}

core::Tensor<double> random_image_tensor(int h, int w, uint64_t seed) {
    core::Rng rng(seed);
    core::Tensor<double> t({static_cast<int64_t>(h) * w});
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

core::Image random_image(int h, int w, uint64_t seed) {
    core::Rng rng(seed);
    core::Image img(h, w);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    return img;
}

// Brute-force reference: independent per-window multi-head attention with
// relative position bias, computed directly from the parameter tensors.
std::vector<double> reference_window_attention(const SwinUnet<double>& model,
                                               const std::vector<double>& tokens, int grid,
                                               int channels, int window, int heads,
                                               const std::string& block_name) {
    const auto& store = model.params();
    const auto& qkv_w = store.values[static_cast<size_t>(store.find(block_name + ".attn.qkv.weight"))];
    const auto& qkv_b = store.values[static_cast<size_t>(store.find(block_name + ".attn.qkv.bias"))];
    const auto& proj_w = store.values[static_cast<size_t>(store.find(block_name + ".attn.proj.weight"))];
    const auto& proj_b = store.values[static_cast<size_t>(store.find(block_name + ".attn.proj.bias"))];
    const auto& table = store.values[static_cast<size_t>(store.find(block_name + ".attn.relpos_table"))];

    const int T = grid * grid;
    const int C = channels;
    const int dh = C / heads;
    std::vector<double> qkv(static_cast<size_t>(T) * 3 * C, 0.0);
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < 3 * C; ++o) {
            double acc = qkv_b.data[static_cast<size_t>(o)];
            for (int c = 0; c < C; ++c)
                acc += tokens[static_cast<size_t>(t) * C + c] * qkv_w.data[static_cast<size_t>(c) * 3 * C + o];
            qkv[static_cast<size_t>(t) * 3 * C + o] = acc;
        }

    std::vector<double> ctx(static_cast<size_t>(T) * C, 0.0);
    const int nw = grid / window;
    const int wlen = window * window;
    for (int wy = 0; wy < nw; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
            std::vector<int> toks(static_cast<size_t>(wlen));
            for (int i = 0; i < wlen; ++i)
                toks[static_cast<size_t>(i)] = (wy * window + i / window) * grid + wx * window + i % window;
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < wlen; ++i) {
                    std::vector<double> scores(static_cast<size_t>(wlen));
                    for (int j = 0; j < wlen; ++j) {
                        double dot = 0.0;
                        for (int d = 0; d < dh; ++d) {
                            const double q = qkv[static_cast<size_t>(toks[static_cast<size_t>(i)]) * 3 * C + h * dh + d];
                            const double k = qkv[static_cast<size_t>(toks[static_cast<size_t>(j)]) * 3 * C + C + h * dh + d];
                            dot += q * k;
                        }
                        const int ay = i / window, ax = i % window, by = j / window, bx = j % window;
                        const int rp = (ay - by + window - 1) * (2 * window - 1) + (ax - bx + window - 1);
                        scores[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(dh)) +
                                                         table.data[static_cast<size_t>(rp) * heads + h];
                    }
                    double mx = scores[0];
                    for (double s : scores) mx = std::max(mx, s);
                    double sum = 0.0;
                    for (double& s : scores) {
                        s = std::exp(s - mx);
                        sum += s;
                    }
                    for (double& s : scores) s /= sum;
                    for (int d = 0; d < dh; ++d) {
                        double acc = 0.0;
                        for (int j = 0; j < wlen; ++j)
                            acc += scores[static_cast<size_t>(j)] *
                                   qkv[static_cast<size_t>(toks[static_cast<size_t>(j)]) * 3 * C + 2 * C + h * dh + d];
                        ctx[static_cast<size_t>(toks[static_cast<size_t>(i)]) * C + h * dh + d] = acc;
                    }
                }
            }
        }

    std::vector<double> out(static_cast<size_t>(T) * C, 0.0);
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < C; ++o) {
            double acc = proj_b.data[static_cast<size_t>(o)];
            for (int c = 0; c < C; ++c)
                acc += ctx[static_cast<size_t>(t) * C + c] * proj_w.data[static_cast<size_t>(c) * C + o];
            out[static_cast<size_t>(t) * C + o] = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("softmax head sums to one and shapes match") {
    SwinUnet<double> model(tiny_config(), 7);
    auto img = random_image(32, 32, 11);
    const auto probs = net::segment_forward<double>(model, img, 0);
    REQUIRE(probs.shape == std::vector<int64_t>{32 * 32, 2});
    for (int64_t i = 0; i < probs.rows(); ++i) {
        const double s = probs.data[static_cast<size_t>(2 * i)] + probs.data[static_cast<size_t>(2 * i + 1)];
        CHECK(std::abs(s - 1.0) < 1e-5);
    }
}

TEST_CASE("eval forward is deterministic") {
    SwinUnet<double> model(tiny_config(), 3);
    auto img = random_image(32, 32, 5);
    const auto a = net::segment_forward<double>(model, img, 1);
    const auto b = net::segment_forward<double>(model, img, 1);
    CHECK(a.data == b.data);
}

TEST_CASE("wrong input size and domain are rejected") {
    SwinUnet<double> model(tiny_config(), 3);
    auto img = random_image(16, 16, 5);
    CHECK_THROWS_AS(net::segment_forward<double>(model, img, 0), mln::ShapeError);
    auto ok = random_image(32, 32, 5);
    CHECK_THROWS_AS(net::segment_forward<double>(model, ok, 2), mln::ConfigError);
}

TEST_CASE("residual identity: zeroed projections make blocks identity maps") {
    NetConfig cfg = tiny_config();
    SwinUnet<double> model(cfg, 9);
    auto& store = model.params();
    for (size_t i = 0; i < store.count(); ++i) {
        const auto& name = store.info[i].name;
        if (name.find(".attn.proj.") != std::string::npos ||
            name.find(".mlp.fc2.") != std::string::npos)
            store.values[i].fill(0.0);
    }
    // with both residual-branch outputs zeroed, the full encoder stage is a
    // pure pass-through; compare a forward against one with block weights
    // additionally randomized (must be equal since output projs are zero)
    auto img = random_image(32, 32, 21);
    const auto base = net::segment_forward<double>(model, img, 0);
    core::Rng rng(99);
    for (size_t i = 0; i < store.count(); ++i) {
        const auto& name = store.info[i].name;
        if (name.find(".attn.qkv.") != std::string::npos ||
            name.find(".mlp.fc1.") != std::string::npos)
            for (auto& v : store.values[i].data) v = rng.normal(0.0, 0.1);
    }
    const auto scrambled = net::segment_forward<double>(model, img, 0);
    CHECK(base.data == scrambled.data);
}

TEST_CASE("unshifted attention equals the per-window oracle") {
    NetConfig cfg;
    cfg.input_h = cfg.input_w = 32;  // 8x8 token grid at stage 0
    cfg.patch_size = 4;
    cfg.embed_dim = 8;
    cfg.depths = {2, 2};
    cfg.heads = {2, 2};
    cfg.window_size = 4;
    cfg.num_domains = 1;
    SwinUnet<double> model(cfg, 13);

    // Token input is produced inside the network; instead probe the first
    // block's attention by rebuilding its input: embed + norm of the image.
    // Run the full graph once, capturing the attention output via the
    // residual trick: zero fc2 so the block output is x + attn(ln(x)).
    auto& store = model.params();
    const int grid = 8, C = 8, window = 4, heads = 2;

    core::Rng rng(31);
    std::vector<double> tokens(static_cast<size_t>(grid) * grid * C);
    for (auto& v : tokens) v = rng.normal(0.0, 1.0);

    // reference attention on raw tokens
    const auto ref = reference_window_attention(model, tokens, grid, C, window, heads, "enc0.b0");

    // tape attention on the same tokens, using the model's first block params
    core::Tape<double> tape;
    core::Tensor<double> tok_tensor({grid * grid, C}, tokens);
    auto x = tape.leaf(tok_tensor, false);

    const auto part = net::geometry::window_partition_map(grid, C, window, 0, heads);
    const auto unpart = net::geometry::window_reverse_map(grid, C, window, 0, heads);
    const auto rp_index = net::geometry::relpos_index(window);
    const int dh = C / heads;
    const int64_t wins = static_cast<int64_t>(grid / window) * (grid / window) * heads;
    const int64_t wlen = static_cast<int64_t>(window) * window;

    auto qkv_w = tape.constant(store.values[static_cast<size_t>(store.find("enc0.b0.attn.qkv.weight"))]);
    auto qkv_b = tape.constant(store.values[static_cast<size_t>(store.find("enc0.b0.attn.qkv.bias"))]);
    auto proj_w = tape.constant(store.values[static_cast<size_t>(store.find("enc0.b0.attn.proj.weight"))]);
    auto proj_b = tape.constant(store.values[static_cast<size_t>(store.find("enc0.b0.attn.proj.bias"))]);
    auto table = tape.constant(store.values[static_cast<size_t>(store.find("enc0.b0.attn.relpos_table"))]);

    auto qkv = core::ops::add_rowvec(tape, core::ops::matmul(tape, x, qkv_w), qkv_b);
    auto q = core::ops::gather(tape, core::ops::slice_cols(tape, qkv, 0, C), &part, {wins, wlen, dh});
    auto k = core::ops::gather(tape, core::ops::slice_cols(tape, qkv, C, 2 * C), &part, {wins, wlen, dh});
    auto v = core::ops::gather(tape, core::ops::slice_cols(tape, qkv, 2 * C, 3 * C), &part, {wins, wlen, dh});
    q = core::ops::scale(tape, q, 1.0 / std::sqrt(static_cast<double>(dh)));
    auto scores = core::ops::bmm(tape, q, k, true);
    scores = core::ops::add_relpos_bias(tape, scores, table, &rp_index, heads);
    auto attn = core::ops::softmax_lastdim(tape, scores);
    auto ctx = core::ops::bmm(tape, attn, v, false);
    auto merged = core::ops::gather(tape, ctx, &unpart, {static_cast<int64_t>(grid) * grid, C});
    auto out = core::ops::add_rowvec(tape, core::ops::matmul(tape, merged, proj_w), proj_b);

    const auto& got = tape.value(out);
    REQUIRE(got.numel() == static_cast<int64_t>(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(got.data[i] - ref[i]) < 1e-9);
}

TEST_CASE("cyclic shift round trip is the identity") {
    const int G = 8, C = 4, M = 4, heads = 2;
    for (int shift : {1, 2, 3}) {
        const auto fwd = net::geometry::window_partition_map(G, C, M, shift, heads);
        const auto rev = net::geometry::window_reverse_map(G, C, M, shift, heads);
        std::vector<int64_t> composed(fwd.size());
        for (size_t i = 0; i < rev.size(); ++i) composed[i] = fwd[static_cast<size_t>(rev[i])];
        for (size_t i = 0; i < composed.size(); ++i)
            CHECK(composed[i] == static_cast<int64_t>(i));
    }
}

TEST_CASE("window locality: perturbing one window leaves others unchanged") {
    const int grid = 8, C = 8, window = 4, heads = 2;
    NetConfig cfg = tiny_config(1);
    SwinUnet<double> model(cfg, 17);
    core::Rng rng(5);
    std::vector<double> tokens(static_cast<size_t>(grid) * grid * C);
    for (auto& v : tokens) v = rng.normal(0.0, 1.0);
    const auto base = reference_window_attention(model, tokens, grid, C, window, heads, "enc0.b0");
    // perturb a token inside window (0,0)
    std::vector<double> perturbed = tokens;
    perturbed[0] += 1.5;
    const auto moved = reference_window_attention(model, perturbed, grid, C, window, heads, "enc0.b0");
    // tokens outside window (0,0) must be bit-identical
    for (int y = 0; y < grid; ++y)
        for (int x = 0; x < grid; ++x) {
            if (y < window && x < window) continue;
            for (int c = 0; c < C; ++c) {
                const size_t i = (static_cast<size_t>(y) * grid + x) * C + c;
                CHECK(moved[i] == base[i]);
            }
        }
}

TEST_CASE("branch independence: perturbing one branch's norms leaves others bit-identical") {
    SwinUnet<double> model(tiny_config(2), 23);
    auto img = random_image(32, 32, 41);
    const auto before = net::segment_forward<double>(model, img, 0);
    auto& store = model.params();
    for (size_t i = 0; i < store.count(); ++i) {
        if (store.info[i].ln_bank && store.info[i].domain == 1)
            for (auto& v : store.values[i].data) v += 0.37;
    }
    const auto after = net::segment_forward<double>(model, img, 0);
    CHECK(before.data == after.data);
    const auto d1a = net::segment_forward<double>(model, img, 1);
    bool changed = false;
    for (size_t i = 0; i < d1a.data.size() && !changed; ++i)
        changed = d1a.data[i] != before.data[i];
    CHECK(changed);
}

TEST_CASE("parameter count: K-branch overhead is (K-1) x per-branch LN parameters") {
    NetConfig c1 = tiny_config(1);
    NetConfig c4 = tiny_config(4);
    SwinUnet<double> m1(c1, 3), m4(c4, 3);
    const auto b1 = m1.count_parameters();
    const auto b4 = m4.count_parameters();
    CHECK(b1.backbone == b4.backbone);
    CHECK(b4.total - b1.total == 3 * m1.ln_params_per_branch());
    CHECK(b4.total == b4.backbone + b4.ln_bank);
    CHECK(b4.ln_bank == 4 * m4.ln_params_per_branch());
}

TEST_CASE("decoder output matches input resolution for admissible configs") {
    for (int size : {32, 64}) {
        NetConfig cfg = tiny_config(1);
        cfg.input_h = cfg.input_w = size;
        SwinUnet<double> model(cfg, 2);
        auto img = random_image(size, size, 77);
        const auto probs = net::segment_forward<double>(model, img, 0);
        CHECK(probs.dim(0) == static_cast<int64_t>(size) * size);
    }
}

TEST_CASE("bilinear decoder variant runs and normalizes") {
    NetConfig cfg = tiny_config(1);
    cfg.decoder_upsample = "bilinear";
    SwinUnet<double> model(cfg, 4);
    auto img = random_image(32, 32, 7);
    const auto probs = net::segment_forward<double>(model, img, 0);
    for (int64_t i = 0; i < probs.rows(); ++i) {
        const double s = probs.data[static_cast<size_t>(2 * i)] + probs.data[static_cast<size_t>(2 * i + 1)];
        CHECK(std::abs(s - 1.0) < 1e-5);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    NetConfig cfg = tiny_config(2);
    SwinUnet<double> model(cfg, 19);
    const auto img = random_image_tensor(32, 32, 3);
    core::Tensor<double> onehot({32 * 32, 2});
    core::Rng rng(8);
    for (int64_t i = 0; i < 32 * 32; ++i)
        onehot.data[static_cast<size_t>(2 * i + (rng.coin() ? 1 : 0))] = 1.0;

    auto loss_value = [&](int domain) {
        core::Tape<double> tape;
        auto fwd = model.forward(tape, img, domain, false, nullptr);
        auto l = train::ops::dice_from_probs(tape, fwd.probs, &onehot, 1e-5);
        return tape.value(l).data[0];
    };
    auto total = [&]() { return loss_value(0) + loss_value(1); };

    // analytic gradient of the two-branch total
    std::vector<core::Tensor<double>> grads(model.params().count());
    for (int d = 0; d < 2; ++d) {
        core::Tape<double> tape;
        std::vector<SwinUnet<double>::Binding> bindings;
        auto fwd = model.forward(tape, img, d, false, &bindings);
        auto l = train::ops::dice_from_probs(tape, fwd.probs, &onehot, 1e-5);
        tape.backward(l);
        for (const auto& [pidx, var] : bindings) {
            if (!tape.has_grad(var)) continue;
            auto& acc = grads[static_cast<size_t>(pidx)];
            if (acc.data.empty())
                acc = tape.grad(var);
            else
                for (size_t j = 0; j < acc.data.size(); ++j) acc.data[j] += tape.grad(var).data[j];
        }
    }

    // sample 20 parameters across all tensors (the acceptance suite checks 50)
    core::Rng pick(123);
    auto& store = model.params();
    const double step = 1e-4;
    int checked = 0;
    double max_rel = 0.0;
    while (checked < 20) {
        const size_t pi = static_cast<size_t>(pick.uniform_int(store.count()));
        if (grads[pi].data.empty()) continue;  // unused (e.g. inactive branch)
        const size_t j = static_cast<size_t>(pick.uniform_int(store.values[pi].data.size()));
        const double keep = store.values[pi].data[j];
        store.values[pi].data[j] = keep + step;
        const double up = total();
        store.values[pi].data[j] = keep - step;
        const double down = total();
        store.values[pi].data[j] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double an = grads[pi].data[j];
        const double rel = std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)});
        if (std::abs(fd) > 1e-10 || std::abs(an) > 1e-10) max_rel = std::max(max_rel, rel);
        ++checked;
    }
    CHECK(max_rel <= 1e-3);
}
