#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mln/core/rng.hpp"
#include "mln/core/tape.hpp"
#include "mln/net/config.hpp"

namespace mln::net {

struct ParamInfo {
    std::string name;
    std::vector<int64_t> shape;
    bool weight_decay = false;
    bool ln_bank = false;
    int site_index = -1;  // ln_bank only
    int domain = -1;      // ln_bank only
};

template <typename S>
struct ParamStore {
    std::vector<ParamInfo> info;
    std::vector<core::Tensor<S>> values;

    int add(ParamInfo pi, core::Tensor<S> init) {
        info.push_back(std::move(pi));
        values.push_back(std::move(init));
        return static_cast<int>(info.size()) - 1;
    }
    size_t count() const { return info.size(); }
    int find(const std::string& name) const {
        for (size_t i = 0; i < info.size(); ++i)
            if (info[i].name == name) return static_cast<int>(i);
        throw ConfigError("ParamStore: unknown parameter \"" + name + "\"");
    }
    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& v : values) n += v.numel();
        return n;
    }
};

// One normalization site; every site owns K (gamma, omega) parameter pairs.
struct SiteDef {
    std::string name;
    int features = 0;
    std::vector<int> gamma;  // param index per domain
    std::vector<int> omega;
};

namespace geometry {

inline std::vector<int64_t> patchify_map(int H, int W, int p) {
    const int gh = H / p, gw = W / p;
    std::vector<int64_t> map(static_cast<size_t>(gh) * gw * p * p);
    size_t i = 0;
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px)
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx)
                    map[i++] = static_cast<int64_t>(py * p + dy) * W + (px * p + dx);
    return map;
}

// [T, C] tokens -> per-head windows [nW*heads, M*M, dh], with optional
// cyclic shift applied on the way in.
inline std::vector<int64_t> window_partition_map(int G, int C, int M, int shift, int heads) {
    const int nw = G / M;
    const int dh = C / heads;
    std::vector<int64_t> map(static_cast<size_t>(nw) * nw * heads * M * M * dh);
    size_t i = 0;
    for (int w = 0; w < nw * nw; ++w) {
        const int wy = w / nw, wx = w % nw;
        for (int h = 0; h < heads; ++h)
            for (int iy = 0; iy < M; ++iy)
                for (int ix = 0; ix < M; ++ix) {
                    const int y = (wy * M + iy + shift) % G;
                    const int x = (wx * M + ix + shift) % G;
                    const int64_t tok = static_cast<int64_t>(y) * G + x;
                    for (int d = 0; d < dh; ++d) map[i++] = tok * C + h * dh + d;
                }
    }
    return map;
}

// Inverse of window_partition_map: [nW*heads, M*M, dh] -> [T, C].
inline std::vector<int64_t> window_reverse_map(int G, int C, int M, int shift, int heads) {
    const int nw = G / M;
    const int dh = C / heads;
    std::vector<int64_t> map(static_cast<size_t>(G) * G * C);
    size_t i = 0;
    for (int y = 0; y < G; ++y)
        for (int x = 0; x < G; ++x) {
            const int ys = (y - shift % G + G) % G;
            const int xs = (x - shift % G + G) % G;
            const int w = (ys / M) * nw + (xs / M);
            const int pos = (ys % M) * M + (xs % M);
            for (int c = 0; c < C; ++c) {
                const int h = c / dh, d = c % dh;
                map[i++] = ((static_cast<int64_t>(w) * heads + h) * M * M + pos) * dh + d;
            }
        }
    return map;
}

inline std::vector<int32_t> relpos_index(int M) {
    std::vector<int32_t> idx(static_cast<size_t>(M) * M * M * M);
    size_t i = 0;
    for (int ay = 0; ay < M; ++ay)
        for (int ax = 0; ax < M; ++ax)
            for (int by = 0; by < M; ++by)
                for (int bx = 0; bx < M; ++bx)
                    idx[i++] = static_cast<int32_t>((ay - by + M - 1) * (2 * M - 1) + (ax - bx + M - 1));
    return idx;
}

// Region-id mask for shifted windows; pairs from different regions get a
// large negative additive bias.
template <typename S>
core::Tensor<S> attention_mask(int G, int M, int shift, S neg = S(-100)) {
    const int nw = G / M;
    std::vector<int> ids(static_cast<size_t>(G) * G);
    auto band = [&](int v) {
        if (v < G - M) return 0;
        if (v < G - shift) return 1;
        return 2;
    };
    for (int y = 0; y < G; ++y)
        for (int x = 0; x < G; ++x) ids[static_cast<size_t>(y) * G + x] = band(y) * 3 + band(x);
    core::Tensor<S> mask({nw * nw, M * M, M * M});
    size_t i = 0;
    for (int w = 0; w < nw * nw; ++w) {
        const int wy = w / nw, wx = w % nw;
        for (int a = 0; a < M * M; ++a) {
            const int ida = ids[static_cast<size_t>(wy * M + a / M) * G + (wx * M + a % M)];
            for (int b = 0; b < M * M; ++b) {
                const int idb = ids[static_cast<size_t>(wy * M + b / M) * G + (wx * M + b % M)];
                mask.data[i++] = ida == idb ? S(0) : neg;
            }
        }
    }
    return mask;
}

// [T, C] -> [T/4, 4C]; 2x2 neighborhoods stacked as (even,even), (odd,even),
// (even,odd), (odd,odd).
inline std::vector<int64_t> merge_map(int G, int C) {
    const int g2 = G / 2;
    std::vector<int64_t> map(static_cast<size_t>(g2) * g2 * 4 * C);
    size_t i = 0;
    for (int y = 0; y < g2; ++y)
        for (int x = 0; x < g2; ++x)
            for (int q = 0; q < 4; ++q) {
                const int sy = 2 * y + (q & 1);
                const int sx = 2 * x + (q >> 1);
                for (int c = 0; c < C; ++c) map[i++] = (static_cast<int64_t>(sy) * G + sx) * C + c;
            }
    return map;
}

// [T, 2D] -> [4T, D/2]: each token expands into a 2x2 block of half-width tokens.
inline std::vector<int64_t> expand_map(int G, int D) {
    const int half = D / 2;
    std::vector<int64_t> map(static_cast<size_t>(G) * G * 4 * half);
    size_t i = 0;
    for (int Y = 0; Y < 2 * G; ++Y)
        for (int X = 0; X < 2 * G; ++X) {
            const int y = Y / 2, x = X / 2;
            const int q = (Y % 2) * 2 + (X % 2);
            for (int c = 0; c < half; ++c)
                map[i++] = (static_cast<int64_t>(y) * G + x) * (2 * D) + q * half + c;
        }
    return map;
}

// [T, p^2*C] -> [T*p^2, C]: final upsampling back to pixel resolution.
inline std::vector<int64_t> final_expand_map(int G, int C, int p) {
    std::vector<int64_t> map(static_cast<size_t>(G) * G * p * p * C);
    size_t i = 0;
    for (int Y = 0; Y < G * p; ++Y)
        for (int X = 0; X < G * p; ++X) {
            const int y = Y / p, x = X / p;
            const int q = (Y % p) * p + (X % p);
            for (int c = 0; c < C; ++c)
                map[i++] = (static_cast<int64_t>(y) * G + x) * (p * p * C) + q * C + c;
        }
    return map;
}

// Bilinear token upsampling weights at 2x, align-corners=false.
struct BilinearEntry {
    int64_t src[4];
    double w[4];
};

inline std::vector<BilinearEntry> bilinear2x_entries(int G) {
    std::vector<BilinearEntry> out(static_cast<size_t>(4) * G * G);
    size_t i = 0;
    for (int Y = 0; Y < 2 * G; ++Y)
        for (int X = 0; X < 2 * G; ++X) {
            const double fy = std::clamp((Y + 0.5) * 0.5 - 0.5, 0.0, G - 1.0);
            const double fx = std::clamp((X + 0.5) * 0.5 - 0.5, 0.0, G - 1.0);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, G - 1), x1 = std::min(x0 + 1, G - 1);
            const double wy = fy - y0, wx = fx - x0;
            BilinearEntry e;
            e.src[0] = static_cast<int64_t>(y0) * G + x0;
            e.src[1] = static_cast<int64_t>(y0) * G + x1;
            e.src[2] = static_cast<int64_t>(y1) * G + x0;
            e.src[3] = static_cast<int64_t>(y1) * G + x1;
            e.w[0] = (1 - wy) * (1 - wx);
            e.w[1] = (1 - wy) * wx;
            e.w[2] = wy * (1 - wx);
            e.w[3] = wy * wx;
            out[i++] = e;
        }
    return out;
}

}  // namespace geometry

namespace detail {

// Row-interpolation op used by the bilinear decoder variant.
template <typename S>
typename core::Tape<S>::Var interp_rows(core::Tape<S>& t, typename core::Tape<S>::Var x,
                                        const std::vector<geometry::BilinearEntry>* entries,
                                        int64_t C) {
    using Var = typename core::Tape<S>::Var;
    const auto& vx = t.value(x);
    const int64_t R = static_cast<int64_t>(entries->size());
    core::Tensor<S> out({R, C});
    for (int64_t r = 0; r < R; ++r) {
        const auto& e = (*entries)[static_cast<size_t>(r)];
        S* po = out.ptr() + r * C;
        for (int k = 0; k < 4; ++k) {
            const S* ps = vx.ptr() + e.src[k] * C;
            const S w = static_cast<S>(e.w[k]);
            for (int64_t c = 0; c < C; ++c) po[c] += w * ps[c];
        }
    }
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg,
                  !rg ? typename core::Tape<S>::BackwardFn(nullptr)
                      : [x, entries, C](core::Tape<S>& tp, Var self) {
                            const auto& g = tp.grad(self);
                            auto& gx = tp.grad(x);
                            const int64_t R = static_cast<int64_t>(entries->size());
                            for (int64_t r = 0; r < R; ++r) {
                                const auto& e = (*entries)[static_cast<size_t>(r)];
                                const S* pg = g.ptr() + r * C;
                                for (int k = 0; k < 4; ++k) {
                                    S* ps = gx.ptr() + e.src[k] * C;
                                    const S w = static_cast<S>(e.w[k]);
                                    for (int64_t c = 0; c < C; ++c) ps[c] += w * pg[c];
                                }
                            }
                        });
}

}  // namespace detail

// Windowed-attention U-net with per-domain normalization parameters at every
// site. The model owns parameter values and structural caches; Tape graphs
// reference those caches, so the model must outlive any tape built from it.
template <typename S>
class SwinUnet {
public:
    using Tape = core::Tape<S>;
    using Var = typename Tape::Var;
    using Binding = std::pair<int, Var>;  // (param index, tape leaf)

    explicit SwinUnet(const NetConfig& cfg, uint64_t init_seed = 1) : cfg_(cfg) {
        cfg_.validate();
        core::Rng rng(core::derive_seed(init_seed, 0x6e657469ull));
        build(rng);
    }

    const NetConfig& config() const { return cfg_; }
    ParamStore<S>& params() { return params_; }
    const ParamStore<S>& params() const { return params_; }
    const std::vector<SiteDef>& sites() const { return sites_; }

    struct Forward {
        Var probs = -1;  // [H*W, num_classes], rows sum to 1
        std::vector<core::ops::RowStats> site_stats;
    };

    // Runs one image [H*W] through the chosen domain branch. When `bindings`
    // is given, parameters become differentiable leaves recorded there.
    Forward forward(Tape& tape, const core::Tensor<S>& image, int domain, bool capture_stats,
                    std::vector<Binding>* bindings) const {
        if (domain < 0 || domain >= cfg_.num_domains)
            throw ConfigError("forward: domain " + std::to_string(domain) + " out of range (K=" +
                              std::to_string(cfg_.num_domains) + ")");
        if (image.numel() != static_cast<int64_t>(cfg_.input_h) * cfg_.input_w)
            throw ShapeError("forward: image size does not match configured input size");

        BindCtx ctx{&tape, bindings, {}};
        Forward fwd;
        if (capture_stats) fwd.site_stats.resize(sites_.size());

        Var x = tape.constant(core::Tensor<S>({static_cast<int64_t>(cfg_.input_h) * cfg_.input_w},
                                              image.data));
        x = core::ops::gather(tape, x, &patchify_,
                              {grid0_ * grid0_, static_cast<int64_t>(cfg_.patch_size) * cfg_.patch_size});
        x = linear(ctx, x, embed_w_, embed_b_);
        x = ln(ctx, x, embed_norm_, domain, capture_stats ? &fwd.site_stats : nullptr);

        std::vector<Var> skips;
        const int S_ = cfg_.stages();
        for (int s = 0; s < S_; ++s) {
            for (const BlockDef& blk : enc_blocks_[static_cast<size_t>(s)])
                x = block(ctx, x, blk, domain, capture_stats ? &fwd.site_stats : nullptr);
            if (s + 1 < S_) {
                skips.push_back(x);
                const MergeDef& m = merges_[static_cast<size_t>(s)];
                x = core::ops::gather(tape, x, &m.map, {m.out_tokens, m.in_features});
                x = ln(ctx, x, m.norm_site, domain, capture_stats ? &fwd.site_stats : nullptr);
                x = linear(ctx, x, m.reduce_w, -1);
            }
        }

        for (int s = S_ - 2; s >= 0; --s) {
            const ExpandDef& up = expands_[static_cast<size_t>(s)];
            if (cfg_.decoder_upsample == "expand") {
                x = linear(ctx, x, up.expand_w, -1);
                x = core::ops::gather(tape, x, &up.map, {up.out_tokens, up.out_features});
            } else {
                x = detail::interp_rows(tape, x, &up.bilinear, t_value_cols(tape, x));
                x = linear(ctx, x, up.expand_w, -1);
            }
            x = ln(ctx, x, up.norm_site, domain, capture_stats ? &fwd.site_stats : nullptr);
            x = core::ops::concat_cols(tape, skips[static_cast<size_t>(s)], x);
            x = linear(ctx, x, concat_w_[static_cast<size_t>(s)], concat_b_[static_cast<size_t>(s)]);
            for (const BlockDef& blk : dec_blocks_[static_cast<size_t>(s)])
                x = block(ctx, x, blk, domain, capture_stats ? &fwd.site_stats : nullptr);
        }

        x = linear(ctx, x, final_w_, -1);
        x = core::ops::gather(tape, x, &final_map_,
                              {static_cast<int64_t>(cfg_.input_h) * cfg_.input_w, cfg_.embed_dim});
        x = ln(ctx, x, final_norm_, domain, capture_stats ? &fwd.site_stats : nullptr);
        x = linear(ctx, x, head_w_, head_b_);
        fwd.probs = core::ops::softmax_lastdim(tape, x);
        return fwd;
    }

    struct ParamBreakdown {
        int64_t total = 0;
        int64_t backbone = 0;
        int64_t ln_bank = 0;
    };

    ParamBreakdown count_parameters() const {
        ParamBreakdown b;
        for (size_t i = 0; i < params_.count(); ++i) {
            const int64_t n = params_.values[i].numel();
            b.total += n;
            if (params_.info[i].ln_bank)
                b.ln_bank += n;
            else
                b.backbone += n;
        }
        return b;
    }

    // LN parameter elements of a single branch (gamma+omega over all sites).
    int64_t ln_params_per_branch() const {
        int64_t n = 0;
        for (const SiteDef& s : sites_) n += 2 * s.features;
        return n;
    }

private:
    struct BindCtx {
        Tape* tape;
        std::vector<Binding>* bindings;
        std::unordered_map<int, Var> cache;
    };

    struct BlockDef {
        int grid = 0, channels = 0, heads = 0, window = 0, shift = 0;
        int norm1 = -1, norm2 = -1;
        int qkv_w = -1, qkv_b = -1, proj_w = -1, proj_b = -1;
        int fc1_w = -1, fc1_b = -1, fc2_w = -1, fc2_b = -1;
        int relpos = -1;
        std::vector<int64_t> part_map, unpart_map;
        std::vector<int32_t> rp_index;
        core::Tensor<S> mask;  // empty when shift == 0
    };

    struct MergeDef {
        std::vector<int64_t> map;
        int64_t out_tokens = 0, in_features = 0;
        int norm_site = -1;
        int reduce_w = -1;
    };

    struct ExpandDef {
        std::vector<int64_t> map;
        std::vector<geometry::BilinearEntry> bilinear;
        int64_t out_tokens = 0, out_features = 0;
        int norm_site = -1;
        int expand_w = -1;
    };

    Var bound(BindCtx& ctx, int param_idx) const {
        auto it = ctx.cache.find(param_idx);
        if (it != ctx.cache.end()) return it->second;
        const bool rg = ctx.bindings != nullptr;
        const Var v = ctx.tape->leaf(params_.values[static_cast<size_t>(param_idx)], rg);
        if (ctx.bindings) ctx.bindings->emplace_back(param_idx, v);
        ctx.cache.emplace(param_idx, v);
        return v;
    }

    Var linear(BindCtx& ctx, Var x, int w_idx, int b_idx) const {
        Var y = core::ops::matmul(*ctx.tape, x, bound(ctx, w_idx));
        if (b_idx >= 0) y = core::ops::add_rowvec(*ctx.tape, y, bound(ctx, b_idx));
        return y;
    }

    Var ln(BindCtx& ctx, Var x, int site_idx, int domain,
           std::vector<core::ops::RowStats>* stats) const {
        const SiteDef& site = sites_[static_cast<size_t>(site_idx)];
        core::ops::RowStats local;
        Var y = core::ops::layer_norm(*ctx.tape, x, bound(ctx, site.gamma[static_cast<size_t>(domain)]),
                                      bound(ctx, site.omega[static_cast<size_t>(domain)]),
                                      static_cast<S>(cfg_.ln_delta), stats ? &local : nullptr);
        if (stats) (*stats)[static_cast<size_t>(site_idx)] = local;
        return y;
    }

    Var attention(BindCtx& ctx, Var x, const BlockDef& b) const {
        Tape& t = *ctx.tape;
        const int dh = b.channels / b.heads;
        const int64_t wins = static_cast<int64_t>(b.grid / b.window) * (b.grid / b.window) * b.heads;
        const int64_t wlen = static_cast<int64_t>(b.window) * b.window;

        Var qkv = linear(ctx, x, b.qkv_w, b.qkv_b);  // [T, 3C]
        Var q = core::ops::slice_cols(t, qkv, 0, b.channels);
        Var k = core::ops::slice_cols(t, qkv, b.channels, 2 * b.channels);
        Var v = core::ops::slice_cols(t, qkv, 2 * b.channels, 3 * b.channels);
        q = core::ops::gather(t, q, &b.part_map, {wins, wlen, dh});
        k = core::ops::gather(t, k, &b.part_map, {wins, wlen, dh});
        v = core::ops::gather(t, v, &b.part_map, {wins, wlen, dh});
        q = core::ops::scale(t, q, static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh))));

        Var scores = core::ops::bmm(t, q, k, /*trans_b=*/true);  // [wins, wlen, wlen]
        if (b.relpos >= 0)
            scores = core::ops::add_relpos_bias(t, scores, bound(ctx, b.relpos), &b.rp_index, b.heads);
        if (b.shift > 0) scores = core::ops::add_window_mask(t, scores, &b.mask, b.heads);
        Var attn = core::ops::softmax_lastdim(t, scores);
        Var out = core::ops::bmm(t, attn, v, /*trans_b=*/false);  // [wins, wlen, dh]
        out = core::ops::gather(t, out, &b.unpart_map,
                                {static_cast<int64_t>(b.grid) * b.grid, b.channels});
        return linear(ctx, out, b.proj_w, b.proj_b);
    }

    Var block(BindCtx& ctx, Var x, const BlockDef& b, int domain,
              std::vector<core::ops::RowStats>* stats) const {
        Tape& t = *ctx.tape;
        Var h = ln(ctx, x, b.norm1, domain, stats);
        h = attention(ctx, h, b);
        x = core::ops::add(t, x, h);
        Var m = ln(ctx, x, b.norm2, domain, stats);
        m = linear(ctx, m, b.fc1_w, b.fc1_b);
        m = core::ops::gelu(t, m);
        m = linear(ctx, m, b.fc2_w, b.fc2_b);
        return core::ops::add(t, x, m);
    }

    static int64_t t_value_cols(Tape& t, Var x) { return t.value(x).last_dim(); }

    core::Tensor<S> trunc_normal_init(std::vector<int64_t> shape, core::Rng& rng) {
        core::Tensor<S> t(std::move(shape));
        for (S& v : t.data) v = static_cast<S>(rng.trunc_normal(0.02));
        return t;
    }
    core::Tensor<S> const_init(std::vector<int64_t> shape, S value) {
        core::Tensor<S> t(std::move(shape));
        t.fill(value);
        return t;
    }

    int add_weight(const std::string& name, std::vector<int64_t> shape, core::Rng& rng) {
        return params_.add({name, shape, /*decay=*/true, false, -1, -1},
                           trunc_normal_init(shape, rng));
    }
    int add_bias(const std::string& name, int64_t n) {
        return params_.add({name, {n}, false, false, -1, -1}, const_init({n}, S(0)));
    }

    int add_site(const std::string& name, int features) {
        SiteDef site;
        site.name = name;
        site.features = features;
        const int site_idx = static_cast<int>(sites_.size());
        for (int d = 0; d < cfg_.num_domains; ++d) {
            site.gamma.push_back(params_.add({name + ".d" + std::to_string(d) + ".gamma",
                                              {features}, false, true, site_idx, d},
                                             const_init({features}, S(1))));
            site.omega.push_back(params_.add({name + ".d" + std::to_string(d) + ".omega",
                                              {features}, false, true, site_idx, d},
                                             const_init({features}, S(0))));
        }
        sites_.push_back(std::move(site));
        return site_idx;
    }

    BlockDef make_block(const std::string& name, int stage, int index, core::Rng& rng) {
        BlockDef b;
        b.grid = cfg_.stage_grid(stage);
        b.channels = cfg_.stage_dim(stage);
        b.heads = cfg_.heads[static_cast<size_t>(stage)];
        b.window = cfg_.effective_window(stage);
        b.shift = (index % 2 == 1 && b.grid > b.window) ? b.window / 2 : 0;
        b.norm1 = add_site(name + ".norm1", b.channels);
        b.qkv_w = add_weight(name + ".attn.qkv.weight", {b.channels, 3 * b.channels}, rng);
        b.qkv_b = add_bias(name + ".attn.qkv.bias", 3 * b.channels);
        if (cfg_.rel_pos_bias) {
            const int64_t table = static_cast<int64_t>(2 * b.window - 1) * (2 * b.window - 1);
            b.relpos = params_.add({name + ".attn.relpos_table", {table, b.heads}, false, false, -1, -1},
                                   trunc_normal_init({table, b.heads}, rng));
        }
        b.proj_w = add_weight(name + ".attn.proj.weight", {b.channels, b.channels}, rng);
        b.proj_b = add_bias(name + ".attn.proj.bias", b.channels);
        b.norm2 = add_site(name + ".norm2", b.channels);
        const int hidden = b.channels * cfg_.mlp_ratio;
        b.fc1_w = add_weight(name + ".mlp.fc1.weight", {b.channels, hidden}, rng);
        b.fc1_b = add_bias(name + ".mlp.fc1.bias", hidden);
        b.fc2_w = add_weight(name + ".mlp.fc2.weight", {hidden, b.channels}, rng);
        b.fc2_b = add_bias(name + ".mlp.fc2.bias", b.channels);
        b.part_map = geometry::window_partition_map(b.grid, b.channels, b.window, b.shift, b.heads);
        b.unpart_map = geometry::window_reverse_map(b.grid, b.channels, b.window, b.shift, b.heads);
        b.rp_index = geometry::relpos_index(b.window);
        if (b.shift > 0) b.mask = geometry::attention_mask<S>(b.grid, b.window, b.shift);
        return b;
    }

    void build(core::Rng& rng) {
        grid0_ = cfg_.stage_grid(0);
        const int p = cfg_.patch_size;
        patchify_ = geometry::patchify_map(cfg_.input_h, cfg_.input_w, p);
        embed_w_ = add_weight("embed.proj.weight", {static_cast<int64_t>(p) * p, cfg_.embed_dim}, rng);
        embed_b_ = add_bias("embed.proj.bias", cfg_.embed_dim);
        embed_norm_ = add_site("embed.norm", cfg_.embed_dim);

        const int S_ = cfg_.stages();
        enc_blocks_.resize(static_cast<size_t>(S_));
        dec_blocks_.resize(static_cast<size_t>(S_ - 1));
        merges_.resize(static_cast<size_t>(S_ - 1));
        expands_.resize(static_cast<size_t>(S_ - 1));
        concat_w_.resize(static_cast<size_t>(S_ - 1));
        concat_b_.resize(static_cast<size_t>(S_ - 1));

        for (int s = 0; s < S_; ++s) {
            for (int i = 0; i < cfg_.depths[static_cast<size_t>(s)]; ++i) {
                enc_blocks_[static_cast<size_t>(s)].push_back(
                    make_block("enc" + std::to_string(s) + ".b" + std::to_string(i), s, i, rng));
            }
            if (s + 1 < S_) {
                MergeDef m;
                const int g = cfg_.stage_grid(s);
                const int c = cfg_.stage_dim(s);
                m.map = geometry::merge_map(g, c);
                m.out_tokens = static_cast<int64_t>(g / 2) * (g / 2);
                m.in_features = 4 * c;
                m.norm_site = add_site("merge" + std::to_string(s) + ".norm", 4 * c);
                m.reduce_w = add_weight("merge" + std::to_string(s) + ".reduce.weight",
                                        {4 * static_cast<int64_t>(c), 2 * static_cast<int64_t>(c)}, rng);
                merges_[static_cast<size_t>(s)] = std::move(m);
            }
        }

        for (int s = S_ - 2; s >= 0; --s) {
            ExpandDef up;
            const int g_in = cfg_.stage_grid(s + 1);
            const int d_in = cfg_.stage_dim(s + 1);
            up.out_tokens = static_cast<int64_t>(2 * g_in) * (2 * g_in);
            up.out_features = d_in / 2;
            if (cfg_.decoder_upsample == "expand") {
                up.expand_w = add_weight("up" + std::to_string(s) + ".expand.weight",
                                         {d_in, 2 * static_cast<int64_t>(d_in)}, rng);
                up.map = geometry::expand_map(g_in, d_in);
            } else {
                up.expand_w = add_weight("up" + std::to_string(s) + ".expand.weight",
                                         {d_in, static_cast<int64_t>(d_in) / 2}, rng);
                up.bilinear = geometry::bilinear2x_entries(g_in);
            }
            up.norm_site = add_site("up" + std::to_string(s) + ".norm", d_in / 2);
            expands_[static_cast<size_t>(s)] = std::move(up);

            const int c = cfg_.stage_dim(s);
            concat_w_[static_cast<size_t>(s)] = add_weight(
                "dec" + std::to_string(s) + ".fuse.weight", {2 * static_cast<int64_t>(c), c}, rng);
            concat_b_[static_cast<size_t>(s)] = add_bias("dec" + std::to_string(s) + ".fuse.bias", c);
            for (int i = 0; i < cfg_.depths[static_cast<size_t>(s)]; ++i) {
                dec_blocks_[static_cast<size_t>(s)].push_back(
                    make_block("dec" + std::to_string(s) + ".b" + std::to_string(i), s, i, rng));
            }
        }

        final_w_ = add_weight("final.expand.weight",
                              {cfg_.embed_dim, static_cast<int64_t>(p) * p * cfg_.embed_dim}, rng);
        final_map_ = geometry::final_expand_map(grid0_, cfg_.embed_dim, p);
        final_norm_ = add_site("final.norm", cfg_.embed_dim);
        head_w_ = add_weight("head.weight", {cfg_.embed_dim, cfg_.num_classes}, rng);
        head_b_ = add_bias("head.bias", cfg_.num_classes);
    }

    NetConfig cfg_;
    ParamStore<S> params_;
    std::vector<SiteDef> sites_;

    int grid0_ = 0;
    std::vector<int64_t> patchify_;
    int embed_w_ = -1, embed_b_ = -1, embed_norm_ = -1;
    std::vector<std::vector<BlockDef>> enc_blocks_;
    std::vector<std::vector<BlockDef>> dec_blocks_;
    std::vector<MergeDef> merges_;
    std::vector<ExpandDef> expands_;
    std::vector<int> concat_w_, concat_b_;
    int final_w_ = -1, final_norm_ = -1;
    std::vector<int64_t> final_map_;
    int head_w_ = -1, head_b_ = -1;
};

}  // namespace mln::net
