#include "mln/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mln/core/parallel.hpp"
#include "mln/core/rng.hpp"
#include "mln/norm/layer_norm.hpp"
#include "mln/train/loss.hpp"
#include "mln/train/optimizer.hpp"

namespace mln::train {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("TrainConfig.batch_size: must be >= 1");
    if (max_epochs < 1) throw ConfigError("TrainConfig.max_epochs: must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("TrainConfig.learning_rate: must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("TrainConfig.momentum: must be in [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("TrainConfig.beta2: must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig.weight_decay: must be >= 0");
    if (dice_smooth < 0.0) throw ConfigError("TrainConfig.dice_smooth: must be >= 0");
    if (signature_window != "last_epoch" && signature_window != "last_batch")
        throw ConfigError("TrainConfig.signature_window: expected \"last_epoch\" or \"last_batch\"");
    if (workers < 1) throw ConfigError("TrainConfig.workers: must be >= 1");
}

std::string TrainConfig::to_json() const {
    json j;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["learning_rate"] = learning_rate;
    j["momentum"] = momentum;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["dice_smooth"] = dice_smooth;
    j["seed"] = seed;
    j["signature_window"] = signature_window;
    j["round_robin"] = round_robin;
    j["conventional_augment"] = conventional_augment;
    j["signature_correctional_mean"] = signature_correctional_mean;
    j["workers"] = workers;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("TrainConfig: invalid JSON: ") + e.what());
    }
    static const std::vector<std::string> known = {
        "batch_size", "max_epochs", "learning_rate", "momentum", "beta2", "adam_eps",
        "weight_decay", "dice_smooth", "seed", "signature_window", "round_robin",
        "conventional_augment", "signature_correctional_mean", "workers"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("TrainConfig: unknown key \"" + key + "\"");
    }
    TrainConfig cfg;
    try {
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
        if (j.contains("max_epochs")) cfg.max_epochs = j["max_epochs"].get<int>();
        if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
        if (j.contains("beta2")) cfg.beta2 = j["beta2"].get<double>();
        if (j.contains("adam_eps")) cfg.adam_eps = j["adam_eps"].get<double>();
        if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("dice_smooth")) cfg.dice_smooth = j["dice_smooth"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
        if (j.contains("signature_window"))
            cfg.signature_window = j["signature_window"].get<std::string>();
        if (j.contains("round_robin")) cfg.round_robin = j["round_robin"].get<bool>();
        if (j.contains("conventional_augment"))
            cfg.conventional_augment = j["conventional_augment"].get<bool>();
        if (j.contains("signature_correctional_mean"))
            cfg.signature_correctional_mean = j["signature_correctional_mean"].get<bool>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("TrainConfig: bad field type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::optional<double> correctional_mean(const core::Image& image) {
    if (image.pixels.empty()) throw ShapeError("correctional_mean: empty image");
    const float min = image.min_pixel();
    double sum = 0.0;
    int64_t n = 0;
    for (float v : image.pixels) {
        if (v > min) {
            sum += static_cast<double>(v);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

namespace {

struct UnitResult {
    double loss = 0.0;
    std::vector<std::pair<int, core::Tensor<float>>> grads;  // (param idx, grad)
    std::vector<core::ops::RowStats> site_stats;
};

}  // namespace

TrainResult train(const TrainConfig& train_cfg, const net::NetConfig& net_cfg,
                  const augment::DomainSpec& spec,
                  const std::vector<std::pair<core::Image, core::Mask>>& dataset,
                  const Checkpoint* resume) {
    train_cfg.validate();
    net_cfg.validate();
    if (dataset.empty()) throw DataError("train: dataset is empty");
    if (spec.empty()) throw ConfigError("train: empty domain spec");
    const int K = static_cast<int>(spec.size());
    if (net_cfg.num_domains != K)
        throw ConfigError("train: NetConfig.num_domains (" + std::to_string(net_cfg.num_domains) +
                          ") must equal the domain spec size (" + std::to_string(K) + ")");

    net::SwinUnet<float> model(net_cfg, train_cfg.seed);
    int start_epoch = 0;
    if (resume) {
        resume->load_into(&model);
        start_epoch = resume->trained_epochs;
    }
    AdamW<float> opt(model.params(), train_cfg.learning_rate, train_cfg.momentum, train_cfg.beta2,
                     train_cfg.adam_eps, train_cfg.weight_decay);

    const size_t n_sites = model.sites().size();
    const size_t n_params = model.params().count();
    // per-(site, domain) recorders plus a per-domain correctional-mean recorder
    std::vector<std::vector<norm::StatRecorder>> recorders(
        n_sites, std::vector<norm::StatRecorder>(static_cast<size_t>(K)));
    std::vector<norm::StatRecorder> cm_recorders(static_cast<size_t>(K));

    const int64_t pixels = static_cast<int64_t>(net_cfg.input_h) * net_cfg.input_w;
    const int steps_per_epoch =
        static_cast<int>((dataset.size() + train_cfg.batch_size - 1) / train_cfg.batch_size);
    const int total_epochs = start_epoch + train_cfg.max_epochs;

    TrainResult result;
    for (int epoch = start_epoch; epoch < total_epochs; ++epoch) {
        std::vector<size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        core::Rng shuffle_rng(core::derive_seed(train_cfg.seed, 0x65700000ull + static_cast<uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        const bool last_epoch = epoch == total_epochs - 1;
        std::vector<double> epoch_branch_sum(static_cast<size_t>(K), 0.0);
        std::vector<int64_t> epoch_branch_count(static_cast<size_t>(K), 0);

        for (int step = 0; step < steps_per_epoch; ++step) {
            const size_t lo = static_cast<size_t>(step) * train_cfg.batch_size;
            const size_t hi = std::min(dataset.size(), lo + train_cfg.batch_size);
            const int bsz = static_cast<int>(hi - lo);

            const bool last_step = step == steps_per_epoch - 1;
            const bool recording = train_cfg.signature_window == "last_epoch"
                                       ? last_epoch
                                       : (last_epoch && last_step);

            // expand the batch into per-domain units
            struct Unit {
                core::Image image;
                core::Mask mask;
                int domain = 0;
            };
            std::vector<Unit> units;
            std::vector<int> branch_unit_count(static_cast<size_t>(K), 0);
            const int rr_domain = train_cfg.round_robin
                                      ? (epoch * steps_per_epoch + step) % K
                                      : -1;
            for (size_t bi = lo; bi < hi; ++bi) {
                const auto& [img0, mask0] = dataset[order[bi]];
                core::Image img = img0;
                core::Mask mask = mask0;
                if (train_cfg.conventional_augment) {
                    auto aug = augment::conventional_augment(
                        img, mask,
                        core::derive_seed(train_cfg.seed,
                                          (static_cast<uint64_t>(epoch) << 32) ^
                                              (static_cast<uint64_t>(step) << 16) ^ bi));
                    img = std::move(aug.image);
                    mask = std::move(aug.mask);
                }
                auto expanded = augment::expand_domains(img, mask, spec);
                for (auto& ds : expanded) {
                    if (rr_domain >= 0 && ds.domain != rr_domain) continue;
                    ++branch_unit_count[static_cast<size_t>(ds.domain)];
                    units.push_back({std::move(ds.image), std::move(ds.mask), ds.domain});
                }
            }

            // forward/backward per unit; grads reduced in fixed unit order
            std::vector<UnitResult> results(units.size());
            core::parallel_for(units.size(), train_cfg.workers, [&](size_t ui) {
                const Unit& unit = units[ui];
                core::Tensor<float> input({pixels});
                for (int64_t i = 0; i < pixels; ++i)
                    input.data[static_cast<size_t>(i)] = unit.image.pixels[static_cast<size_t>(i)];
                core::Tensor<float> onehot({pixels, static_cast<int64_t>(net_cfg.num_classes)});
                for (int64_t i = 0; i < pixels; ++i) {
                    const int cls = unit.mask.pixels[static_cast<size_t>(i)] ? 1 : 0;
                    onehot.data[static_cast<size_t>(i * net_cfg.num_classes + cls)] = 1.0f;
                }
                core::Tape<float> tape;
                std::vector<net::SwinUnet<float>::Binding> bindings;
                auto fwd = model.forward(tape, input, unit.domain, recording, &bindings);
                auto loss = ops::dice_from_probs(tape, fwd.probs, &onehot,
                                                 static_cast<float>(train_cfg.dice_smooth));
                UnitResult& res = results[ui];
                res.loss = static_cast<double>(tape.value(loss).data[0]);
                // branch loss is the mean over the branch's batch samples
                tape.backward(loss, 1.0f / static_cast<float>(
                                        branch_unit_count[static_cast<size_t>(unit.domain)]));
                res.grads.reserve(bindings.size());
                for (const auto& [pidx, var] : bindings) {
                    if (tape.has_grad(var))
                        res.grads.emplace_back(pidx, std::move(tape.grad(var)));
                }
                if (recording) res.site_stats = std::move(fwd.site_stats);
            });

            // non-finite guard with diagnostics
            std::vector<double> branch_loss(static_cast<size_t>(K), 0.0);
            for (size_t ui = 0; ui < units.size(); ++ui) {
                if (!std::isfinite(results[ui].loss))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", step " + std::to_string(step) + ", branch " +
                                       std::to_string(units[ui].domain));
                branch_loss[static_cast<size_t>(units[ui].domain)] += results[ui].loss;
            }
            for (int d = 0; d < K; ++d) {
                if (branch_unit_count[static_cast<size_t>(d)] == 0) continue;
                branch_loss[static_cast<size_t>(d)] /= branch_unit_count[static_cast<size_t>(d)];
                epoch_branch_sum[static_cast<size_t>(d)] += branch_loss[static_cast<size_t>(d)];
                ++epoch_branch_count[static_cast<size_t>(d)];
            }

            std::vector<core::Tensor<float>> grads(n_params);
            for (const UnitResult& res : results) {
                for (const auto& [pidx, g] : res.grads) {
                    auto& acc = grads[static_cast<size_t>(pidx)];
                    if (acc.data.empty()) {
                        acc = g;
                    } else {
                        for (size_t j = 0; j < acc.data.size(); ++j) acc.data[j] += g.data[j];
                    }
                }
            }
            opt.step(model.params(), grads);

            if (recording) {
                // one record per batch: average unit stats per domain
                for (int d = 0; d < K; ++d) {
                    const int n = branch_unit_count[static_cast<size_t>(d)];
                    if (n == 0) continue;
                    for (size_t site = 0; site < n_sites; ++site) {
                        double u = 0.0, sg = 0.0;
                        for (size_t ui = 0; ui < units.size(); ++ui) {
                            if (units[ui].domain != d) continue;
                            u += results[ui].site_stats[site].mean_of_means;
                            sg += results[ui].site_stats[site].mean_of_stds;
                        }
                        recorders[site][static_cast<size_t>(d)].add_batch(u / n, sg / n);
                    }
                    if (train_cfg.signature_correctional_mean) {
                        double cm = 0.0;
                        int cm_n = 0;
                        for (size_t ui = 0; ui < units.size(); ++ui) {
                            if (units[ui].domain != d) continue;
                            if (auto m = correctional_mean(units[ui].image)) {
                                cm += *m;
                                ++cm_n;
                            }
                        }
                        if (cm_n > 0)
                            cm_recorders[static_cast<size_t>(d)].add_batch(cm / cm_n, 0.0);
                    }
                }
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.branch_losses.resize(static_cast<size_t>(K), 0.0);
        for (int d = 0; d < K; ++d) {
            if (epoch_branch_count[static_cast<size_t>(d)] > 0)
                log.branch_losses[static_cast<size_t>(d)] =
                    epoch_branch_sum[static_cast<size_t>(d)] / epoch_branch_count[static_cast<size_t>(d)];
        }
        log.total = std::accumulate(log.branch_losses.begin(), log.branch_losses.end(), 0.0);
        result.log.push_back(std::move(log));
    }

    // signatures from the recorded window
    std::vector<norm::DomainSignature> signatures;
    for (int d = 0; d < K; ++d) {
        norm::DomainSignature sig;
        sig.domain = d;
        for (size_t site = 0; site < n_sites; ++site) {
            const auto& rec = recorders[site][static_cast<size_t>(d)];
            if (rec.empty())
                throw NumericError("train: no recorded statistics for domain " + std::to_string(d));
            norm::SignatureEntry e;
            e.site_id = model.sites()[site].name;
            e.u = rec.mean_u();
            e.sigma = rec.mean_sigma();
            if (train_cfg.signature_correctional_mean &&
                !cm_recorders[static_cast<size_t>(d)].empty()) {
                e.has_m = true;
                e.m = cm_recorders[static_cast<size_t>(d)].mean_u();
            }
            sig.entries.push_back(std::move(e));
        }
        signatures.push_back(std::move(sig));
    }

    result.checkpoint = Checkpoint::from_model(model, train_cfg.to_json(),
                                               augment::domain_spec_to_json(spec),
                                               total_epochs, std::move(signatures));
    return result;
}

}  // namespace mln::train
