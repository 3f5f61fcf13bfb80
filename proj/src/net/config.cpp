#include "mln/net/config.hpp"

#include <nlohmann/json.hpp>

namespace mln::net {

using nlohmann::json;

void NetConfig::validate() const {
    if (depths.empty()) throw ConfigError("NetConfig.depths: at least one stage required");
    if (heads.size() != depths.size())
        throw ConfigError("NetConfig.heads: must list one head count per stage");
    if (input_h != input_w) throw ConfigError("NetConfig.input_size: square inputs required");
    if (patch_size < 1) throw ConfigError("NetConfig.patch_size: must be >= 1");
    if (num_classes < 2) throw ConfigError("NetConfig.num_classes: must be >= 2");
    if (num_domains < 1) throw ConfigError("NetConfig.num_domains: must be >= 1");
    if (mlp_ratio < 1) throw ConfigError("NetConfig.mlp_ratio: must be >= 1");
    if (window_size < 2) throw ConfigError("NetConfig.window_size: must be >= 2");
    if (decoder_upsample != "expand" && decoder_upsample != "bilinear")
        throw ConfigError("NetConfig.decoder_upsample: expected \"expand\" or \"bilinear\"");
    if (ln_delta <= 0.0) throw ConfigError("NetConfig.ln_delta: must be > 0");
    const int down = patch_size << (stages() - 1);
    if (input_h % down != 0)
        throw ConfigError("NetConfig.input_size: must be divisible by patch_size * 2^(stages-1)");
    for (int s = 0; s < stages(); ++s) {
        if (depths[static_cast<size_t>(s)] < 2 || depths[static_cast<size_t>(s)] % 2 != 0)
            throw ConfigError("NetConfig.depths: all depths must be even and >= 2");
        if (stage_dim(s) % heads[static_cast<size_t>(s)] != 0)
            throw ConfigError("NetConfig.heads: stage dim must be divisible by head count");
        const int g = stage_grid(s);
        if (g < 1) throw ConfigError("NetConfig: token grid vanishes at stage " + std::to_string(s));
        if (g % effective_window(s) != 0)
            throw ConfigError("NetConfig.window_size: token grid at stage " + std::to_string(s) +
                              " is not divisible by the effective window");
    }
}

std::string NetConfig::to_json() const {
    json j;
    j["input_size"] = {input_h, input_w};
    j["patch_size"] = patch_size;
    j["embed_dim"] = embed_dim;
    j["depths"] = depths;
    j["heads"] = heads;
    j["window_size"] = window_size;
    j["num_classes"] = num_classes;
    j["num_domains"] = num_domains;
    j["mlp_ratio"] = mlp_ratio;
    j["rel_pos_bias"] = rel_pos_bias;
    j["decoder_upsample"] = decoder_upsample;
    j["ln_delta"] = ln_delta;
    return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("NetConfig: invalid JSON: ") + e.what());
    }
    NetConfig cfg;
    static const std::vector<std::string> known = {
        "input_size", "patch_size", "embed_dim", "depths",   "heads",
        "window_size", "num_classes", "num_domains", "mlp_ratio", "rel_pos_bias",
        "decoder_upsample", "ln_delta"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("NetConfig: unknown key \"" + key + "\"");
    }
    try {
        if (j.contains("input_size")) {
            cfg.input_h = j["input_size"].at(0).get<int>();
            cfg.input_w = j["input_size"].at(1).get<int>();
        }
        if (j.contains("patch_size")) cfg.patch_size = j["patch_size"].get<int>();
        if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<int>();
        if (j.contains("depths")) cfg.depths = j["depths"].get<std::vector<int>>();
        if (j.contains("heads")) cfg.heads = j["heads"].get<std::vector<int>>();
        if (j.contains("window_size")) cfg.window_size = j["window_size"].get<int>();
        if (j.contains("num_classes")) cfg.num_classes = j["num_classes"].get<int>();
        if (j.contains("num_domains")) cfg.num_domains = j["num_domains"].get<int>();
        if (j.contains("mlp_ratio")) cfg.mlp_ratio = j["mlp_ratio"].get<int>();
        if (j.contains("rel_pos_bias")) cfg.rel_pos_bias = j["rel_pos_bias"].get<bool>();
        if (j.contains("decoder_upsample"))
            cfg.decoder_upsample = j["decoder_upsample"].get<std::string>();
        if (j.contains("ln_delta")) cfg.ln_delta = j["ln_delta"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("NetConfig: bad field type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace mln::net
