#include "mln/augment/augment.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mln/core/rng.hpp"
#include "mln/phantom/phantom.hpp"

namespace mln::augment {

using nlohmann::json;

std::string DomainDef::kind_name() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::Bezier: return "bezier";
        case Kind::Invert: return "invert";
        case Kind::InvertBezier: return "invert_bezier";
    }
    return "identity";
}

DomainSpec default_domain_spec() {
    DomainSpec spec;
    spec.push_back({DomainDef::Kind::Identity, {}});
    spec.push_back({DomainDef::Kind::Bezier, {{0.30, 0.70}, {0.70, 0.30}}});
    spec.push_back({DomainDef::Kind::Bezier, {{0.70, 0.30}, {0.30, 0.70}}});
    spec.push_back({DomainDef::Kind::Invert, {}});
    return spec;
}

namespace {

void push_pair(DomainSpec& spec, double a) {
    spec.push_back({DomainDef::Kind::Bezier, {{a, 1.0 - a}, {1.0 - a, a}}});
    spec.push_back({DomainDef::Kind::Bezier, {{1.0 - a, a}, {a, 1.0 - a}}});
}

}  // namespace

DomainSpec mean_strategy_spec(int n_pairs) {
    if (n_pairs < 1) throw ConfigError("mean_strategy_spec: n_pairs must be >= 1");
    DomainSpec spec;
    spec.push_back({DomainDef::Kind::Identity, {}});
    for (int n = 1; n <= n_pairs; ++n) push_pair(spec, 0.5 * n / n_pairs);
    spec.push_back({DomainDef::Kind::Invert, {}});
    return spec;
}

DomainSpec random_strategy_spec(int n_pairs, uint64_t seed) {
    if (n_pairs < 1) throw ConfigError("random_strategy_spec: n_pairs must be >= 1");
    core::Rng rng(core::derive_seed(seed, 0x61756773ull));
    DomainSpec spec;
    spec.push_back({DomainDef::Kind::Identity, {}});
    for (int n = 0; n < n_pairs; ++n) {
        double a = rng.uniform(0.0, 0.5);
        while (a == 0.0) a = rng.uniform(0.0, 0.5);
        push_pair(spec, a);
    }
    spec.push_back({DomainDef::Kind::Invert, {}});
    return spec;
}

DomainSpec parse_domain_spec_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("domain spec: invalid JSON: ") + e.what());
    }
    if (!j.is_array() || j.empty())
        throw ConfigError("domain spec: expected a non-empty JSON array");
    DomainSpec spec;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("kind"))
            throw ConfigError("domain spec: each entry needs a \"kind\"");
        const std::string kind = item.at("kind").get<std::string>();
        DomainDef def;
        if (kind == "identity") {
            def.kind = DomainDef::Kind::Identity;
        } else if (kind == "invert") {
            def.kind = DomainDef::Kind::Invert;
        } else if (kind == "bezier" || kind == "invert_bezier") {
            def.kind = kind == "bezier" ? DomainDef::Kind::Bezier : DomainDef::Kind::InvertBezier;
            if (!item.contains("p1") || !item.contains("p2"))
                throw ConfigError("domain spec: bezier entries need p1 and p2");
            def.ctrl.p1 = {item.at("p1").at(0).get<double>(), item.at("p1").at(1).get<double>()};
            def.ctrl.p2 = {item.at("p2").at(0).get<double>(), item.at("p2").at(1).get<double>()};
            def.ctrl.validate();
        } else {
            throw ConfigError("domain spec: unknown kind \"" + kind + "\"");
        }
        for (const auto& [key, _] : item.items()) {
            if (key != "kind" && key != "p1" && key != "p2")
                throw ConfigError("domain spec: unknown key \"" + key + "\"");
        }
        spec.push_back(def);
    }
    return spec;
}

std::string domain_spec_to_json(const DomainSpec& spec) {
    json out = json::array();
    for (const auto& def : spec) {
        json item;
        item["kind"] = def.kind_name();
        if (def.kind == DomainDef::Kind::Bezier || def.kind == DomainDef::Kind::InvertBezier) {
            item["p1"] = {def.ctrl.p1.x, def.ctrl.p1.y};
            item["p2"] = {def.ctrl.p2.x, def.ctrl.p2.y};
        }
        out.push_back(item);
    }
    return out.dump();
}

Image grayscale_invert(const Image& image, double T) {
    const float mx = image.max_pixel();
    if (T < static_cast<double>(mx))
        throw ConfigError("grayscale_invert: T is below the image maximum");
    Image out = image;
    const float t = static_cast<float>(T);
    for (float& v : out.pixels) v = t - v;
    return out;
}

Image apply_lut(const Image& image, const IntensityLUT& lut) {
    Image out = image;
    for (float& v : out.pixels) v = static_cast<float>(lut.lookup(static_cast<double>(v)));
    return out;
}

std::vector<DomainSample> expand_domains(const Image& image, const Mask& mask,
                                         const DomainSpec& spec) {
    if (spec.empty()) throw ConfigError("expand_domains: empty domain spec");
    core::require_same_shape(image, mask, "expand_domains");
    std::vector<DomainSample> out;
    out.reserve(spec.size());
    for (size_t d = 0; d < spec.size(); ++d) {
        const DomainDef& def = spec[d];
        Image img;
        switch (def.kind) {
            case DomainDef::Kind::Identity:
                img = image;
                break;
            case DomainDef::Kind::Bezier:
                img = apply_lut(image, build_intensity_lut(def.ctrl));
                break;
            case DomainDef::Kind::Invert:
                img = grayscale_invert(image);
                break;
            case DomainDef::Kind::InvertBezier:
                img = grayscale_invert(apply_lut(image, build_intensity_lut(def.ctrl)));
                break;
        }
        out.push_back({std::move(img), mask, static_cast<int>(d)});
    }
    return out;
}

DomainSample conventional_augment(const Image& image, const Mask& mask, uint64_t seed) {
    core::require_same_shape(image, mask, "conventional_augment");
    core::Rng rng(core::derive_seed(seed, 0x636f6e76ull));
    const bool hflip = rng.coin();
    const bool vflip = rng.coin();
    const double scale = rng.uniform(0.8, 1.0);
    const int ch = std::max(1, static_cast<int>(std::lround(image.height * scale)));
    const int cw = std::max(1, static_cast<int>(std::lround(image.width * scale)));
    const int oy = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(image.height - ch + 1)));
    const int ox = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(image.width - cw + 1)));

    Image cropped(ch, cw, 0.0f, image.spacing);
    Mask mcropped(ch, cw, 0, mask.spacing);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            int sy = oy + y, sx = ox + x;
            if (vflip) sy = oy + (ch - 1 - y);
            if (hflip) sx = ox + (cw - 1 - x);
            cropped.at(y, x) = image.at(sy, sx);
            mcropped.at(y, x) = mask.at(sy, sx);
        }
    DomainSample out;
    out.image = phantom::resize_bilinear(cropped, image.height, image.width);
    out.mask = phantom::resize_nearest(mcropped, mask.height, mask.width);
    out.domain = 0;
    return out;
}

}  // namespace mln::augment
