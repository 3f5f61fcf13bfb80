#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mln/core/tensor.hpp"
#include "mln/net/config.hpp"
#include "mln/net/swin_unet.hpp"
#include "mln/norm/layer_norm.hpp"

namespace mln::train {

// Single-file archive: manifest JSON (configs, domain spec, per-domain
// signatures, tensor index) followed by a blob of little-endian float32
// tensors. The index must cover the blob exactly with no overlaps.
struct Checkpoint {
    net::NetConfig net_config;
    std::string train_config_json;  // resolved training configuration echo
    std::string domain_spec_json;
    int trained_epochs = 0;
    std::vector<norm::DomainSignature> signatures;  // one per domain
    std::vector<std::pair<std::string, core::Tensor<float>>> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // Serialized manifest (deterministic: sorted keys, no timestamps).
    std::string manifest_json() const;

    static Checkpoint from_model(const net::SwinUnet<float>& model,
                                 const std::string& train_config_json,
                                 const std::string& domain_spec_json, int trained_epochs,
                                 std::vector<norm::DomainSignature> signatures);

    // Writes tensor values into a freshly built model (matched by name).
    void load_into(net::SwinUnet<float>* model) const;
};

}  // namespace mln::train
