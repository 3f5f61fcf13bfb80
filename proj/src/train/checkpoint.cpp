#include "mln/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mln::train {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

namespace {

constexpr char kMagic[8] = {'M', 'L', 'N', 'C', 'K', 'P', 'T', '1'};

json signature_to_json(const norm::DomainSignature& sig) {
    json entries = json::array();
    for (const auto& e : sig.entries) {
        json je;
        je["site_id"] = e.site_id;
        je["u"] = e.u;
        je["sigma"] = e.sigma;
        if (e.has_m) je["m"] = e.m;
        entries.push_back(je);
    }
    json out;
    out["domain"] = sig.domain;
    out["entries"] = entries;
    return out;
}

norm::DomainSignature signature_from_json(const json& j) {
    norm::DomainSignature sig;
    sig.domain = j.at("domain").get<int>();
    for (const auto& je : j.at("entries")) {
        norm::SignatureEntry e;
        e.site_id = je.at("site_id").get<std::string>();
        e.u = je.at("u").get<double>();
        e.sigma = je.at("sigma").get<double>();
        if (je.contains("m")) {
            e.has_m = true;
            e.m = je.at("m").get<double>();
        }
        sig.entries.push_back(std::move(e));
    }
    return sig;
}

}  // namespace

std::string Checkpoint::manifest_json() const {
    json index = json::array();
    int64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        json entry;
        entry["name"] = name;
        entry["shape"] = tensor.shape;
        entry["dtype"] = "f32";
        entry["offset"] = offset;
        entry["bytes"] = tensor.numel() * static_cast<int64_t>(sizeof(float));
        index.push_back(entry);
        offset += tensor.numel() * static_cast<int64_t>(sizeof(float));
    }
    json sigs = json::array();
    for (const auto& s : signatures) sigs.push_back(signature_to_json(s));

    json m;
    m["format"] = "mln-checkpoint";
    m["version"] = 1;
    m["net_config"] = json::parse(net_config.to_json());
    m["train_config"] = train_config_json.empty() ? json::object() : json::parse(train_config_json);
    m["domain_spec"] = domain_spec_json.empty() ? json::array() : json::parse(domain_spec_json);
    m["trained_epochs"] = trained_epochs;
    m["signatures"] = sigs;
    m["tensor_index"] = index;
    return m.dump();
}

void Checkpoint::save(const std::string& path) const {
    const std::string manifest = manifest_json();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint64_t mlen = manifest.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    uint64_t blob_len = 0;
    for (const auto& [_, tensor] : tensors) blob_len += tensor.data.size() * sizeof(float);
    out.write(reinterpret_cast<const char*>(&blob_len), sizeof(blob_len));
    for (const auto& [_, tensor] : tensors)
        out.write(reinterpret_cast<const char*>(tensor.data.data()),
                  static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    if (!out) throw DataError("short write on checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("checkpoint: bad magic in " + path);
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in || mlen == 0 || mlen > (1ull << 30)) throw IntegrityError("checkpoint: bad manifest length");
    std::string manifest(mlen, '\0');
    in.read(manifest.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IntegrityError("checkpoint: truncated manifest");
    uint64_t blob_len = 0;
    in.read(reinterpret_cast<char*>(&blob_len), sizeof(blob_len));
    if (!in) throw IntegrityError("checkpoint: missing blob length");
    std::vector<char> blob(blob_len);
    in.read(blob.data(), static_cast<std::streamsize>(blob_len));
    if (!in || static_cast<uint64_t>(in.gcount()) != blob_len)
        throw IntegrityError("checkpoint: truncated blob");

    json m;
    try {
        m = json::parse(manifest);
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.net_config = net::NetConfig::from_json(m.at("net_config").dump());
        ckpt.train_config_json = m.at("train_config").dump();
        ckpt.domain_spec_json = m.at("domain_spec").dump();
        ckpt.trained_epochs = m.at("trained_epochs").get<int>();
        for (const auto& js : m.at("signatures")) ckpt.signatures.push_back(signature_from_json(js));

        uint64_t expect_offset = 0;
        for (const auto& entry : m.at("tensor_index")) {
            const std::string name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<std::vector<int64_t>>();
            const uint64_t offset = entry.at("offset").get<uint64_t>();
            const uint64_t bytes = entry.at("bytes").get<uint64_t>();
            if (entry.at("dtype").get<std::string>() != "f32")
                throw IntegrityError("checkpoint: unsupported dtype for tensor " + name);
            if (offset != expect_offset)
                throw IntegrityError("checkpoint: tensor index has gaps or overlaps at " + name);
            const int64_t numel = core::Tensor<float>::numel_of(shape);
            if (bytes != static_cast<uint64_t>(numel) * sizeof(float))
                throw IntegrityError("checkpoint: byte length mismatch for tensor " + name);
            if (offset + bytes > blob_len)
                throw IntegrityError("checkpoint: tensor " + name + " overflows the blob");
            core::Tensor<float> t(shape);
            std::memcpy(t.data.data(), blob.data() + offset, bytes);
            ckpt.tensors.emplace_back(name, std::move(t));
            expect_offset = offset + bytes;
        }
        if (expect_offset != blob_len)
            throw IntegrityError("checkpoint: tensor index does not cover the blob exactly");
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint: malformed manifest field: ") + e.what());
    }

    const int K = ckpt.net_config.num_domains;
    if (static_cast<int>(ckpt.signatures.size()) != K)
        throw IntegrityError("checkpoint: expected " + std::to_string(K) + " signatures, found " +
                             std::to_string(ckpt.signatures.size()));
    return ckpt;
}

Checkpoint Checkpoint::from_model(const net::SwinUnet<float>& model,
                                  const std::string& train_config_json,
                                  const std::string& domain_spec_json, int trained_epochs,
                                  std::vector<norm::DomainSignature> signatures) {
    Checkpoint ckpt;
    ckpt.net_config = model.config();
    ckpt.train_config_json = train_config_json;
    ckpt.domain_spec_json = domain_spec_json;
    ckpt.trained_epochs = trained_epochs;
    ckpt.signatures = std::move(signatures);
    const auto& store = model.params();
    for (size_t i = 0; i < store.count(); ++i)
        ckpt.tensors.emplace_back(store.info[i].name, store.values[i]);
    return ckpt;
}

void Checkpoint::load_into(net::SwinUnet<float>* model) const {
    auto& store = model->params();
    if (tensors.size() != store.count())
        throw IntegrityError("checkpoint: tensor count does not match model (" +
                             std::to_string(tensors.size()) + " vs " +
                             std::to_string(store.count()) + ")");
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& [name, tensor] = tensors[i];
        if (store.info[i].name != name)
            throw IntegrityError("checkpoint: tensor order mismatch at \"" + name + "\"");
        if (store.values[i].shape != tensor.shape)
            throw IntegrityError("checkpoint: shape mismatch for tensor \"" + name + "\"");
        store.values[i] = tensor;
    }
}

}  // namespace mln::train
