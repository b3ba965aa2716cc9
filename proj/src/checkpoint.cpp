#include "tsb/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "tsb/io.hpp"

namespace tsb {

namespace {
constexpr char kMagic[8] = {'T', 'S', 'B', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const TsbModel& model,
                     const NormStats& stats, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);

    json header;
    header["config_hash"] = config_hash;
    header["model"] = model_config_to_json(model.config());
    header["norm"] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
    json dir = json::array();
    std::uint64_t offset = 0;
    const auto named = model.named_params();
    for (const auto& [name, t] : named) {
        json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        entry["count"] = t.numel();
        dir.push_back(entry);
        offset += static_cast<std::uint64_t>(t.numel());
    }
    header["tensors"] = dir;
    const std::string header_str = header.dump();

    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, t] : named)
        out.write(reinterpret_cast<const char*>(t.data().data()),
                  static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    if (!out) throw ConfigError("checkpoint write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint file not found: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ConfigError("truncated checkpoint header: " + path);

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.config_hash = header.value("config_hash", "");
    ckpt.model_config = model_config_from_json(header.at("model"));
    ckpt.stats.mean = header.at("norm").at("mean").get<double>();
    ckpt.stats.stddev = header.at("norm").at("stddev").get<double>();
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto count = entry.at("count").get<std::uint64_t>();
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw ConfigError("truncated checkpoint payload: " + path);
        ckpt.tensors.emplace_back(name, std::move(values));
    }
    return ckpt;
}

TsbModel restore_model(const Checkpoint& ckpt) {
    TsbModel model(ckpt.model_config, /*seed=*/0);
    for (const auto& [name, values] : ckpt.tensors) model.load_param(name, values);
    return model;
}

}  // namespace tsb
