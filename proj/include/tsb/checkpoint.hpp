#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsb/model.hpp"
#include "tsb/training.hpp"

namespace tsb {

// Single self-describing binary file: magic + version, a JSON header with
// the model config, normalization statistics and a tensor directory, then
// the raw little-endian 64-bit values.
struct Checkpoint {
    ModelConfig model_config;
    NormStats stats;
    std::string config_hash;
    std::vector<std::pair<std::string, std::vector<double>>> tensors;
};

void save_checkpoint(const std::string& path, const TsbModel& model,
                     const NormStats& stats, const std::string& config_hash);

Checkpoint read_checkpoint(const std::string& path);

// Builds a model from the checkpoint config and loads every tensor.
TsbModel restore_model(const Checkpoint& ckpt);

}  // namespace tsb
