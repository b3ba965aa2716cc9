#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsb/metrics.hpp"
#include "tsb/specgen.hpp"
#include "tsb/training.hpp"

namespace tsb {

using json = nlohmann::ordered_json;

// FNV-1a over the canonical config serialization; 16 hex digits.
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

// All CSV artifacts: UTF-8, LF line endings, 6-decimal fixed point, and a
// leading "# config_hash: <hex>" comment line.
void write_dataset_csv(const std::string& path, const SpectrumFrame& frame,
                       const std::string& config_hash);
void write_dataset_sidecar(const std::string& path, const ScenarioConfig& cfg,
                           const std::string& config_hash);
SpectrumFrame read_dataset(const std::string& csv_path, const std::string& json_path);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history,
                       const std::string& config_hash);

// horizon x channels values; one row per step, one column per channel.
void write_matrix_csv(const std::string& path, const std::vector<double>& values,
                      std::int64_t rows, std::int64_t cols,
                      const std::string& config_hash);
void write_availability_csv(const std::string& path,
                            const std::vector<std::uint8_t>& decisions,
                            std::int64_t rows, std::int64_t cols,
                            const std::string& config_hash);

void write_metrics_json(const std::string& path, const MetricsReport& report,
                        const std::string& config_hash);

// Plot-ready normalized errors: slot, channel, error.
struct SlotError {
    std::int64_t slot;
    std::int64_t channel;
    double error;
};
void write_errors_csv(const std::string& path, const std::vector<SlotError>& errors,
                      const std::string& config_hash);

struct AblationRow {
    std::string axis;
    std::string value;
    std::int64_t encoder_layers;
    std::int64_t decoder_layers;
    std::int64_t heads;
    std::int64_t bilstm_layers;
    double learning_rate;
    std::int64_t d_model;
    double rmse_db;
};
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows,
                        const std::string& config_hash);
std::vector<AblationRow> read_ablation_csv(const std::string& path);

// Config <-> JSON with field-name errors on malformed input.
json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const json& j);
json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);
json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);

}  // namespace tsb
