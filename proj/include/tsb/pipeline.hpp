#pragma once

#include <string>

#include "tsb/io.hpp"
#include "tsb/model.hpp"
#include "tsb/specgen.hpp"
#include "tsb/training.hpp"

namespace tsb {

struct RunPaths {
    std::string out_dir = "out";
    std::string dataset_csv;
    std::string dataset_json;
    std::string checkpoint;
    std::string history_csv;
    std::string metrics_json;
    std::string errors_csv;
    std::string prediction_csv;
    std::string availability_csv;
    std::string ablation_csv;

    // Fills unset paths with defaults under out_dir.
    void resolve();
};

struct RunConfig {
    ScenarioConfig scenario;
    ModelConfig model;
    TrainConfig train;
    RunPaths paths;
    int fold = 0;
    std::uint64_t seed = 42;
    std::int64_t eval_stride = 8;  // test-window subsampling for evaluation

    // Derives scenario/train/model seeds from the global seed.
    void propagate_seed();
};

RunConfig run_config_from_json(const json& j);
json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Hash of the canonical serialized config; embedded in every artifact.
std::string config_hash_hex(const RunConfig& cfg);

int run_generate(RunConfig cfg);
int run_train(RunConfig cfg);
int run_evaluate(RunConfig cfg);
int run_predict(RunConfig cfg);
int run_ablate(RunConfig cfg);

// Dispatches a subcommand; unknown commands raise ConfigError.
int run_command(const std::string& command, const RunConfig& cfg);

// Evaluation core shared by evaluate/ablate: autoregressive prediction over
// the test fold, pooled metrics, optional per-slot error rows.
MetricsReport evaluate_checkpointed_model(const TsbModel& model, const NormStats& stats,
                                          const SpectrumFrame& frame,
                                          const TrainConfig& tcfg, int fold,
                                          std::int64_t eval_stride,
                                          std::vector<SlotError>* errors_out);

}  // namespace tsb
