#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsb/model.hpp"
#include "tsb/specgen.hpp"
#include "tsb/tensor.hpp"

namespace tsb {

enum class OptimizerKind { Adam, Sgdm, Sgd };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 0.001;  // alpha
    double l2_coefficient = 0.0;   // eta
    std::int64_t batch_size = 32;
    std::int64_t epochs = 20;
    std::int64_t patience = 6;
    std::uint64_t seed = 0;
    int k_folds = 5;               // 5:1:1 over k_folds + 2 contiguous parts
    double grad_clip_norm = 5.0;   // <= 0 disables clipping
    std::int64_t window_stride = 1;
    std::int64_t valid_stride = 4;
    // Score validation epochs by autoregressive decoding instead of teacher
    // forcing. Costs one full decode per validation window but selects the
    // model that actually predicts online; teacher-forced scores can keep
    // improving while feedback predictions degrade.
    bool validate_autoregressive = true;
    // Draw a random decoder length in [1, horizon] per training sample and
    // take the loss on the final row only. The decoder's Bi-LSTM reads its
    // whole window, so full-length teacher forcing leaks each target row
    // into the previous position and the model learns to copy it; the last
    // row of a prefix has no leaked future, and it is exactly the position
    // autoregressive decoding consumes at that depth.
    bool prefix_teacher_forcing = true;
    // Fixed number of gradient-accumulation chunks per batch. Chunks run in
    // parallel when OpenMP is available, but the chunk count - not the
    // thread count - determines the floating-point reduction order, so
    // results are bitwise identical on any machine.
    int batch_chunks = 2;

    void validate() const;
};

// Mean/stddev of the training-split power values; stddev guards against
// constant series.
struct NormStats {
    double mean = 0.0;
    double stddev = 1.0;
};

NormStats compute_norm_stats(const std::vector<double>& values);
std::vector<double> zscore_normalize(const std::vector<double>& values,
                                     const NormStats& stats);
std::vector<double> denormalize(const std::vector<double>& values,
                                const NormStats& stats);

// Time axis cut into k_folds+2 near-equal contiguous parts; the fold index
// rotates which parts validate and test. Windows never straddle parts.
struct FoldSplit {
    std::vector<std::pair<std::int64_t, std::int64_t>> parts;  // [begin, end)
    std::vector<int> train_parts;
    int valid_part = -1;
    int test_part = -1;
};

FoldSplit kfold_split(std::int64_t total_slots, std::int64_t window,
                      std::int64_t horizon, int k_folds, int fold);
FoldSplit kfold_split(const SpectrumFrame& frame, std::int64_t window,
                      std::int64_t horizon, int k_folds, int fold);

// Start indices of (input, target) windows that fit inside one part.
std::vector<std::int64_t> window_starts_in_part(
    const std::pair<std::int64_t, std::int64_t>& part, std::int64_t window,
    std::int64_t horizon, std::int64_t stride);

// Mean squared error over all cells plus (eta/2) * sum of squared weight
// matrix entries; biases and norm affines stay unregularized.
Tensor mse_l2_loss(const Tensor& pred, const Tensor& target,
                   const std::vector<Tensor>& weight_matrices, double eta);

// The penalty term alone, as a graph over the weights.
Tensor l2_penalty(const std::vector<Tensor>& weight_matrices, double eta);

// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStop {
public:
    explicit EarlyStop(std::int64_t patience);

    // Feed one validation loss; returns true when training should stop.
    bool update(double valid_loss);
    bool improved_last() const { return improved_last_; }
    double best() const { return best_; }

private:
    std::int64_t patience_;
    std::int64_t since_improve_ = 0;
    double best_;
    bool improved_last_ = false;
};

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, std::vector<Tensor> params,
              double momentum = 0.9);

    void step();  // throws ContractError when a parameter has no gradient
    void zero_grad();
    double learning_rate() const { return lr_; }
    std::int64_t steps_taken() const { return step_count_; }

private:
    OptimizerKind kind_;
    double lr_;
    double momentum_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> slot1_;  // Adam m / SGDM velocity
    std::vector<std::vector<double>> slot2_;  // Adam v
    std::int64_t step_count_ = 0;
};

// Scales all gradients so their global norm stays below max_norm.
// Returns the pre-clip norm.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

// Normalized time-major series plus the window bookkeeping for one fold.
struct TrainingData {
    std::int64_t total_slots = 0;
    std::int64_t channels = 0;
    std::int64_t input_len = 0;
    std::int64_t horizon = 0;
    NormStats stats;
    std::vector<double> normalized;  // total_slots x channels
    FoldSplit split;
    std::vector<std::int64_t> train_starts;
    std::vector<std::int64_t> valid_starts;
    std::vector<std::int64_t> test_starts;  // stride 1; evaluation may subsample

    Tensor encoder_input(std::int64_t start) const;
    Tensor target(std::int64_t start) const;
    // First `rows` target rows only.
    Tensor target_prefix(std::int64_t start, std::int64_t rows) const;
};

TrainingData prepare_training_data(const SpectrumFrame& frame, const ModelConfig& mcfg,
                                   const TrainConfig& tcfg, int fold);

struct EpochStats {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double learning_rate = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::int64_t best_epoch = -1;
    double best_valid = 0.0;
    bool early_stopped = false;
    bool diverged = false;
    std::int64_t train_steps = 0;  // optimizer steps: epochs x batches per epoch
};

using EpochCallback = std::function<void(const TsbModel&, const EpochStats&)>;

// Mini-batch teacher-forced training with early stopping on validation MSE.
// Restores the best-validation parameters into the model before returning;
// a non-finite batch loss aborts with the last finite snapshot.
TrainResult train_model(TsbModel& model, const TrainingData& data,
                        const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

// Teacher-forced normalized MSE over the given window starts.
double teacher_forced_mse(const TsbModel& model, const TrainingData& data,
                          const std::vector<std::int64_t>& starts);

// Normalized MSE of autoregressive predictions over the given windows.
double autoregressive_mse(const TsbModel& model, const TrainingData& data,
                          const std::vector<std::int64_t>& starts);

}  // namespace tsb
