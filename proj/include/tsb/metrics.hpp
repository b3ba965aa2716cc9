#pragma once

#include <cstdint>
#include <vector>

#include "tsb/training.hpp"

namespace tsb {

struct MetricsReport {
    double rmse_db = 0.0;
    double norm_error_accuracy = 0.0;     // |normalized error| <= 0.5
    double availability_accuracy = 0.0;   // hard decisions agree
    std::vector<double> spearman_per_channel;
    double spearman_mean = 0.0;
    std::int64_t horizon = 0;
    double theta_mean = 0.0;              // mean of pred - target, dBm
    double theta_max_abs = 0.0;
    std::int64_t windows_evaluated = 0;
};

// Root mean squared error over all cells; inputs are de-normalized dBm.
double rmse(const std::vector<double>& pred, const std::vector<double>& target);

struct AccuracyPair {
    double norm_error_accuracy = 0.0;
    double availability_accuracy = 0.0;
};

// Fraction of cells whose normalized error stays within 0.5, and fraction
// whose hard availability decision matches. Inputs are dBm.
AccuracyPair accuracy_metrics(const std::vector<double>& pred,
                              const std::vector<double>& target,
                              const NormStats& stats, double lambda);

// Rank correlation 1 - 6*sum(d^2) / (M(M^2-1)); ties get average ranks.
double spearman_kappa(const std::vector<double>& pred,
                      const std::vector<double>& target);

// Average ranks (1-based) with ties averaged.
std::vector<double> average_ranks(const std::vector<double>& values);

// Accumulates per-window metrics over M x F prediction/target pairs
// (row-major, dBm) and finalizes pooled scores.
class MetricsAccumulator {
public:
    MetricsAccumulator(std::int64_t horizon, std::int64_t channels, NormStats stats,
                       double lambda);

    void add_window(const std::vector<double>& pred_dbm,
                    const std::vector<double>& target_dbm);
    MetricsReport finalize() const;

private:
    std::int64_t horizon_;
    std::int64_t channels_;
    NormStats stats_;
    double lambda_;
    std::int64_t windows_ = 0;
    double sq_sum_ = 0.0;
    std::int64_t cells_ = 0;
    std::int64_t norm_ok_ = 0;
    std::int64_t avail_ok_ = 0;
    double theta_sum_ = 0.0;
    double theta_max_abs_ = 0.0;
    std::vector<double> kappa_sum_;  // per channel
};

}  // namespace tsb
