#include "tsb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsb {

double rmse(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty())
        throw DimensionError("rmse: size mismatch or empty input");
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(pred.size()));
}

AccuracyPair accuracy_metrics(const std::vector<double>& pred,
                              const std::vector<double>& target,
                              const NormStats& stats, double lambda) {
    if (pred.size() != target.size() || pred.empty())
        throw DimensionError("accuracy_metrics: size mismatch or empty input");
    std::int64_t norm_ok = 0, avail_ok = 0;
    const double inv = 1.0 / stats.stddev;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double err = (pred[i] - target[i]) * inv;
        if (std::fabs(err) <= 0.5) ++norm_ok;
        const bool p_occ = pred[i] >= lambda;
        const bool t_occ = target[i] >= lambda;
        if (p_occ == t_occ) ++avail_ok;
    }
    AccuracyPair a;
    a.norm_error_accuracy = static_cast<double>(norm_ok) / static_cast<double>(pred.size());
    a.availability_accuracy =
        static_cast<double>(avail_ok) / static_cast<double>(pred.size());
    return a;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman_kappa(const std::vector<double>& pred,
                      const std::vector<double>& target) {
    if (pred.size() != target.size())
        throw DimensionError("spearman_kappa: size mismatch");
    const std::int64_t m = static_cast<std::int64_t>(pred.size());
    if (m < 2) throw ContractError("spearman_kappa: need at least 2 samples");
    const std::vector<double> rp = average_ranks(pred);
    const std::vector<double> rt = average_ranks(target);
    double d_sq = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = rp[k] - rt[k];
        d_sq += d * d;
    }
    const double md = static_cast<double>(m);
    return 1.0 - 6.0 * d_sq / (md * (md * md - 1.0));
}

MetricsAccumulator::MetricsAccumulator(std::int64_t horizon, std::int64_t channels,
                                       NormStats stats, double lambda)
    : horizon_(horizon), channels_(channels), stats_(stats), lambda_(lambda),
      kappa_sum_(static_cast<std::size_t>(channels), 0.0) {
    if (horizon_ < 2)
        throw ContractError("metrics: horizon must be >= 2 for rank correlation");
}

void MetricsAccumulator::add_window(const std::vector<double>& pred_dbm,
                                    const std::vector<double>& target_dbm) {
    const auto expected = static_cast<std::size_t>(horizon_ * channels_);
    if (pred_dbm.size() != expected || target_dbm.size() != expected)
        throw DimensionError("metrics: window size mismatch");
    const double inv = 1.0 / stats_.stddev;
    for (std::size_t i = 0; i < expected; ++i) {
        const double theta = pred_dbm[i] - target_dbm[i];
        sq_sum_ += theta * theta;
        theta_sum_ += theta;
        theta_max_abs_ = std::max(theta_max_abs_, std::fabs(theta));
        if (std::fabs(theta * inv) <= 0.5) ++norm_ok_;
        if ((pred_dbm[i] >= lambda_) == (target_dbm[i] >= lambda_)) ++avail_ok_;
    }
    cells_ += horizon_ * channels_;

    std::vector<double> p(static_cast<std::size_t>(horizon_));
    std::vector<double> t(static_cast<std::size_t>(horizon_));
    for (std::int64_t f = 0; f < channels_; ++f) {
        for (std::int64_t k = 0; k < horizon_; ++k) {
            p[static_cast<std::size_t>(k)] =
                pred_dbm[static_cast<std::size_t>(k * channels_ + f)];
            t[static_cast<std::size_t>(k)] =
                target_dbm[static_cast<std::size_t>(k * channels_ + f)];
        }
        kappa_sum_[static_cast<std::size_t>(f)] += spearman_kappa(p, t);
    }
    ++windows_;
}

MetricsReport MetricsAccumulator::finalize() const {
    if (windows_ == 0) throw ContractError("metrics: no windows accumulated");
    MetricsReport r;
    r.horizon = horizon_;
    r.windows_evaluated = windows_;
    r.rmse_db = std::sqrt(sq_sum_ / static_cast<double>(cells_));
    r.norm_error_accuracy = static_cast<double>(norm_ok_) / static_cast<double>(cells_);
    r.availability_accuracy =
        static_cast<double>(avail_ok_) / static_cast<double>(cells_);
    r.theta_mean = theta_sum_ / static_cast<double>(cells_);
    r.theta_max_abs = theta_max_abs_;
    r.spearman_per_channel.resize(static_cast<std::size_t>(channels_));
    double k_total = 0.0;
    for (std::int64_t f = 0; f < channels_; ++f) {
        const double k = kappa_sum_[static_cast<std::size_t>(f)] /
                         static_cast<double>(windows_);
        r.spearman_per_channel[static_cast<std::size_t>(f)] = k;
        k_total += k;
    }
    r.spearman_mean = k_total / static_cast<double>(channels_);
    return r;
}

}  // namespace tsb
