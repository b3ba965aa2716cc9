#include "tsb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "tsb/kernels.hpp"

namespace tsb {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Sgdm: return "sgdm";
        case OptimizerKind::Sgd: return "sgd";
    }
    return "adam";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgdm") return OptimizerKind::Sgdm;
    if (s == "sgd") return OptimizerKind::Sgd;
    throw ConfigError("unknown optimizer: " + s);
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be > 0");
    if (l2_coefficient < 0.0) throw ConfigError("train config: l2_coefficient must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (k_folds < 1) throw ConfigError("train config: k_folds must be >= 1");
    if (window_stride < 1 || valid_stride < 1)
        throw ConfigError("train config: strides must be >= 1");
    if (batch_chunks < 1) throw ConfigError("train config: batch_chunks must be >= 1");
}

NormStats compute_norm_stats(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("compute_norm_stats: empty input");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        const double d = v - mean;
        var += d * d;
    }
    var /= static_cast<double>(values.size());
    NormStats s;
    s.mean = mean;
    s.stddev = std::sqrt(var);
    if (s.stddev < 1e-8) s.stddev = 1.0;  // constant-series guard
    return s;
}

std::vector<double> zscore_normalize(const std::vector<double>& values,
                                     const NormStats& stats) {
    std::vector<double> out(values.size());
    const double inv = 1.0 / stats.stddev;
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = (values[i] - stats.mean) * inv;
    return out;
}

std::vector<double> denormalize(const std::vector<double>& values,
                                const NormStats& stats) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = values[i] * stats.stddev + stats.mean;
    return out;
}

FoldSplit kfold_split(std::int64_t total_slots, std::int64_t window,
                      std::int64_t horizon, int k_folds, int fold) {
    const int n_parts = k_folds + 2;
    if (fold < 0 || fold >= k_folds)
        throw ConfigError("kfold_split: fold " + std::to_string(fold) +
                          " outside [0," + std::to_string(k_folds) + ")");
    const std::int64_t min_len = static_cast<std::int64_t>(n_parts) * (window + horizon);
    if (total_slots < min_len)
        throw ConfigError("kfold_split: series of " + std::to_string(total_slots) +
                          " slots too short; need at least " + std::to_string(min_len) +
                          " for window " + std::to_string(window) + " + horizon " +
                          std::to_string(horizon));

    FoldSplit s;
    const std::int64_t base = total_slots / n_parts;
    const std::int64_t extra = total_slots % n_parts;
    std::int64_t begin = 0;
    for (int p = 0; p < n_parts; ++p) {
        const std::int64_t len = base + (p < extra ? 1 : 0);
        s.parts.emplace_back(begin, begin + len);
        begin += len;
    }
    s.valid_part = (k_folds + fold) % n_parts;
    s.test_part = (k_folds + 1 + fold) % n_parts;
    for (int p = 0; p < n_parts; ++p)
        if (p != s.valid_part && p != s.test_part) s.train_parts.push_back(p);
    return s;
}

FoldSplit kfold_split(const SpectrumFrame& frame, std::int64_t window,
                      std::int64_t horizon, int k_folds, int fold) {
    return kfold_split(frame.slots, window, horizon, k_folds, fold);
}

std::vector<std::int64_t> window_starts_in_part(
    const std::pair<std::int64_t, std::int64_t>& part, std::int64_t window,
    std::int64_t horizon, std::int64_t stride) {
    std::vector<std::int64_t> starts;
    const std::int64_t last = part.second - (window + horizon);
    for (std::int64_t s = part.first; s <= last; s += stride) starts.push_back(s);
    return starts;
}

Tensor l2_penalty(const std::vector<Tensor>& weight_matrices, double eta) {
    if (weight_matrices.empty() || eta == 0.0) return Tensor::scalar(0.0);
    Tensor acc = sum(mul(weight_matrices[0], weight_matrices[0]));
    for (std::size_t i = 1; i < weight_matrices.size(); ++i)
        acc = add(acc, sum(mul(weight_matrices[i], weight_matrices[i])));
    return scale(acc, 0.5 * eta);
}

Tensor mse_l2_loss(const Tensor& pred, const Tensor& target,
                   const std::vector<Tensor>& weight_matrices, double eta) {
    if (pred.shape() != target.shape())
        throw DimensionError("mse_l2_loss: shape mismatch " + shape_str(pred.shape()) +
                             " vs " + shape_str(target.shape()));
    Tensor diff = sub(pred, target);
    Tensor loss = mean(mul(diff, diff));
    if (eta > 0.0) loss = add(loss, l2_penalty(weight_matrices, eta));
    return loss;
}

EarlyStop::EarlyStop(std::int64_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
    if (patience_ < 1) throw ConfigError("early stop: patience must be >= 1");
}

bool EarlyStop::update(double valid_loss) {
    if (valid_loss < best_) {
        best_ = valid_loss;
        since_improve_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++since_improve_;
    return since_improve_ >= patience_;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate,
                     std::vector<Tensor> params, double momentum)
    : kind_(kind), lr_(learning_rate), momentum_(momentum), params_(std::move(params)) {
    if (lr_ <= 0.0) throw ConfigError("optimizer: learning rate must be > 0");
    slot1_.resize(params_.size());
    slot2_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto n = static_cast<std::size_t>(params_[i].numel());
        if (kind_ != OptimizerKind::Sgd) slot1_[i].assign(n, 0.0);
        if (kind_ == OptimizerKind::Adam) slot2_[i].assign(n, 0.0);
    }
}

void Optimizer::step() {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    ++step_count_;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        const auto& g = p.grad();
        if (g.empty())
            throw ContractError("optimizer: parameter " + std::to_string(i) +
                                " has no gradient; run backward first");
        auto& w = p.leaf_data();
        switch (kind_) {
            case OptimizerKind::Sgd:
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr_ * g[j];
                break;
            case OptimizerKind::Sgdm:
                for (std::size_t j = 0; j < w.size(); ++j) {
                    slot1_[i][j] = momentum_ * slot1_[i][j] + g[j];
                    w[j] -= lr_ * slot1_[i][j];
                }
                break;
            case OptimizerKind::Adam:
                for (std::size_t j = 0; j < w.size(); ++j) {
                    slot1_[i][j] = kBeta1 * slot1_[i][j] + (1.0 - kBeta1) * g[j];
                    slot2_[i][j] = kBeta2 * slot2_[i][j] + (1.0 - kBeta2) * g[j] * g[j];
                    const double m_hat = slot1_[i][j] / bias1;
                    const double v_hat = slot2_[i][j] / bias2;
                    w[j] -= lr_ * m_hat / (std::sqrt(v_hat) + kEps);
                }
                break;
        }
    }
}

void Optimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (const auto& p : params) {
            Tensor copy = p;
            for (double& v : copy.leaf_grad()) v *= factor;
        }
    }
    return norm;
}

Tensor TrainingData::encoder_input(std::int64_t start) const {
    const std::size_t begin = static_cast<std::size_t>(start * channels);
    std::vector<double> v(normalized.begin() + begin,
                          normalized.begin() + begin +
                              static_cast<std::size_t>(input_len * channels));
    return Tensor::from_data({input_len, channels}, std::move(v));
}

Tensor TrainingData::target(std::int64_t start) const {
    return target_prefix(start, horizon);
}

Tensor TrainingData::target_prefix(std::int64_t start, std::int64_t rows) const {
    const std::size_t begin = static_cast<std::size_t>((start + input_len) * channels);
    std::vector<double> v(normalized.begin() + begin,
                          normalized.begin() + begin +
                              static_cast<std::size_t>(rows * channels));
    return Tensor::from_data({rows, channels}, std::move(v));
}

TrainingData prepare_training_data(const SpectrumFrame& frame, const ModelConfig& mcfg,
                                   const TrainConfig& tcfg, int fold) {
    tcfg.validate();
    mcfg.validate();
    if (frame.channels != mcfg.channels)
        throw ConfigError("training data: frame has " + std::to_string(frame.channels) +
                          " channels, model expects " + std::to_string(mcfg.channels));

    TrainingData d;
    d.total_slots = frame.slots;
    d.channels = frame.channels;
    d.input_len = mcfg.input_len;
    d.horizon = mcfg.horizon;
    d.split = kfold_split(frame.slots, mcfg.input_len, mcfg.horizon, tcfg.k_folds, fold);

    // normalization statistics from the training parts only
    std::vector<double> train_values;
    for (int p : d.split.train_parts) {
        const auto [begin, end] = d.split.parts[static_cast<std::size_t>(p)];
        for (std::int64_t f = 0; f < frame.channels; ++f)
            for (std::int64_t t = begin; t < end; ++t)
                train_values.push_back(frame.power(f, t));
    }
    d.stats = compute_norm_stats(train_values);

    // time-major normalized series
    d.normalized.resize(static_cast<std::size_t>(frame.slots * frame.channels));
    const double inv = 1.0 / d.stats.stddev;
    for (std::int64_t t = 0; t < frame.slots; ++t)
        for (std::int64_t f = 0; f < frame.channels; ++f)
            d.normalized[static_cast<std::size_t>(t * frame.channels + f)] =
                (frame.power(f, t) - d.stats.mean) * inv;

    for (int p : d.split.train_parts) {
        auto starts = window_starts_in_part(d.split.parts[static_cast<std::size_t>(p)],
                                            d.input_len, d.horizon, tcfg.window_stride);
        d.train_starts.insert(d.train_starts.end(), starts.begin(), starts.end());
    }
    d.valid_starts = window_starts_in_part(
        d.split.parts[static_cast<std::size_t>(d.split.valid_part)], d.input_len,
        d.horizon, tcfg.valid_stride);
    d.test_starts = window_starts_in_part(
        d.split.parts[static_cast<std::size_t>(d.split.test_part)], d.input_len,
        d.horizon, 1);
    return d;
}

double teacher_forced_mse(const TsbModel& model, const TrainingData& data,
                          const std::vector<std::int64_t>& starts) {
    if (starts.empty()) throw ContractError("teacher_forced_mse: no windows");
    NoGradGuard no_grad;
    double total = 0.0;
    for (auto s : starts) {
        Tensor enc = data.encoder_input(s);
        Tensor tgt = data.target(s);
        Tensor dec_in = TsbModel::make_decoder_input(enc, tgt);
        Tensor pred = model.forward_teacher_forced(enc, dec_in);
        Tensor diff = sub(pred, tgt);
        total += mean(mul(diff, diff)).item();
    }
    return total / static_cast<double>(starts.size());
}

double autoregressive_mse(const TsbModel& model, const TrainingData& data,
                          const std::vector<std::int64_t>& starts) {
    if (starts.empty()) throw ContractError("autoregressive_mse: no windows");
    // windows decode independently; per-window scores merge in index order
    const std::int64_t n = static_cast<std::int64_t>(starts.size());
    std::vector<double> window_mse(starts.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (kernels::max_threads() > 1 && n > 1)
#endif
    for (std::int64_t w = 0; w < n; ++w) {
        const std::int64_t s = starts[static_cast<std::size_t>(w)];
        const std::size_t begin = static_cast<std::size_t>(s * data.channels);
        const std::vector<double> enc(
            data.normalized.begin() + begin,
            data.normalized.begin() + begin +
                static_cast<std::size_t>(data.input_len * data.channels));
        const std::vector<double> pred = model.predict_autoregressive(enc);
        const std::size_t tbegin =
            begin + static_cast<std::size_t>(data.input_len * data.channels);
        double sq = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - data.normalized[tbegin + i];
            sq += d * d;
        }
        window_mse[static_cast<std::size_t>(w)] = sq / static_cast<double>(pred.size());
    }
    double total = 0.0;
    for (double v : window_mse) total += v;
    return total / static_cast<double>(starts.size());
}

namespace {

std::vector<std::vector<double>> snapshot_params(const TsbModel& model) {
    std::vector<std::vector<double>> out;
    for (auto& [name, t] : model.named_params()) out.push_back(t.data());
    return out;
}

void restore_params(TsbModel& model, const std::vector<std::vector<double>>& snap) {
    auto named = model.named_params();
    for (std::size_t i = 0; i < named.size(); ++i) {
        Tensor t = named[i].second;
        t.leaf_data() = snap[i];
    }
}

}  // namespace

namespace {

// One sample's forward, loss and backward into whichever model's parameters
// the caller hands over (the master or a gradient-accumulation clone).
double sample_pass(const TsbModel& model, const TrainingData& data,
                   std::int64_t start, std::int64_t rows, bool terminal_only,
                   double loss_scale) {
    Tensor enc = data.encoder_input(start);
    Tensor tgt = data.target_prefix(start, rows);
    Tensor dec_in = TsbModel::make_decoder_input(enc, tgt);
    Tensor pred = model.forward_teacher_forced(enc, dec_in);
    if (terminal_only && rows > 1) {
        // leak-free position only
        pred = slice(pred, 0, rows - 1, rows);
        tgt = slice(tgt, 0, rows - 1, rows);
    }
    Tensor diff = sub(pred, tgt);
    Tensor sample_loss = mean(mul(diff, diff));
    const double value = sample_loss.item();
    backward(scale(sample_loss, loss_scale));
    return value;
}

}  // namespace

TrainResult train_model(TsbModel& model, const TrainingData& data,
                        const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.train_starts.empty())
        throw ConfigError("train_model: no training windows available");

    TrainResult result;
    Optimizer opt(cfg.optimizer, cfg.learning_rate, model.params());
    const std::vector<Tensor> params = model.params();
    const std::vector<Tensor> weights = model.weight_matrices();

    // gradient-accumulation clones; chunk 0 runs on the master model
    const int max_chunks = static_cast<int>(
        std::min<std::int64_t>(cfg.batch_chunks, cfg.batch_size));
    std::vector<TsbModel> clones;
    std::vector<std::vector<Tensor>> clone_params;
    for (int c = 1; c < max_chunks; ++c) {
        clones.emplace_back(model.config(), 0);
        clone_params.push_back(clones.back().params());
    }

    Rng shuffle_rng(derive_stream(cfg.seed, 0x736875 /* "shu" */));
    Rng prefix_rng(derive_stream(cfg.seed, 0x707266 /* "prf" */));
    auto best = snapshot_params(model);
    double best_valid = std::numeric_limits<double>::infinity();
    std::int64_t best_epoch = -1;
    EarlyStop stopper(cfg.patience);

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::int64_t> starts = data.train_starts;
        shuffle_rng.shuffle(starts);

        double loss_sum = 0.0;
        std::int64_t n_batches = 0;
        bool finite = true;
        for (std::size_t pos = 0; pos < starts.size() && finite;
             pos += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(starts.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            const std::int64_t n = static_cast<std::int64_t>(end - pos);
            const double inv_b = 1.0 / static_cast<double>(n);
            opt.zero_grad();

            // prefix draws stay a single serial stream regardless of chunking
            std::vector<std::int64_t> rows(static_cast<std::size_t>(n), data.horizon);
            if (cfg.prefix_teacher_forcing)
                for (auto& r : rows) r = 1 + prefix_rng.pick(data.horizon);

            const int chunks = static_cast<int>(std::min<std::int64_t>(max_chunks, n));
            for (int c = 1; c < chunks; ++c) {
                auto& cp = clone_params[static_cast<std::size_t>(c - 1)];
                for (std::size_t p = 0; p < cp.size(); ++p) {
                    Tensor dst = cp[p];
                    dst.leaf_data() = params[p].data();
                    dst.zero_grad();
                }
            }

            // contiguous chunk c covers [c*base + min(c,extra), ...)
            const std::int64_t base = n / chunks;
            const std::int64_t extra = n % chunks;
            auto chunk_begin = [&](int c) {
                return static_cast<std::int64_t>(c) * base +
                       std::min<std::int64_t>(c, extra);
            };

            std::vector<double> sample_mse(static_cast<std::size_t>(n), 0.0);
#ifdef _OPENMP
            const int team = std::min(chunks, kernels::max_threads());
#pragma omp parallel for schedule(static, 1) num_threads(team) if (team > 1)
#endif
            for (int c = 0; c < chunks; ++c) {
                const TsbModel& worker =
                    c == 0 ? model : clones[static_cast<std::size_t>(c - 1)];
                const std::int64_t cb = chunk_begin(c);
                const std::int64_t ce = chunk_begin(c + 1);
                for (std::int64_t i = cb; i < ce; ++i) {
                    const std::size_t idx = static_cast<std::size_t>(i);
                    sample_mse[idx] = sample_pass(
                        worker, data, starts[pos + idx], rows[idx],
                        cfg.prefix_teacher_forcing, inv_b);
                }
            }

            // merge clone gradients into the master, chunk-ascending
            for (int c = 1; c < chunks; ++c) {
                for (std::size_t p = 0; p < params.size(); ++p) {
                    const auto& src =
                        clone_params[static_cast<std::size_t>(c - 1)][p].grad();
                    if (src.empty()) continue;
                    Tensor dst = params[p];
                    auto& acc = dst.leaf_grad();
                    if (acc.empty()) acc.assign(src.size(), 0.0);
                    for (std::size_t j = 0; j < src.size(); ++j) acc[j] += src[j];
                }
            }

            double batch_mse = 0.0;
            for (double v : sample_mse) batch_mse += v;
            double batch_loss = batch_mse * inv_b;
            if (cfg.l2_coefficient > 0.0) {
                Tensor pen = l2_penalty(weights, cfg.l2_coefficient);
                batch_loss += pen.item();
                backward(pen);
            }
            if (!std::isfinite(batch_loss)) {
                finite = false;
                break;
            }
            if (cfg.grad_clip_norm > 0.0) clip_grad_norm(params, cfg.grad_clip_norm);
            opt.step();
            ++result.train_steps;
            loss_sum += batch_loss;
            ++n_batches;
        }
        if (!finite) {
            restore_params(model, best);
            result.diverged = true;
            break;
        }

        const double train_loss = loss_sum / static_cast<double>(n_batches);
        const double valid_loss =
            cfg.validate_autoregressive
                ? autoregressive_mse(model, data, data.valid_starts)
                : teacher_forced_mse(model, data, data.valid_starts);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(
            {epoch, train_loss, valid_loss, cfg.learning_rate, wall});
        if (on_epoch) on_epoch(model, result.history.back());

        if (!std::isfinite(valid_loss)) {
            restore_params(model, best);
            result.diverged = true;
            break;
        }
        const bool stop = stopper.update(valid_loss);
        if (stopper.improved_last()) {
            best_valid = valid_loss;
            best_epoch = epoch;
            best = snapshot_params(model);
        }
        if (stop) {
            result.early_stopped = true;
            break;
        }
    }

    restore_params(model, best);
    result.best_epoch = best_epoch;
    result.best_valid = best_valid;
    return result;
}

}  // namespace tsb
