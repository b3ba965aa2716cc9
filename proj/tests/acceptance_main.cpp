// Acceptance suite: one pass/fail line per criterion, non-zero exit on any
// failure. Baseline scores for the learning check are computed first and
// recorded next to the other artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "tsb/checkpoint.hpp"
#include "tsb/gradcheck.hpp"
#include "tsb/kernels.hpp"
#include "tsb/metrics.hpp"
#include "tsb/pipeline.hpp"

using namespace tsb;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
using Clock = std::chrono::steady_clock;

void report(int number, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", number, name,
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ModelConfig toy_model_config() {
    ModelConfig cfg;
    cfg.channels = 2;
    cfg.input_len = 4;
    cfg.horizon = 2;
    cfg.d_model = 8;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.heads = 2;
    cfg.bilstm_layers = 1;
    return cfg;
}

// ---------------------------------------------------------------------------
// criterion 1: autodiff soundness
// ---------------------------------------------------------------------------

bool sweep_registered_ops(double tol, std::string& detail) {
    double worst = 0.0;
    std::string worst_op;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed * 6151);
        Tensor a = Tensor::uniform({2, 3}, rng, -1.5, 1.5, true);
        Tensor b = Tensor::uniform({2, 3}, rng, -1.5, 1.5, true);
        Tensor m = Tensor::uniform({3, 2}, rng, -1.5, 1.5, true);
        Tensor row = Tensor::uniform({1, 3}, rng, -1.5, 1.5, true);
        Tensor gamma = Tensor::uniform({3}, rng, 0.5, 1.5, true);
        Tensor beta = Tensor::uniform({3}, rng, -0.5, 0.5, true);
        Tensor w23 = Tensor::uniform({2, 3}, rng, -1, 1);
        Tensor w22 = Tensor::uniform({2, 2}, rng, -1, 1);
        Tensor w43 = Tensor::uniform({4, 3}, rng, -1, 1);
        Tensor w32 = Tensor::uniform({3, 2}, rng, -1, 1);

        const std::vector<std::pair<const char*, std::function<Tensor()>>> ops = {
            {"matmul", [&] { return sum(mul(matmul(a, m), w22)); }},
            {"transpose", [&] { return sum(mul(transpose(a), w32)); }},
            {"add", [&] { return sum(mul(add(a, b), w23)); }},
            {"sub", [&] { return sum(mul(sub(a, b), w23)); }},
            {"mul", [&] { return sum(mul(mul(a, b), w23)); }},
            {"scale", [&] { return sum(mul(scale(a, 2.3), w23)); }},
            {"neg", [&] { return sum(mul(neg(a), w23)); }},
            {"sigmoid", [&] { return sum(mul(sigmoid(a), w23)); }},
            {"tanh", [&] { return sum(mul(tanh(a), w23)); }},
            {"softmax", [&] { return sum(mul(softmax(a, 1), w23)); }},
            {"layer_norm", [&] { return sum(mul(layer_norm(a, gamma, beta), w23)); }},
            {"concat", [&] { return sum(mul(concat({a, b}, 0), w43)); }},
            {"slice", [&] { return sum(mul(slice(a, 1, 0, 2), w22)); }},
            {"broadcast_to", [&] { return sum(mul(broadcast_to(row, {2, 3}), w23)); }},
            {"sum", [&] { return sum(a); }},
            {"mean", [&] { return mean(a); }},
        };
        const std::vector<std::pair<std::string, Tensor>> leaves = {
            {"a", a}, {"b", b}, {"m", m}, {"row", row}, {"gamma", gamma}, {"beta", beta}};
        for (const auto& [name, f] : ops) {
            const auto r = grad_check(f, leaves, 1e-5, tol);
            if (r.max_rel_dev > worst) {
                worst = r.max_rel_dev;
                worst_op = name;
            }
            if (!r.pass) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "op %s deviation %.2e", name,
                              r.max_rel_dev);
                detail = buf;
                return false;
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst op %s deviation %.2e", worst_op.c_str(),
                  worst);
    detail = buf;
    return true;
}

void criterion_autodiff() {
    const auto t0 = Clock::now();
    std::string detail;
    bool pass = sweep_registered_ops(1e-4, detail);

    if (pass) {
        ModelConfig cfg = toy_model_config();
        TsbModel model(cfg, 2024);
        Rng rng(42);
        Tensor enc = Tensor::uniform({cfg.input_len, cfg.channels}, rng, -1, 1, true);
        Tensor dec = Tensor::uniform({cfg.horizon, cfg.channels}, rng, -1, 1);
        Tensor target = Tensor::uniform({cfg.horizon, cfg.channels}, rng, -1, 1);
        auto leaves = model.named_params();
        leaves.emplace_back("enc_in", enc);
        auto f = [&] {
            Tensor pred = model.forward_teacher_forced(enc, dec);
            return mse_l2_loss(pred, target, model.weight_matrices(), 0.01);
        };
        const auto r = grad_check(f, leaves, 1e-5, 1e-4);
        pass = r.pass;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "full TSB loss deviation %.2e (", r.max_rel_dev);
        detail = buf + detail + ")";
    }
    const double secs = seconds_since(t0);
    if (secs > 120.0) {
        pass = false;
        detail += "; over the 2 minute budget";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "; %.1fs", secs);
    report(1, "autodiff soundness", pass, detail + buf);
}

// ---------------------------------------------------------------------------
// criterion 2: equation fidelity against straight-line transcriptions
// ---------------------------------------------------------------------------

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool lstm_fidelity(Rng& rng, double tol) {
    const std::int64_t h = 4, d = 3;
    for (int rep = 0; rep < 100; ++rep) {
        LstmCellParams params = LstmCellParams::init(h, d, rng);
        for (auto& [name, t] : params.named("p")) {
            Tensor copy = t;
            for (auto& v : copy.leaf_data()) v = rng.uniform(-0.8, 0.8);
        }
        std::vector<double> p(d), h0(h), c0(h);
        for (auto& v : p) v = rng.uniform(-1, 1);
        for (auto& v : h0) v = rng.uniform(-1, 1);
        for (auto& v : c0) v = rng.uniform(-1, 1);
        auto [h_t, c_t] = lstm_cell_step(Tensor::from_data({1, d}, p),
                                         Tensor::from_data({1, h}, h0),
                                         Tensor::from_data({1, h}, c0), params);
        for (std::int64_t r = 0; r < h; ++r) {
            auto dot = [&](const Tensor& w, const std::vector<double>& x, std::int64_t cols) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < cols; ++j)
                    acc += w.data()[static_cast<std::size_t>(r * cols + j)] *
                           x[static_cast<std::size_t>(j)];
                return acc;
            };
            const double f = sig(dot(params.w_f, p, d) + dot(params.u_f, h0, h) +
                                 params.b_f.data()[static_cast<std::size_t>(r)]);
            const double i = sig(dot(params.w_i, p, d) + dot(params.u_i, h0, h) +
                                 params.b_i.data()[static_cast<std::size_t>(r)]);
            const double cc = std::tanh(dot(params.w_c, p, d) + dot(params.u_c, h0, h) +
                                        params.b_c.data()[static_cast<std::size_t>(r)]);
            const double o = sig(dot(params.w_o, p, d) + dot(params.u_o, h0, h) +
                                 params.b_o.data()[static_cast<std::size_t>(r)]);
            const double c = f * c0[static_cast<std::size_t>(r)] + i * cc;
            const double hh = o * std::tanh(c);
            if (std::fabs(c - c_t.data()[static_cast<std::size_t>(r)]) > tol) return false;
            if (std::fabs(hh - h_t.data()[static_cast<std::size_t>(r)]) > tol) return false;
        }
    }
    return true;
}

bool attention_fidelity(Rng& rng, double tol) {
    for (int rep = 0; rep < 100; ++rep) {
        const std::int64_t t_q = 3, t_k = 4, d_k = 5, d_v = 2;
        Tensor q = Tensor::uniform({t_q, d_k}, rng, -2, 2);
        Tensor k = Tensor::uniform({t_k, d_k}, rng, -2, 2);
        Tensor v = Tensor::uniform({t_k, d_v}, rng, -2, 2);
        Tensor out = scaled_dot_product_attention(q, k, v);
        const double scale_f = 1.0 / std::sqrt(static_cast<double>(d_k));
        for (std::int64_t i = 0; i < t_q; ++i) {
            std::vector<double> w(t_k);
            double denom = 0.0;
            for (std::int64_t j = 0; j < t_k; ++j) {
                double dot = 0.0;
                for (std::int64_t pp = 0; pp < d_k; ++pp)
                    dot += q.data()[static_cast<std::size_t>(i * d_k + pp)] *
                           k.data()[static_cast<std::size_t>(j * d_k + pp)];
                w[static_cast<std::size_t>(j)] = std::exp(dot * scale_f);
                denom += w[static_cast<std::size_t>(j)];
            }
            for (std::int64_t p2 = 0; p2 < d_v; ++p2) {
                double acc = 0.0;
                for (std::int64_t j = 0; j < t_k; ++j)
                    acc += w[static_cast<std::size_t>(j)] / denom *
                           v.data()[static_cast<std::size_t>(j * d_v + p2)];
                if (std::fabs(acc - out.data()[static_cast<std::size_t>(i * d_v + p2)]) > tol)
                    return false;
            }
        }
    }
    return true;
}

bool loss_fidelity(Rng& rng, double tol) {
    for (int rep = 0; rep < 100; ++rep) {
        const std::int64_t m = 3, f = 4;
        Tensor pred = Tensor::uniform({m, f}, rng, -2, 2);
        Tensor target = Tensor::uniform({m, f}, rng, -2, 2);
        Tensor w1 = Tensor::uniform({2, 3}, rng, -1, 1, true);
        Tensor w2 = Tensor::uniform({4, 2}, rng, -1, 1, true);
        const double eta = rng.uniform(0.0, 0.3);
        const double got = mse_l2_loss(pred, target, {w1, w2}, eta).item();

        double mse = 0.0;
        for (std::size_t i = 0; i < pred.data().size(); ++i) {
            const double d = pred.data()[i] - target.data()[i];
            mse += d * d;
        }
        mse /= static_cast<double>(m * f);
        double pen = 0.0;
        for (double v : w1.data()) pen += v * v;
        for (double v : w2.data()) pen += v * v;
        const double expected = mse + eta * 0.5 * pen;
        if (std::fabs(got - expected) > tol) return false;
    }
    return true;
}

bool sgd_fidelity(Rng& rng, double tol) {
    for (int rep = 0; rep < 100; ++rep) {
        const std::int64_t n = 6;
        std::vector<double> w0(n), g(n);
        for (auto& v : w0) v = rng.uniform(-2, 2);
        for (auto& v : g) v = rng.uniform(-2, 2);
        const double alpha = rng.uniform(0.001, 0.5);

        Tensor w = Tensor::from_data({n}, w0, true);
        Tensor gc = Tensor::from_data({n}, g);
        Optimizer opt(OptimizerKind::Sgd, alpha, {w});
        backward(sum(mul(w, gc)));  // gradient is exactly g
        opt.step();
        for (std::int64_t i = 0; i < n; ++i) {
            const double expected = w0[static_cast<std::size_t>(i)] -
                                    alpha * g[static_cast<std::size_t>(i)];
            if (std::fabs(w.data()[static_cast<std::size_t>(i)] - expected) > tol)
                return false;
        }
    }
    return true;
}

bool spearman_fidelity(Rng& rng, double tol) {
    for (int rep = 0; rep < 100; ++rep) {
        const std::int64_t m = 2 + rng.pick(10);
        std::vector<double> p(m), t(m);
        for (auto& v : p) v = rng.uniform(-5, 5);
        for (auto& v : t) v = rng.uniform(-5, 5);
        const double got = spearman_kappa(p, t);

        // independent transcription with its own ranking
        auto rank = [](const std::vector<double>& x) {
            std::vector<double> r(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                double less = 0.0, equal = 0.0;
                for (std::size_t j = 0; j < x.size(); ++j) {
                    if (x[j] < x[i]) ++less;
                    if (x[j] == x[i]) ++equal;
                }
                r[i] = less + (equal + 1.0) / 2.0;
            }
            return r;
        };
        const auto rp = rank(p);
        const auto rt = rank(t);
        double d_sq = 0.0;
        for (std::size_t i = 0; i < rp.size(); ++i)
            d_sq += (rp[i] - rt[i]) * (rp[i] - rt[i]);
        const double md = static_cast<double>(m);
        const double expected = 1.0 - 6.0 * d_sq / (md * (md * md - 1.0));
        if (std::fabs(got - expected) > tol) return false;
    }
    return true;
}

void criterion_fidelity() {
    Rng rng(77);
    const double tol = 1e-10;
    std::string failing;
    if (!lstm_fidelity(rng, tol)) failing = "lstm_cell_step";
    else if (!attention_fidelity(rng, tol)) failing = "scaled_dot_product_attention";
    else if (!loss_fidelity(rng, tol)) failing = "mse_l2_loss";
    else if (!sgd_fidelity(rng, tol)) failing = "optimizer_step(sgd)";
    else if (!spearman_fidelity(rng, tol)) failing = "spearman_kappa";
    report(2, "equation fidelity", failing.empty(),
           failing.empty() ? "5 transcriptions, 100 random inputs each, <1e-10"
                           : failing + " diverged from its transcription");
}

// ---------------------------------------------------------------------------
// criterion 3: decoder causality
// ---------------------------------------------------------------------------

void criterion_causality() {
    ModelConfig cfg = toy_model_config();
    TsbModel model(cfg, 31);
    Rng rng(32);
    const std::int64_t m = 6, d = cfg.d_model;
    const BoolMask mask = make_causal_mask(m);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        Tensor q = Tensor::uniform({m, d}, rng, -1, 1);
        const std::int64_t row = rng.pick(m - 1);
        Tensor base = model.decoder_self_attention_sublayer(0, q, mask);
        auto qd = q.data();
        for (std::int64_t r = row + 1; r < m; ++r)
            for (std::int64_t j = 0; j < d; ++j)
                qd[static_cast<std::size_t>(r * d + j)] += rng.uniform(-3, 3);
        Tensor moved =
            model.decoder_self_attention_sublayer(0, Tensor::from_data({m, d}, qd), mask);
        for (std::int64_t r = 0; r <= row; ++r)
            for (std::int64_t j = 0; j < d; ++j) {
                const auto i = static_cast<std::size_t>(r * d + j);
                worst = std::max(worst, std::fabs(base.data()[i] - moved.data()[i]));
            }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max row drift %.2e over 50 cases", worst);
    report(3, "causality of masked self-attention", worst <= 1e-10, buf);
}

// ---------------------------------------------------------------------------
// criterion 4: overfit capacity
// ---------------------------------------------------------------------------

std::vector<double> overfit_run(double& final_loss) {
    ScenarioConfig scfg;
    scfg.channels = 4;
    scfg.slots = 7 * 23;
    scfg.hu_channel_count = 1;
    scfg.seed = 404;
    SpectrumFrame frame = generate_frame(scfg);

    ModelConfig mcfg;
    mcfg.channels = 4;
    mcfg.input_len = 16;
    mcfg.horizon = 4;
    mcfg.d_model = 16;
    mcfg.encoder_layers = 1;
    mcfg.decoder_layers = 1;
    mcfg.heads = 2;
    mcfg.bilstm_layers = 1;
    TrainConfig tcfg;
    tcfg.epochs = 200;
    tcfg.batch_size = 8;
    tcfg.patience = 200;
    tcfg.learning_rate = 0.005;
    tcfg.seed = 8;
    tcfg.prefix_teacher_forcing = false;  // fixed full-window objective
    tcfg.validate_autoregressive = false;

    TsbModel model(mcfg, 21);
    TrainingData data = prepare_training_data(frame, mcfg, tcfg, 0);
    data.train_starts.resize(8);  // the eight fixed samples

    TrainResult r = train_model(model, data, tcfg);
    std::vector<double> losses;
    for (const auto& e : r.history) losses.push_back(e.train_loss);
    final_loss = losses.empty() ? 1e9 : losses.back();
    return losses;
}

void criterion_overfit() {
    const auto t0 = Clock::now();
    double final1 = 0.0, final2 = 0.0;
    const auto run1 = overfit_run(final1);
    const auto run2 = overfit_run(final2);

    bool reached = false;
    for (double l : run1) reached = reached || l < 0.01;
    const bool deterministic = run1 == run2;
    const double secs = seconds_since(t0);
    bool pass = reached && deterministic && secs <= 300.0;

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "final loss %.5f over %zu epochs, %s, %.1fs for two runs", final1,
                  run1.size(), deterministic ? "bit-identical reruns" : "NON-DETERMINISTIC",
                  secs);
    report(4, "overfit capacity", pass, detail);
}

// ---------------------------------------------------------------------------
// criterion 5: learns structure on the sweep scenario
// ---------------------------------------------------------------------------

struct BaselineScores {
    double rmse_db = 0.0;
    double availability = 0.0;
};

BaselineScores persistence_baseline(const SpectrumFrame& frame, const ModelConfig& mcfg,
                                    const std::vector<std::int64_t>& starts,
                                    double lambda) {
    double sq = 0.0;
    std::int64_t cells = 0, avail_ok = 0;
    for (auto s : starts) {
        for (std::int64_t k = 0; k < mcfg.horizon; ++k)
            for (std::int64_t f = 0; f < mcfg.channels; ++f) {
                const double pred = frame.power(f, s + mcfg.input_len - 1);
                const double target = frame.power(f, s + mcfg.input_len + k);
                sq += (pred - target) * (pred - target);
                if ((pred >= lambda) == (target >= lambda)) ++avail_ok;
                ++cells;
            }
    }
    return {std::sqrt(sq / static_cast<double>(cells)),
            static_cast<double>(avail_ok) / static_cast<double>(cells)};
}

// Per-channel AR(1) fit by least squares on the training parts.
BaselineScores ar1_baseline(const SpectrumFrame& frame, const ModelConfig& mcfg,
                            const FoldSplit& split,
                            const std::vector<std::int64_t>& starts, double lambda) {
    const std::int64_t f_n = frame.channels;
    std::vector<double> phi(f_n, 0.0), intercept(f_n, 0.0);
    for (std::int64_t f = 0; f < f_n; ++f) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::int64_t n = 0;
        for (int p : split.train_parts) {
            const auto [b, e] = split.parts[static_cast<std::size_t>(p)];
            for (std::int64_t t = b; t + 1 < e; ++t) {
                const double x = frame.power(f, t), y = frame.power(f, t + 1);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                ++n;
            }
        }
        const double denom = n * sxx - sx * sx;
        phi[static_cast<std::size_t>(f)] = std::fabs(denom) < 1e-12 ? 0.0
                                           : (n * sxy - sx * sy) / denom;
        intercept[static_cast<std::size_t>(f)] =
            (sy - phi[static_cast<std::size_t>(f)] * sx) / static_cast<double>(n);
    }
    double sq = 0.0;
    std::int64_t cells = 0, avail_ok = 0;
    for (auto s : starts) {
        for (std::int64_t f = 0; f < f_n; ++f) {
            double x = frame.power(f, s + mcfg.input_len - 1);
            for (std::int64_t k = 0; k < mcfg.horizon; ++k) {
                x = intercept[static_cast<std::size_t>(f)] +
                    phi[static_cast<std::size_t>(f)] * x;
                const double target = frame.power(f, s + mcfg.input_len + k);
                sq += (x - target) * (x - target);
                if ((x >= lambda) == (target >= lambda)) ++avail_ok;
                ++cells;
            }
        }
    }
    return {std::sqrt(sq / static_cast<double>(cells)),
            static_cast<double>(avail_ok) / static_cast<double>(cells)};
}

// Times one real mini-batch through the full training pipeline (chunked
// accumulation included) plus one autoregressive decode; both feed the
// stride decision against the wall-clock budget.
struct ThroughputEstimate {
    double seconds_per_sample = 0.0;
    double seconds_per_decode = 0.0;
};

ThroughputEstimate measure_throughput(const ModelConfig& mcfg, const TrainConfig& base,
                                      const TrainingData& data) {
    ThroughputEstimate est;
    {
        TsbModel probe(mcfg, 1);
        TrainingData sub = data;
        sub.train_starts.resize(std::min<std::size_t>(sub.train_starts.size(), 32));
        sub.valid_starts.resize(1);
        TrainConfig warm = base;
        warm.epochs = 1;
        warm.validate_autoregressive = false;  // rate excludes validation cost
        const auto t0 = Clock::now();
        train_model(probe, sub, warm);
        est.seconds_per_sample =
            seconds_since(t0) / static_cast<double>(sub.train_starts.size());
    }
    {
        TsbModel probe(mcfg, 1);
        const std::int64_t s = data.valid_starts.front();
        const std::size_t begin = static_cast<std::size_t>(s * data.channels);
        std::vector<double> enc(
            data.normalized.begin() + begin,
            data.normalized.begin() + begin +
                static_cast<std::size_t>(data.input_len * data.channels));
        const auto t0 = Clock::now();
        probe.predict_autoregressive(enc);
        est.seconds_per_decode = seconds_since(t0);
    }
    return est;
}

void criterion_learning(const fs::path& work) {
    const auto t0 = Clock::now();

    ScenarioConfig scfg;
    scfg.channels = 32;
    scfg.slots = 4000;
    scfg.period = 20;
    scfg.mode = InterferenceMode::Sweep;
    scfg.mu_power_min_dbm = -35.0;  // 40 dB over the -90 dBm floor, per scenario
    scfg.mu_power_max_dbm = -35.0;
    scfg.noise_floor_dbm = -90.0;
    scfg.seed = 501;
    SpectrumFrame frame = generate_frame(scfg);

    ModelConfig mcfg;  // defaults: d=64, N=E=3, o=8, L_Bi=2
    mcfg.channels = 32;
    mcfg.input_len = 96;
    mcfg.horizon = 48;
    TrainConfig tcfg;  // defaults: adam, lr 0.001, batch 32, 20 epochs, patience 6
    tcfg.seed = 502;
    tcfg.window_stride = 1;
    tcfg.valid_stride = 48;
    const int fold = 0;
    const std::int64_t eval_stride = 32;

    const FoldSplit split =
        kfold_split(frame.slots, mcfg.input_len, mcfg.horizon, tcfg.k_folds, fold);
    const auto eval_starts = window_starts_in_part(
        split.parts[static_cast<std::size_t>(split.test_part)], mcfg.input_len,
        mcfg.horizon, eval_stride);

    // densest stride whose projected run fits the 30 minute budget on this
    // machine, leaving room for validation, evaluation and slack
    {
        TrainingData probe_data = prepare_training_data(frame, mcfg, tcfg, fold);
        const ThroughputEstimate est = measure_throughput(mcfg, tcfg, probe_data);
        const double decode_lanes =
            std::max(1, std::min(kernels::max_threads(), 2));
        const double valid_per_epoch =
            std::ceil(static_cast<double>(probe_data.valid_starts.size()) / decode_lanes) *
            est.seconds_per_decode;
        const double eval_cost =
            std::ceil(static_cast<double>(eval_starts.size()) / decode_lanes) *
            est.seconds_per_decode;
        const double budget = 1800.0 - seconds_since(t0) - eval_cost - 90.0;
        const double per_epoch_train =
            budget / static_cast<double>(tcfg.epochs) - valid_per_epoch;
        const auto all_windows = static_cast<double>(probe_data.train_starts.size());
        const double target_windows =
            std::max(1.0, per_epoch_train / est.seconds_per_sample);
        tcfg.window_stride = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::ceil(all_windows / target_windows)));
        std::printf("    %.0f ms/sample, %.2f s/decode -> window stride %lld\n",
                    est.seconds_per_sample * 1e3, est.seconds_per_decode,
                    static_cast<long long>(tcfg.window_stride));
        std::fflush(stdout);
    }

    // baselines recorded before the main training run
    const BaselineScores persistence =
        persistence_baseline(frame, mcfg, eval_starts, scfg.threshold_dbm);
    const BaselineScores ar1 =
        ar1_baseline(frame, mcfg, split, eval_starts, scfg.threshold_dbm);
    {
        std::ofstream out(work / "baselines.json");
        json j;
        j["persistence"] = {{"rmse_db", persistence.rmse_db},
                            {"availability_accuracy", persistence.availability}};
        j["ar1"] = {{"rmse_db", ar1.rmse_db},
                    {"availability_accuracy", ar1.availability}};
        j["eval_windows"] = eval_starts.size();
        j["window_stride"] = tcfg.window_stride;
        out << j.dump(2) << "\n";
    }
    std::printf("    baselines: persistence rmse %.3f dB avail %.4f | ar1 rmse %.3f dB avail %.4f\n",
                persistence.rmse_db, persistence.availability, ar1.rmse_db,
                ar1.availability);
    std::fflush(stdout);

    TsbModel model(mcfg, 503);
    TrainingData data = prepare_training_data(frame, mcfg, tcfg, fold);
    TrainResult tr = train_model(model, data, tcfg);
    std::printf("    trained %zu epochs (%lld steps), best valid %.5f\n",
                tr.history.size(), static_cast<long long>(tr.train_steps),
                tr.best_valid);
    for (const auto& e : tr.history)
        std::printf("      epoch %2lld train %.5f valid %.5f (%.0fs)\n",
                    static_cast<long long>(e.epoch), e.train_loss, e.valid_loss,
                    e.wall_seconds);
    std::fflush(stdout);

    MetricsReport report_metrics = evaluate_checkpointed_model(
        model, data.stats, frame, tcfg, fold, eval_stride, nullptr);

    const double secs = seconds_since(t0);
    const bool rmse_ok =
        report_metrics.rmse_db <= 0.7 * persistence.rmse_db;
    const bool avail_ok = report_metrics.availability_accuracy >= 0.9;
    const bool time_ok = secs <= 1800.0;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "tsb rmse %.3f dB vs persistence %.3f dB (%.1f%% lower, need >=30%%), "
                  "availability %.4f (need >=0.9), %.0fs",
                  report_metrics.rmse_db, persistence.rmse_db,
                  100.0 * (1.0 - report_metrics.rmse_db / persistence.rmse_db),
                  report_metrics.availability_accuracy, secs);
    report(5, "learns sweep structure", rmse_ok && avail_ok && time_ok, detail);
}

// ---------------------------------------------------------------------------
// criterion 6: metric fixtures
// ---------------------------------------------------------------------------

void criterion_metric_fixtures() {
    bool pass = true;
    std::string detail;
    const std::vector<double> series{-60, -55, -70};
    if (rmse(series, series) != 0.0) {
        pass = false;
        detail = "rmse(perfect) != 0";
    }
    if (spearman_kappa({1, 2, 3, 4}, {2, 4, 6, 8}) != 1.0) {
        pass = false;
        detail = "kappa(identical) != 1";
    }
    if (spearman_kappa({1, 2, 3, 4}, {8, 6, 4, 2}) != -1.0) {
        pass = false;
        detail = "kappa(reversed) != -1";
    }
    if (std::fabs(spearman_kappa({1, 2, 3}, {1, 3, 2}) - 0.5) > 1e-15) {
        pass = false;
        detail = "kappa(swap) != 0.5";
    }
    if (std::fabs(combine_powers_dbm({-50, -50}) + 46.9897) > 1e-4) {
        pass = false;
        detail = "combine_powers_dbm([-50,-50]) off";
    }
    report(6, "metric fixtures", pass, pass ? "all five fixtures exact" : detail);
}

// ---------------------------------------------------------------------------
// criterion 7: split hygiene
// ---------------------------------------------------------------------------

void criterion_split_hygiene() {
    const std::int64_t total = 4000, window = 96, horizon = 48;
    bool pass = true;
    std::string detail = "5 folds scanned, zero straddling windows";
    for (int fold = 0; fold < 5 && pass; ++fold) {
        FoldSplit s = kfold_split(total, window, horizon, 5, fold);
        // ratios 5:1:1 within one slot
        std::int64_t train_len = 0;
        for (int p : s.train_parts)
            train_len += s.parts[static_cast<std::size_t>(p)].second -
                         s.parts[static_cast<std::size_t>(p)].first;
        const auto [vb, ve] = s.parts[static_cast<std::size_t>(s.valid_part)];
        const auto [tb, te] = s.parts[static_cast<std::size_t>(s.test_part)];
        const std::int64_t valid_len = ve - vb, test_len = te - tb;
        if (std::llabs(train_len - 5 * valid_len) > 5 ||
            std::llabs(valid_len - test_len) > 1) {
            pass = false;
            detail = "part ratios drifted beyond one slot";
            break;
        }
        // exhaustive overlap scan over every admissible window start
        for (std::int64_t st = 0; st + window + horizon <= total; ++st) {
            int containing = -1;
            for (std::size_t p = 0; p < s.parts.size(); ++p)
                if (st >= s.parts[p].first && st + window + horizon <= s.parts[p].second)
                    containing = static_cast<int>(p);
            if (containing < 0) continue;  // straddles a boundary: excluded by design
            // the window generator must place it in exactly that part
            auto starts = window_starts_in_part(
                s.parts[static_cast<std::size_t>(containing)], window, horizon, 1);
            if (std::find(starts.begin(), starts.end(), st) == starts.end()) {
                pass = false;
                detail = "window generator missed an admissible start";
                break;
            }
        }
        // and no generated window crosses another part
        for (std::size_t p = 0; p < s.parts.size() && pass; ++p)
            for (auto st : window_starts_in_part(s.parts[p], window, horizon, 1))
                for (std::size_t q = 0; q < s.parts.size(); ++q)
                    if (q != p && st < s.parts[q].second &&
                        st + window + horizon > s.parts[q].first) {
                        pass = false;
                        detail = "generated window overlaps a second split";
                    }
    }
    report(7, "split hygiene", pass, detail);
}

// ---------------------------------------------------------------------------
// criterion 8: reproducibility
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

RunConfig small_pipeline_config(const fs::path& out) {
    RunConfig cfg;
    cfg.scenario.channels = 8;
    cfg.scenario.slots = 7 * 40;
    cfg.scenario.hu_channel_count = 2;
    cfg.model.channels = 8;
    cfg.model.input_len = 24;
    cfg.model.horizon = 8;
    cfg.model.d_model = 16;
    cfg.model.encoder_layers = 1;
    cfg.model.decoder_layers = 1;
    cfg.model.heads = 2;
    cfg.model.bilstm_layers = 1;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 16;
    cfg.train.valid_stride = 4;
    cfg.eval_stride = 4;
    cfg.seed = 808;
    cfg.paths.out_dir = out.string();
    return cfg;
}

void criterion_reproducibility(const fs::path& work) {
    const fs::path a = work / "repro_a";
    const fs::path b = work / "repro_b";
    bool pass = true;
    std::string detail = "prediction CSVs byte-identical across two full runs";
    for (const auto& dir : {a, b}) {
        RunConfig cfg = small_pipeline_config(dir);
        if (run_command("generate", cfg) != 0 || run_command("train", cfg) != 0 ||
            run_command("predict", cfg) != 0) {
            pass = false;
            detail = "pipeline run failed";
        }
    }
    if (pass) {
        const std::string pa = slurp(a / "prediction.csv");
        const std::string pb = slurp(b / "prediction.csv");
        pass = !pa.empty() && pa == pb;
        if (!pass) detail = "prediction CSVs differ";
    }
    report(8, "reproducibility", pass, detail);
}

// ---------------------------------------------------------------------------
// criterion 9: ablation harness
// ---------------------------------------------------------------------------

void criterion_ablation(const fs::path& work) {
    RunConfig cfg = small_pipeline_config(work / "ablate_base");
    cfg.train.epochs = 1;
    cfg.eval_stride = 8;
    bool pass = true;
    std::string detail;
    try {
        pass = run_command("ablate", cfg) == 0;
        const auto rows = read_ablation_csv(
            (fs::path(cfg.paths.out_dir) / "ablation.csv").string());
        if (rows.size() != 12) {
            pass = false;
            detail = "expected 12 rows, found " + std::to_string(rows.size());
        } else {
            std::set<std::string> axes;
            for (const auto& r : rows) {
                axes.insert(r.axis);
                if (!std::isfinite(r.rmse_db) || r.rmse_db <= 0.0) {
                    pass = false;
                    detail = "non-finite rmse in row " + r.axis + "=" + r.value;
                }
            }
            if (axes != std::set<std::string>{"layers", "heads", "bilstm", "lr"}) {
                pass = false;
                detail = "axis set malformed";
            }
        }
        if (pass && detail.empty())
            detail = "12 cells: layers/heads/bilstm/lr x 3, table well-formed";
    } catch (const std::exception& e) {
        pass = false;
        detail = e.what();
    }
    report(9, "ablation harness", pass, detail);
}

}  // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "tsb_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    std::printf("acceptance suite (artifacts under %s)\n", work.string().c_str());
    criterion_autodiff();
    criterion_fidelity();
    criterion_causality();
    criterion_overfit();
    criterion_learning(work);
    criterion_metric_fixtures();
    criterion_split_hygiene();
    criterion_reproducibility(work);
    criterion_ablation(work);

    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
