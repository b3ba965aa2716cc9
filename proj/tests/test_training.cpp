#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "tsb/gradcheck.hpp"
#include "tsb/specgen.hpp"
#include "tsb/training.hpp"

using namespace tsb;

namespace {

SpectrumFrame small_frame(std::int64_t channels, std::int64_t slots, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.channels = channels;
    cfg.slots = slots;
    cfg.hu_channel_count = channels / 4;
    cfg.seed = seed;
    return generate_frame(cfg);
}

}  // namespace

TEST_CASE("mse fixtures") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(mse_l2_loss(a, a, {}, 0.0).item() == 0.0);

    Tensor b = Tensor::from_data({2, 2}, {3, 4, 5, 6});
    CHECK(mse_l2_loss(b, a, {}, 0.0).item() == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("l2 penalty hand evaluation") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor w = Tensor::full({2, 2}, 1.0, true);
    // 0.1 * 0.5 * 4 = 0.2 on top of the mse
    const double with_pen = mse_l2_loss(a, a, {w}, 0.1).item();
    CHECK(with_pen == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("penalty gradient equals eta times the weight") {
    Rng rng(601);
    Tensor w = Tensor::uniform({3, 3}, rng, -2, 2, true);
    const double eta = 0.37;
    backward(l2_penalty({w}, eta));
    for (std::size_t i = 0; i < w.data().size(); ++i)
        CHECK(w.grad()[i] == doctest::Approx(eta * w.data()[i]).epsilon(1e-12));

    // finite differences on the penalty alone
    auto f = [&] { return l2_penalty({w}, eta); };
    CHECK(grad_check(f, {{"w", w}}, 1e-5, 1e-8).pass);
}

TEST_CASE("sgd step fixture") {
    Tensor w = Tensor::scalar(1.0, true);
    Optimizer opt(OptimizerKind::Sgd, 0.1, {w});
    backward(scale(w, 0.5));  // gradient 0.5
    opt.step();
    CHECK(w.data()[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("sgdm with zero momentum degenerates to sgd") {
    Rng rng(602);
    Tensor w1 = Tensor::uniform({4}, rng, -1, 1, true);
    Tensor w2 = Tensor::from_data({4}, w1.data(), true);
    Tensor g = Tensor::uniform({4}, rng, -1, 1);

    Optimizer sgd(OptimizerKind::Sgd, 0.05, {w1});
    Optimizer sgdm(OptimizerKind::Sgdm, 0.05, {w2}, /*momentum=*/0.0);
    for (int s = 0; s < 3; ++s) {
        backward(sum(mul(w1, g)));
        backward(sum(mul(w2, g)));
        sgd.step();
        sgdm.step();
        sgd.zero_grad();
        sgdm.zero_grad();
    }
    CHECK(w1.data() == w2.data());
}

TEST_CASE("adam first step has learning-rate magnitude") {
    Tensor w = Tensor::scalar(2.0, true);
    Optimizer opt(OptimizerKind::Adam, 0.001, {w});
    backward(scale(w, 0.3));  // gradient 0.3
    opt.step();
    const double update = 2.0 - w.data()[0];
    CHECK(update == doctest::Approx(0.001 * 0.3 / (0.3 + 1e-8)).epsilon(1e-9));
    CHECK(update > 0.0);  // moves against the gradient
}

TEST_CASE("optimizer requires gradients") {
    Tensor w = Tensor::scalar(1.0, true);
    Optimizer opt(OptimizerKind::Sgd, 0.1, {w});
    CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("kfold parts partition the axis") {
    const std::int64_t total = 1003;
    for (int fold = 0; fold < 5; ++fold) {
        FoldSplit s = kfold_split(total, 16, 4, 5, fold);
        CHECK(s.parts.size() == 7);
        std::int64_t covered = 0;
        std::int64_t min_len = total, max_len = 0;
        for (auto [b, e] : s.parts) {
            covered += e - b;
            min_len = std::min(min_len, e - b);
            max_len = std::max(max_len, e - b);
        }
        CHECK(covered == total);
        CHECK(max_len - min_len <= 1);
        CHECK(s.train_parts.size() == 5);
    }
}

TEST_CASE("fold rotation keeps test parts disjoint") {
    std::set<int> test_parts;
    for (int fold = 0; fold < 5; ++fold) {
        FoldSplit s = kfold_split(700, 16, 4, 5, fold);
        CHECK_FALSE(test_parts.count(s.test_part));
        test_parts.insert(s.test_part);
        CHECK(s.valid_part != s.test_part);
    }
}

TEST_CASE("no window overlaps two splits, exhaustively") {
    const std::int64_t total = 451, window = 12, horizon = 3;
    for (int fold = 0; fold < 5; ++fold) {
        FoldSplit s = kfold_split(total, window, horizon, 5, fold);
        for (std::size_t p = 0; p < s.parts.size(); ++p) {
            auto starts = window_starts_in_part(s.parts[p], window, horizon, 1);
            for (auto st : starts) {
                // whole extent inside the owning part
                CHECK(st >= s.parts[p].first);
                CHECK(st + window + horizon <= s.parts[p].second);
                // brute force: no other part intersects [st, st+window+horizon)
                for (std::size_t q = 0; q < s.parts.size(); ++q) {
                    if (q == p) continue;
                    const bool overlap = st < s.parts[q].second &&
                                         st + window + horizon > s.parts[q].first;
                    CHECK_FALSE(overlap);
                }
            }
        }
    }
}

TEST_CASE("too-short series names the minimum length") {
    try {
        kfold_split(50, 16, 4, 5, 0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("140") != std::string::npos);
    }
}

TEST_CASE("zscore fixtures") {
    NormStats stats = compute_norm_stats({5.0, 5.0, 5.0});
    CHECK(stats.stddev == 1.0);  // guard substitutes one
    const auto z = zscore_normalize({5.0, 5.0}, stats);
    CHECK(z == std::vector<double>{0.0, 0.0});

    Rng rng(603);
    std::vector<double> values(257);
    for (auto& v : values) v = rng.uniform(-90, -30);
    NormStats s = compute_norm_stats(values);
    const auto round = denormalize(zscore_normalize(values, s), s);
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(std::fabs(round[i] - values[i]) < 1e-12);

    // normalized training values have zero mean, unit deviation
    const auto normed = zscore_normalize(values, s);
    double mean = 0.0;
    for (double v : normed) mean += v;
    mean /= static_cast<double>(normed.size());
    double var = 0.0;
    for (double v : normed) var += (v - mean) * (v - mean);
    var /= static_cast<double>(normed.size());
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-9);
}

TEST_CASE("early stop triggers after exactly patience non-improving epochs") {
    EarlyStop stop(6);
    CHECK_FALSE(stop.update(1.0));  // improvement
    for (int i = 0; i < 5; ++i) CHECK_FALSE(stop.update(1.0));  // frozen: 5 stale
    CHECK(stop.update(1.0));  // 6th stale epoch stops
}

TEST_CASE("training smoke run is deterministic and records history") {
    SpectrumFrame frame = small_frame(4, 150, 21);
    ModelConfig mcfg;
    mcfg.channels = 4;
    mcfg.input_len = 12;
    mcfg.horizon = 4;
    mcfg.d_model = 8;
    mcfg.encoder_layers = 1;
    mcfg.decoder_layers = 1;
    mcfg.heads = 2;
    mcfg.bilstm_layers = 1;
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 8;
    tcfg.seed = 9;
    tcfg.valid_stride = 2;

    auto run = [&] {
        TsbModel model(mcfg, 77);
        TrainingData data = prepare_training_data(frame, mcfg, tcfg, 0);
        TrainResult r = train_model(model, data, tcfg);
        return std::make_pair(r, model.params().front().data());
    };
    auto [r1, p1] = run();
    auto [r2, p2] = run();
    CHECK(r1.history.size() == 3);
    CHECK(r1.train_steps == r2.train_steps);
    for (std::size_t e = 0; e < r1.history.size(); ++e) {
        CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
        CHECK(r1.history[e].valid_loss == r2.history[e].valid_loss);
    }
    CHECK(p1 == p2);  // bitwise-identical final parameters
}

TEST_CASE("first batch loss equals the hand-composed loss") {
    SpectrumFrame frame = small_frame(4, 150, 22);
    ModelConfig mcfg;
    mcfg.channels = 4;
    mcfg.input_len = 12;
    mcfg.horizon = 4;
    mcfg.d_model = 8;
    mcfg.encoder_layers = 1;
    mcfg.decoder_layers = 1;
    mcfg.heads = 2;
    mcfg.bilstm_layers = 1;
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 1;
    tcfg.l2_coefficient = 0.01;
    tcfg.seed = 5;
    tcfg.window_stride = 1000;  // one window per part -> first batch is sample 0
    tcfg.prefix_teacher_forcing = false;  // the wiring check is full-window

    TsbModel model(mcfg, 33);
    TrainingData data = prepare_training_data(frame, mcfg, tcfg, 0);
    data.train_starts.resize(1);

    double expected = 0.0;
    {
        NoGradGuard ng;
        Tensor enc = data.encoder_input(data.train_starts[0]);
        Tensor tgt = data.target(data.train_starts[0]);
        Tensor dec = TsbModel::make_decoder_input(enc, tgt);
        Tensor pred = model.forward_teacher_forced(enc, dec);
        expected = mse_l2_loss(pred, tgt, model.weight_matrices(),
                               tcfg.l2_coefficient).item();
    }
    TrainResult r = train_model(model, data, tcfg);
    CHECK(r.history[0].train_loss == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("overfit capacity: eight fixed samples") {
    SpectrumFrame frame = small_frame(4, 7 * 23, 23);
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
    tcfg.patience = 200;  // no early exit: this drills capacity
    tcfg.learning_rate = 0.005;
    tcfg.seed = 3;
    tcfg.prefix_teacher_forcing = false;  // fixed objective for monotonicity
    tcfg.validate_autoregressive = false;

    TsbModel model(mcfg, 17);
    TrainingData data = prepare_training_data(frame, mcfg, tcfg, 0);
    data.train_starts.resize(8);

    TrainResult r = train_model(model, data, tcfg);
    double final_loss = r.history.back().train_loss;
    // strictly decreasing over the first three epochs
    CHECK(r.history[0].train_loss > r.history[1].train_loss);
    CHECK(r.history[1].train_loss > r.history[2].train_loss);
    bool reached = false;
    for (const auto& e : r.history) reached = reached || e.train_loss < 0.01;
    INFO("final training loss ", final_loss);
    CHECK(reached);
}

TEST_CASE("gradient clipping bounds the global norm") {
    Rng rng(604);
    Tensor a = Tensor::uniform({8}, rng, -1, 1, true);
    Tensor b = Tensor::uniform({8}, rng, -1, 1, true);
    backward(scale(add(sum(mul(a, a)), sum(mul(b, b))), 50.0));
    const double before = clip_grad_norm({a, b}, 5.0);
    CHECK(before > 5.0);
    double sq = 0.0;
    for (double g : a.grad()) sq += g * g;
    for (double g : b.grad()) sq += g * g;
    CHECK(std::sqrt(sq) == doctest::Approx(5.0).epsilon(1e-12));
}
