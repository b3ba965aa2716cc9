#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsb/gradcheck.hpp"
#include "tsb/model.hpp"
#include "tsb/training.hpp"

using namespace tsb;

namespace {

ModelConfig toy_config() {
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

void zero_params_with_prefix(const TsbModel& model, const std::string& prefix) {
    for (auto& [name, t] : model.named_params()) {
        if (name.rfind(prefix, 0) != 0) continue;
        Tensor copy = t;
        std::fill(copy.leaf_data().begin(), copy.leaf_data().end(), 0.0);
    }
}

}  // namespace

TEST_CASE("positional encoding fixtures") {
    Tensor pe = positional_encoding(3, 4);
    // position 0: even dims 0, odd dims 1
    CHECK(pe.data()[0] == 0.0);
    CHECK(pe.data()[1] == 1.0);
    CHECK(pe.data()[2] == 0.0);
    CHECK(pe.data()[3] == 1.0);
    // position 1, first pair: (sin 1, cos 1)
    CHECK(pe.data()[4] == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(pe.data()[5] == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
}

TEST_CASE("embedding output shape for any length") {
    TsbModel model(toy_config(), 1);
    Rng rng(401);
    for (std::int64_t len : {1, 3, 9}) {
        Tensor x = Tensor::uniform({len, 2}, rng, -1, 1);
        CHECK(model.embed(x).shape() == Shape{len, 8});
    }
}

TEST_CASE("encoder layer preserves shape") {
    TsbModel model(toy_config(), 2);
    Rng rng(402);
    Tensor x = Tensor::uniform({4, 8}, rng, -1, 1);
    CHECK(model.encoder_layer_forward(0, x).shape() == Shape{4, 8});
}

TEST_CASE("zeroed sublayers reduce the encoder layer to two norms") {
    ModelConfig cfg = toy_config();
    cfg.d_model = 4;
    TsbModel model(cfg, 3);
    zero_params_with_prefix(model, "enc0.attn");
    zero_params_with_prefix(model, "enc0.stack");

    Tensor x = Tensor::from_data({2, 4}, {0.3, -1.2, 0.9, 2.0, -0.4, 0.1, 1.4, -2.2});
    Tensor out = model.encoder_layer_forward(0, x);

    Tensor gamma = Tensor::full({4}, 1.0);
    Tensor beta = Tensor::zeros({4});
    Tensor expected = layer_norm(layer_norm(x, gamma, beta), gamma, beta);
    for (std::size_t i = 0; i < out.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
}

TEST_CASE("default layer counts follow the base configuration") {
    ModelConfig cfg;
    CHECK(cfg.encoder_layers == 3);
    CHECK(cfg.decoder_layers == 3);
    CHECK(cfg.heads == 8);
    CHECK(cfg.bilstm_layers == 2);
}

TEST_CASE("masked self-attention sublayer ignores later decoder rows") {
    TsbModel model(toy_config(), 4);
    Rng rng(403);
    const std::int64_t m = 5, d = 8;
    Tensor q = Tensor::uniform({m, d}, rng, -1, 1);
    BoolMask mask = make_causal_mask(m);
    Tensor base = model.decoder_self_attention_sublayer(0, q, mask);

    for (int rep = 0; rep < 10; ++rep) {
        const std::int64_t row = 2;  // perturb rows > row
        auto qd = q.data();
        for (std::int64_t r = row + 1; r < m; ++r)
            for (std::int64_t j = 0; j < d; ++j)
                qd[static_cast<std::size_t>(r * d + j)] += rng.uniform(-2, 2);
        Tensor shifted =
            model.decoder_self_attention_sublayer(0, Tensor::from_data({m, d}, qd), mask);
        for (std::int64_t r = 0; r <= row; ++r)
            for (std::int64_t j = 0; j < d; ++j) {
                const auto i = static_cast<std::size_t>(r * d + j);
                CHECK(std::fabs(base.data()[i] - shifted.data()[i]) <= 1e-10);
            }
    }
}

TEST_CASE("teacher-forced forward shape and determinism") {
    TsbModel model(toy_config(), 5);
    Rng rng(404);
    Tensor enc = Tensor::uniform({4, 2}, rng, -1, 1);
    Tensor dec = Tensor::uniform({2, 2}, rng, -1, 1);
    Tensor out1 = model.forward_teacher_forced(enc, dec);
    Tensor out2 = model.forward_teacher_forced(enc, dec);
    CHECK(out1.shape() == Shape{2, 2});
    CHECK(out1.data() == out2.data());  // bitwise
}

TEST_CASE("decoder input starts from the last encoder row") {
    Tensor enc = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor tgt = Tensor::from_data({2, 2}, {7, 8, 9, 10});
    Tensor dec = TsbModel::make_decoder_input(enc, tgt);
    CHECK(dec.data() == std::vector<double>{5, 6, 7, 8});
}

TEST_CASE("parameter count equals the closed form") {
    for (auto cfg : {toy_config(), ModelConfig{}}) {
        TsbModel model(cfg, 6);
        CHECK(model.param_count() == TsbModel::expected_param_count(cfg));
    }
    // closed form spot check on the toy: d=8, F=2, L=1
    // embed 2*8+8=24; attn 4*64=256; cell 3*64+16=208; stack 416;
    // enc 256+416+32=704; dec 512+416+48=976; final 16; head 8*2+2=18
    CHECK(TsbModel::expected_param_count(toy_config()) == 24 + 704 + 976 + 16 + 18);
}

TEST_CASE("positional encoding is wired in: shifting the window moves the output") {
    ModelConfig cfg = toy_config();
    TsbModel model(cfg, 7);
    Rng rng(405);
    // same rows, shifted one position: with PE the encodings differ
    std::vector<double> rows(static_cast<std::size_t>(5 * 2));
    for (auto& v : rows) v = rng.uniform(-1, 1);
    Tensor w1 = Tensor::from_data({4, 2}, std::vector<double>(rows.begin(), rows.begin() + 8));
    Tensor w2 = Tensor::from_data({4, 2}, std::vector<double>(rows.begin() + 2, rows.begin() + 10));
    Tensor e1 = model.encode(w1);
    Tensor e2 = model.encode(w2);
    // row 1 of w1 equals row 0 of w2; their encodings must differ
    double max_diff = 0.0;
    for (std::int64_t j = 0; j < cfg.d_model; ++j)
        max_diff = std::max(max_diff,
                            std::fabs(e1.data()[static_cast<std::size_t>(8 + j)] -
                                      e2.data()[static_cast<std::size_t>(j)]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("full toy model gradient check") {
    ModelConfig cfg = toy_config();
    TsbModel model(cfg, 8);
    Rng rng(406);
    Tensor enc = Tensor::uniform({cfg.input_len, cfg.channels}, rng, -1, 1, true);
    Tensor dec = Tensor::uniform({cfg.horizon, cfg.channels}, rng, -1, 1);
    Tensor target = Tensor::uniform({cfg.horizon, cfg.channels}, rng, -1, 1);

    auto leaves = model.named_params();
    leaves.emplace_back("enc_in", enc);

    auto f = [&] {
        Tensor pred = model.forward_teacher_forced(enc, dec);
        Tensor diff = sub(pred, target);
        return mean(mul(diff, diff));
    };
    auto report = grad_check(f, leaves, 1e-5, 1e-4);
    INFO("worst ", report.worst_leaf, " idx ", report.worst_index, " ad ",
         report.worst_autodiff, " fd ", report.worst_central);
    CHECK(report.pass);
}

TEST_CASE("autoregressive single step equals teacher forcing on the start row") {
    ModelConfig cfg = toy_config();
    cfg.horizon = 1;
    TsbModel model(cfg, 9);
    Rng rng(407);
    std::vector<double> enc(static_cast<std::size_t>(cfg.input_len * cfg.channels));
    for (auto& v : enc) v = rng.uniform(-1, 1);

    const std::vector<double> ar = model.predict_autoregressive(enc);
    CHECK(ar.size() == static_cast<std::size_t>(cfg.channels));

    Tensor enc_t = Tensor::from_data({cfg.input_len, cfg.channels}, enc);
    std::vector<double> start(enc.end() - cfg.channels, enc.end());
    Tensor dec = Tensor::from_data({1, cfg.channels}, start);
    Tensor tf = model.forward_teacher_forced(enc_t, dec);
    for (std::int64_t j = 0; j < cfg.channels; ++j)
        CHECK(ar[static_cast<std::size_t>(j)] == tf.data()[static_cast<std::size_t>(j)]);
}

TEST_CASE("autoregressive output shape") {
    ModelConfig cfg = toy_config();
    cfg.horizon = 5;
    TsbModel model(cfg, 10);
    Rng rng(408);
    std::vector<double> enc(static_cast<std::size_t>(cfg.input_len * cfg.channels));
    for (auto& v : enc) v = rng.uniform(-1, 1);
    CHECK(model.predict_autoregressive(enc).size() ==
          static_cast<std::size_t>(cfg.horizon * cfg.channels));
}

TEST_CASE("model trained on a constant sequence predicts the constant") {
    // constant frame: normalization guard maps everything to zero
    SpectrumFrame frame;
    frame.channels = 2;
    frame.slots = 84;
    frame.power_dbm.assign(static_cast<std::size_t>(2 * 84), -60.0);
    frame.occupancy.assign(frame.power_dbm.size(), 0);
    frame.config.channels = 2;
    frame.config.slots = 84;

    ModelConfig mcfg = toy_config();
    mcfg.input_len = 8;
    mcfg.horizon = 2;
    TrainConfig tcfg;
    tcfg.epochs = 120;
    tcfg.batch_size = 4;
    tcfg.patience = 120;
    tcfg.learning_rate = 0.01;
    tcfg.seed = 11;
    tcfg.valid_stride = 1;

    TsbModel model(mcfg, 11);
    TrainingData data = prepare_training_data(frame, mcfg, tcfg, 0);
    train_model(model, data, tcfg);

    std::vector<double> enc(static_cast<std::size_t>(mcfg.input_len * mcfg.channels), 0.0);
    for (double v : model.predict_autoregressive(enc)) CHECK(std::fabs(v) < 0.05);
}

TEST_CASE("hard decision boundary") {
    const std::vector<double> dbm{-60.0, -50.0, -40.0};
    const auto out = hard_decision(dbm, -50.0);
    CHECK(out[0] == 0);  // available below the threshold
    CHECK(out[1] == 1);  // boundary counts as unavailable
    CHECK(out[2] == 1);
}

TEST_CASE("config validation rejects odd widths and bad head counts") {
    ModelConfig cfg = toy_config();
    cfg.d_model = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_config();
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
