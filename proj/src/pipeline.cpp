#include "tsb/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "tsb/checkpoint.hpp"
#include "tsb/kernels.hpp"
#include "tsb/metrics.hpp"

namespace tsb {

namespace fs = std::filesystem;

void RunPaths::resolve() {
    auto def = [&](std::string& p, const char* name) {
        if (p.empty()) p = (fs::path(out_dir) / name).string();
    };
    def(dataset_csv, "dataset.csv");
    def(dataset_json, "dataset.json");
    def(checkpoint, "checkpoint.tsb");
    def(history_csv, "history.csv");
    def(metrics_json, "metrics.json");
    def(errors_csv, "errors.csv");
    def(prediction_csv, "prediction.csv");
    def(availability_csv, "availability.csv");
    def(ablation_csv, "ablation.csv");
}

void RunConfig::propagate_seed() {
    scenario.seed = derive_stream(seed, 0x7363 /* "sc" */);
    train.seed = derive_stream(seed, 0x7472 /* "tr" */);
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    if (j.contains("scenario")) cfg.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    if (j.contains("fold")) {
        if (!j.at("fold").is_number_integer())
            throw ConfigError("config field 'fold' has invalid type");
        cfg.fold = j.at("fold").get<int>();
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number())
            throw ConfigError("config field 'seed' has invalid type");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("eval_stride")) {
        if (!j.at("eval_stride").is_number_integer())
            throw ConfigError("config field 'eval_stride' has invalid type");
        cfg.eval_stride = j.at("eval_stride").get<std::int64_t>();
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        auto get = [&](const char* name, std::string& dst) {
            if (p.contains(name)) {
                if (!p.at(name).is_string())
                    throw ConfigError(std::string("config field 'paths.") + name +
                                      "' has invalid type");
                dst = p.at(name).get<std::string>();
            }
        };
        get("out_dir", cfg.paths.out_dir);
        get("dataset_csv", cfg.paths.dataset_csv);
        get("dataset_json", cfg.paths.dataset_json);
        get("checkpoint", cfg.paths.checkpoint);
        get("history_csv", cfg.paths.history_csv);
        get("metrics_json", cfg.paths.metrics_json);
        get("errors_csv", cfg.paths.errors_csv);
        get("prediction_csv", cfg.paths.prediction_csv);
        get("availability_csv", cfg.paths.availability_csv);
        get("ablation_csv", cfg.paths.ablation_csv);
    }
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["scenario"] = scenario_to_json(cfg.scenario);
    j["model"] = model_config_to_json(cfg.model);
    j["train"] = train_config_to_json(cfg.train);
    j["fold"] = cfg.fold;
    j["seed"] = cfg.seed;
    j["eval_stride"] = cfg.eval_stride;
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

std::string config_hash_hex(const RunConfig& cfg) {
    // canonical form: sorted-key dump of the effective config
    nlohmann::json sorted = nlohmann::json::parse(run_config_to_json(cfg).dump());
    return hash_hex(fnv1a64(sorted.dump()));
}

namespace {

void ensure_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
}

SpectrumFrame load_frame(const RunConfig& cfg) {
    if (!fs::exists(cfg.paths.dataset_csv))
        throw ConfigError("dataset not found: " + cfg.paths.dataset_csv +
                          " (run generate first)");
    return read_dataset(cfg.paths.dataset_csv, cfg.paths.dataset_json);
}

}  // namespace

MetricsReport evaluate_checkpointed_model(const TsbModel& model, const NormStats& stats,
                                          const SpectrumFrame& frame,
                                          const TrainConfig& tcfg, int fold,
                                          std::int64_t eval_stride,
                                          std::vector<SlotError>* errors_out) {
    const ModelConfig& mcfg = model.config();
    const FoldSplit split =
        kfold_split(frame.slots, mcfg.input_len, mcfg.horizon, tcfg.k_folds, fold);
    auto starts = window_starts_in_part(
        split.parts[static_cast<std::size_t>(split.test_part)], mcfg.input_len,
        mcfg.horizon, eval_stride > 0 ? eval_stride : 1);
    if (starts.empty()) throw ConfigError("evaluate: no test windows");

    MetricsAccumulator acc(mcfg.horizon, mcfg.channels, stats,
                           frame.config.threshold_dbm);
    const double inv = 1.0 / stats.stddev;

    // decode windows in parallel, then pool in window order
    const std::int64_t n = static_cast<std::int64_t>(starts.size());
    std::vector<std::vector<double>> preds(starts.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (kernels::max_threads() > 1 && n > 1)
#endif
    for (std::int64_t w = 0; w < n; ++w) {
        const std::int64_t s = starts[static_cast<std::size_t>(w)];
        std::vector<double> enc(static_cast<std::size_t>(mcfg.input_len * mcfg.channels));
        for (std::int64_t t = 0; t < mcfg.input_len; ++t)
            for (std::int64_t f = 0; f < mcfg.channels; ++f)
                enc[static_cast<std::size_t>(t * mcfg.channels + f)] =
                    (frame.power(f, s + t) - stats.mean) * inv;
        preds[static_cast<std::size_t>(w)] =
            denormalize(model.predict_autoregressive(enc), stats);
    }

    for (std::int64_t w = 0; w < n; ++w) {
        const std::int64_t s = starts[static_cast<std::size_t>(w)];
        const std::vector<double>& pred_dbm = preds[static_cast<std::size_t>(w)];
        std::vector<double> target_dbm(
            static_cast<std::size_t>(mcfg.horizon * mcfg.channels));
        for (std::int64_t k = 0; k < mcfg.horizon; ++k)
            for (std::int64_t f = 0; f < mcfg.channels; ++f)
                target_dbm[static_cast<std::size_t>(k * mcfg.channels + f)] =
                    frame.power(f, s + mcfg.input_len + k);
        acc.add_window(pred_dbm, target_dbm);

        if (errors_out) {
            for (std::int64_t k = 0; k < mcfg.horizon; ++k)
                for (std::int64_t f = 0; f < mcfg.channels; ++f) {
                    const auto i = static_cast<std::size_t>(k * mcfg.channels + f);
                    errors_out->push_back({s + mcfg.input_len + k, f,
                                           (pred_dbm[i] - target_dbm[i]) * inv});
                }
        }
    }
    return acc.finalize();
}

int run_generate(RunConfig cfg) {
    const std::string hash = config_hash_hex(cfg);
    cfg.propagate_seed();
    cfg.paths.resolve();
    ensure_dir(cfg.paths.out_dir);
    SpectrumFrame frame = generate_frame(cfg.scenario);
    write_dataset_csv(cfg.paths.dataset_csv, frame, hash);
    write_dataset_sidecar(cfg.paths.dataset_json, frame.config, hash);
    return 0;
}

int run_train(RunConfig cfg) {
    const std::string hash = config_hash_hex(cfg);
    cfg.propagate_seed();
    cfg.paths.resolve();
    ensure_dir(cfg.paths.out_dir);
    SpectrumFrame frame = load_frame(cfg);

    TsbModel model(cfg.model, derive_stream(cfg.seed, 0x6d6f64 /* "mod" */));
    TrainingData data = prepare_training_data(frame, cfg.model, cfg.train, cfg.fold);
    TrainResult result = train_model(model, data, cfg.train);

    write_history_csv(cfg.paths.history_csv, result.history, hash);
    save_checkpoint(cfg.paths.checkpoint, model, data.stats, hash);
    return result.diverged ? 1 : 0;
}

int run_evaluate(RunConfig cfg) {
    const std::string hash = config_hash_hex(cfg);
    cfg.propagate_seed();
    cfg.paths.resolve();
    ensure_dir(cfg.paths.out_dir);
    SpectrumFrame frame = load_frame(cfg);
    Checkpoint ckpt = read_checkpoint(cfg.paths.checkpoint);
    TsbModel model = restore_model(ckpt);

    std::vector<SlotError> errors;
    MetricsReport report = evaluate_checkpointed_model(
        model, ckpt.stats, frame, cfg.train, cfg.fold, cfg.eval_stride, &errors);
    write_metrics_json(cfg.paths.metrics_json, report, hash);
    write_errors_csv(cfg.paths.errors_csv, errors, hash);
    return 0;
}

int run_predict(RunConfig cfg) {
    const std::string hash = config_hash_hex(cfg);
    cfg.propagate_seed();
    cfg.paths.resolve();
    ensure_dir(cfg.paths.out_dir);
    SpectrumFrame frame = load_frame(cfg);
    Checkpoint ckpt = read_checkpoint(cfg.paths.checkpoint);
    TsbModel model = restore_model(ckpt);
    const ModelConfig& mcfg = model.config();
    if (frame.slots < mcfg.input_len)
        throw ConfigError("predict: dataset has " + std::to_string(frame.slots) +
                          " slots, need " + std::to_string(mcfg.input_len));

    // online prediction from the last observed window
    const std::int64_t s0 = frame.slots - mcfg.input_len;
    const double inv = 1.0 / ckpt.stats.stddev;
    std::vector<double> enc(static_cast<std::size_t>(mcfg.input_len * mcfg.channels));
    for (std::int64_t t = 0; t < mcfg.input_len; ++t)
        for (std::int64_t f = 0; f < mcfg.channels; ++f)
            enc[static_cast<std::size_t>(t * mcfg.channels + f)] =
                (frame.power(f, s0 + t) - ckpt.stats.mean) * inv;
    const std::vector<double> pred_dbm =
        denormalize(model.predict_autoregressive(enc), ckpt.stats);
    const std::vector<std::uint8_t> avail =
        hard_decision(pred_dbm, frame.config.threshold_dbm);

    write_matrix_csv(cfg.paths.prediction_csv, pred_dbm, mcfg.horizon, mcfg.channels,
                     hash);
    write_availability_csv(cfg.paths.availability_csv, avail, mcfg.horizon,
                           mcfg.channels, hash);
    return 0;
}

int run_ablate(RunConfig base) {
    base.paths.resolve();
    ensure_dir(base.paths.out_dir);

    struct Cell {
        std::string axis;
        std::string value;
        RunConfig cfg;
    };
    std::vector<Cell> cells;
    auto with = [&](const std::string& axis, const std::string& value,
                    auto&& mutate) {
        RunConfig c = base;
        mutate(c);
        c.paths = RunPaths{};
        c.paths.out_dir =
            (fs::path(base.paths.out_dir) / "ablate" / (axis + "_" + value)).string();
        cells.push_back({axis, value, std::move(c)});
    };

    for (std::int64_t layers : {2, 3, 4})
        with("layers", std::to_string(layers), [&](RunConfig& c) {
            c.model.encoder_layers = layers;
            c.model.decoder_layers = layers;
        });
    // 120 is the smallest width divisible by all tested head counts
    for (std::int64_t heads : {8, 10, 12})
        with("heads", std::to_string(heads), [&](RunConfig& c) {
            c.model.heads = heads;
            c.model.d_model = 120;
        });
    for (std::int64_t bilstm : {1, 2, 3})
        with("bilstm", std::to_string(bilstm),
             [&](RunConfig& c) { c.model.bilstm_layers = bilstm; });
    for (double lr : {0.01, 0.001, 0.0001}) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", lr);
        with("lr", buf, [&](RunConfig& c) { c.train.learning_rate = lr; });
    }

    std::vector<AblationRow> rows;
    for (auto& cell : cells) {
        cell.cfg.paths.resolve();
        ensure_dir(cell.cfg.paths.out_dir);
        int rc = run_generate(cell.cfg);
        if (rc == 0) rc = run_train(cell.cfg);
        if (rc != 0) throw ConfigError("ablation cell failed: " + cell.axis + "=" +
                                       cell.value);

        RunConfig c = cell.cfg;
        c.propagate_seed();
        SpectrumFrame frame = read_dataset(c.paths.dataset_csv, c.paths.dataset_json);
        Checkpoint ckpt = read_checkpoint(c.paths.checkpoint);
        TsbModel model = restore_model(ckpt);
        MetricsReport report = evaluate_checkpointed_model(
            model, ckpt.stats, frame, c.train, c.fold, c.eval_stride, nullptr);

        rows.push_back({cell.axis, cell.value, c.model.encoder_layers,
                        c.model.decoder_layers, c.model.heads, c.model.bilstm_layers,
                        c.train.learning_rate, c.model.d_model, report.rmse_db});
    }
    write_ablation_csv(base.paths.ablation_csv, rows, config_hash_hex(base));
    return 0;
}

int run_command(const std::string& command, const RunConfig& cfg) {
    if (command == "generate") return run_generate(cfg);
    if (command == "train") return run_train(cfg);
    if (command == "evaluate") return run_evaluate(cfg);
    if (command == "predict") return run_predict(cfg);
    if (command == "ablate") return run_ablate(cfg);
    throw ConfigError("unknown command: " + command);
}

}  // namespace tsb
