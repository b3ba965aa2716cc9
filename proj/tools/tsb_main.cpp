#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsb/kernels.hpp"
#include "tsb/pipeline.hpp"

namespace {

void apply_thread_cap() {
    if (const char* env = std::getenv("TSB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) tsb::kernels::set_threads(n);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TSB spectrum forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::string optimizer;
    std::int64_t seed = -1;
    int fold = -1;
    std::int64_t horizon = 0;
    std::int64_t input_len = 0;

    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "global seed (overrides config)");
    app.add_option("--fold", fold, "fold index in [0, k_folds)");
    app.add_option("--mode", mode, "interference mode: sweep|fixed|hopping|comb");
    app.add_option("--horizon", horizon, "prediction steps, e.g. 48 or 96");
    app.add_option("--input-len", input_len, "encoder window length, e.g. 96 or 128");
    app.add_option("--optimizer", optimizer, "adam|sgdm|sgd");
    app.add_option("--out", out_dir, "output directory");

    for (const char* name : {"generate", "train", "evaluate", "predict", "ablate"})
        app.add_subcommand(name)->fallthrough();

    CLI11_PARSE(app, argc, argv);
    apply_thread_cap();

    try {
        tsb::RunConfig cfg;
        if (!config_path.empty()) cfg = tsb::load_run_config(config_path);
        // flags win over the config file
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (fold >= 0) cfg.fold = fold;
        if (!mode.empty()) cfg.scenario.mode = tsb::interference_mode_from_string(mode);
        if (horizon > 0) cfg.model.horizon = horizon;
        if (input_len > 0) cfg.model.input_len = input_len;
        if (!optimizer.empty()) cfg.train.optimizer = tsb::optimizer_from_string(optimizer);
        if (!out_dir.empty()) cfg.paths.out_dir = out_dir;

        const std::string command = app.get_subcommands().front()->get_name();
        const int rc = tsb::run_command(command, cfg);
        if (rc == 0)
            std::cout << command << ": ok (config " << tsb::config_hash_hex(cfg) << ")\n";
        return rc;
    } catch (const tsb::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
