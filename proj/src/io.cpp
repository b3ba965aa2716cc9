#include "tsb/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tsb {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
    if (!out) throw ConfigError("cannot open for writing: " + path);
    return out;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Field accessors that name the offending key on malformed config input.
template <typename T>
T field(const json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + name + "' has invalid type");
    }
}

}  // namespace

void write_dataset_csv(const std::string& path, const SpectrumFrame& frame,
                       const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    out << "slot";
    for (std::int64_t f = 0; f < frame.channels; ++f) out << ",ch" << f;
    out << "\n";
    for (std::int64_t t = 0; t < frame.slots; ++t) {
        out << t;
        for (std::int64_t f = 0; f < frame.channels; ++f)
            out << "," << fixed6(frame.power(f, t));
        out << "\n";
    }
}

void write_dataset_sidecar(const std::string& path, const ScenarioConfig& cfg,
                           const std::string& config_hash) {
    auto out = open_out(path);
    json j;
    j["config_hash"] = config_hash;
    j["scenario"] = scenario_to_json(cfg);
    j["threshold_dbm"] = cfg.threshold_dbm;
    out << j.dump(2) << "\n";
}

SpectrumFrame read_dataset(const std::string& csv_path, const std::string& json_path) {
    std::ifstream jin(json_path);
    if (!jin) throw ConfigError("cannot open dataset sidecar: " + json_path);
    json j;
    try {
        jin >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed dataset sidecar " + json_path + ": " + e.what());
    }
    ScenarioConfig cfg = scenario_from_json(j.at("scenario"));

    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot open dataset: " + csv_path);
    SpectrumFrame frame;
    frame.config = cfg;
    frame.channels = cfg.channels;

    std::string line;
    std::vector<std::vector<double>> rows;  // time-major while reading
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            // validate column count: slot + one column per channel
            std::int64_t commas = 0;
            for (char c : line)
                if (c == ',') ++commas;
            if (commas != cfg.channels)
                throw ConfigError("dataset has " + std::to_string(commas) +
                                  " channel columns, sidecar says " +
                                  std::to_string(cfg.channels));
            header_seen = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(cfg.channels));
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {
                first = false;
                continue;  // slot index
            }
            row.push_back(std::stod(cell));
        }
        if (static_cast<std::int64_t>(row.size()) != cfg.channels)
            throw ConfigError("dataset row has " + std::to_string(row.size()) +
                              " values, expected " + std::to_string(cfg.channels));
        rows.push_back(std::move(row));
    }
    frame.slots = static_cast<std::int64_t>(rows.size());
    if (frame.slots == 0) throw ConfigError("dataset is empty: " + csv_path);
    frame.power_dbm.resize(static_cast<std::size_t>(frame.channels * frame.slots));
    frame.occupancy.resize(frame.power_dbm.size());
    for (std::int64_t t = 0; t < frame.slots; ++t)
        for (std::int64_t f = 0; f < frame.channels; ++f) {
            const double v = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
            frame.power_dbm[static_cast<std::size_t>(f * frame.slots + t)] = v;
            frame.occupancy[static_cast<std::size_t>(f * frame.slots + t)] =
                v >= cfg.threshold_dbm ? 1 : 0;
        }
    return frame;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history,
                       const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    out << "epoch,train_loss,valid_loss,lr,wall_seconds\n";
    for (const auto& e : history)
        out << e.epoch << "," << fixed6(e.train_loss) << "," << fixed6(e.valid_loss)
            << "," << fixed6(e.learning_rate) << "," << fixed6(e.wall_seconds) << "\n";
}

void write_matrix_csv(const std::string& path, const std::vector<double>& values,
                      std::int64_t rows, std::int64_t cols,
                      const std::string& config_hash) {
    if (static_cast<std::int64_t>(values.size()) != rows * cols)
        throw DimensionError("write_matrix_csv: size mismatch");
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    for (std::int64_t j = 0; j < cols; ++j) out << (j ? "," : "") << "ch" << j;
    out << "\n";
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < cols; ++j)
            out << (j ? "," : "") << fixed6(values[static_cast<std::size_t>(r * cols + j)]);
        out << "\n";
    }
}

void write_availability_csv(const std::string& path,
                            const std::vector<std::uint8_t>& decisions,
                            std::int64_t rows, std::int64_t cols,
                            const std::string& config_hash) {
    if (static_cast<std::int64_t>(decisions.size()) != rows * cols)
        throw DimensionError("write_availability_csv: size mismatch");
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    for (std::int64_t j = 0; j < cols; ++j) out << (j ? "," : "") << "ch" << j;
    out << "\n";
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < cols; ++j)
            out << (j ? "," : "")
                << static_cast<int>(decisions[static_cast<std::size_t>(r * cols + j)]);
        out << "\n";
    }
}

void write_metrics_json(const std::string& path, const MetricsReport& report,
                        const std::string& config_hash) {
    auto out = open_out(path);
    json j;
    j["config_hash"] = config_hash;
    j["horizon"] = report.horizon;
    j["windows_evaluated"] = report.windows_evaluated;
    j["rmse_db"] = report.rmse_db;
    j["norm_error_accuracy"] = report.norm_error_accuracy;
    j["availability_accuracy"] = report.availability_accuracy;
    j["spearman_mean"] = report.spearman_mean;
    j["spearman_per_channel"] = report.spearman_per_channel;
    j["theta_mean"] = report.theta_mean;
    j["theta_max_abs"] = report.theta_max_abs;
    out << j.dump(2) << "\n";
}

void write_errors_csv(const std::string& path, const std::vector<SlotError>& errors,
                      const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    out << "slot,channel,error\n";
    for (const auto& e : errors)
        out << e.slot << "," << e.channel << "," << fixed6(e.error) << "\n";
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows,
                        const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash: " << config_hash << "\n";
    out << "axis,value,encoder_layers,decoder_layers,heads,bilstm_layers,"
           "learning_rate,d_model,rmse_db\n";
    for (const auto& r : rows)
        out << r.axis << "," << r.value << "," << r.encoder_layers << ","
            << r.decoder_layers << "," << r.heads << "," << r.bilstm_layers << ","
            << fixed6(r.learning_rate) << "," << r.d_model << "," << fixed6(r.rmse_db)
            << "\n";
}

std::vector<AblationRow> read_ablation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ablation table: " + path);
    std::vector<AblationRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9)
            throw ConfigError("ablation row has " + std::to_string(cells.size()) +
                              " fields, expected 9");
        AblationRow r;
        r.axis = cells[0];
        r.value = cells[1];
        r.encoder_layers = std::stoll(cells[2]);
        r.decoder_layers = std::stoll(cells[3]);
        r.heads = std::stoll(cells[4]);
        r.bilstm_layers = std::stoll(cells[5]);
        r.learning_rate = std::stod(cells[6]);
        r.d_model = std::stoll(cells[7]);
        r.rmse_db = std::stod(cells[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

json scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["channels"] = cfg.channels;
    j["slots"] = cfg.slots;
    j["slot_seconds"] = cfg.slot_seconds;
    j["period"] = cfg.period;
    j["noise_floor_dbm"] = cfg.noise_floor_dbm;
    j["hu_power_min_dbm"] = cfg.hu_power_min_dbm;
    j["hu_power_max_dbm"] = cfg.hu_power_max_dbm;
    j["hu_channel_count"] = cfg.hu_channel_count;
    j["hu_duty"] = cfg.hu_duty;
    j["mu_power_min_dbm"] = cfg.mu_power_min_dbm;
    j["mu_power_max_dbm"] = cfg.mu_power_max_dbm;
    j["threshold_dbm"] = cfg.threshold_dbm;
    j["mode"] = to_string(cfg.mode);
    j["sweep_start"] = cfg.sweep_start;
    j["sweep_span"] = cfg.sweep_span;
    j["sweep_step"] = cfg.sweep_step;
    j["fixed_channels"] = cfg.fixed_channels;
    j["comb_spacing"] = cfg.comb_spacing;
    j["seed"] = cfg.seed;
    return j;
}

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig cfg;
    cfg.channels = field<std::int64_t>(j, "channels", cfg.channels);
    cfg.slots = field<std::int64_t>(j, "slots", cfg.slots);
    cfg.slot_seconds = field<double>(j, "slot_seconds", cfg.slot_seconds);
    cfg.period = field<std::int64_t>(j, "period", cfg.period);
    cfg.noise_floor_dbm = field<double>(j, "noise_floor_dbm", cfg.noise_floor_dbm);
    cfg.hu_power_min_dbm = field<double>(j, "hu_power_min_dbm", cfg.hu_power_min_dbm);
    cfg.hu_power_max_dbm = field<double>(j, "hu_power_max_dbm", cfg.hu_power_max_dbm);
    cfg.hu_channel_count = field<std::int64_t>(j, "hu_channel_count", cfg.hu_channel_count);
    cfg.hu_duty = field<double>(j, "hu_duty", cfg.hu_duty);
    cfg.mu_power_min_dbm = field<double>(j, "mu_power_min_dbm", cfg.mu_power_min_dbm);
    cfg.mu_power_max_dbm = field<double>(j, "mu_power_max_dbm", cfg.mu_power_max_dbm);
    cfg.threshold_dbm = field<double>(j, "threshold_dbm", cfg.threshold_dbm);
    cfg.mode = interference_mode_from_string(
        field<std::string>(j, "mode", to_string(cfg.mode)));
    cfg.sweep_start = field<std::int64_t>(j, "sweep_start", cfg.sweep_start);
    cfg.sweep_span = field<std::int64_t>(j, "sweep_span", cfg.sweep_span);
    cfg.sweep_step = field<double>(j, "sweep_step", cfg.sweep_step);
    cfg.fixed_channels =
        field<std::vector<std::int64_t>>(j, "fixed_channels", cfg.fixed_channels);
    cfg.comb_spacing = field<std::int64_t>(j, "comb_spacing", cfg.comb_spacing);
    cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
    return cfg;
}

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["channels"] = cfg.channels;
    j["input_len"] = cfg.input_len;
    j["horizon"] = cfg.horizon;
    j["d_model"] = cfg.d_model;
    j["encoder_layers"] = cfg.encoder_layers;
    j["decoder_layers"] = cfg.decoder_layers;
    j["heads"] = cfg.heads;
    j["bilstm_layers"] = cfg.bilstm_layers;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.channels = field<std::int64_t>(j, "channels", cfg.channels);
    cfg.input_len = field<std::int64_t>(j, "input_len", cfg.input_len);
    cfg.horizon = field<std::int64_t>(j, "horizon", cfg.horizon);
    cfg.d_model = field<std::int64_t>(j, "d_model", cfg.d_model);
    cfg.encoder_layers = field<std::int64_t>(j, "encoder_layers", cfg.encoder_layers);
    cfg.decoder_layers = field<std::int64_t>(j, "decoder_layers", cfg.decoder_layers);
    cfg.heads = field<std::int64_t>(j, "heads", cfg.heads);
    cfg.bilstm_layers = field<std::int64_t>(j, "bilstm_layers", cfg.bilstm_layers);
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["optimizer"] = to_string(cfg.optimizer);
    j["learning_rate"] = cfg.learning_rate;
    j["l2_coefficient"] = cfg.l2_coefficient;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["k_folds"] = cfg.k_folds;
    j["grad_clip_norm"] = cfg.grad_clip_norm;
    j["window_stride"] = cfg.window_stride;
    j["valid_stride"] = cfg.valid_stride;
    j["validate_autoregressive"] = cfg.validate_autoregressive;
    j["prefix_teacher_forcing"] = cfg.prefix_teacher_forcing;
    j["batch_chunks"] = cfg.batch_chunks;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.optimizer =
        optimizer_from_string(field<std::string>(j, "optimizer", to_string(cfg.optimizer)));
    cfg.learning_rate = field<double>(j, "learning_rate", cfg.learning_rate);
    cfg.l2_coefficient = field<double>(j, "l2_coefficient", cfg.l2_coefficient);
    cfg.batch_size = field<std::int64_t>(j, "batch_size", cfg.batch_size);
    cfg.epochs = field<std::int64_t>(j, "epochs", cfg.epochs);
    cfg.patience = field<std::int64_t>(j, "patience", cfg.patience);
    cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
    cfg.k_folds = field<int>(j, "k_folds", cfg.k_folds);
    cfg.grad_clip_norm = field<double>(j, "grad_clip_norm", cfg.grad_clip_norm);
    cfg.window_stride = field<std::int64_t>(j, "window_stride", cfg.window_stride);
    cfg.valid_stride = field<std::int64_t>(j, "valid_stride", cfg.valid_stride);
    cfg.validate_autoregressive =
        field<bool>(j, "validate_autoregressive", cfg.validate_autoregressive);
    cfg.prefix_teacher_forcing =
        field<bool>(j, "prefix_teacher_forcing", cfg.prefix_teacher_forcing);
    cfg.batch_chunks = field<int>(j, "batch_chunks", cfg.batch_chunks);
    return cfg;
}

}  // namespace tsb
