#include "tsb/specgen.hpp"

#include <algorithm>
#include <cmath>

#include "tsb/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tsb {

std::string to_string(InterferenceMode m) {
    switch (m) {
        case InterferenceMode::Sweep: return "sweep";
        case InterferenceMode::Fixed: return "fixed";
        case InterferenceMode::Hopping: return "hopping";
        case InterferenceMode::Comb: return "comb";
    }
    return "sweep";
}

InterferenceMode interference_mode_from_string(const std::string& s) {
    if (s == "sweep") return InterferenceMode::Sweep;
    if (s == "fixed") return InterferenceMode::Fixed;
    if (s == "hopping") return InterferenceMode::Hopping;
    if (s == "comb") return InterferenceMode::Comb;
    throw ConfigError("unknown interference mode: " + s);
}

void ScenarioConfig::validate() const {
    if (channels < 1 || slots < 1 || period < 1)
        throw ConfigError("scenario: channels, slots and period must be >= 1");
    if (hu_channel_count < 0 || hu_channel_count > channels)
        throw ConfigError("scenario: hu_channel_count out of range");
    if (hu_duty < 0.0 || hu_duty > 1.0)
        throw ConfigError("scenario: hu_duty must lie in [0,1]");
    if (mu_power_min_dbm > mu_power_max_dbm || hu_power_min_dbm > hu_power_max_dbm)
        throw ConfigError("scenario: power ranges must be ordered min <= max");
    // interference must register as occupancy
    if (mu_power_min_dbm <= threshold_dbm)
        throw ConfigError("scenario: MU power must exceed the decision threshold");
    if (comb_spacing < 1) throw ConfigError("scenario: comb_spacing must be >= 1");
    for (auto f : fixed_channels)
        if (f < 0 || f >= channels)
            throw ConfigError("scenario: fixed channel " + std::to_string(f) +
                              " outside [0," + std::to_string(channels) + ")");
    if (sweep_start < 0 || sweep_start >= channels)
        throw ConfigError("scenario: sweep_start outside channel range");
    if (sweep_span < 0 || sweep_span > channels)
        throw ConfigError("scenario: sweep_span outside channel range");
}

std::vector<std::uint8_t> interference_schedule(const ScenarioConfig& cfg) {
    cfg.validate();
    const std::int64_t f_n = cfg.channels, t_n = cfg.slots, p = cfg.period;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(f_n * t_n), 0);
    auto set = [&](std::int64_t f, std::int64_t t) {
        mask[static_cast<std::size_t>(f * t_n + t)] = 1;
    };
    switch (cfg.mode) {
        case InterferenceMode::Sweep: {
            const std::int64_t span = cfg.sweep_span == 0 ? f_n : cfg.sweep_span;
            for (std::int64_t t = 0; t < t_n; ++t) {
                const std::int64_t hop = static_cast<std::int64_t>(
                    std::floor(cfg.sweep_step * static_cast<double>(t % p)));
                set((cfg.sweep_start + hop % span) % f_n, t);
            }
            break;
        }
        case InterferenceMode::Fixed: {
            for (std::int64_t t = 0; t < t_n; ++t)
                for (auto f : cfg.fixed_channels) set(f, t);
            break;
        }
        case InterferenceMode::Hopping: {
            Rng hop_rng(derive_stream(cfg.seed, 0x686f70 /* "hop" */));
            std::int64_t current = hop_rng.pick(f_n);
            for (std::int64_t t = 0; t < t_n; ++t) {
                if (t > 0 && t % p == 0) current = hop_rng.pick(f_n);
                set(current, t);
            }
            break;
        }
        case InterferenceMode::Comb: {
            for (std::int64_t f = 0; f < f_n; f += cfg.comb_spacing)
                for (std::int64_t t = 0; t < t_n; ++t) set(f, t);
            break;
        }
    }
    return mask;
}

double combine_powers_dbm(const std::vector<double>& components_dbm) {
    if (components_dbm.empty())
        throw ContractError("combine_powers_dbm: empty component list");
    double linear = 0.0;
    for (double c : components_dbm) {
        if (!std::isfinite(c))
            throw NumericError("combine_powers_dbm: non-finite component");
        linear += std::pow(10.0, c / 10.0);
    }
    return 10.0 * std::log10(linear);
}

SpectrumFrame generate_frame(const ScenarioConfig& cfg) {
    cfg.validate();
    const std::int64_t f_n = cfg.channels, t_n = cfg.slots;

    SpectrumFrame frame;
    frame.config = cfg;
    frame.channels = f_n;
    frame.slots = t_n;
    frame.power_dbm.resize(static_cast<std::size_t>(f_n * t_n));
    frame.occupancy.assign(static_cast<std::size_t>(f_n * t_n), 0);
    frame.hu_mask.assign(static_cast<std::size_t>(f_n * t_n), 0);
    frame.mu_mask = interference_schedule(cfg);

    // persistent honest-user channel assignment
    std::vector<std::uint8_t> is_hu(static_cast<std::size_t>(f_n), 0);
    {
        Rng assign_rng(derive_stream(cfg.seed, 0x6875 /* "hu" */));
        std::vector<std::int64_t> all(static_cast<std::size_t>(f_n));
        for (std::int64_t f = 0; f < f_n; ++f) all[static_cast<std::size_t>(f)] = f;
        assign_rng.shuffle(all);
        for (std::int64_t i = 0; i < cfg.hu_channel_count; ++i)
            is_hu[static_cast<std::size_t>(all[static_cast<std::size_t>(i)])] = 1;
    }

    const double floor_lin = std::pow(10.0, cfg.noise_floor_dbm / 10.0);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (kernels::backend() == kernels::Backend::Parallel)
#endif
    for (std::int64_t f = 0; f < f_n; ++f) {
        Rng rng(derive_stream(cfg.seed, 0x636831ULL + static_cast<std::uint64_t>(f)));
        const bool hu_channel = is_hu[static_cast<std::size_t>(f)] != 0;
        const double hu_level =
            hu_channel ? rng.uniform(cfg.hu_power_min_dbm, cfg.hu_power_max_dbm) : 0.0;
        bool hu_on = false;
        for (std::int64_t t = 0; t < t_n; ++t) {
            const std::size_t idx = static_cast<std::size_t>(f * t_n + t);
            if (hu_channel && t % cfg.period == 0)
                hu_on = cfg.hu_duty >= 1.0 || rng.uniform(0.0, 1.0) < cfg.hu_duty;

            // complex-envelope noise power: floor * (g1^2 + g2^2) / 2,
            // clamped 90 dB under the floor so the dBm value stays bounded
            const double g1 = rng.normal();
            const double g2 = rng.normal();
            double linear =
                std::max(floor_lin * 0.5 * (g1 * g1 + g2 * g2), floor_lin * 1e-9);

            if (hu_channel && hu_on) {
                frame.hu_mask[idx] = 1;
                linear += std::pow(10.0, hu_level / 10.0);
            }
            if (frame.mu_mask[idx]) {
                const double mu_dbm =
                    rng.uniform(cfg.mu_power_min_dbm, cfg.mu_power_max_dbm);
                linear += std::pow(10.0, mu_dbm / 10.0);
            }
            const double dbm = 10.0 * std::log10(linear);
            frame.power_dbm[idx] = dbm;
            frame.occupancy[idx] = dbm >= cfg.threshold_dbm ? 1 : 0;
        }
    }
    return frame;
}

}  // namespace tsb
