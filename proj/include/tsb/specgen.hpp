#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsb/common.hpp"

namespace tsb {

enum class InterferenceMode { Sweep, Fixed, Hopping, Comb };

std::string to_string(InterferenceMode m);
InterferenceMode interference_mode_from_string(const std::string& s);

struct ScenarioConfig {
    std::int64_t channels = 32;         // F
    std::int64_t slots = 2000;          // T
    double slot_seconds = 0.1;
    std::int64_t period = 20;           // jammer period P, in slots

    double noise_floor_dbm = -90.0;     // mean noise power
    double hu_power_min_dbm = -48.0;
    double hu_power_max_dbm = -40.0;
    std::int64_t hu_channel_count = 8;  // persistent honest-user channels
    double hu_duty = 1.0;               // per-period on probability
    double mu_power_min_dbm = -45.0;
    double mu_power_max_dbm = -30.0;
    double threshold_dbm = -50.0;       // occupancy decision lambda

    InterferenceMode mode = InterferenceMode::Sweep;
    std::int64_t sweep_start = 0;
    std::int64_t sweep_span = 0;        // 0 means all channels
    double sweep_step = 1.0;
    std::vector<std::int64_t> fixed_channels = {0};
    std::int64_t comb_spacing = 4;

    std::uint64_t seed = 1;

    void validate() const;
};

// F x T power matrix in dBm with its occupancy labels and the indicator
// traces of both signal sources.
struct SpectrumFrame {
    ScenarioConfig config;
    std::int64_t channels = 0;
    std::int64_t slots = 0;
    std::vector<double> power_dbm;       // F x T row-major
    std::vector<std::uint8_t> occupancy; // power >= threshold
    std::vector<std::uint8_t> hu_mask;   // h^z
    std::vector<std::uint8_t> mu_mask;   // h^a

    double power(std::int64_t f, std::int64_t t) const {
        return power_dbm[static_cast<std::size_t>(f * slots + t)];
    }
    bool occupied(std::int64_t f, std::int64_t t) const {
        return occupancy[static_cast<std::size_t>(f * slots + t)] != 0;
    }
};

// Jammer activity mask h^a (F x T) for the configured mode.
std::vector<std::uint8_t> interference_schedule(const ScenarioConfig& cfg);

// Sums component powers in linear milliwatts: 10*log10(sum 10^(x/10)).
double combine_powers_dbm(const std::vector<double>& components_dbm);

// Draws honest-user traffic, jammer activity and noise per cell, superposes
// them in the linear domain and labels occupancy against the threshold.
// Per-channel RNG streams derive from (seed, channel), so generating
// channels in parallel or serially gives identical frames.
SpectrumFrame generate_frame(const ScenarioConfig& cfg);

}  // namespace tsb
