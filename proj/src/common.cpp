#include "tsb/common.hpp"

#include <cmath>
#include <sstream>

namespace tsb {

std::string shape_str(const Shape& s) {
    std::ostringstream oss;
    oss << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) oss << "x";
        oss << s[i];
    }
    oss << "]";
    return oss.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

double Rng::uniform(double lo, double hi) {
    // 53-bit mantissa in [0,1)
    double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::int64_t Rng::pick(std::int64_t n) {
    if (n <= 0) throw ContractError("Rng::pick: n must be positive");
    // rejection sampling keeps the draw unbiased
    std::uint64_t un = static_cast<std::uint64_t>(n);
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
    // SplitMix64 over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace tsb
