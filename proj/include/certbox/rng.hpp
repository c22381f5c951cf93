#pragma once

#include <cstdint>
#include <random>

namespace certbox {

/// Deterministic uniform source. Doubles are derived from raw engine output
/// rather than std::uniform_real_distribution so that a seed pins the exact
/// stream independently of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t integer(std::uint64_t n) {
        return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

private:
    std::mt19937_64 eng_;
};

} // namespace certbox
