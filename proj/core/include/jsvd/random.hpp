#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace jsvd {

// Uniform double in [0, 1) from the raw engine output. std::mt19937_64 has a
// fully specified bit sequence, and this mapping avoids the distribution
// classes whose output is implementation defined, so streams are reproducible
// across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline void fill_uniform(std::span<double> out, std::mt19937_64& rng,
                         double lo = -1.0, double hi = 1.0) {
    for (double& x : out) x = uniform(rng, lo, hi);
}

} // namespace jsvd
