#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nmtadapt {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream for item `index` of run `seed`; order-independent
// generation relies on these never being shared across items.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ index));
}

inline double uniform01(std::mt19937_64& g) {
    // 53-bit mantissa; deterministic across standard libraries, unlike
    // std::uniform_real_distribution.
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(std::mt19937_64& g, std::uint64_t n) {
    // Rejection sampling, unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return x % n;
}

inline double normal(std::mt19937_64& g) {
    // Box-Muller from uniform01 so results do not depend on the standard
    // library's normal_distribution implementation.
    double u1 = uniform01(g);
    double u2 = uniform01(g);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace nmtadapt
