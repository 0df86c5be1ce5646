#pragma once

// Portable random draws. std::mt19937_64's output sequence is fixed by the
// standard, but the std:: distributions are not, so draws are built here from
// raw engine bits to keep seeded runs identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace epimix {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for restart `start` of mixture order `k` under `master`:
/// mix64(mix64(mix64(master) ^ k) ^ start). A pure counter scheme, so every
/// restart can be reproduced on its own.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k, std::uint64_t start) {
    return mix64(mix64(mix64(master) ^ k) ^ start);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection, n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

/// Standard normal draw (Box-Muller, one value per call).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace epimix
