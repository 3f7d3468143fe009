#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace granular {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn structured stream identifiers into
/// well-mixed 64-bit seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a master seed and a path of
/// stream identifiers (replica, step, cell, sample, ...). The result only
/// depends on the values, never on call order or thread scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(master, path));
}

inline double uniform01(Rng& rng) {
    // 53 random bits, [0, 1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
}

} // namespace granular
