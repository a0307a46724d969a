#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace riskshield {

using Rng = std::mt19937_64;

/// SplitMix64 step; used only to derive well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Engine for stream `stream` of a master seed. Distinct streams are
/// independent for all practical purposes, and the mapping is stable, so a
/// (seed, stream) pair always reproduces the same draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    const std::uint64_t a = splitmix64(state);
    const std::uint64_t b = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return Rng(seq);
}

/// Uniform double in [0, 1). Hand-rolled so the draw sequence depends only on
/// the engine, not on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi], inclusive.
inline long uniform_int(Rng& rng, long lo, long hi) {
    const long span = hi - lo + 1;
    long k = static_cast<long>(uniform01(rng) * static_cast<double>(span));
    if (k >= span) k = span - 1;
    return lo + k;
}

/// Index drawn from a normalized probability vector by inverse CDF.
inline int sample_index(Rng& rng, const std::vector<double>& probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace riskshield
