// rng.hpp - splittable random streams for reproducible Monte Carlo runs
//
// Every random draw in a sweep comes from a stream keyed by
// (seed, frame, round, purpose). Streams never depend on scheduling, so the
// number of workers cannot change any draw.

#pragma once

#include <complex>
#include <cmath>
#include <cstdint>
#include <random>

namespace tpc {

enum class StreamPurpose : std::uint64_t {
    info_bits = 1,
    channel = 2,
    cci_channel = 3,
    cci_symbols = 4,
    noise = 5,
    interleaver = 6,
    test = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// stream id = hash(seed, frame, round, purpose); chained splitmix64 mixing.
inline std::uint64_t stream_id(std::uint64_t seed, std::uint64_t frame, std::uint64_t round,
                               StreamPurpose purpose) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ frame);
    h = splitmix64(h ^ (round + 0x100));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t seed, std::uint64_t frame, std::uint64_t round,
                       StreamPurpose purpose) {
    return Rng(stream_id(seed, frame, round, purpose));
}

/// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double scale = std::sqrt(variance / 2.0);
    const double re = nd(rng);
    const double im = nd(rng);
    return {scale * re, scale * im};
}

}  // namespace tpc
