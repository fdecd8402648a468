#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace gcps {

/// Seedable 64-bit source used by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions below are written out by hand because the
/// standard library's distributions are implementation-defined, and runs must
/// be bit-reproducible across toolchains. Independent streams are derived
/// with SplitMix64 via `derive`.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double strictly inside (0, 1).
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    /// Exponential variate with the given rate (> 0).
    double exponential(double rate) { return -std::log(uniform()) / rate; }

    /// Unbiased integer in [0, n), n > 0.
    std::size_t index(std::size_t n) {
        const auto bound = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold) return static_cast<std::size_t>(x % bound);
        }
    }

    /// Seed of stream `stream` under `master`: SplitMix64 applied to both.
    static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
        return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace gcps
