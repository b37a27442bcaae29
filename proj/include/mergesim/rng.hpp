#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mergesim {

// SplitMix64 finalizer; used to derive independent stream seeds from
// (seed, stream id) pairs without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded random stream. Distributions are implemented by hand on top of
// mt19937_64 so that draw sequences are identical across standard library
// implementations; replays depend on this.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    static RngStream derive(std::uint64_t seed, std::uint64_t stream) {
        return RngStream(splitmix64(splitmix64(seed) ^ stream));
    }

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 random bits
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal, Box-Muller without caching the second value.
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mergesim
