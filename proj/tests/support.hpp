#pragma once

#include "abc/numerics.hpp"

#include <cstdint>

namespace abc::testing {

// SplitMix64: a tiny reproducible generator for property tests. Same seed, same sequence.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : s_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Uniform in [0,1) with 53 random bits.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {  // inclusive
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    TorusPoint point() { return {unit(), unit()}; }

private:
    std::uint64_t s_;
};

}  // namespace abc::testing
