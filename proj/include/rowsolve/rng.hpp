#pragma once

#include <cstdint>

namespace rowsolve {

/// SplitMix64 counter-based generator (Steele, Lea, Flood 2014). Output i is
/// a fixed mix of (state0 + i * gamma), so any draw is addressable from
/// (seed, stream, counter) and independent streams come from distinct stream
/// ids. All distribution conversions are implemented here so sequences are
/// identical across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(mix(seed) ^ (0x9E3779B97F4A7C15ull * (stream + 1)))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), n >= 1, unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t rem = (~n + 1) % n;  // 2^64 mod n
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x < rem);
        return x % n;
    }

    /// Standard normal via Box-Muller (exactly two uniforms per pair).
    double next_gaussian();

    std::uint64_t counter() const { return state_; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rowsolve
