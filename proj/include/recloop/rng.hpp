#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace recloop {

// splitmix64 step; also used as the mixing function for seed derivation.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a) {
    return mix64(base ^ mix64(a));
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
    return derive_seed(derive_seed(base, a), b);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
    return derive_seed(derive_seed(base, a, b), c);
}

/// Deterministic counter-based generator. All stochastic components take an
/// explicit Rng so that per-user streams stay independent of scheduling.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms so the
    /// stream position per draw is fixed (no pair caching).
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

private:
    uint64_t state_;
};

} // namespace recloop
