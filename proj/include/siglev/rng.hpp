#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

namespace siglev {

// Counter-based stream RNG (splitmix64 core). Every (seed, stream) pair is an
// independent deterministic stream, so replicate-level work can be scheduled
// on any thread without perturbing the draws. Streams are cheap value types.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) {
        state_ = mix(mix(seed) ^ (stream * 0x9E3779B97F4A7C15ULL));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // uniform on [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal, Box-Muller with one cached value per pair
    double next_normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - next_unit();  // (0, 1]
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Exp(1) - 1 (mean 0, variance 1)
    double next_exp_centered() { return -std::log1p(-next_unit()) - 1.0; }

    // uniform integer in [0, n), Lemire multiply-shift with rejection
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = -n % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Stream id layout used by the simulation harness: one namespace per purpose
// so adding estimators or channels never shifts existing draws.
namespace streams {
enum Channel : std::uint64_t {
    covariates = 0,
    noise = 1,
    unlabeled = 2,
    subsample = 3,
    bootstrap = 4,
    folds = 5,
    split = 6,
};

inline std::uint64_t id(std::uint64_t replicate, Channel channel) {
    return (replicate << 3) | static_cast<std::uint64_t>(channel);
}
}  // namespace streams

}  // namespace siglev
