#pragma once

#include <cmath>
#include <cstdint>

namespace jetsmc {

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood; Vigna's fixed-increment variant).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic splittable random stream. A stream is identified by its
/// 64-bit state; derive() produces an independent child stream keyed by one
/// or more integers, so trees of streams can be built that do not depend on
/// traversal order or worker count.
class RandomStream {
public:
    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed)
        : state_(detail::mix64(seed + UINT64_C(0x9E3779B97F4A7C15))) {}

    /// Child stream keyed by (key, keys...). Same parent + same keys -> same child.
    template <typename... Keys>
    RandomStream derive(std::uint64_t key, Keys... keys) const {
        RandomStream child;
        child.state_ = detail::mix64(state_ ^ (key + UINT64_C(0x9E3779B97F4A7C15) +
                                               (state_ << 6) + (state_ >> 2)));
        if constexpr (sizeof...(keys) > 0) {
            return child.derive(static_cast<std::uint64_t>(keys)...);
        } else {
            return child;
        }
    }

    std::uint64_t next_u64() {
        state_ += UINT64_C(0x9E3779B97F4A7C15);
        return detail::mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire-style rejection to avoid modulo bias.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one value per pair of uniforms).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        while (u1 == 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_ = 0;
};

}  // namespace jetsmc
