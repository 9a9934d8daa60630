#pragma once

#include <cstdint>

namespace plq {

/// splitmix64 finalizer. All seeded randomness in the library flows through
/// this mixer so results are reproducible across platforms.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

/// Seed of sub-stream k of `seed`. Used for dropout pass streams,
/// quality-repetition seeds and per-(image, size) mask placement.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t k) noexcept {
    return mix64(mix64(seed ^ 0xA3C59AC2B7EC6F35ULL) + (k + 1) * 0x9E3779B97F4A7C15ULL);
}

/// Deterministic generator producing the splitmix64 sequence.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) noexcept {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
    }

    /// Uniform double in [lo, hi).
    double next_in(double lo, double hi) noexcept {
        return lo + next_double() * (hi - lo);
    }

private:
    std::uint64_t state_;
};

} // namespace plq
