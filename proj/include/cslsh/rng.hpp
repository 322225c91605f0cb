// rng.hpp
//
// Seed derivation and the random engines used across the library.
//
// Every random stream is identified by a 64-bit key obtained from the master
// seed by folding in a path of (scope tag, index) pairs:
//
//     key' = mix64(key ^ mix64(fnv1a64(tag) + golden * (index + 1)))
//
// where mix64 is the SplitMix64 finalizer. Engines are xoshiro256** seeded
// from the key through SplitMix64. Distributions are implemented here rather
// than taken from <random> because the standard distributions are not
// specified bit-for-bit and experiments must replay identically everywhere.
#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace cslsh {

__extension__ using u128 = unsigned __int128;

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

struct SplitMix64 {
    std::uint64_t state;
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state(seed) {}
    constexpr std::uint64_t next() noexcept {
        state += kGolden;
        return mix64(state);
    }
};

/// xoshiro256** by Blackman and Vigna. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed) noexcept {
        SplitMix64 sm(seed);
        for (auto& word : s_) word = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        u128 m = static_cast<u128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<u128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Standard normal deviate (Marsaglia polar method, one value per call).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0, v = 0, s = 0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0;
    bool has_spare_ = false;
};

/// Position in the seed derivation tree. Cheap to copy; derive() never mutates.
class RngSeed {
public:
    constexpr RngSeed() noexcept = default;
    explicit constexpr RngSeed(std::uint64_t master) noexcept : key_(mix64(master)) {}

    [[nodiscard]] constexpr RngSeed derive(std::string_view scope, std::uint64_t index) const noexcept {
        RngSeed child;
        child.key_ = mix64(key_ ^ mix64(fnv1a64(scope) + kGolden * (index + 1)));
        return child;
    }

    /// Restores a node from its stored key (deserialization).
    static constexpr RngSeed from_key(std::uint64_t key) noexcept {
        RngSeed s;
        s.key_ = key;
        return s;
    }

    [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] Xoshiro256 stream() const noexcept { return Xoshiro256(key_); }

    friend constexpr bool operator==(RngSeed, RngSeed) noexcept = default;

private:
    std::uint64_t key_ = mix64(0);
};

inline Xoshiro256 derive_rng(const RngSeed& seed, std::string_view scope, std::uint64_t index) {
    return seed.derive(scope, index).stream();
}

}  // namespace cslsh
