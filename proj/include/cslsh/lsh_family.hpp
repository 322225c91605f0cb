// lsh_family.hpp
//
// Monotone LSH families with closed-form collision probabilities:
//
//   bit sampling            h(x) = x[c], c uniform in [0, dim)     f(d) = 1 - d/dim
//   sign random projection  h(x) = [<r, x> >= 0], r ~ N(0, I)       f(theta) = 1 - theta/pi
//
// Hash values are single bits, so K concatenated values pack into one word.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cslsh/core.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

enum class FamilyKind : std::uint8_t { bit_sampling = 0, sign_random_projection = 1 };

inline std::string_view to_string(FamilyKind k) {
    return k == FamilyKind::bit_sampling ? "bit-sampling" : "sign-random-projection";
}

inline FamilyKind parse_family(std::string_view name) {
    if (name == "bit-sampling" || name == "bits") return FamilyKind::bit_sampling;
    if (name == "sign-random-projection" || name == "srp") return FamilyKind::sign_random_projection;
    throw input_error("unknown LSH family '" + std::string(name) + "'");
}

/// One sampled member h of a family.
struct HashSpec {
    FamilyKind kind = FamilyKind::bit_sampling;
    std::uint32_t coordinate = 0;  // bit sampling
    std::vector<float> direction;  // sign random projection

    /// Unchecked evaluation; x must come from a compatible dataset.
    [[nodiscard]] std::uint8_t operator()(PointView x) const noexcept {
        if (kind == FamilyKind::bit_sampling) return x.bit(coordinate) ? 1 : 0;
        return detail::dot(direction, x.reals) >= 0 ? 1 : 0;
    }

    friend bool operator==(const HashSpec&, const HashSpec&) = default;
};

/// Up to 64 concatenated one-bit hash values. Level l (1-based) is stored at
/// bit 64 - l so that prefixes compare as plain integer shifts.
class HashString {
public:
    static constexpr unsigned kMaxLength = 64;

    constexpr HashString() = default;
    constexpr HashString(std::uint64_t packed, unsigned length) : bits_(packed), length_(length) {}

    [[nodiscard]] constexpr unsigned length() const noexcept { return length_; }
    [[nodiscard]] constexpr std::uint64_t packed() const noexcept { return bits_; }

    /// Value at 1-based level l.
    [[nodiscard]] constexpr std::uint8_t at(unsigned level) const noexcept {
        return static_cast<std::uint8_t>((bits_ >> (64 - level)) & 1U);
    }

    /// The first i values, right-aligned; prefix(0) == 0.
    [[nodiscard]] constexpr std::uint64_t prefix(unsigned i) const noexcept { return i == 0 ? 0 : bits_ >> (64 - i); }

    constexpr void set(unsigned level, std::uint8_t value) noexcept {
        const std::uint64_t mask = std::uint64_t{1} << (64 - level);
        bits_ = value ? (bits_ | mask) : (bits_ & ~mask);
    }

    constexpr void push_back(std::uint8_t value) noexcept { set(++length_, value); }

    friend constexpr bool operator==(HashString, HashString) = default;

private:
    std::uint64_t bits_ = 0;
    unsigned length_ = 0;
};

class LshFamily {
public:
    LshFamily(FamilyKind kind, Metric metric, std::size_t dim) : kind_(kind), metric_(metric), dim_(dim) {
        if (dim == 0) throw input_error("family dimension must be positive");
        const bool ok = (kind == FamilyKind::bit_sampling && metric == Metric::hamming) ||
                        (kind == FamilyKind::sign_random_projection && metric == Metric::angular);
        if (!ok)
            throw input_error(std::string(to_string(kind)) + " is not a family for the " +
                              std::string(to_string(metric)) + " metric");
    }

    static LshFamily for_dataset(const Dataset& data) {
        return {data.metric() == Metric::hamming ? FamilyKind::bit_sampling : FamilyKind::sign_random_projection,
                data.metric(), data.dim()};
    }

    [[nodiscard]] FamilyKind kind() const noexcept { return kind_; }
    [[nodiscard]] Metric metric() const noexcept { return metric_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }

    [[nodiscard]] HashSpec sample_member(const RngSeed& seed) const {
        auto rng = seed.stream();
        HashSpec h;
        h.kind = kind_;
        if (kind_ == FamilyKind::bit_sampling) {
            h.coordinate = static_cast<std::uint32_t>(rng.below(dim_));
        } else {
            h.direction.resize(dim_);
            for (auto& v : h.direction) v = static_cast<float>(rng.normal());
        }
        return h;
    }

    [[nodiscard]] std::uint8_t evaluate(const HashSpec& h, PointView x) const {
        detail::check_compatible(metric_, dim_, x);
        return h(x);
    }

    [[nodiscard]] double max_distance() const noexcept {
        return kind_ == FamilyKind::bit_sampling ? static_cast<double>(dim_) : std::numbers::pi;
    }

    /// f(d); throws when d lies outside [0, max_distance()].
    [[nodiscard]] double collision_probability(double d) const {
        const double hi = max_distance();
        constexpr double slack = 1e-12;
        if (!(d >= -slack && d <= hi * (1 + slack)))
            throw input_error("distance " + std::to_string(d) + " outside the metric's range");
        return std::clamp(1.0 - d / hi, 0.0, 1.0);
    }

    friend bool operator==(const LshFamily&, const LshFamily&) = default;

private:
    FamilyKind kind_;
    Metric metric_;
    std::size_t dim_;
};

/// h_1(x) h_2(x) ... h_K(x).
inline HashString concat_hash(std::span<const HashSpec> members, PointView x) {
    if (members.empty() || members.size() > HashString::kMaxLength)
        throw input_error("concatenation width must be in [1, 64]");
    HashString s;
    for (const auto& h : members) s.push_back(h(x));
    return s;
}

}  // namespace cslsh
