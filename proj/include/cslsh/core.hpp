// core.hpp
//
// Points, datasets, metrics and the query-induced total order.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace cslsh {

/// Bad arguments or inputs violating a documented precondition.
class input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file contents. Carries the byte offset (or row) where parsing failed.
class format_error : public std::runtime_error {
public:
    format_error(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

enum class Metric : std::uint8_t { hamming = 0, euclidean = 1, angular = 2 };

inline std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::hamming: return "hamming";
        case Metric::euclidean: return "euclidean";
        case Metric::angular: return "angular";
    }
    return "?";
}

inline Metric parse_metric(std::string_view name) {
    if (name == "hamming") return Metric::hamming;
    if (name == "euclidean") return Metric::euclidean;
    if (name == "angular") return Metric::angular;
    throw input_error("unknown metric '" + std::string(name) + "'");
}

struct PointId {
    std::uint32_t index = 0;
    friend constexpr auto operator<=>(PointId, PointId) = default;
};

inline constexpr std::size_t words_for_bits(std::size_t dim) { return (dim + 63) / 64; }

/// Non-owning view of one point. Exactly one of the spans is non-empty.
struct PointView {
    std::span<const std::uint64_t> words;
    std::span<const float> reals;

    [[nodiscard]] bool is_binary() const noexcept { return !words.empty(); }

    /// Bit k of a packed bit vector; bit 0 is the leftmost coordinate.
    [[nodiscard]] bool bit(std::size_t k) const noexcept { return (words[k >> 6] >> (k & 63)) & 1U; }
};

/// Owning point, used for queries that are not part of a dataset.
struct Point {
    std::vector<std::uint64_t> words;
    std::vector<float> reals;

    [[nodiscard]] PointView view() const noexcept { return {words, reals}; }

    /// Parses "0101"-style strings; position 0 is the leftmost character.
    static Point from_bit_string(std::string_view bits) {
        Point p;
        p.words.assign(words_for_bits(bits.size()), 0);
        for (std::size_t k = 0; k < bits.size(); ++k) {
            if (bits[k] == '1') p.words[k >> 6] |= std::uint64_t{1} << (k & 63);
            else if (bits[k] != '0') throw input_error("bit string may only contain '0' and '1'");
        }
        if (p.words.empty()) throw input_error("empty bit string");
        return p;
    }

    static Point from_reals(std::vector<float> values) {
        Point p;
        p.reals = std::move(values);
        return p;
    }

    static Point copy_of(PointView v) {
        Point p;
        p.words.assign(v.words.begin(), v.words.end());
        p.reals.assign(v.reals.begin(), v.reals.end());
        return p;
    }
};

namespace detail {

inline double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * b[k];
    return s;
}

inline void check_compatible(Metric metric, std::size_t dim, PointView v) {
    if (metric == Metric::hamming) {
        if (v.words.size() != words_for_bits(dim) || !v.reals.empty())
            throw input_error("dimension mismatch: expected a packed bit vector of dimension " +
                              std::to_string(dim));
        if (dim % 64 != 0 && (v.words.back() >> (dim % 64)) != 0)
            throw input_error("bit vector has coordinates set beyond dimension " + std::to_string(dim));
    } else if (v.reals.size() != dim || !v.words.empty()) {
        throw input_error("dimension mismatch: expected a real vector of dimension " + std::to_string(dim));
    }
}

}  // namespace detail

/// Hamming: differing coordinates. Euclidean: L2. Angular: angle in radians.
/// Callers are expected to have validated shapes; see distance() for the checked form.
inline double distance_unchecked(Metric metric, PointView x, PointView y) noexcept {
    switch (metric) {
        case Metric::hamming: {
            std::uint64_t count = 0;
            for (std::size_t w = 0; w < x.words.size(); ++w) count += std::popcount(x.words[w] ^ y.words[w]);
            return static_cast<double>(count);
        }
        case Metric::euclidean: {
            double s = 0;
            for (std::size_t k = 0; k < x.reals.size(); ++k) {
                const double d = static_cast<double>(x.reals[k]) - y.reals[k];
                s += d * d;
            }
            return std::sqrt(s);
        }
        case Metric::angular: {
            const double nx = detail::dot(x.reals, x.reals);
            const double ny = detail::dot(y.reals, y.reals);
            if (nx == 0 || ny == 0) return std::numbers::pi / 2;
            const double c = detail::dot(x.reals, y.reals) / std::sqrt(nx * ny);
            return std::acos(std::clamp(c, -1.0, 1.0));
        }
    }
    return 0;
}

inline double distance(Metric metric, std::size_t dim, PointView x, PointView y) {
    detail::check_compatible(metric, dim, x);
    detail::check_compatible(metric, dim, y);
    if (metric == Metric::angular && (detail::dot(x.reals, x.reals) == 0 || detail::dot(y.reals, y.reals) == 0))
        throw input_error("angular distance is undefined for the zero vector");
    return distance_unchecked(metric, x, y);
}

/// An immutable, densely indexed point set.
class Dataset {
public:
    Dataset() = default;

    /// Packed bit vectors, words_for_bits(dim) words per point.
    static Dataset from_bits(std::size_t dim, std::vector<std::uint64_t> words) {
        if (dim == 0) throw input_error("dimension must be positive");
        const std::size_t wpp = words_for_bits(dim);
        if (words.empty() || words.size() % wpp != 0) throw input_error("bit data is empty or ragged");
        if (dim % 64 != 0) {
            const std::uint64_t mask = (std::uint64_t{1} << (dim % 64)) - 1;
            for (std::size_t i = wpp - 1; i < words.size(); i += wpp)
                if (words[i] & ~mask) throw input_error("bits set beyond the dimension");
        }
        Dataset d;
        d.metric_ = Metric::hamming;
        d.dim_ = dim;
        d.size_ = words.size() / wpp;
        d.words_ = std::move(words);
        d.check_size();
        return d;
    }

    static Dataset from_reals(Metric metric, std::size_t dim, std::vector<float> values) {
        if (metric == Metric::hamming) throw input_error("hamming datasets must use packed bit vectors");
        if (dim == 0) throw input_error("dimension must be positive");
        if (values.empty() || values.size() % dim != 0) throw input_error("real data is empty or ragged");
        Dataset d;
        d.metric_ = metric;
        d.dim_ = dim;
        d.size_ = values.size() / dim;
        d.reals_ = std::move(values);
        d.check_size();
        if (metric == Metric::angular)
            for (std::size_t i = 0; i < d.size_; ++i) {
                auto v = d.point(i).reals;
                if (detail::dot(v, v) == 0) throw input_error("angular dataset contains a zero vector");
            }
        return d;
    }

    static Dataset from_points(Metric metric, std::size_t dim, std::span<const Point> points) {
        std::vector<std::uint64_t> words;
        std::vector<float> reals;
        for (const auto& p : points) {
            detail::check_compatible(metric, dim, p.view());
            words.insert(words.end(), p.words.begin(), p.words.end());
            reals.insert(reals.end(), p.reals.begin(), p.reals.end());
        }
        return metric == Metric::hamming ? from_bits(dim, std::move(words))
                                         : from_reals(metric, dim, std::move(reals));
    }

    [[nodiscard]] Metric metric() const noexcept { return metric_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] bool is_binary() const noexcept { return metric_ == Metric::hamming; }
    [[nodiscard]] std::size_t words_per_point() const noexcept { return words_for_bits(dim_); }

    [[nodiscard]] PointView point(std::size_t i) const noexcept {
        if (is_binary()) {
            const std::size_t wpp = words_per_point();
            return {std::span(words_).subspan(i * wpp, wpp), {}};
        }
        return {{}, std::span(reals_).subspan(i * dim_, dim_)};
    }
    [[nodiscard]] PointView point(PointId id) const noexcept { return point(id.index); }

    void check_id(PointId id) const {
        if (id.index >= size_) throw input_error("point id " + std::to_string(id.index) + " out of range");
    }

    void check_query(PointView q) const {
        detail::check_compatible(metric_, dim_, q);
        if (metric_ == Metric::angular && detail::dot(q.reals, q.reals) == 0)
            throw input_error("angular query is the zero vector");
    }

    [[nodiscard]] double distance(PointId id, PointView q) const noexcept {
        return distance_unchecked(metric_, point(id), q);
    }

    [[nodiscard]] std::span<const std::uint64_t> raw_words() const noexcept { return words_; }
    [[nodiscard]] std::span<const float> raw_reals() const noexcept { return reals_; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    void check_size() const {
        if (size_ > 0xFFFFFFFFULL) throw input_error("dataset too large for 32-bit point ids");
    }

    Metric metric_ = Metric::hamming;
    std::size_t dim_ = 0;
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
    std::vector<float> reals_;
};

/// A point id together with its distance to the current query. Ordered by
/// (distance, id), which realizes the strict total order induced by the query;
/// equality is identity of the point.
struct Candidate {
    double distance = 0;
    PointId id;

    friend bool operator==(const Candidate& a, const Candidate& b) noexcept { return a.id == b.id; }
    friend bool operator<(const Candidate& a, const Candidate& b) noexcept {
        return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
    }
};

/// x precedes y iff (dist(q,x), id(x)) < (dist(q,y), id(y)).
class QueryOrder {
public:
    QueryOrder(const Dataset& data, PointView query) : data_(&data), query_(query) { data.check_query(query); }

    [[nodiscard]] Candidate candidate(PointId id) const noexcept { return {data_->distance(id, query_), id}; }

    [[nodiscard]] bool precedes(PointId x, PointId y) const {
        data_->check_id(x);
        data_->check_id(y);
        return candidate(x) < candidate(y);
    }

    [[nodiscard]] const Dataset& dataset() const noexcept { return *data_; }
    [[nodiscard]] PointView query() const noexcept { return query_; }

private:
    const Dataset* data_;
    PointView query_;
};

}  // namespace cslsh
