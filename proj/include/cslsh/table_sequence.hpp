// table_sequence.hpp
//
// Exact nearest neighbor search over a sequence of independent LSH hash
// tables. Every draw queries a fresh table and yields the closest point in the
// query's bucket, or a uniformly random point when the bucket is empty; the
// confirmation stopping rule decides when to stop.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cslsh/confirmation_sampling.hpp"
#include "cslsh/core.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

class sequence_exhausted : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Work accounting for one query. One work unit is one hash evaluation or one
/// distance computation.
struct QueryStats {
    std::size_t tables_queried = 0;
    std::size_t distance_computations = 0;
    std::size_t hash_evaluations = 0;
    std::size_t empty_bucket_fallbacks = 0;
    std::size_t over_budget_draws = 0;

    [[nodiscard]] std::size_t work() const noexcept { return distance_computations + hash_evaluations; }
};

/// t = ceil(log2(1/delta)), at least 1.
inline unsigned confirmations_for(double delta) {
    if (!(delta > 0 && delta < 1)) throw input_error("failure probability must lie in (0, 1)");
    const double bits = std::log2(1.0 / delta);
    return std::max(1U, static_cast<unsigned>(std::ceil(bits - 1e-9)));
}

class HashTable {
public:
    HashTable(const Dataset& data, const LshFamily& family, unsigned width, const RngSeed& seed) {
        members_.reserve(width);
        for (unsigned level = 0; level < width; ++level) members_.push_back(family.sample_member(seed.derive("level", level)));
        for (std::size_t x = 0; x < data.size(); ++x)
            buckets_[key(data.point(x))].push_back(PointId{static_cast<std::uint32_t>(x)});
    }

    [[nodiscard]] std::uint64_t key(PointView x) const noexcept { return concat_hash(members_, x).packed(); }

    [[nodiscard]] std::span<const PointId> bucket(std::uint64_t key) const noexcept {
        auto it = buckets_.find(key);
        if (it == buckets_.end()) return {};
        return it->second;
    }

    [[nodiscard]] unsigned width() const noexcept { return static_cast<unsigned>(members_.size()); }
    [[nodiscard]] std::span<const HashSpec> members() const noexcept { return members_; }
    [[nodiscard]] std::size_t bucket_count() const noexcept { return buckets_.size(); }

    template <class F>
    void for_each_bucket(F&& f) const {
        for (const auto& [k, ids] : buckets_) f(k, std::span<const PointId>(ids));
    }

private:
    std::vector<HashSpec> members_;
    std::unordered_map<std::uint64_t, std::vector<PointId>> buckets_;
};

/// Smallest concatenation width k in [1, 64] for which the estimated expected
/// bucket size of a data point (excluding itself), (n - 1) E[f(d)^k], is at
/// most 1. The expectation is estimated over sampled pairs of data points.
inline unsigned default_concatenation_width(const Dataset& data, const LshFamily& family, const RngSeed& seed,
                                            std::size_t pairs = 1000) {
    if (data.size() < 2) return 1;
    auto rng = seed.derive("k-cat", 0).stream();
    std::vector<double> probs;
    probs.reserve(pairs);
    for (std::size_t s = 0; s < pairs; ++s) {
        const auto a = rng.below(data.size());
        auto b = rng.below(data.size() - 1);
        if (b >= a) ++b;
        probs.push_back(family.collision_probability(data.distance(PointId{static_cast<std::uint32_t>(a)},
                                                                   data.point(b))));
    }
    const double others = static_cast<double>(data.size() - 1);
    for (unsigned k = 1; k < HashString::kMaxLength; ++k) {
        double mean = 0;
        for (double p : probs) mean += std::pow(p, k);
        mean /= static_cast<double>(probs.size());
        if (others * mean <= 1.0) return k;
    }
    return HashString::kMaxLength;
}

/// Lazily materialized tables D_1, D_2, ..., D_{max_tables}. Table i depends
/// only on the seed and i, never on when it is first requested.
class TableSequence {
public:
    TableSequence(const Dataset& data, LshFamily family, unsigned width, std::size_t max_tables, RngSeed seed)
        : data_(&data), family_(std::move(family)), width_(width), max_tables_(max_tables), seed_(seed),
          tables_(max_tables), lock_(std::make_unique<std::mutex>()) {
        if (width == 0 || width > HashString::kMaxLength) throw input_error("concatenation width must be in [1, 64]");
        if (max_tables == 0) throw input_error("table sequence needs at least one table");
        if (family_.metric() != data.metric() || family_.dim() != data.dim())
            throw input_error("family does not match the dataset");
    }

    /// Table i, 1-based. Throws sequence_exhausted past max_tables().
    const HashTable& table(std::size_t i) {
        if (i == 0 || i > max_tables_) throw sequence_exhausted("table " + std::to_string(i) + " beyond the sequence");
        std::lock_guard guard(*lock_);
        auto& slot = tables_[i - 1];
        if (!slot) {
            slot = std::make_unique<HashTable>(*data_, family_, width_, seed_.derive("table", i));
            ++materialized_;
        }
        return *slot;
    }

    [[nodiscard]] std::size_t materialized() const {
        std::lock_guard guard(*lock_);
        return materialized_;
    }

    [[nodiscard]] const Dataset& dataset() const noexcept { return *data_; }
    [[nodiscard]] const LshFamily& family() const noexcept { return family_; }
    [[nodiscard]] unsigned width() const noexcept { return width_; }
    [[nodiscard]] std::size_t max_tables() const noexcept { return max_tables_; }
    [[nodiscard]] const RngSeed& seed() const noexcept { return seed_; }

private:
    const Dataset* data_;
    LshFamily family_;
    unsigned width_;
    std::size_t max_tables_;
    RngSeed seed_;
    std::vector<std::unique_ptr<HashTable>> tables_;
    std::size_t materialized_ = 0;
    std::unique_ptr<std::mutex> lock_;
};

namespace detail {

inline Candidate uniform_fallback(const Dataset& data, PointView q, Xoshiro256& rng, QueryStats& stats) {
    const PointId id{static_cast<std::uint32_t>(rng.below(data.size()))};
    ++stats.distance_computations;
    return {data.distance(id, q), id};
}

inline Candidate bucket_minimum(const Dataset& data, std::span<const PointId> bucket, PointView q, QueryStats& stats) {
    Candidate best{data.distance(bucket.front(), q), bucket.front()};
    for (std::size_t k = 1; k < bucket.size(); ++k) {
        const Candidate c{data.distance(bucket[k], q), bucket[k]};
        if (c < best) best = c;
    }
    stats.distance_computations += bucket.size();
    return best;
}

}  // namespace detail

/// One draw X from the query's sampling distribution using table i: the
/// closest point of the bucket S_i(q), or a uniform random point if empty.
inline Candidate sample_qq(TableSequence& seq, PointView q, std::size_t i, Xoshiro256& rng, QueryStats& stats) {
    const auto& table = seq.table(i);
    ++stats.tables_queried;
    stats.hash_evaluations += table.width();
    const auto bucket = table.bucket(table.key(q));
    if (bucket.empty()) {
        ++stats.empty_bucket_fallbacks;
        return detail::uniform_fallback(seq.dataset(), q, rng, stats);
    }
    return detail::bucket_minimum(seq.dataset(), bucket, q, stats);
}

struct NnResult {
    Candidate best;
    bool confirmed = false;
    QueryStats stats;
};

/// Confirmation sampling over tables 1, 2, ... with t = ceil(log2(1/delta)).
/// Running out of tables returns the best point seen, unconfirmed.
inline NnResult query_nn(TableSequence& seq, PointView q, double delta, Xoshiro256& rng) {
    seq.dataset().check_query(q);
    const unsigned t = confirmations_for(delta);
    NnResult out;
    std::size_t next = 1;
    auto draw = [&]() -> std::optional<Candidate> {
        if (next > seq.max_tables()) return std::nullopt;
        return sample_qq(seq, q, next++, rng, out.stats);
    };
    const auto cs = confirmation_sampling(draw, t);
    out.best = *cs.reported;
    out.confirmed = cs.confirmed();
    return out;
}

/// Fixed number of tables: rounds r = 1 .. ceil(log2 n), each running
/// confirmation sampling over tables 1..L with a cap of 2^r work units per
/// table. A table whose query would exceed the cap is cut short and
/// contributes a uniform random point instead; its charge never exceeds 2^r.
/// Returns the first confirmed result, or the best point seen if no round
/// confirms.
inline NnResult query_nn_budgeted(TableSequence& seq, PointView q, double delta, std::size_t tables_per_round,
                                  Xoshiro256& rng, std::vector<std::size_t>* round_work = nullptr) {
    const Dataset& data = seq.dataset();
    data.check_query(q);
    if (tables_per_round == 0 || tables_per_round > seq.max_tables())
        throw input_error("tables per round must be in [1, max_tables]");
    const unsigned t = confirmations_for(delta);
    const unsigned rounds = std::max(1U, static_cast<unsigned>(std::ceil(std::log2(static_cast<double>(data.size())))));
    NnResult out;
    std::optional<Candidate> global;
    for (unsigned r = 1; r <= rounds; ++r) {
        const std::size_t cap = std::size_t{1} << std::min(r, 62U);
        const std::size_t work_before = out.stats.work();
        std::size_t next = 1;
        auto draw = [&]() -> std::optional<Candidate> {
            if (next > tables_per_round) return std::nullopt;
            const auto& table = seq.table(next++);
            ++out.stats.tables_queried;
            const std::size_t hash_cost = table.width();
            std::span<const PointId> bucket;
            if (hash_cost < cap) bucket = table.bucket(table.key(q));
            if (hash_cost < cap && hash_cost + std::max<std::size_t>(bucket.size(), 1) <= cap) {
                out.stats.hash_evaluations += hash_cost;
                if (bucket.empty()) {
                    ++out.stats.empty_bucket_fallbacks;
                    return detail::uniform_fallback(data, q, rng, out.stats);
                }
                return detail::bucket_minimum(data, bucket, q, out.stats);
            }
            ++out.stats.over_budget_draws;
            out.stats.hash_evaluations += std::min(hash_cost, cap - 1);
            return detail::uniform_fallback(data, q, rng, out.stats);
        };
        const auto cs = confirmation_sampling(draw, t);
        if (round_work) round_work->push_back(out.stats.work() - work_before);
        if (cs.reported && (!global || *cs.reported < *global)) global = cs.reported;
        if (cs.confirmed()) {
            out.best = *cs.reported;
            out.confirmed = true;
            return out;
        }
    }
    out.best = *global;
    return out;
}

}  // namespace cslsh
