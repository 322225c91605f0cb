// adaptive_query.hpp
//
// Parameter-free exact nearest neighbor query over an ensemble of R LSH
// Forests with L' trees each.
//
//   for j = 1, 2, 4, ..., L':
//     i <- smallest level where the first j trees of at least half the
//          forests see at most 10 i j collisions (K if there is none)
//     in every forest run confirmation sampling (t = 3) at levels i and i-1,
//     each capped at j buckets and 10 i j inspected points
//     stop if a quarter of the forests terminated at level i, or a quarter
//     terminated at level i-1; report the closest point seen
//     if j = L': bottom-up phase (see bottom_up_phase)
//
// Forests advance in lock-step rounds of one bucket each, and the quorum is
// checked after every round, so work stops as soon as the outcome is known.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cslsh/confirmation_sampling.hpp"
#include "cslsh/core.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/lsh_forest.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

struct AdaptiveConfig {
    unsigned t = 3;
    double collision_cap = 10.0;      // budget 10 i j
    double level_fraction = 0.5;      // forests that must satisfy the cap when choosing i
    double quorum_fraction = 0.25;    // terminations needed to report
    double restart_fraction = 0.5;    // forests done with tree L' before the bottom-up phase descends

    friend bool operator==(const AdaptiveConfig&, const AdaptiveConfig&) = default;
};

/// ceil(fraction * R), at least 1.
inline unsigned quorum_size(unsigned forests, double fraction) {
    return std::max(1U, static_cast<unsigned>(std::ceil(fraction * forests - 1e-9)));
}

/// Work currency. "collisions_inspected" counts every distance computation,
/// including the one spent on a uniform fallback draw.
struct CostCounters {
    std::size_t hash_evaluations = 0;
    std::size_t collisions_inspected = 0;
    std::size_t buckets_opened = 0;
    std::size_t node_visits = 0;
    std::size_t fallbacks = 0;

    [[nodiscard]] std::size_t work() const noexcept { return hash_evaluations + collisions_inspected; }

    CostCounters& operator+=(const CostCounters& o) noexcept {
        hash_evaluations += o.hash_evaluations;
        collisions_inspected += o.collisions_inspected;
        buckets_opened += o.buckets_opened;
        node_visits += o.node_visits;
        fallbacks += o.fallbacks;
        return *this;
    }
    friend bool operator==(const CostCounters&, const CostCounters&) = default;
};

/// R = max(1, ceil(c_R ln n)); L' = largest power of two <= L / R, at least 1.
struct EnsembleShape {
    unsigned forests = 1;
    unsigned trees_per_forest = 1;

    static EnsembleShape for_budget(std::size_t n, unsigned total_trees, double c_r = 8.0) {
        if (total_trees == 0) throw input_error("total tree budget L must be positive");
        if (!(c_r > 0)) throw input_error("c_R must be positive");
        EnsembleShape s;
        s.forests = std::max(1U, static_cast<unsigned>(std::ceil(c_r * std::log(static_cast<double>(std::max<std::size_t>(n, 1))))));
        const unsigned per = total_trees / s.forests;
        s.trees_per_forest = per == 0 ? 1U : std::bit_floor(per);
        return s;
    }
};

class ForestEnsemble {
public:
    ForestEnsemble(const Dataset& data, const LshFamily& family, unsigned depth, EnsembleShape shape, RngSeed seed,
                   AdaptiveConfig config = {})
        : data_(&data), shape_(shape), seed_(seed), config_(config) {
        if (shape.forests == 0 || shape.trees_per_forest == 0) throw input_error("ensemble shape must be positive");
        if (!std::has_single_bit(shape.trees_per_forest)) throw input_error("trees per forest must be a power of two");
        forests_.reserve(shape.forests);
        for (unsigned r = 0; r < shape.forests; ++r)
            forests_.emplace_back(data, family, depth, shape.trees_per_forest, seed.derive("forest", r));
    }

    static ForestEnsemble from_parts(const Dataset& data, EnsembleShape shape, RngSeed seed, AdaptiveConfig config,
                                     std::vector<Forest> forests) {
        ForestEnsemble e;
        e.data_ = &data;
        e.shape_ = shape;
        e.seed_ = seed;
        e.config_ = config;
        e.forests_ = std::move(forests);
        return e;
    }

    [[nodiscard]] const Dataset& dataset() const noexcept { return *data_; }
    [[nodiscard]] unsigned forest_count() const noexcept { return static_cast<unsigned>(forests_.size()); }
    [[nodiscard]] unsigned trees_per_forest() const noexcept { return shape_.trees_per_forest; }
    [[nodiscard]] unsigned depth() const noexcept { return forests_.front().depth(); }
    [[nodiscard]] const Forest& forest(unsigned r) const { return forests_.at(r); }
    [[nodiscard]] const RngSeed& seed() const noexcept { return seed_; }
    [[nodiscard]] const AdaptiveConfig& config() const noexcept { return config_; }
    void set_config(const AdaptiveConfig& c) noexcept { config_ = c; }
    [[nodiscard]] EnsembleShape shape() const noexcept { return shape_; }
    [[nodiscard]] const LshFamily& family() const noexcept { return forests_.front().family(); }

private:
    ForestEnsemble() = default;

    const Dataset* data_ = nullptr;
    EnsembleShape shape_;
    RngSeed seed_;
    AdaptiveConfig config_;
    std::vector<Forest> forests_;
};

enum class SearchPhase : std::uint8_t { doubling, bottom_up };

/// State of one forest's confirmation sampling at one level.
struct LevelRun {
    unsigned level = 0;
    ConfirmationSampler<Candidate> sampler;
    unsigned buckets = 0;       // trees consumed
    std::size_t collisions = 0; // points inspected (fallbacks count one)
    bool exhausted = false;

    LevelRun(unsigned lvl, unsigned t) : level(lvl), sampler(t) {}
    [[nodiscard]] bool terminated() const noexcept { return sampler.done(); }
    [[nodiscard]] bool active() const noexcept { return !terminated() && !exhausted; }
};

struct ForestStatus {
    bool terminated_upper = false;  // level i
    bool terminated_lower = false;  // level i - 1
    std::optional<Candidate> best_upper;
    std::optional<Candidate> best_lower;
};

/// Optional instrumentation of one query.
struct AdaptiveTrace {
    std::vector<unsigned> chosen_levels;            // one per doubling step
    std::vector<std::size_t> level_scan_visits;     // max node visits of one forest's scan, per step
    std::vector<unsigned> bottom_up_levels;         // levels visited by the bottom-up phase
    std::size_t max_round_spread = 0;               // max - min buckets consumed across live forests
};

struct AdaptiveResult {
    Candidate best;
    CostCounters cost;
    SearchPhase phase = SearchPhase::doubling;
    unsigned final_level = 0;
    unsigned final_trees = 0;
};

inline bool quorum_check(const std::vector<ForestStatus>& statuses, double fraction);

/// SearchState of one query. Owns per-tree descent caches, per-forest random
/// streams and counters. Not thread-safe; one instance per query.
class AdaptiveSearch {
public:
    AdaptiveSearch(const ForestEnsemble& ensemble, PointView q, const RngSeed& query_seed,
                   AdaptiveTrace* trace = nullptr)
        : ens_(&ensemble), q_(q), trace_(trace), R_(ensemble.forest_count()), trees_(ensemble.trees_per_forest()),
          depth_(ensemble.depth()), cost_(R_), paths_(static_cast<std::size_t>(R_) * trees_), strings_(paths_.size()) {
        ensemble.dataset().check_query(q);
        rngs_.reserve(R_);
        for (unsigned r = 0; r < R_; ++r) rngs_.push_back(query_seed.derive("forest", r).stream());
    }

    /// Smallest level i in [1, K] where at least half of the forests see at most
    /// cap * i * j collisions in their first j trees; K if none.
    unsigned choose_level(unsigned j) {
        const auto& cfg = ens_->config();
        const unsigned needed = quorum_size(R_, cfg.level_fraction);
        std::vector<std::size_t> visits_before(R_);
        for (unsigned r = 0; r < R_; ++r) visits_before[r] = cost_[r].node_visits;
        unsigned chosen = depth_;
        for (unsigned i = 1; i <= depth_; ++i) {
            const double cap = cfg.collision_cap * i * j;
            unsigned satisfied = 0;
            for (unsigned r = 0; r < R_; ++r) {
                std::size_t total = 0;
                for (unsigned k = 0; k < j; ++k) total += tree_of(r, k).count_at(position(r, k, i));
                if (static_cast<double>(total) <= cap) ++satisfied;
            }
            if (satisfied >= needed) {
                chosen = i;
                break;
            }
        }
        if (trace_) {
            std::size_t worst = 0;
            for (unsigned r = 0; r < R_; ++r) worst = std::max(worst, cost_[r].node_visits - visits_before[r]);
            trace_->chosen_levels.push_back(chosen);
            trace_->level_scan_visits.push_back(worst);
        }
        return chosen;
    }

    /// Confirmation sampling at levels i and i-1 in every forest, each run
    /// limited to j buckets and cap * i * j inspected points. Stops early once
    /// the quorum is reached.
    std::vector<ForestStatus> run_level_pair(unsigned i, unsigned j) {
        if (i == 0 || i > depth_) throw input_error("level must be in [1, K]");
        const auto& cfg = ens_->config();
        const auto cap = static_cast<std::size_t>(std::floor(cfg.collision_cap * i * j));
        std::vector<LevelRun> upper, lower;
        upper.reserve(R_);
        lower.reserve(R_);
        for (unsigned r = 0; r < R_; ++r) {
            upper.emplace_back(i, cfg.t);
            lower.emplace_back(i - 1, cfg.t);
        }
        const unsigned quorum = quorum_size(R_, cfg.quorum_fraction);
        for (;;) {
            bool progressed = false;
            for (unsigned r = 0; r < R_; ++r) {
                progressed |= draw(r, upper[r], j, cap);
                progressed |= draw(r, lower[r], j, cap);
            }
            unsigned up = 0, lo = 0;
            for (unsigned r = 0; r < R_; ++r) {
                up += upper[r].terminated();
                lo += lower[r].terminated();
            }
            if (up >= quorum || lo >= quorum || !progressed) break;
        }
        std::vector<ForestStatus> out(R_);
        for (unsigned r = 0; r < R_; ++r) {
            out[r] = {upper[r].terminated(), lower[r].terminated(), upper[r].sampler.best(), lower[r].sampler.best()};
        }
        return out;
    }

    /// Lock-step confirmation sampling from `start` downwards: one bucket per
    /// live forest per round, no collision cap. Once half of the forests have
    /// used tree L' the level drops by one and every forest starts over. At
    /// level 0 each bucket is the whole dataset, so draws are not limited by
    /// the tree count and termination is certain. Returns on a quarter of the
    /// forests terminating.
    void bottom_up_phase(unsigned start) {
        const auto& cfg = ens_->config();
        const unsigned quorum = quorum_size(R_, cfg.quorum_fraction);
        const unsigned restart = quorum_size(R_, cfg.restart_fraction);
        for (unsigned level = start;; --level) {
            if (trace_) trace_->bottom_up_levels.push_back(level);
            final_level_ = level;
            std::vector<LevelRun> runs;
            runs.reserve(R_);
            for (unsigned r = 0; r < R_; ++r) runs.emplace_back(level, cfg.t);
            const unsigned limit = level == 0 ? ~0U : trees_;
            for (;;) {
                for (unsigned r = 0; r < R_; ++r) draw(r, runs[r], limit, kNoCap);
                unsigned done = 0, explored = 0;
                unsigned lo = ~0U, hi = 0;
                for (unsigned r = 0; r < R_; ++r) {
                    done += runs[r].terminated();
                    explored += runs[r].buckets >= trees_;
                    if (runs[r].active()) {
                        lo = std::min(lo, runs[r].buckets);
                        hi = std::max(hi, runs[r].buckets);
                    }
                }
                if (trace_ && hi >= lo) trace_->max_round_spread = std::max<std::size_t>(trace_->max_round_spread, hi - lo);
                if (done >= quorum) return;
                if (level > 0 && explored >= restart) break;
            }
            if (level == 0) return;
        }
    }

    AdaptiveResult run() {
        const auto& cfg = ens_->config();
        AdaptiveResult res;
        for (unsigned j = 1;; j *= 2) {
            const unsigned i = choose_level(j);
            res.final_level = i;
            res.final_trees = j;
            const auto statuses = run_level_pair(i, j);
            if (quorum_check(statuses, cfg.quorum_fraction)) break;
            if (j >= trees_) {
                res.phase = SearchPhase::bottom_up;
                bottom_up_phase(i - 1);
                res.final_level = final_level_;
                res.final_trees = trees_;
                break;
            }
        }
        res.best = best_ ? *best_ : uniform_point();
        res.cost = cost();
        return res;
    }

    [[nodiscard]] CostCounters cost() const {
        CostCounters total;
        for (const auto& c : cost_) total += c;
        return total;
    }
    [[nodiscard]] const std::vector<CostCounters>& forest_costs() const noexcept { return cost_; }
    [[nodiscard]] const std::optional<Candidate>& best_seen() const noexcept { return best_; }

    /// |S_{i,k}(q)| in forest r, tree k (0-based), via the descent cache.
    std::size_t collision_count(unsigned r, unsigned k, unsigned level) { return tree_of(r, k).count_at(position(r, k, level)); }

private:
    struct QueryString {
        HashString bits;
        unsigned evaluated = 0;
    };

    [[nodiscard]] const ForestTrie& tree_of(unsigned r, unsigned k) const { return ens_->forest(r).tree(k); }

    std::uint8_t query_bit(unsigned r, unsigned k, unsigned level) {
        auto& qs = strings_[static_cast<std::size_t>(r) * trees_ + k];
        while (qs.evaluated < level) {
            ++qs.evaluated;
            qs.bits.push_back(tree_of(r, k).hash_level(q_, qs.evaluated));
            ++cost_[r].hash_evaluations;
        }
        return qs.bits.at(level);
    }

    TriePosition position(unsigned r, unsigned k, unsigned level) {
        auto& path = paths_[static_cast<std::size_t>(r) * trees_ + k];
        if (path.empty()) {
            path.push_back(TriePosition{});
            ++cost_[r].node_visits;
        }
        while (path.size() <= level) {
            const auto d = static_cast<unsigned>(path.size());
            path.push_back(tree_of(r, k).step(path.back(), query_bit(r, k, d)));
            ++cost_[r].node_visits;
        }
        return path[level];
    }

    Candidate uniform_point() {
        const auto& data = ens_->dataset();
        const PointId id{static_cast<std::uint32_t>(rngs_[0].below(data.size()))};
        return {data.distance(id, q_), id};
    }

    void observe(const Candidate& c) {
        if (!best_ || c < *best_) best_ = c;
    }

    /// Draws the next bucket of run `run` in forest r if limits allow.
    /// Returns whether a draw happened.
    bool draw(unsigned r, LevelRun& run, unsigned tree_limit, std::size_t collision_cap) {
        if (!run.active()) return false;
        if (run.buckets >= tree_limit) {
            run.exhausted = true;
            return false;
        }
        const auto& data = ens_->dataset();
        const unsigned k = run.level == 0 ? 0 : run.buckets;
        const auto pos = run.level == 0 ? TriePosition{} : position(r, k % trees_, run.level);
        const auto bucket = tree_of(r, k % trees_).bucket_at(pos);
        const std::size_t cost = std::max<std::size_t>(bucket.size(), 1);
        if (run.collisions + cost > collision_cap) {
            run.exhausted = true;
            return false;
        }
        run.collisions += cost;
        ++run.buckets;
        auto& counters = cost_[r];
        ++counters.buckets_opened;
        counters.collisions_inspected += cost;
        Candidate sample;
        if (bucket.empty()) {
            ++counters.fallbacks;
            const PointId id{static_cast<std::uint32_t>(rngs_[r].below(data.size()))};
            sample = {data.distance(id, q_), id};
        } else {
            sample = {data.distance(bucket.front(), q_), bucket.front()};
            for (std::size_t m = 1; m < bucket.size(); ++m) {
                const Candidate c{data.distance(bucket[m], q_), bucket[m]};
                if (c < sample) sample = c;
            }
        }
        observe(sample);
        run.sampler.offer(sample);
        return true;
    }


    static constexpr std::size_t kNoCap = static_cast<std::size_t>(-1);

    const ForestEnsemble* ens_;
    PointView q_;
    AdaptiveTrace* trace_;
    unsigned R_;
    unsigned trees_;
    unsigned depth_;
    std::vector<CostCounters> cost_;
    std::vector<std::vector<TriePosition>> paths_;
    std::vector<QueryString> strings_;
    std::vector<Xoshiro256> rngs_;
    std::optional<Candidate> best_;
    unsigned final_level_ = 0;
};

/// True iff at least ceil(fraction R) forests terminated at level i, or at
/// least that many terminated at level i - 1. The two levels are not pooled.
inline bool quorum_check(const std::vector<ForestStatus>& statuses, double fraction) {
    const unsigned needed = quorum_size(static_cast<unsigned>(statuses.size()), fraction);
    unsigned up = 0, lo = 0;
    for (const auto& s : statuses) {
        up += s.terminated_upper;
        lo += s.terminated_lower;
    }
    return up >= needed || lo >= needed;
}

/// Runs the full adaptive query. The query seed drives only the uniform
/// fallback draws; the ensemble's own randomness is fixed at build time.
inline AdaptiveResult adaptive_nearest_neighbor(const ForestEnsemble& ensemble, PointView q, const RngSeed& query_seed,
                                                AdaptiveTrace* trace = nullptr) {
    AdaptiveSearch search(ensemble, q, query_seed, trace);
    return search.run();
}

}  // namespace cslsh
