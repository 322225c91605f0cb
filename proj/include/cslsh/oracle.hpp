// oracle.hpp
//
// Ground truth used by tests and reports: brute-force nearest neighbor, the
// analytic distance profile C(i), T(i), i', OPT(L, K), the static "natural"
// query strategy, and a Monte Carlo simulator of the confirmation stopping
// rule that is independent of the library's own implementation.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "cslsh/confirmation_sampling.hpp"
#include "cslsh/core.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/lsh_forest.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

/// The minimum of the dataset under the query order; linear scan.
inline Candidate brute_force_nn(const Dataset& data, PointView q) {
    data.check_query(q);
    Candidate best{data.distance(PointId{0}, q), PointId{0}};
    for (std::size_t x = 1; x < data.size(); ++x) {
        const Candidate c{data.distance(PointId{static_cast<std::uint32_t>(x)}, q), PointId{static_cast<std::uint32_t>(x)}};
        if (c < best) best = c;
    }
    return best;
}

struct DistanceProfile {
    std::vector<double> distances;      // sorted ascending
    std::vector<double> probabilities;  // f(d) per point, same order as distances
    double p1 = 0;                      // collision probability of the nearest neighbor
    std::size_t n = 0;

    /// C(i) = sum_x p(q, x)^i.
    [[nodiscard]] double collisions(unsigned level) const {
        double sum = 0, comp = 0;
        for (double p : probabilities) {
            const double v = std::pow(p, static_cast<double>(level));
            const double s = sum + v;
            comp += std::abs(sum) >= std::abs(v) ? (sum - s) + v : (v - s) + sum;
            sum = s;
        }
        return sum + comp;
    }
};

inline DistanceProfile profile(const Dataset& data, const LshFamily& family, PointView q) {
    data.check_query(q);
    if (family.metric() != data.metric() || family.dim() != data.dim())
        throw input_error("family does not match the dataset");
    DistanceProfile prof;
    prof.n = data.size();
    prof.distances.reserve(data.size());
    for (std::size_t x = 0; x < data.size(); ++x) prof.distances.push_back(data.distance(PointId{static_cast<std::uint32_t>(x)}, q));
    std::sort(prof.distances.begin(), prof.distances.end());
    prof.probabilities.reserve(data.size());
    for (double d : prof.distances) prof.probabilities.push_back(family.collision_probability(d));
    prof.p1 = prof.probabilities.front();
    return prof;
}

struct OptReport {
    std::vector<double> collisions;  // C(i), i = 0..K
    std::vector<double> time;        // T(i) = (i + C(i)) / p1^i
    std::vector<bool> feasible;      // p1^i L >= ln n
    unsigned i_prime = 0;            // smallest i with C(i) <= i (may exceed K)
    std::optional<unsigned> i_star;  // argmin of T over feasible levels
    double opt = std::numeric_limits<double>::infinity();  // T(i*) ln n, +inf when infeasible

    [[nodiscard]] bool is_feasible() const noexcept { return i_star.has_value(); }
};

/// OPT(L, K) = min { ln n (i + C(i)) / p1^i : 0 <= i <= K, p1^i L >= ln n }.
inline OptReport opt_report(const DistanceProfile& prof, double trees, unsigned depth, std::size_t n) {
    if (n == 0) throw input_error("n must be positive");
    const double ln_n = std::log(static_cast<double>(n));
    OptReport rep;
    for (unsigned i = 0; i <= depth; ++i) {
        const double c = prof.collisions(i);
        const double p1i = std::pow(prof.p1, static_cast<double>(i));
        rep.collisions.push_back(c);
        rep.time.push_back(p1i > 0 ? (i + c) / p1i : std::numeric_limits<double>::infinity());
        const bool ok = p1i * trees >= ln_n;
        rep.feasible.push_back(ok);
        if (ok && rep.time.back() * ln_n < rep.opt) {
            rep.opt = rep.time.back() * ln_n;
            rep.i_star = i;
        }
    }
    // i' may lie beyond K; C(i) <= n always holds at i = n.
    std::vector<double> powers = prof.probabilities;
    for (unsigned i = 1;; ++i) {
        double sum = 0;
        for (double v : powers) sum += v;
        if (sum <= i) {
            rep.i_prime = i;
            break;
        }
        for (std::size_t k = 0; k < powers.size(); ++k) powers[k] *= prof.probabilities[k];
    }
    return rep;
}

struct NaturalResult {
    std::optional<Candidate> best;  // empty if every inspected bucket was empty
    std::size_t hash_evaluations = 0;
    std::size_t collisions = 0;

    [[nodiscard]] std::size_t work() const noexcept { return hash_evaluations + collisions; }
};

/// Inspect the first j buckets at level i and return the closest point found.
inline NaturalResult natural_algorithm(const Forest& forest, const Dataset& data, PointView q, unsigned level,
                                       unsigned trees) {
    data.check_query(q);
    if (level > forest.depth()) throw input_error("level exceeds forest depth");
    if (trees == 0 || trees > forest.tree_count()) throw input_error("tree count must be in [1, L]");
    NaturalResult res;
    for (unsigned j = 0; j < trees; ++j) {
        const auto& t = forest.tree(j);
        HashString s;
        for (unsigned l = 1; l <= level; ++l) s.push_back(t.hash_level(q, l));
        res.hash_evaluations += level;
        for (PointId id : t.bucket_at(t.descend(s, level))) {
            const Candidate c{data.distance(id, q), id};
            ++res.collisions;
            if (!res.best || c < *res.best) res.best = c;
        }
    }
    return res;
}

/// The static level rule of the original LSH Forest query: the smallest level
/// whose total collisions over the first L trees is at most c L. K if none.
inline unsigned static_level(const Forest& forest, PointView q, double c, unsigned trees) {
    std::vector<HashString> strings;
    for (unsigned j = 0; j < trees; ++j) strings.push_back(forest.tree(j).hash_query(q));
    for (unsigned i = 1; i <= forest.depth(); ++i) {
        double total = 0;
        for (unsigned j = 0; j < trees; ++j) total += static_cast<double>(forest.tree(j).count_at(forest.tree(j).descend(strings[j], i)));
        if (total <= c * trees) return i;
    }
    return forest.depth();
}

struct CsSimulation {
    std::vector<std::uint64_t> counts;  // how often each element was reported
    std::uint64_t runs = 0;
    double mean_samples = 0;
    double sample_variance = 0;

    [[nodiscard]] double frequency(std::size_t i) const { return static_cast<double>(counts[i]) / static_cast<double>(runs); }
    [[nodiscard]] double mean_standard_error() const { return std::sqrt(sample_variance / static_cast<double>(runs)); }
};

namespace detail {

// 16 lanes of 32-bit integers; the compiler maps these onto whatever vector
// registers the target has.
inline constexpr unsigned W = 16;
using lanes_u32 = std::uint32_t __attribute__((vector_size(64)));
using lanes_i32 = std::int32_t __attribute__((vector_size(64)));
using lanes_u64 = std::uint64_t __attribute__((vector_size(128)));
using lanes_f64 = double __attribute__((vector_size(128)));

#define CSLSH_LANES_ROTL(x, k) (((x) << (k)) | ((x) >> (32 - (k))))

/// Bit l set iff lane l is nonzero.
inline std::uint32_t lane_mask(lanes_u32 v) noexcept {
#if defined(__AVX512F__)
    const auto r = reinterpret_cast<__m512i>(v);
    return _mm512_test_epi32_mask(r, r);
#else
    std::uint32_t mask = 0;
    for (unsigned l = 0; l < W; ++l) mask |= (v[l] != 0 ? 1U : 0U) << l;
    return mask;
#endif
}

/// Walker/Vose alias table over 16 buckets for supports of at most 16
/// elements. A 32-bit draw u picks bucket u >> 28 and keeps it when
/// (u & 0x0FFFFFFF) < cut, otherwise returns alias.
struct AliasTable16 {
    lanes_u32 cut{}, alias{};
};

inline AliasTable16 alias_table16(const DiscreteDistribution& dist, std::size_t n) {
    constexpr long double kScale = 268435456.0L;  // 2^28
    std::array<long double, W> q{};
    for (std::size_t k = 0; k < n; ++k) q[k] = static_cast<long double>(dist[k]) * W;
    // Zero-mass buckets go on top of the small stack so they are paired first
    // and can never be left over.
    std::vector<unsigned> small, large;
    for (unsigned k = 0; k < W; ++k)
        if (q[k] > 0 && q[k] < 1) small.push_back(k);
    for (unsigned k = 0; k < W; ++k)
        if (q[k] == 0) small.push_back(k);
    for (unsigned k = 0; k < W; ++k)
        if (q[k] >= 1) large.push_back(k);
    AliasTable16 table;
    for (unsigned k = 0; k < W; ++k) {
        table.cut[k] = 1U << 28;
        table.alias[k] = k;
    }
    while (!small.empty() && !large.empty()) {
        const unsigned lo = small.back(), hi = large.back();
        small.pop_back();
        large.pop_back();
        table.cut[lo] = static_cast<std::uint32_t>(std::min(kScale, std::floor(q[lo] * kScale + 0.5L)));
        table.alias[lo] = hi;
        q[hi] = (q[hi] + q[lo]) - 1;
        (q[hi] < 1 ? small : large).push_back(hi);
    }
    for (unsigned k : small)
        if (q[k] < 0.5L) throw std::logic_error("alias table construction lost probability mass");
    return table;
}

}  // namespace detail

/// Independent replays of the stopping rule on an explicit distribution.
///
/// 16 replays advance in lock-step with per-lane xoshiro128++ streams.
/// Supports of at most 16 elements sample through an alias table; larger ones
/// use inverse-CDF sampling against 32-bit thresholds. Each lane owns a fixed share
/// of the runs, so the result does not depend on completion order. Lanes whose
/// share is complete keep drawing but are no longer recorded.
inline CsSimulation simulate_cs(const DiscreteDistribution& dist, unsigned t, std::uint64_t runs, const RngSeed& seed) {
    using detail::lanes_i32;
    using detail::lanes_u32;
    if (runs == 0) throw input_error("simulate_cs needs at least one run");
    if (t == 0) throw input_error("confirmation count t must be positive");
    constexpr unsigned W = detail::W;
    constexpr unsigned kMaxElements = 64;
    if (runs / W + 1 > 0xFFFFFFFFULL) throw input_error("simulate_cs supports at most 2^32 runs per lane");

    std::size_t n = dist.size();
    while (n > 1 && dist[n - 1] == 0) --n;  // trailing zeros are never drawn
    if (n > kMaxElements) throw input_error("simulate_cs supports at most 64 elements with nonzero probability");

    // Compared as signed integers after flipping the top bit, which preserves
    // the unsigned order and maps to native vector compares.
    std::array<std::int32_t, kMaxElements> thresholds{};
    {
        long double cdf = 0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            cdf += dist[k];
            const long double scaled = std::floor(cdf * 4294967296.0L + 0.5L);
            const std::uint32_t th = scaled >= 4294967295.0L ? 0xFFFFFFFFU : static_cast<std::uint32_t>(scaled);
            thresholds[k] = static_cast<std::int32_t>(th ^ 0x80000000U);
        }
    }
    const unsigned m = static_cast<unsigned>(n - 1);
    const bool use_alias = n <= W;
    const detail::AliasTable16 table = use_alias ? detail::alias_table16(dist, n) : detail::AliasTable16{};
    const auto beta_inf = static_cast<std::uint32_t>(n);

    lanes_u32 s0{}, s1{}, s2{}, s3{}, remaining{};
    for (unsigned l = 0; l < W; ++l) {
        auto rng = seed.derive("simulate-cs-lane", l).stream();
        const std::uint64_t a = rng(), b = rng();
        s0[l] = static_cast<std::uint32_t>(a);
        s1[l] = static_cast<std::uint32_t>(a >> 32);
        s2[l] = static_cast<std::uint32_t>(b);
        s3[l] = static_cast<std::uint32_t>(b >> 32) | 1U;
        remaining[l] = static_cast<std::uint32_t>(runs / W + (l < runs % W ? 1 : 0));
    }
    lanes_u32 beta = lanes_u32{} + beta_inf;
    lanes_u32 count{}, samples{};
    const lanes_u32 tt = lanes_u32{} + t;
    const lanes_u32 sign = lanes_u32{} + 0x80000000U;

    // Finished runs of lanes that still owe runs are appended, in lane order,
    // to a buffer that is tallied in batches.
    constexpr std::size_t kBatch = 4096;
    std::vector<std::uint32_t> done_value(kBatch + W), done_samples(kBatch + W);
    std::size_t fill = 0;
    // Four interleaved tallies keep consecutive records off each other's
    // dependency chains.
    std::vector<std::uint64_t> hist(4 * n, 0);
    std::array<std::uint64_t, 4> sum{};
    std::array<double, 4> sum_sq{};  // exact while each sum stays below 2^53
    const auto tally = [&] {
        for (std::size_t r = 0; r < fill; ++r) {
            const std::size_t j = r & 3;
            ++hist[j * n + done_value[r]];
            const std::uint32_t k = done_samples[r];
            sum[j] += k;
            sum_sq[j] += static_cast<double>(k) * k;
        }
        fill = 0;
    };
    for (;;) {
        const lanes_u32 raw = CSLSH_LANES_ROTL(s0 + s3, 7) + s0;
        const lanes_u32 sh = s1 << 9;
        s2 ^= s0;
        s3 ^= s1;
        s1 ^= s2;
        s0 ^= s3;
        s2 ^= sh;
        s3 = CSLSH_LANES_ROTL(s3, 11);

#if defined(__AVX512F__)
        // Branch-free: lanes finish every few steps, so a branch on completion
        // mispredicts often.
        const __m512i one = _mm512_set1_epi32(1);
        __m512i xv;
        if (use_alias) {
            const auto rv = reinterpret_cast<__m512i>(raw);
            const __m512i bucket = _mm512_srli_epi32(rv, 28);
            const __m512i low = _mm512_and_si512(rv, _mm512_set1_epi32(0x0FFFFFFF));
            const __m512i cut = _mm512_permutexvar_epi32(bucket, reinterpret_cast<__m512i>(table.cut));
            const __m512i alias = _mm512_permutexvar_epi32(bucket, reinterpret_cast<__m512i>(table.alias));
            xv = _mm512_mask_mov_epi32(alias, _mm512_cmplt_epu32_mask(low, cut), bucket);
        } else {
            const auto uv = reinterpret_cast<__m512i>(raw ^ sign);
            xv = _mm512_setzero_si512();
            for (unsigned k = 0; k < m; ++k)
                xv = _mm512_mask_add_epi32(xv, _mm512_cmpge_epi32_mask(uv, _mm512_set1_epi32(thresholds[k])), xv, one);
        }
        auto bv = reinterpret_cast<__m512i>(beta), cv = reinterpret_cast<__m512i>(count);
        auto sv = _mm512_add_epi32(reinterpret_cast<__m512i>(samples), one);
        auto rem = reinterpret_cast<__m512i>(remaining);
        const __mmask16 lt_m = _mm512_cmplt_epu32_mask(xv, bv);
        const __mmask16 eq_m = _mm512_cmpeq_epi32_mask(xv, bv);
        cv = _mm512_maskz_mov_epi32(static_cast<__mmask16>(~lt_m), _mm512_mask_add_epi32(cv, eq_m, cv, one));
        bv = _mm512_mask_mov_epi32(bv, lt_m, xv);
        const __mmask16 fin = _mm512_cmpge_epu32_mask(cv, reinterpret_cast<__m512i>(tt));
        const __mmask16 live = _mm512_mask_test_epi32_mask(fin, rem, rem);
        _mm512_storeu_si512(&done_value[fill], _mm512_maskz_compress_epi32(live, bv));
        _mm512_storeu_si512(&done_samples[fill], _mm512_maskz_compress_epi32(live, sv));
        fill += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(live)));
        rem = _mm512_mask_sub_epi32(rem, live, rem, one);
        bv = _mm512_mask_mov_epi32(bv, fin, _mm512_set1_epi32(static_cast<int>(beta_inf)));
        cv = _mm512_maskz_mov_epi32(static_cast<__mmask16>(~fin), cv);
        sv = _mm512_maskz_mov_epi32(static_cast<__mmask16>(~fin), sv);
        beta = reinterpret_cast<lanes_u32>(bv);
        count = reinterpret_cast<lanes_u32>(cv);
        samples = reinterpret_cast<lanes_u32>(sv);
        remaining = reinterpret_cast<lanes_u32>(rem);
        if (fill >= kBatch) tally();
        if (!_mm512_test_epi32_mask(rem, rem)) break;
#else
        lanes_u32 x{};
        if (use_alias) {
            const lanes_u32 bucket = raw >> 28;
            const lanes_u32 keep = reinterpret_cast<lanes_u32>((raw & 0x0FFFFFFFU) < __builtin_shuffle(table.cut, bucket));
            x = (bucket & keep) | (__builtin_shuffle(table.alias, bucket) & ~keep);
        } else {
            const auto u = reinterpret_cast<lanes_i32>(raw ^ sign);
            for (unsigned k = 0; k < m; ++k) x -= reinterpret_cast<lanes_u32>(u >= thresholds[k]);  // masks are -1
        }

        const lanes_u32 lt = reinterpret_cast<lanes_u32>(x < beta);
        const lanes_u32 eq = reinterpret_cast<lanes_u32>(x == beta);
        count = (count - eq) & ~lt;
        beta = (x & lt) | (beta & ~lt);
        samples += 1;

        const lanes_u32 fin = reinterpret_cast<lanes_u32>(count >= tt);
        std::uint32_t mask = detail::lane_mask(fin);
        if (!mask) continue;
        for (; mask; mask &= mask - 1) {
            const unsigned l = static_cast<unsigned>(std::countr_zero(mask));
            if (!remaining[l]) continue;
            --remaining[l];
            done_value[fill] = beta[l];
            done_samples[fill] = samples[l];
            ++fill;
        }
        beta = (beta & ~fin) | (fin & beta_inf);
        count &= ~fin;
        samples &= ~fin;
        if (fill >= kBatch) tally();
        if (!detail::lane_mask(remaining)) break;
#endif
    }
    tally();

    CsSimulation out;
    out.runs = runs;
    out.counts.assign(dist.size(), 0);
    for (std::size_t k = 0; k < n; ++k) out.counts[k] = hist[k] + hist[n + k] + hist[2 * n + k] + hist[3 * n + k];
    const std::uint64_t total = sum[0] + sum[1] + sum[2] + sum[3];
    const long double total_sq = static_cast<long double>(sum_sq[0]) + sum_sq[1] + sum_sq[2] + sum_sq[3];
    const long double mean = static_cast<long double>(total) / runs;
    out.mean_samples = static_cast<double>(mean);
    out.sample_variance = runs > 1 ? static_cast<double>((total_sq - runs * mean * mean) / (runs - 1)) : 0.0;
    return out;
}

}  // namespace cslsh
