// generators.hpp
//
// Synthetic instances with materialized ground truth.
//
//   uniform-hamming   uniform random bit vectors; uniform random queries
//   planted-nn        uniform data; each query is a data point with
//                     `planted_distance` bits flipped, every other point at
//                     least `shell_distance` away (distance 0 gives copies)
//   dense-cluster     one point x* surrounded by cluster_size - 1 points that
//                     each differ from x* in one coordinate of a fixed set B;
//                     queries flip `planted_distance` coordinates of x* outside
//                     B, so x* is the unique nearest neighbor and the cluster
//                     sits one step further out; background points are at
//                     least `shell_distance` from x*
//   gaussian-angular  unit vectors with i.i.d. normal coordinates; queries are
//                     data points plus normal noise of scale `noise`,
//                     renormalized (noise 0 gives uniform random queries)
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "cslsh/core.hpp"
#include "cslsh/oracle.hpp"
#include "cslsh/rng.hpp"

namespace cslsh {

enum class GeneratorKind : std::uint8_t { uniform_hamming, planted_nn, dense_cluster, gaussian_angular };

inline std::string_view to_string(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::uniform_hamming: return "uniform-hamming";
        case GeneratorKind::planted_nn: return "planted-nn";
        case GeneratorKind::dense_cluster: return "dense-cluster";
        case GeneratorKind::gaussian_angular: return "gaussian-angular";
    }
    return "?";
}

inline GeneratorKind parse_generator(std::string_view name) {
    if (name == "uniform-hamming" || name == "uniform") return GeneratorKind::uniform_hamming;
    if (name == "planted-nn" || name == "planted") return GeneratorKind::planted_nn;
    if (name == "dense-cluster" || name == "cluster") return GeneratorKind::dense_cluster;
    if (name == "gaussian-angular" || name == "angular") return GeneratorKind::gaussian_angular;
    throw input_error("unknown generator '" + std::string(name) + "'");
}

struct InstanceSpec {
    GeneratorKind kind = GeneratorKind::planted_nn;
    std::size_t n = 1000;
    std::size_t dim = 64;
    std::size_t queries = 100;
    unsigned planted_distance = 1;
    unsigned shell_distance = 8;
    std::size_t cluster_size = 256;  // including the nearest neighbor itself
    unsigned cluster_bits = 32;      // |B|
    double noise = 0.3;
    std::uint64_t seed = 1;

    friend bool operator==(const InstanceSpec&, const InstanceSpec&) = default;
};

struct Instance {
    InstanceSpec spec;
    Dataset data;
    Dataset queries;
    std::vector<Candidate> truth;  // brute-force nearest neighbor of each query
};

namespace detail {

inline void random_bits(Xoshiro256& rng, std::size_t dim, std::uint64_t* out) {
    const std::size_t wpp = words_for_bits(dim);
    for (std::size_t w = 0; w < wpp; ++w) out[w] = rng();
    if (dim % 64) out[wpp - 1] &= (std::uint64_t{1} << (dim % 64)) - 1;
}

inline void flip(std::uint64_t* words, std::size_t k) { words[k >> 6] ^= std::uint64_t{1} << (k & 63); }

inline unsigned hamming(const std::uint64_t* a, const std::uint64_t* b, std::size_t wpp) {
    unsigned d = 0;
    for (std::size_t w = 0; w < wpp; ++w) d += static_cast<unsigned>(std::popcount(a[w] ^ b[w]));
    return d;
}

/// `count` distinct values from `pool`, in random order (partial Fisher-Yates).
inline std::vector<std::size_t> choose(Xoshiro256& rng, std::vector<std::size_t> pool, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) std::swap(pool[k], pool[k + rng.below(pool.size() - k)]);
    pool.resize(count);
    return pool;
}

inline std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

inline std::vector<Candidate> ground_truth(const Dataset& data, const Dataset& queries) {
    std::vector<Candidate> truth;
    truth.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) truth.push_back(brute_force_nn(data, queries.point(i)));
    return truth;
}

inline Instance uniform_hamming(const InstanceSpec& s, const RngSeed& seed) {
    const std::size_t wpp = words_for_bits(s.dim);
    std::vector<std::uint64_t> data(s.n * wpp), qs(s.queries * wpp);
    auto rng = seed.derive("data", 0).stream();
    for (std::size_t i = 0; i < s.n; ++i) random_bits(rng, s.dim, &data[i * wpp]);
    auto qrng = seed.derive("queries", 0).stream();
    for (std::size_t i = 0; i < s.queries; ++i) random_bits(qrng, s.dim, &qs[i * wpp]);
    return {s, Dataset::from_bits(s.dim, std::move(data)), Dataset::from_bits(s.dim, std::move(qs)), {}};
}

inline Instance planted_nn(const InstanceSpec& s, const RngSeed& seed) {
    if (s.planted_distance >= s.shell_distance)
        throw input_error("planted distance must be smaller than the far-shell distance");
    if (s.planted_distance > s.dim) throw input_error("planted distance exceeds the dimension");
    const std::size_t wpp = words_for_bits(s.dim);
    std::vector<std::uint64_t> data(s.n * wpp), qs(s.queries * wpp);
    auto rng = seed.derive("data", 0).stream();
    for (std::size_t i = 0; i < s.n; ++i) random_bits(rng, s.dim, &data[i * wpp]);
    auto qrng = seed.derive("queries", 0).stream();
    constexpr int kAttempts = 10000;
    for (std::size_t i = 0; i < s.queries; ++i) {
        std::uint64_t* q = &qs[i * wpp];
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            const std::size_t x = qrng.below(s.n);
            std::copy_n(&data[x * wpp], wpp, q);
            for (std::size_t k : choose(qrng, iota(s.dim), s.planted_distance)) flip(q, k);
            placed = true;
            for (std::size_t y = 0; y < s.n && placed; ++y)
                if (y != x && hamming(q, &data[y * wpp], wpp) < s.shell_distance) placed = false;
        }
        if (!placed)
            throw input_error("could not plant a query with every other point beyond the shell; "
                              "increase the dimension or lower the shell distance");
    }
    return {s, Dataset::from_bits(s.dim, std::move(data)), Dataset::from_bits(s.dim, std::move(qs)), {}};
}

inline Instance dense_cluster(const InstanceSpec& s, const RngSeed& seed) {
    if (s.cluster_size == 0 || s.cluster_size > s.n) throw input_error("cluster size must be in [1, n]");
    if (s.cluster_bits == 0 || s.cluster_bits + s.planted_distance > s.dim)
        throw input_error("cluster coordinates plus query flips must fit in the dimension");
    if (s.planted_distance + 1 >= s.shell_distance)
        throw input_error("far-shell distance must exceed the cluster's distance to the query");
    const std::size_t wpp = words_for_bits(s.dim);
    std::vector<std::uint64_t> data(s.n * wpp), qs(s.queries * wpp);
    auto rng = seed.derive("data", 0).stream();
    std::vector<std::uint64_t> centre(wpp);
    random_bits(rng, s.dim, centre.data());
    const auto coords = choose(rng, iota(s.dim), s.dim);
    const std::vector<std::size_t> in_b(coords.begin(), coords.begin() + s.cluster_bits);
    const std::vector<std::size_t> out_b(coords.begin() + s.cluster_bits, coords.end());

    // Background first, then the cluster, so point ids do not reveal the answer.
    const std::size_t background = s.n - s.cluster_size;
    for (std::size_t i = 0; i < background; ++i) {
        std::uint64_t* p = &data[i * wpp];
        do random_bits(rng, s.dim, p);
        while (hamming(p, centre.data(), wpp) < s.shell_distance + s.planted_distance);
    }
    std::copy_n(centre.data(), wpp, &data[background * wpp]);
    for (std::size_t c = 1; c < s.cluster_size; ++c) {
        std::uint64_t* p = &data[(background + c) * wpp];
        std::copy_n(centre.data(), wpp, p);
        flip(p, in_b[rng.below(in_b.size())]);
    }
    auto qrng = seed.derive("queries", 0).stream();
    for (std::size_t i = 0; i < s.queries; ++i) {
        std::uint64_t* q = &qs[i * wpp];
        std::copy_n(centre.data(), wpp, q);
        for (std::size_t k : choose(qrng, out_b, s.planted_distance)) flip(q, k);
    }
    return {s, Dataset::from_bits(s.dim, std::move(data)), Dataset::from_bits(s.dim, std::move(qs)), {}};
}

inline void normal_unit(Xoshiro256& rng, float* out, std::size_t dim) {
    double norm = 0;
    do {
        norm = 0;
        for (std::size_t k = 0; k < dim; ++k) {
            out[k] = static_cast<float>(rng.normal());
            norm += static_cast<double>(out[k]) * out[k];
        }
    } while (norm == 0);
    const double inv = 1.0 / std::sqrt(norm);
    for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<float>(out[k] * inv);
}

inline Instance gaussian_angular(const InstanceSpec& s, const RngSeed& seed) {
    if (!(s.noise >= 0)) throw input_error("noise must be nonnegative");
    std::vector<float> data(s.n * s.dim), qs(s.queries * s.dim);
    auto rng = seed.derive("data", 0).stream();
    for (std::size_t i = 0; i < s.n; ++i) normal_unit(rng, &data[i * s.dim], s.dim);
    auto qrng = seed.derive("queries", 0).stream();
    for (std::size_t i = 0; i < s.queries; ++i) {
        float* q = &qs[i * s.dim];
        if (s.noise == 0) {
            normal_unit(qrng, q, s.dim);
            continue;
        }
        const std::size_t x = qrng.below(s.n);
        std::vector<float> noise(s.dim);
        normal_unit(qrng, noise.data(), s.dim);
        double norm = 0;
        for (std::size_t k = 0; k < s.dim; ++k) {
            q[k] = static_cast<float>(data[x * s.dim + k] + s.noise * noise[k]);
            norm += static_cast<double>(q[k]) * q[k];
        }
        if (norm == 0) throw input_error("noise cancelled a data point exactly; choose another seed");
        for (std::size_t k = 0; k < s.dim; ++k) q[k] = static_cast<float>(q[k] / std::sqrt(norm));
    }
    return {s, Dataset::from_reals(Metric::angular, s.dim, std::move(data)),
            Dataset::from_reals(Metric::angular, s.dim, std::move(qs)), {}};
}

}  // namespace detail

/// Builds the instance and its brute-force ground truth. Deterministic in spec.seed.
inline Instance generate(const InstanceSpec& spec) {
    if (spec.n == 0) throw input_error("instance needs n >= 1");
    if (spec.dim == 0) throw input_error("instance needs dim >= 1");
    if (spec.queries == 0) throw input_error("instance needs at least one query");
    const RngSeed seed(spec.seed);
    Instance inst;
    switch (spec.kind) {
        case GeneratorKind::uniform_hamming: inst = detail::uniform_hamming(spec, seed); break;
        case GeneratorKind::planted_nn: inst = detail::planted_nn(spec, seed); break;
        case GeneratorKind::dense_cluster: inst = detail::dense_cluster(spec, seed); break;
        case GeneratorKind::gaussian_angular: inst = detail::gaussian_angular(spec, seed); break;
    }
    inst.truth = detail::ground_truth(inst.data, inst.queries);
    return inst;
}

}  // namespace cslsh
