#include <gtest/gtest.h>

#include <cmath>

#include "cslsh/generators.hpp"
#include "cslsh/oracle.hpp"

using namespace cslsh;

namespace {

Instance uniform(std::size_t n, std::size_t dim, std::uint64_t seed) {
    InstanceSpec s;
    s.kind = GeneratorKind::uniform_hamming;
    s.n = n;
    s.dim = dim;
    s.queries = 3;
    s.seed = seed;
    return generate(s);
}

}  // namespace

TEST(Profile, CollisionsAtZeroIsN) {
    const auto inst = uniform(77, 32, 1);
    const auto prof = profile(inst.data, LshFamily::for_dataset(inst.data), inst.queries.point(0));
    EXPECT_DOUBLE_EQ(prof.collisions(0), 77.0);
    EXPECT_TRUE(std::is_sorted(prof.distances.begin(), prof.distances.end()));
}

TEST(Profile, HalfProbabilityClosedForm) {
    // Every point at distance 4 of 8 bits: f = 1/2.
    const auto d = Dataset::from_bits(8, {0x0F, 0xF0, 0x33, 0xCC, 0x55});
    const auto q = Dataset::from_bits(8, {0x00});
    auto prof = profile(d, LshFamily::for_dataset(d), q.point(0));
    for (unsigned i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(prof.collisions(i), 5.0 * std::ldexp(1.0, -static_cast<int>(i)));
}

TEST(Profile, CollisionsDecayAtLeastByP1) {
    const auto inst = uniform(200, 64, 2);
    for (std::size_t qi = 0; qi < inst.queries.size(); ++qi) {
        const auto prof = profile(inst.data, LshFamily::for_dataset(inst.data), inst.queries.point(qi));
        const double p1 = prof.probabilities.front();
        for (unsigned i = 0; i < 40; ++i) EXPECT_LE(prof.collisions(i + 1), p1 * prof.collisions(i) * (1 + 1e-12));
    }
}

TEST(OptReport, PerfectP1) {
    const auto d = Dataset::from_bits(8, {0x00, 0x0F, 0xFF});
    const auto q = Dataset::from_bits(8, {0x00});
    const auto prof = profile(d, LshFamily::for_dataset(d), q.point(0));
    const auto rep = opt_report(prof, 10, 6, 3);
    for (unsigned i = 0; i <= 6; ++i) {
        EXPECT_TRUE(rep.feasible[i]);
        EXPECT_NEAR(rep.time[i], i + prof.collisions(i), 1e-12);
    }
}

TEST(OptReport, SinglePointFeasibility) {
    // n = 2 with the nearest point at f = 1/2: 0.5^i * 100 >= ln 2 for all i <= 4.
    const auto d = Dataset::from_bits(8, {0x0F, 0xFF});
    const auto q = Dataset::from_bits(8, {0x00});
    const auto rep = opt_report(profile(d, LshFamily::for_dataset(d), q.point(0)), 100, 4, 2);
    for (unsigned i = 0; i <= 4; ++i) EXPECT_TRUE(rep.feasible[i]);
}

TEST(OptReport, MatchesExhaustiveScan) {
    const auto inst = uniform(300, 48, 3);
    const auto family = LshFamily::for_dataset(inst.data);
    for (std::size_t qi = 0; qi < inst.queries.size(); ++qi) {
        const auto prof = profile(inst.data, family, inst.queries.point(qi));
        const double L = 40, ln_n = std::log(300.0);
        const unsigned K = 20;
        const auto rep = opt_report(prof, L, K, 300);
        double best = INFINITY;
        const double p1 = family.collision_probability(brute_force_nn(inst.data, inst.queries.point(qi)).distance);
        for (unsigned i = 0; i <= K; ++i) {
            if (std::pow(p1, i) * L < ln_n) continue;
            double c = 0;
            for (std::uint32_t x = 0; x < 300; ++x)
                c += std::pow(family.collision_probability(inst.data.distance(PointId{x}, inst.queries.point(qi))), i);
            best = std::min(best, ln_n * (i + c) / std::pow(p1, i));
        }
        EXPECT_NEAR(rep.opt, best, 1e-9 * best);
        unsigned ip = 0;
        while (prof.collisions(ip) > ip) ++ip;
        EXPECT_EQ(rep.i_prime, ip);
    }
}

TEST(OptReport, InfeasibleIsInfinite) {
    const auto inst = uniform(100, 16, 4);
    const auto prof = profile(inst.data, LshFamily::for_dataset(inst.data), inst.queries.point(0));
    const auto rep = opt_report(prof, 1, 8, 100);  // L = 1 < ln 100
    EXPECT_TRUE(std::isinf(rep.opt));
    EXPECT_FALSE(rep.i_star.has_value());
}

TEST(NaturalAlgorithm, LevelZeroScansEverything) {
    const auto inst = uniform(64, 32, 5);
    const Forest f(inst.data, LshFamily::for_dataset(inst.data), 16, 4, RngSeed(1));
    const auto r = natural_algorithm(f, inst.data, inst.queries.point(0), 0, 1);
    ASSERT_TRUE(r.best.has_value());
    EXPECT_EQ(r.best->id, inst.truth[0].id);
    EXPECT_EQ(r.collisions, 64U);
}

TEST(NaturalAlgorithm, ReturnsMinimumOfInspectedBuckets) {
    const auto inst = uniform(128, 32, 6);
    const Forest f(inst.data, LshFamily::for_dataset(inst.data), 16, 8, RngSeed(2));
    const auto q = inst.queries.point(1);
    for (unsigned level : {2U, 5U, 9U}) {
        const auto r = natural_algorithm(f, inst.data, q, level, 8);
        std::optional<Candidate> best;
        std::size_t seen = 0;
        for (unsigned j = 0; j < 8; ++j)
            for (auto id : f.bucket(j, level, q).ids) {
                ++seen;
                const Candidate c{inst.data.distance(id, q), id};
                if (!best || c < *best) best = c;
            }
        EXPECT_EQ(r.best.has_value(), best.has_value());
        if (best) {
            EXPECT_EQ(r.best->id, best->id);
        }
        EXPECT_EQ(r.collisions, seen);
    }
}

TEST(StaticLevel, SmallestLevelUnderAverageCap) {
    const auto inst = uniform(256, 64, 7);
    const Forest f(inst.data, LshFamily::for_dataset(inst.data), 32, 8, RngSeed(3));
    const auto q = inst.queries.point(0);
    const unsigned level = static_level(f, q, 8.0, 8);
    auto total = [&](unsigned i) {
        double s = 0;
        for (unsigned j = 0; j < 8; ++j) s += static_cast<double>(f.collision_count(j, i, q));
        return s;
    };
    EXPECT_LE(total(level), 64.0);
    if (level > 1) {
        EXPECT_GT(total(level - 1), 64.0);
    }
}
