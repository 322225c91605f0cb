#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "cslsh/adaptive_query.hpp"
#include "cslsh/generators.hpp"
#include "cslsh/oracle.hpp"

using namespace cslsh;

namespace {

/// An instance plus an ensemble over it; the ensemble refers to inst.data, so
/// the pair lives behind a pointer and is never moved.
struct Setup {
    Instance inst;
    std::unique_ptr<ForestEnsemble> ensemble;
};

std::unique_ptr<Setup> make(const InstanceSpec& spec, unsigned trees_per_forest, unsigned depth, std::uint64_t seed,
                            AdaptiveConfig cfg = {}) {
    auto s = std::make_unique<Setup>();
    s->inst = generate(spec);
    const std::size_t n = s->inst.data.size();
    const auto shape = EnsembleShape::for_budget(n, EnsembleShape::for_budget(n, 1).forests * trees_per_forest);
    s->ensemble = std::make_unique<ForestEnsemble>(s->inst.data, LshFamily::for_dataset(s->inst.data), depth, shape,
                                                   RngSeed(seed), cfg);
    return s;
}

InstanceSpec spec(GeneratorKind kind, std::size_t n, std::size_t dim, std::size_t queries, std::uint64_t seed) {
    InstanceSpec s;
    s.kind = kind;
    s.n = n;
    s.dim = dim;
    s.queries = queries;
    s.seed = seed;
    return s;
}

double recall(const Setup& s, std::uint64_t seed) {
    int ok = 0;
    for (std::size_t i = 0; i < s.inst.queries.size(); ++i)
        ok += adaptive_nearest_neighbor(*s.ensemble, s.inst.queries.point(i), RngSeed(seed).derive("q", i)).best.distance ==
              s.inst.truth[i].distance;
    return ok / static_cast<double>(s.inst.queries.size());
}

}  // namespace

TEST(EnsembleShape, ForBudget) {
    const auto s = EnsembleShape::for_budget(1024, 56 * 8);
    EXPECT_EQ(s.forests, static_cast<unsigned>(std::ceil(8 * std::log(1024.0))));
    EXPECT_EQ(s.trees_per_forest, 8U);
    EXPECT_EQ(EnsembleShape::for_budget(1024, 1).trees_per_forest, 1U);
    EXPECT_EQ(EnsembleShape::for_budget(1, 5).forests, 1U);
    EXPECT_THROW((void)EnsembleShape::for_budget(10, 0), input_error);
}

TEST(Ensemble, RejectsBadShape) {
    const auto inst = generate(spec(GeneratorKind::uniform_hamming, 20, 16, 1, 1));
    const auto family = LshFamily::for_dataset(inst.data);
    EXPECT_THROW(ForestEnsemble(inst.data, family, 8, {2, 3}, RngSeed(1)), input_error);
    EXPECT_THROW(ForestEnsemble(inst.data, family, 8, {0, 1}, RngSeed(1)), input_error);
}

TEST(QuorumSize, Rounding) {
    EXPECT_EQ(quorum_size(8, 0.25), 2U);
    EXPECT_EQ(quorum_size(45, 0.25), 12U);
    EXPECT_EQ(quorum_size(1, 0.5), 1U);
}

TEST(Adaptive, SinglePointDatasetReturnsIt) {
    const auto d = Dataset::from_bits(32, {0xDEADBEEF});
    const auto q = Dataset::from_bits(32, {0x1});
    const ForestEnsemble e(d, LshFamily::for_dataset(d), 16, {2, 2}, RngSeed(1));
    const auto r = adaptive_nearest_neighbor(e, q.point(0), RngSeed(2));
    EXPECT_EQ(r.best.id.index, 0U);
}

TEST(Adaptive, AllPointsIdentical) {
    const auto d = Dataset::from_bits(16, std::vector<std::uint64_t>(40, 0x00FF));
    const auto q = Dataset::from_bits(16, {0x00FE});
    const ForestEnsemble e(d, LshFamily::for_dataset(d), 12, EnsembleShape::for_budget(40, 30 * 4), RngSeed(3));
    const auto r = adaptive_nearest_neighbor(e, q.point(0), RngSeed(4));
    EXPECT_EQ(r.best.distance, 1.0);
}

TEST(Adaptive, DistanceZeroQueries) {
    auto sp = spec(GeneratorKind::planted_nn, 256, 64, 60, 5);
    sp.planted_distance = 0;
    sp.shell_distance = 1;
    const auto s = make(sp, 8, 64, 6);
    EXPECT_EQ(recall(*s, 7), 1.0);
}

TEST(Adaptive, PlantedRecall) {
    auto sp = spec(GeneratorKind::planted_nn, 512, 128, 80, 8);
    sp.planted_distance = 8;
    sp.shell_distance = 24;
    const auto s = make(sp, 8, 64, 9);
    EXPECT_GE(recall(*s, 10), 1 - 1.0 / 512 - 3 * std::sqrt((1.0 / 512) * (1 - 1.0 / 512) / 80));
}

TEST(Adaptive, UniformRecall) {
    const auto s = make(spec(GeneratorKind::uniform_hamming, 256, 64, 60, 11), 8, 64, 12);
    EXPECT_GE(recall(*s, 13), 0.95);
}

TEST(Adaptive, AngularRecall) {
    auto sp = spec(GeneratorKind::gaussian_angular, 256, 16, 40, 14);
    sp.noise = 0.2;
    const auto s = make(sp, 8, 48, 15);
    EXPECT_GE(recall(*s, 16), 0.95);
}

TEST(Adaptive, DeterministicGivenSeeds) {
    auto sp = spec(GeneratorKind::planted_nn, 300, 64, 10, 17);
    sp.planted_distance = 3;
    sp.shell_distance = 10;
    const auto s = make(sp, 4, 32, 18);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto a = adaptive_nearest_neighbor(*s->ensemble, s->inst.queries.point(i), RngSeed(19).derive("q", i));
        const auto b = adaptive_nearest_neighbor(*s->ensemble, s->inst.queries.point(i), RngSeed(19).derive("q", i));
        EXPECT_EQ(a.best, b.best);
        EXPECT_EQ(a.cost, b.cost);
        EXPECT_EQ(a.final_level, b.final_level);
    }
}

TEST(Adaptive, WorkCountsHashesAndCollisions) {
    auto sp = spec(GeneratorKind::planted_nn, 300, 64, 5, 20);
    sp.planted_distance = 3;
    sp.shell_distance = 10;
    const auto s = make(sp, 4, 32, 21);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto r = adaptive_nearest_neighbor(*s->ensemble, s->inst.queries.point(i), RngSeed(22));
        EXPECT_EQ(r.cost.work(), r.cost.hash_evaluations + r.cost.collisions_inspected);
        EXPECT_GT(r.cost.hash_evaluations, 0U);
    }
}

TEST(Adaptive, TraceRecordsLevelsWithinDepth) {
    auto sp = spec(GeneratorKind::planted_nn, 400, 64, 5, 23);
    sp.planted_distance = 4;
    sp.shell_distance = 12;
    const auto s = make(sp, 8, 32, 24);
    for (std::size_t i = 0; i < 5; ++i) {
        AdaptiveTrace trace;
        const auto r = adaptive_nearest_neighbor(*s->ensemble, s->inst.queries.point(i), RngSeed(25), &trace);
        ASSERT_FALSE(trace.chosen_levels.empty());
        for (unsigned level : trace.chosen_levels) EXPECT_LE(level, 32U);
        EXPECT_LE(r.final_level, 32U);
        // Forests advance in lockstep rounds.
        EXPECT_LE(trace.max_round_spread, 1U);
    }
}

TEST(Adaptive, DenseClusterSeparatesFromStaticLevel) {
    auto sp = spec(GeneratorKind::dense_cluster, 256, 2048, 60, 26);
    sp.planted_distance = 256;
    sp.shell_distance = 264;
    sp.cluster_bits = 1;
    sp.cluster_size = 2 * 8 * 8;
    const auto s = make(sp, 8, 64, 27);
    int natural = 0;
    const auto& forest = s->ensemble->forest(0);
    for (std::size_t i = 0; i < s->inst.queries.size(); ++i) {
        const auto q = s->inst.queries.point(i);
        const auto r = natural_algorithm(forest, s->inst.data, q, static_level(forest, q, 8.0, forest.tree_count()),
                                         forest.tree_count());
        natural += r.best && r.best->distance == s->inst.truth[i].distance;
    }
    EXPECT_LT(natural / 60.0, 0.1);
    EXPECT_EQ(recall(*s, 28), 1.0);
}

TEST(QuorumCheck, LevelsAreNotPooled) {
    std::vector<ForestStatus> s(8);
    s[0].terminated_upper = true;
    s[1].terminated_lower = true;
    EXPECT_FALSE(quorum_check(s, 0.25));
    s[2].terminated_upper = true;
    EXPECT_TRUE(quorum_check(s, 0.25));
    EXPECT_FALSE(quorum_check(s, 0.5));
}
