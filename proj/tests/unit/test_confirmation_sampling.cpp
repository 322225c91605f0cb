#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "cslsh/confirmation_sampling.hpp"
#include "cslsh/oracle.hpp"

using namespace cslsh;

namespace {

/// Replays a fixed sequence of ranks.
auto replay(std::vector<int> seq) {
    return [seq = std::move(seq), k = std::size_t{0}]() mutable -> std::optional<int> {
        if (k >= seq.size()) return std::nullopt;
        return seq[k++];
    };
}

/// Exact output law by enumerating every sample path up to `depth` draws;
/// paths longer than that carry the leftover mass, which is reported.
/// Forward propagation of the (tracked element, confirmations) chain until
/// the unabsorbed mass is negligible; independent of the closed form.
std::vector<double> absorb(const std::vector<double>& p, unsigned t) {
    std::map<std::pair<int, unsigned>, double> live{{{-1, 0U}, 1.0}};
    std::vector<double> law(p.size(), 0.0);
    for (int step = 0; step < 100000 && !live.empty(); ++step) {
        std::map<std::pair<int, unsigned>, double> next;
        double remaining = 0;
        for (const auto& [state, mass] : live) {
            const auto [best, count] = state;
            for (std::size_t k = 0; k < p.size(); ++k) {
                if (p[k] == 0) continue;
                const int x = static_cast<int>(k);
                std::pair<int, unsigned> to = state;
                if (x == best) to.second = count + 1;
                else if (best < 0 || x < best) to = {x, 0U};
                if (to.second >= t) law[k] += mass * p[k];
                else next[to] += mass * p[k];
            }
        }
        for (const auto& [state, mass] : next) remaining += mass;
        live = remaining < 1e-17 ? decltype(next){} : std::move(next);
    }
    return law;
}

}  // namespace

TEST(ConfirmationSampling, StopsAfterTConfirmationsOfTheMinimum) {
    const auto r = confirmation_sampling(replay({5, 3, 4, 3, 3, 1}), 2);
    ASSERT_TRUE(r.confirmed());
    EXPECT_EQ(*r.reported, 3);
    EXPECT_EQ(r.samples, 5U);
}

TEST(ConfirmationSampling, SmallerSampleResetsCount) {
    const auto r = confirmation_sampling(replay({4, 4, 2, 4, 2}), 2);
    EXPECT_FALSE(r.confirmed());
    EXPECT_EQ(*r.reported, 2);
    EXPECT_EQ(r.confirmations, 1U);
}

TEST(ConfirmationSampling, SingletonSupportStopsAfterTPlusOne) {
    for (unsigned t = 1; t <= 5; ++t) {
        const auto r = confirmation_sampling([] { return 7; }, t);
        EXPECT_EQ(r.samples, t + 1);
        EXPECT_EQ(*r.reported, 7);
    }
}

TEST(ConfirmationSampling, BudgetAndEmptySource) {
    const auto r = confirmation_sampling([] { return 1; }, 3, std::less<>{}, 2);
    EXPECT_FALSE(r.confirmed());
    EXPECT_EQ(r.samples, 2U);
    const auto e = confirmation_sampling(replay({}), 1);
    EXPECT_FALSE(e.reported.has_value());
    EXPECT_THROW(ConfirmationSampler<int>(0), input_error);
}

TEST(ExactDistribution, TwoPointHalfHalfT1) {
    const auto rho = exact_output_distribution(DiscreteDistribution({0.5, 0.5}), 1);
    // x_2 wins only if drawn first and then again before x_1.
    EXPECT_NEAR(rho[1], 0.25, 1e-15);
    EXPECT_NEAR(rho[0], 0.75, 1e-15);
}

TEST(ExactDistribution, PointMassIsCertain) {
    const auto rho = exact_output_distribution(DiscreteDistribution({1.0}), 4);
    EXPECT_DOUBLE_EQ(rho[0], 1.0);
    const auto zero = exact_output_distribution(DiscreteDistribution({0.0, 1.0, 0.0}), 2);
    EXPECT_DOUBLE_EQ(zero[0], 0.0);
    EXPECT_DOUBLE_EQ(zero[1], 1.0);
    EXPECT_DOUBLE_EQ(zero[2], 0.0);
}

TEST(ExactDistribution, MatchesMarkovChainAbsorption) {
    for (const auto& p : std::vector<std::vector<double>>{{0.2, 0.5, 0.3}, {0.6, 0.1, 0.1, 0.2}, {0.1, 0.9}}) {
        for (unsigned t = 1; t <= 4; ++t) {
            const auto law = absorb(p, t);
            const auto rho = exact_output_distribution(DiscreteDistribution(p), t);
            for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(rho[k], law[k], 1e-12);
        }
    }
}

TEST(ExactDistribution, SumsToOne) {
    const auto rho = exact_output_distribution(DiscreteDistribution({0.05, 0.15, 0.3, 0.25, 0.25}), 3);
    double s = 0;
    for (double v : rho) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(FailureBound, ClosedFormValues) {
    EXPECT_DOUBLE_EQ(failure_bound(0.5, 0.5, 1), 0.25);
    EXPECT_DOUBLE_EQ(failure_bound(1.0, 0.3, 2), 0.0);
    EXPECT_DOUBLE_EQ(failure_bound(0.25, 0.25, 3), 0.75 / 8);
    EXPECT_THROW((void)failure_bound(0.0, 0.5, 1), input_error);
    EXPECT_THROW((void)failure_bound(0.5, 0.5, 0), input_error);
}

TEST(FailureBound, TightOnTwoPointDistributions) {
    for (int k = 1; k < 20; ++k) {
        const double p1 = k / 20.0;
        for (unsigned t = 1; t <= 4; ++t) {
            const auto rho = exact_output_distribution(DiscreteDistribution({p1, 1 - p1}), t);
            EXPECT_NEAR(rho[1], failure_bound(p1, 1 - p1, t), 1e-12);
        }
    }
}

TEST(ExpectedSamples, Bound) {
    EXPECT_DOUBLE_EQ(expected_samples_bound(0.5, 3), 8.0);
    EXPECT_DOUBLE_EQ(expected_samples_bound(1.0, 1), 2.0);
    EXPECT_THROW((void)expected_samples_bound(0.0, 1), input_error);
}

TEST(Distribution, RejectsInvalidInput) {
    EXPECT_THROW(DiscreteDistribution({}), input_error);
    EXPECT_THROW(DiscreteDistribution({0.5, 0.6}), input_error);
    EXPECT_THROW(DiscreteDistribution({-0.1, 1.1}), input_error);
}

TEST(Simulation, HalfHalfT1MatchesExact) {
    const auto sim = simulate_cs(DiscreteDistribution({0.5, 0.5}), 1, 200000, RngSeed(7));
    const double sd = std::sqrt(0.25 * 0.75 / 200000);
    EXPECT_NEAR(sim.frequency(1), 0.25, 4 * sd);
    EXPECT_EQ(sim.runs, 200000U);
}

TEST(Simulation, DeterministicInSeed) {
    const DiscreteDistribution d({0.1, 0.2, 0.3, 0.4});
    const auto a = simulate_cs(d, 2, 50000, RngSeed(3)), b = simulate_cs(d, 2, 50000, RngSeed(3));
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_EQ(a.mean_samples, b.mean_samples);
}

TEST(Simulation, PointMassTakesTPlusOneSamples) {
    const auto sim = simulate_cs(DiscreteDistribution({1.0}), 3, 1000, RngSeed(1));
    EXPECT_DOUBLE_EQ(sim.mean_samples, 4.0);
    EXPECT_DOUBLE_EQ(sim.sample_variance, 0.0);
    EXPECT_EQ(sim.counts[0], 1000U);
}

TEST(Simulation, ZeroMassNeverReported) {
    const auto sim = simulate_cs(DiscreteDistribution({0.0, 0.7, 0.0, 0.3}), 1, 100000, RngSeed(2));
    EXPECT_EQ(sim.counts[0], 0U);
    EXPECT_EQ(sim.counts[2], 0U);
}

TEST(Simulation, LargeSupportUsesScanPathCorrectly) {
    std::vector<double> p(40, 1.0 / 40);
    const DiscreteDistribution d(p);
    const auto rho = exact_output_distribution(d, 2);
    const auto sim = simulate_cs(d, 2, 400000, RngSeed(11));
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double sd = std::sqrt(rho[k] * (1 - rho[k]) / 400000);
        EXPECT_NEAR(sim.frequency(k), rho[k], 5 * sd + 1e-12) << k;
    }
}

TEST(Simulation, MeanSamplesWithinBound) {
    const DiscreteDistribution d({0.3, 0.3, 0.4});
    const auto sim = simulate_cs(d, 3, 200000, RngSeed(5));
    EXPECT_LE(sim.mean_samples, expected_samples_bound(0.3, 3) + 3 * sim.mean_standard_error());
}
