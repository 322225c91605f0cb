// The stopping rule on an explicit distribution: exact output probabilities,
// a simulation of the same rule, and the failure and sample-count bounds.

#include <cstdio>
#include <random>

#include "cslsh/confirmation_sampling.hpp"
#include "cslsh/oracle.hpp"

int main() {
    using namespace cslsh;
    // Element 0 is the minimum, drawn 20% of the time.
    const DiscreteDistribution dist({0.2, 0.5, 0.2, 0.1});
    const std::uint64_t runs = 1'000'000;

    for (unsigned t = 1; t <= 4; ++t) {
        const auto exact = exact_output_distribution(dist, t);
        const auto sim = simulate_cs(dist, t, runs, RngSeed(42).derive("demo", t));
        std::printf("t = %u\n", t);
        for (std::size_t i = 0; i < dist.size(); ++i)
            std::printf("  element %zu  exact %.5f  simulated %.5f\n", i, exact[i], sim.frequency(i));
        std::printf("  failure %.5f <= bound %.5f\n", 1 - exact[0], failure_bound(dist[0], dist.max_other(), t));
        std::printf("  mean samples %.3f <= bound %.3f\n", sim.mean_samples, expected_samples_bound(dist[0], t));
    }

    // The same rule over any draw source: the smallest of repeated dice rolls.
    std::mt19937 gen(7);
    std::uniform_int_distribution<int> die(1, 6);
    const auto r = confirmation_sampling([&] { return die(gen); }, 3);
    std::printf("dice: reported %d after %zu rolls\n", *r.reported, r.samples);
    return 0;
}
