// A dense cluster around the nearest neighbor: a forest searched at the
// statically chosen level misses it, while the adaptive ensemble search does not.

#include <cstdio>

#include "cslsh/adaptive_query.hpp"
#include "cslsh/generators.hpp"
#include "cslsh/oracle.hpp"

int main() {
    using namespace cslsh;
    InstanceSpec spec;
    spec.kind = GeneratorKind::dense_cluster;
    spec.n = 1024;
    spec.dim = 2048;
    spec.queries = 100;
    spec.planted_distance = 256;
    spec.shell_distance = 264;
    spec.cluster_bits = 1;
    spec.cluster_size = 128;
    const auto inst = generate(spec);

    const auto family = LshFamily::for_dataset(inst.data);
    const auto shape = EnsembleShape::for_budget(inst.data.size(), EnsembleShape::for_budget(inst.data.size(), 1).forests * 8);
    const ForestEnsemble ensemble(inst.data, family, 64, shape, RngSeed(1));
    std::printf("ensemble: %u forests x %u trees, depth %u\n", ensemble.forest_count(), ensemble.trees_per_forest(),
                ensemble.depth());

    int natural_hits = 0, adaptive_hits = 0;
    double natural_work = 0, adaptive_work = 0;
    const Forest& forest = ensemble.forest(0);
    for (std::size_t i = 0; i < inst.queries.size(); ++i) {
        const auto q = inst.queries.point(i);
        const unsigned level = static_level(forest, q, 8.0, forest.tree_count());
        const auto nat = natural_algorithm(forest, inst.data, q, level, forest.tree_count());
        natural_hits += nat.best && nat.best->distance == inst.truth[i].distance;
        natural_work += static_cast<double>(nat.work());

        const auto ada = adaptive_nearest_neighbor(ensemble, q, RngSeed(2).derive("query", i));
        adaptive_hits += ada.best.distance == inst.truth[i].distance;
        adaptive_work += static_cast<double>(ada.cost.work());
    }
    const auto nq = static_cast<double>(inst.queries.size());
    std::printf("static level : recall %.2f  mean work %.0f\n", natural_hits / nq, natural_work / nq);
    std::printf("adaptive     : recall %.2f  mean work %.0f\n", adaptive_hits / nq, adaptive_work / nq);
    return 0;
}
