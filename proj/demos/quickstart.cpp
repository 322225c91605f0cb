// Generate a planted instance, answer its queries with three algorithms and
// print recall and mean work for each.

#include <cstdio>

#include "cslsh/experiment.hpp"

int main() {
    using namespace cslsh;
    auto cfg = ExperimentConfig::from_text(
        "generator = planted-nn\n"
        "n = 2000\n"
        "dim = 128\n"
        "num_queries = 200\n"
        "planted_distance = 6\n"
        "shell_distance = 24\n"
        "K = 48\n",
        {});
    const auto workload = load_workload(cfg);

    std::printf("%-16s %8s %12s\n", "algorithm", "recall", "mean work");
    for (const char* alg : {"table-cs", "forest-adaptive", "brute"}) {
        cfg.set("algorithm", alg);
        const auto report = run_experiment(cfg, workload);
        std::printf("%-16s %8.3f %12.1f\n", alg, report.summary.recall, report.summary.mean_work);
    }
    return 0;
}
