#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "cslsh/experiment.hpp"
#include "cslsh/verify.hpp"

using namespace cslsh;

namespace {

ExperimentConfig small_config(std::string_view algorithm) {
    return ExperimentConfig::from_text(std::string("generator = planted-nn\nn = 200\ndim = 64\nnum_queries = 20\n"
                                                   "planted_distance = 2\nshell_distance = 12\nK = 32\nalgorithm = ") +
                                           std::string(algorithm) + "\n",
                                       {});
}

}  // namespace

TEST(ExperimentConfig, ParsesKeysAndComments) {
    const auto cfg = ExperimentConfig::from_text("# comment\n n = 300 # trailing\nalgorithm = natural(5, 4)\n\nt=4\n", {});
    EXPECT_EQ(cfg.instance.n, 300U);
    EXPECT_EQ(cfg.algorithm, Algorithm::natural);
    EXPECT_EQ(cfg.natural_level, 5U);
    EXPECT_EQ(cfg.natural_trees, 4U);
    EXPECT_EQ(cfg.adaptive.t, 4U);
}

TEST(ExperimentConfig, Errors) {
    ExperimentConfig cfg;
    EXPECT_THROW(cfg.set("no_such_key", "1"), input_error);
    EXPECT_THROW(cfg.set("n", "ten"), input_error);
    EXPECT_THROW(cfg.set("wall_time", "maybe"), input_error);
    EXPECT_THROW(cfg.set("algorithm", "natural(3)"), input_error);
    EXPECT_THROW(cfg.set("algorithm", "natural(3,0)"), input_error);
    EXPECT_THROW(cfg.set("algorithm", "quantum"), input_error);
    EXPECT_THROW((void)ExperimentConfig::from_text("n 3\n", {}), input_error);
}

TEST(ExperimentConfig, JsonReflectsSettings) {
    const auto cfg = small_config("budgeted-cs");
    const auto j = cfg.to_json();
    EXPECT_EQ(j["algorithm"], "budgeted-cs");
    EXPECT_EQ(j["n"], 200);
    EXPECT_EQ(j["K"], 32);
}

TEST(Experiment, BruteIsExact) {
    const auto cfg = small_config("brute");
    const auto rep = run_experiment(cfg, load_workload(cfg));
    EXPECT_EQ(rep.summary.recall, 1.0);
    EXPECT_EQ(rep.summary.recall_exact_id, 1.0);
}

TEST(Experiment, EveryAlgorithmRunsAndIsDeterministic) {
    for (const char* alg : {"table-cs", "budgeted-cs", "forest-adaptive", "natural", "natural(4,8)", "brute"}) {
        SCOPED_TRACE(alg);
        const auto cfg = small_config(alg);
        const auto w = load_workload(cfg);
        const auto a = run_experiment(cfg, w), b = run_experiment(cfg, w);
        EXPECT_EQ(a.jsonl(), b.jsonl());
        EXPECT_EQ(a.rows.size(), 20U);
    }
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
    auto cfg = small_config("forest-adaptive");
    const auto w = load_workload(cfg);
    const auto one = run_experiment(cfg, w);
    cfg.threads = 3;
    const auto three = run_experiment(cfg, w);
    ASSERT_EQ(one.rows.size(), three.rows.size());
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
        EXPECT_EQ(one.rows[i].returned, three.rows[i].returned);
        EXPECT_EQ(one.rows[i].work(), three.rows[i].work());
    }
}

TEST(Experiment, SummaryRecomputesFromRows) {
    auto cfg = small_config("forest-adaptive");
    cfg.repetitions = 2;
    const auto rep = run_experiment(cfg, load_workload(cfg));
    ASSERT_EQ(rep.rows.size(), 40U);
    double work = 0, hits = 0;
    for (const auto& r : rep.rows) {
        work += static_cast<double>(r.work());
        hits += r.correct();
    }
    EXPECT_DOUBLE_EQ(rep.summary.mean_work, work / 40);
    EXPECT_DOUBLE_EQ(rep.summary.recall, hits / 40);
    EXPECT_LE(rep.summary.p50_work, rep.summary.p90_work);
    EXPECT_LE(rep.summary.p90_work, rep.summary.p99_work);
}

TEST(Experiment, ReportIsJsonLines) {
    const auto cfg = small_config("natural");
    const auto rep = run_experiment(cfg, load_workload(cfg));
    std::istringstream in(rep.jsonl());
    std::string line;
    std::vector<nlohmann::json> lines;
    while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(lines.size(), 22U);
    EXPECT_EQ(lines.front()["type"], "config");
    EXPECT_EQ(lines.front()["version"], std::string(kVersion));
    EXPECT_EQ(lines.back()["type"], "summary");
}

TEST(Experiment, RejectsBadDepthAndRepetitions) {
    auto cfg = small_config("forest-adaptive");
    const auto w = load_workload(cfg);
    cfg.depth = 0;
    EXPECT_THROW(run_experiment(cfg, w), input_error);
    cfg.depth = 65;
    EXPECT_THROW(run_experiment(cfg, w), input_error);
    cfg.depth = 32;
    cfg.repetitions = 0;
    EXPECT_THROW(run_experiment(cfg, w), input_error);
}

TEST(Verify, QuickSuitesPass) {
    verify::Options opt;
    opt.scale = verify::Scale::quick;
    for (const char* suite : {"cs-bounds", "forest-structure", "formats"}) {
        SCOPED_TRACE(suite);
        const auto r = verify::run_suite(suite, opt);
        EXPECT_FALSE(r.checks.empty());
        for (const auto& c : r.checks) EXPECT_TRUE(c.pass || !c.gating) << verify::format_check(c);
    }
    EXPECT_THROW((void)verify::run_suite("nope", opt), input_error);
}
