// cslsh: command-line front end.
//
//   cslsh generate --config exp.cfg --out dir/
//   cslsh build    --config exp.cfg --out forest.bin
//   cslsh query    --config exp.cfg [--structure forest.bin] --out report.jsonl
//   cslsh verify   cs-exact|...|all [--quick]
//   cslsh bench    --config exp.cfg --algorithms a,b --generators g,h --sizes 256,1024 --out dir/
//
// Exit status: 0 success, 1 operational error, 2 verification failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cslsh/experiment.hpp"
#include "cslsh/serialize.hpp"
#include "cslsh/verify.hpp"

namespace fs = std::filesystem;
using namespace cslsh;

namespace {

constexpr int kOperationalError = 1;
constexpr int kVerificationFailure = 2;

struct CommonFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
    bool wall_time = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "flat key = value config file");
    cmd->add_option("--set", f.sets, "override one config key (key=value); repeatable");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--threads", f.threads, "worker threads (1 keeps reports bit-reproducible)");
    cmd->add_option("--out", f.out, "output path");
    cmd->add_flag("--wall-time", f.wall_time, "record per-query wall time in reports");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(f.config, {});
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw input_error("--set expects key=value, got '" + kv + "'");
        cfg.set(detail::trim(std::string_view(kv).substr(0, eq)), detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (f.wall_time) cfg.wall_time = true;
    if (cfg.depth == 0 || cfg.depth > HashString::kMaxLength) throw input_error("K must be in [1, 64]");
    if (cfg.threads == 0) throw input_error("threads must be positive");
    return cfg;
}

std::string data_extension(const Dataset& d) { return d.metric() == Metric::hamming ? ".bvecs" : ".fvecs"; }

int cmd_generate(const CommonFlags& f) {
    const auto cfg = resolve(f);
    if (f.out.empty()) throw input_error("generate needs --out DIR");
    const auto inst = generate(cfg.instance);
    fs::create_directories(f.out);
    const auto ext = data_extension(inst.data);
    const auto data = (fs::path(f.out) / ("data" + ext)).string();
    const auto queries = (fs::path(f.out) / ("queries" + ext)).string();
    const auto truth = (fs::path(f.out) / "truth.csv").string();
    save_dataset(data, inst.data);
    save_dataset(queries, inst.queries);
    write_ground_truth(truth, inst.truth);
    std::cout << "wrote " << inst.data.size() << " points, " << inst.queries.size() << " queries (dim "
              << inst.data.dim() << ") to " << f.out << "\n"
              << "data = " << data << "\nqueries = " << queries << "\ntruth = " << truth << "\n";
    return 0;
}

int cmd_build(const CommonFlags& f) {
    const auto cfg = resolve(f);
    if (f.out.empty()) throw input_error("build needs --out PATH");
    const auto w = load_workload(cfg);
    const auto start = std::chrono::steady_clock::now();
    const auto s = build_structure(cfg, w.data, 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<std::uint8_t> bytes;
    std::vector<const Forest*> forests;
    if (s.ensemble) {
        bytes = serialize_ensemble(*s.ensemble);
        for (unsigned r = 0; r < s.ensemble->forest_count(); ++r) forests.push_back(&s.ensemble->forest(r));
    } else if (s.forest) {
        bytes = serialize_forest(*s.forest, w.data);
        forests.push_back(&*s.forest);
    } else {
        throw input_error("algorithm '" + std::string(to_string(cfg.algorithm)) +
                          "' has no stored structure; its tables are rebuilt from the seed at query time");
    }
    detail::write_bytes(f.out, bytes);
    std::size_t nodes = 0, trees = 0;
    double depth_sum = 0;
    unsigned depth_max = 0;
    for (const Forest* forest : forests)
        for (unsigned j = 0; j < forest->tree_count(); ++j, ++trees) {
            const auto& t = forest->tree(j);
            nodes += t.nodes().size();
            for (std::size_t x = 0; x < w.data.size(); ++x) {
                const unsigned d = t.stored_depth(PointId{static_cast<std::uint32_t>(x)});
                depth_sum += d;
                depth_max = std::max(depth_max, d);
            }
        }
    std::cout << "built " << trees << " trees (" << forests.size() << " forests, K = " << cfg.depth << ") over "
              << w.data.size() << " points in " << secs << " s\n"
              << "nodes " << nodes << ", mean stored depth " << depth_sum / static_cast<double>(trees * w.data.size())
              << ", max stored depth " << depth_max << "\n"
              << "wrote " << bytes.size() << " bytes to " << f.out << "\n";
    return 0;
}

void print_summary(const Report& rep, std::ostream& out) {
    const auto& s = rep.summary;
    out << to_string(rep.config.algorithm) << ": " << s.rows << " queries, recall " << s.recall << " (exact id "
        << s.recall_exact_id << "), mean work " << s.mean_work << ", p50 " << s.p50_work << ", p90 " << s.p90_work
        << ", p99 " << s.p99_work;
    if (s.work_over_opt) out << ", work/OPT " << *s.work_over_opt;
    out << "\n";
}

int cmd_query(const CommonFlags& f, const std::string& structure_path) {
    const auto cfg = resolve(f);
    const auto w = load_workload(cfg);
    Structure loaded;
    Structure* prebuilt = nullptr;
    if (!structure_path.empty()) {
        const auto bytes = detail::read_bytes(structure_path);
        if (cfg.algorithm == Algorithm::forest_adaptive) loaded.ensemble.emplace(deserialize_ensemble(bytes, w.data));
        else if (cfg.algorithm == Algorithm::natural) loaded.forest.emplace(deserialize_forest(bytes, w.data));
        else throw input_error("--structure applies to forest-adaptive and natural only");
        prebuilt = &loaded;
    }
    const auto rep = run_experiment(cfg, w, prebuilt);
    if (f.out.empty() || f.out == "-") {
        rep.write_jsonl(std::cout);
        print_summary(rep, std::cerr);
    } else {
        std::ofstream out(f.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open '" + f.out + "' for writing");
        rep.write_jsonl(out);
        if (!out) throw std::runtime_error("write to '" + f.out + "' failed");
        print_summary(rep, std::cout);
    }
    return 0;
}

int cmd_verify(const std::string& suite, bool quick, const CommonFlags& f) {
    verify::Options opt;
    opt.scale = quick ? verify::Scale::quick : verify::Scale::full;
    if (f.seed) opt.seed = *f.seed;
    if (f.threads) opt.threads = *f.threads;
    std::vector<std::string> names;
    if (suite == "all") names = verify::suite_names();
    else names.push_back(suite);
    bool ok = true;
    for (const auto& name : names) {
        const auto res = verify::run_suite(name, opt);
        std::cout << "suite " << res.suite << " (" << res.seconds << " s)\n";
        for (const auto& c : res.checks) std::cout << "  " << verify::format_check(c) << "\n";
        std::cout << "suite " << res.suite << ": " << (res.passed() ? "PASS" : "FAIL") << "\n";
        ok = ok && res.passed();
    }
    return ok ? 0 : kVerificationFailure;
}

/// Splits on commas that are not inside parentheses, so "natural(4,8)" stays whole.
std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    int depth = 0;
    auto flush = [&] {
        if (!detail::trim(item).empty()) out.emplace_back(detail::trim(item));
        item.clear();
    };
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) flush();
        else item += c;
    }
    flush();
    return out;
}

int cmd_bench(const CommonFlags& f, const std::string& algorithms, const std::string& generators, const std::string& sizes) {
    const auto base = resolve(f);
    const auto algs = split_list(algorithms.empty() ? std::string(to_string(base.algorithm)) : algorithms);
    const auto gens = split_list(generators.empty() ? std::string(to_string(base.instance.kind)) : generators);
    const auto ns = split_list(sizes.empty() ? std::to_string(base.instance.n) : sizes);
    const fs::path dir = f.out.empty() ? fs::path("bench-out") : fs::path(f.out);
    fs::create_directories(dir);
    std::ofstream tsv(dir / "summary.tsv");
    const std::string header = "algorithm\tgenerator\tn\tstatus\tqueries\trecall\trecall_exact_id\tmean_work\tp90_work\tmean_opt\twork_over_opt\n";
    tsv << header;
    std::cout << header;
    std::size_t failures = 0;
    for (const auto& g : gens)
        for (const auto& n_text : ns)
            for (const auto& a : algs) {
                std::ostringstream line;
                line << a << '\t' << g << '\t' << n_text << '\t';
                try {
                    ExperimentConfig cfg = base;
                    cfg.set("algorithm", a);
                    cfg.set("generator", g);
                    cfg.set("n", n_text);
                    const auto w = load_workload(cfg);
                    const auto rep = run_experiment(cfg, w);
                    std::string name = a + "_" + g + "_" + n_text + ".jsonl";
                    std::replace_if(name.begin(), name.end(), [](char c) { return c == '(' || c == ')' || c == ','; }, '_');
                    std::ofstream out(dir / name, std::ios::binary);
                    rep.write_jsonl(out);
                    const auto& s = rep.summary;
                    line << "ok\t" << s.rows << '\t' << s.recall << '\t' << s.recall_exact_id << '\t' << s.mean_work << '\t'
                         << s.p90_work << '\t' << (s.mean_opt ? std::to_string(*s.mean_opt) : "") << '\t'
                         << (s.work_over_opt ? std::to_string(*s.work_over_opt) : "");
                } catch (const std::exception& e) {
                    ++failures;
                    std::string msg = e.what();
                    std::replace(msg.begin(), msg.end(), '\t', ' ');
                    line << "error: " << msg << "\t\t\t\t\t\t\t";
                }
                tsv << line.str() << '\n';
                std::cout << line.str() << '\n' << std::flush;
            }
    std::cout << "reports in " << dir.string() << "; " << failures << " failed cells\n";
    return failures ? kOperationalError : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nearest-neighbor search with confirmation sampling and adaptive LSH Forest queries"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonFlags gen_f, build_f, query_f, verify_f, bench_f;
    auto* gen = app.add_subcommand("generate", "write a synthetic instance (data, queries, ground truth)");
    add_common(gen, gen_f);
    auto* build = app.add_subcommand("build", "build and serialize the forest structure");
    add_common(build, build_f);
    auto* query = app.add_subcommand("query", "run queries and write a JSONL report");
    add_common(query, query_f);
    std::string structure;
    query->add_option("--structure", structure, "serialized structure from `build`");
    auto* ver = app.add_subcommand("verify", "run a verification suite");
    std::string suite = "all";
    bool quick = false;
    ver->add_option("suite", suite, "suite name or 'all'")
        ->check(CLI::IsMember([] {
            auto names = verify::suite_names();
            names.emplace_back("all");
            return names;
        }()));
    ver->add_flag("--quick", quick, "reduced run counts");
    ver->add_option("--seed", verify_f.seed, "master seed");
    ver->add_option("--threads", verify_f.threads, "worker threads");
    auto* bench = app.add_subcommand("bench", "sweep algorithm x generator x n");
    add_common(bench, bench_f);
    std::string algorithms, generators, sizes;
    bench->add_option("--algorithms", algorithms, "comma-separated algorithms");
    bench->add_option("--generators", generators, "comma-separated generators");
    bench->add_option("--sizes", sizes, "comma-separated n values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kOperationalError;
    }
    try {
        if (*gen) return cmd_generate(gen_f);
        if (*build) return cmd_build(build_f);
        if (*query) return cmd_query(query_f, structure);
        if (*ver) return cmd_verify(suite, quick, verify_f);
        if (*bench) return cmd_bench(bench_f, algorithms, generators, sizes);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOperationalError;
    }
    return 0;
}
