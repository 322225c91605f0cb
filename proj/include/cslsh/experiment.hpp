// experiment.hpp
//
// ExperimentConfig, the flat key=value config format, the per-algorithm query
// runners and line-delimited JSON reports.
//
// A report is one JSON object per line:
//   {"type":"config", ...}      the fully resolved configuration
//   {"type":"query", ...}       one row per (repetition, query)
//   {"type":"summary", ...}     aggregates, recomputable from the rows
//
// Wall time is omitted unless `wall_time` is set, so that identical configs
// give byte-identical reports.
#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cslsh/adaptive_query.hpp"
#include "cslsh/core.hpp"
#include "cslsh/data_io.hpp"
#include "cslsh/generators.hpp"
#include "cslsh/lsh_family.hpp"
#include "cslsh/lsh_forest.hpp"
#include "cslsh/oracle.hpp"
#include "cslsh/rng.hpp"
#include "cslsh/table_sequence.hpp"

namespace cslsh {

inline constexpr std::string_view kVersion = "1.0.0";

enum class Algorithm : std::uint8_t { table_cs, budgeted_cs, forest_adaptive, natural, brute };

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::table_cs: return "table-cs";
        case Algorithm::budgeted_cs: return "budgeted-cs";
        case Algorithm::forest_adaptive: return "forest-adaptive";
        case Algorithm::natural: return "natural";
        case Algorithm::brute: return "brute";
    }
    return "?";
}

struct ExperimentConfig {
    // Instance: files when `data` is set, otherwise the generator spec.
    std::string data_path;
    std::string queries_path;
    std::string truth_path;
    Metric metric = Metric::hamming;
    InstanceSpec instance;

    Algorithm algorithm = Algorithm::forest_adaptive;
    double delta = 0.125;             // table-cs / budgeted-cs: t = ceil(log2 1/delta)
    unsigned depth = 32;              // K
    unsigned trees = 0;               // L; 0 picks R * 8 for forests, 64 for natural
    unsigned k_cat = 0;               // table width; 0 estimates it from the data
    double c_r = 8.0;                 // R = ceil(c_R ln n)
    AdaptiveConfig adaptive;          // t = 3, cap 10 i j, quorums 1/4 and 1/2
    unsigned natural_level = 0;       // 0: smallest level with <= natural_c * L collisions
    unsigned natural_trees = 0;       // 0: all L trees
    double natural_c = 8.0;
    std::size_t max_tables = 4096;
    std::size_t tables_per_round = 64;
    unsigned repetitions = 1;
    std::uint64_t seed = 1;
    bool wall_time = false;
    unsigned threads = 1;

    /// Applies one key=value setting. Unknown keys and malformed values throw.
    void set(std::string_view key, std::string_view value);

    /// Reads a flat config file: `key = value` lines, `#` starts a comment.
    static ExperimentConfig from_text(std::string_view text, ExperimentConfig base);
    static ExperimentConfig from_file(const std::string& path, ExperimentConfig base);

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc{} || end != value.data() + value.size())
        throw input_error("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw input_error("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(value) + "'");
}

}  // namespace detail

/// "natural" or "natural(i,j)"; the latter pins level and tree count.
inline void parse_algorithm(std::string_view value, ExperimentConfig& cfg) {
    if (value == "table-cs") cfg.algorithm = Algorithm::table_cs;
    else if (value == "budgeted-cs") cfg.algorithm = Algorithm::budgeted_cs;
    else if (value == "forest-adaptive" || value == "adaptive") cfg.algorithm = Algorithm::forest_adaptive;
    else if (value == "brute") cfg.algorithm = Algorithm::brute;
    else if (value == "natural") cfg.algorithm = Algorithm::natural;
    else if (value.starts_with("natural(") && value.ends_with(")")) {
        const auto inner = value.substr(8, value.size() - 9);
        const auto comma = inner.find(',');
        if (comma == std::string_view::npos) throw input_error("natural(i,j) needs two arguments");
        cfg.algorithm = Algorithm::natural;
        cfg.natural_level = detail::parse_number<unsigned>("algorithm", detail::trim(inner.substr(0, comma)));
        cfg.natural_trees = detail::parse_number<unsigned>("algorithm", detail::trim(inner.substr(comma + 1)));
        if (cfg.natural_trees == 0) throw input_error("natural(i,j) needs j >= 1");
    } else {
        throw input_error("unknown algorithm '" + std::string(value) +
                          "' (table-cs, budgeted-cs, forest-adaptive, natural(i,j), brute)");
    }
}

inline void ExperimentConfig::set(std::string_view key, std::string_view value) {
    using detail::parse_bool;
    using detail::parse_number;
    key = detail::trim(key);
    value = detail::trim(value);
    if (key == "data") data_path = value;
    else if (key == "queries") queries_path = value;
    else if (key == "truth") truth_path = value;
    else if (key == "metric") metric = parse_metric(value);
    else if (key == "generator") instance.kind = parse_generator(value);
    else if (key == "n") instance.n = parse_number<std::size_t>(key, value);
    else if (key == "dim") instance.dim = parse_number<std::size_t>(key, value);
    else if (key == "num_queries") instance.queries = parse_number<std::size_t>(key, value);
    else if (key == "planted_distance") instance.planted_distance = parse_number<unsigned>(key, value);
    else if (key == "shell_distance") instance.shell_distance = parse_number<unsigned>(key, value);
    else if (key == "cluster_size") instance.cluster_size = parse_number<std::size_t>(key, value);
    else if (key == "cluster_bits") instance.cluster_bits = parse_number<unsigned>(key, value);
    else if (key == "noise") instance.noise = parse_number<double>(key, value);
    else if (key == "instance_seed") instance.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "algorithm") parse_algorithm(value, *this);
    else if (key == "delta") delta = parse_number<double>(key, value);
    else if (key == "K") depth = parse_number<unsigned>(key, value);
    else if (key == "L") trees = parse_number<unsigned>(key, value);
    else if (key == "k_cat") k_cat = parse_number<unsigned>(key, value);
    else if (key == "c_r") c_r = parse_number<double>(key, value);
    else if (key == "t") adaptive.t = parse_number<unsigned>(key, value);
    else if (key == "collision_cap") adaptive.collision_cap = parse_number<double>(key, value);
    else if (key == "level_fraction") adaptive.level_fraction = parse_number<double>(key, value);
    else if (key == "quorum_fraction") adaptive.quorum_fraction = parse_number<double>(key, value);
    else if (key == "restart_fraction") adaptive.restart_fraction = parse_number<double>(key, value);
    else if (key == "natural_level") natural_level = parse_number<unsigned>(key, value);
    else if (key == "natural_trees") natural_trees = parse_number<unsigned>(key, value);
    else if (key == "natural_c") natural_c = parse_number<double>(key, value);
    else if (key == "max_tables") max_tables = parse_number<std::size_t>(key, value);
    else if (key == "tables_per_round") tables_per_round = parse_number<std::size_t>(key, value);
    else if (key == "repetitions") repetitions = parse_number<unsigned>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "wall_time") wall_time = parse_bool(key, value);
    else if (key == "threads") threads = parse_number<unsigned>(key, value);
    else throw input_error("unknown config key '" + std::string(key) + "'");
}

inline ExperimentConfig ExperimentConfig::from_text(std::string_view text, ExperimentConfig base) {
    std::size_t pos = 0, line_no = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw input_error("config line " + std::to_string(line_no) + ": expected key = value");
        base.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), std::move(base));
}

inline nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    if (!data_path.empty()) {
        j["data"] = data_path;
        j["queries"] = queries_path;
        j["truth"] = truth_path;
        j["metric"] = std::string(cslsh::to_string(metric));
    } else {
        j["generator"] = std::string(cslsh::to_string(instance.kind));
        j["n"] = instance.n;
        j["dim"] = instance.dim;
        j["num_queries"] = instance.queries;
        j["planted_distance"] = instance.planted_distance;
        j["shell_distance"] = instance.shell_distance;
        j["cluster_size"] = instance.cluster_size;
        j["cluster_bits"] = instance.cluster_bits;
        j["noise"] = instance.noise;
        j["instance_seed"] = instance.seed;
    }
    j["algorithm"] = std::string(cslsh::to_string(algorithm));
    j["delta"] = delta;
    j["K"] = depth;
    j["L"] = trees;
    j["k_cat"] = k_cat;
    j["c_r"] = c_r;
    j["t"] = adaptive.t;
    j["collision_cap"] = adaptive.collision_cap;
    j["level_fraction"] = adaptive.level_fraction;
    j["quorum_fraction"] = adaptive.quorum_fraction;
    j["restart_fraction"] = adaptive.restart_fraction;
    j["natural_level"] = natural_level;
    j["natural_trees"] = natural_trees;
    j["natural_c"] = natural_c;
    j["max_tables"] = max_tables;
    j["tables_per_round"] = tables_per_round;
    j["repetitions"] = repetitions;
    j["seed"] = seed;
    j["wall_time"] = wall_time;
    j["threads"] = threads;
    return j;
}

/// Data, queries and ground truth for one experiment.
struct Workload {
    Dataset data;
    Dataset queries;
    std::vector<Candidate> truth;
};

inline Workload load_workload(const ExperimentConfig& cfg) {
    if (cfg.data_path.empty()) {
        auto inst = generate(cfg.instance);
        return {std::move(inst.data), std::move(inst.queries), std::move(inst.truth)};
    }
    if (cfg.queries_path.empty()) throw input_error("config sets 'data' but not 'queries'");
    Workload w{load_dataset(cfg.data_path, cfg.metric), load_dataset(cfg.queries_path, cfg.metric), {}};
    if (w.queries.dim() != w.data.dim())
        throw input_error("queries have dimension " + std::to_string(w.queries.dim()) + ", data has " +
                          std::to_string(w.data.dim()));
    if (!cfg.truth_path.empty()) {
        w.truth = load_ground_truth(cfg.truth_path);
        if (w.truth.size() != w.queries.size()) throw input_error("ground truth and query counts differ");
        for (const auto& c : w.truth) w.data.check_id(c.id);
    } else {
        for (std::size_t i = 0; i < w.queries.size(); ++i) w.truth.push_back(brute_force_nn(w.data, w.queries.point(i)));
    }
    return w;
}

/// One (repetition, query) outcome.
struct QueryRow {
    std::size_t query = 0;
    unsigned repetition = 0;
    Candidate returned;
    Candidate truth;
    std::size_t hash_evaluations = 0;
    std::size_t distance_computations = 0;
    std::size_t tables = 0;          // tables or trees touched
    unsigned level = 0;              // forest level reported on (forest algorithms)
    bool confirmed = false;
    std::optional<double> opt;       // OPT(L, K) when the collision function is analytic
    std::optional<std::int64_t> wall_ns;

    /// Valid minimum: any point at the nearest-neighbor distance.
    [[nodiscard]] bool correct() const noexcept { return returned.distance == truth.distance; }
    [[nodiscard]] bool exact_id() const noexcept { return returned.id == truth.id; }
    [[nodiscard]] std::size_t work() const noexcept { return hash_evaluations + distance_computations; }
};

struct ReportSummary {
    std::size_t rows = 0;
    double recall = 0;
    double recall_exact_id = 0;
    double mean_work = 0;
    double p50_work = 0, p90_work = 0, p99_work = 0;
    std::optional<double> mean_opt;
    std::optional<double> work_over_opt;  // mean work / mean OPT
};

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
    return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

inline ReportSummary summarize(const std::vector<QueryRow>& rows) {
    ReportSummary s;
    s.rows = rows.size();
    if (rows.empty()) return s;
    std::vector<double> work;
    double opt_sum = 0;
    std::size_t with_opt = 0;
    for (const auto& r : rows) {
        s.recall += r.correct();
        s.recall_exact_id += r.exact_id();
        work.push_back(static_cast<double>(r.work()));
        s.mean_work += static_cast<double>(r.work());
        if (r.opt && std::isfinite(*r.opt)) {
            opt_sum += *r.opt;
            ++with_opt;
        }
    }
    const auto n = static_cast<double>(rows.size());
    s.recall /= n;
    s.recall_exact_id /= n;
    s.mean_work /= n;
    s.p50_work = percentile(work, 0.5);
    s.p90_work = percentile(work, 0.9);
    s.p99_work = percentile(work, 0.99);
    if (with_opt == rows.size()) {
        s.mean_opt = opt_sum / n;
        s.work_over_opt = s.mean_work / *s.mean_opt;
    }
    return s;
}

struct Report {
    ExperimentConfig config;
    std::vector<QueryRow> rows;
    ReportSummary summary;

    void write_jsonl(std::ostream& out) const;
    [[nodiscard]] std::string jsonl() const {
        std::ostringstream ss;
        write_jsonl(ss);
        return ss.str();
    }
};

inline void Report::write_jsonl(std::ostream& out) const {
    nlohmann::ordered_json head;
    head["type"] = "config";
    head["version"] = std::string(kVersion);
    const auto resolved = config.to_json();
    for (const auto& [key, value] : resolved.items()) head[key] = value;
    out << head.dump() << '\n';
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["type"] = "query";
        j["repetition"] = r.repetition;
        j["query"] = r.query;
        j["returned"] = r.returned.id.index;
        j["returned_distance"] = r.returned.distance;
        j["true_id"] = r.truth.id.index;
        j["true_distance"] = r.truth.distance;
        j["correct"] = r.correct();
        j["exact_id"] = r.exact_id();
        j["work"] = r.work();
        j["hash_evaluations"] = r.hash_evaluations;
        j["distance_computations"] = r.distance_computations;
        j["tables"] = r.tables;
        j["level"] = r.level;
        j["confirmed"] = r.confirmed;
        if (r.opt) j["opt"] = std::isfinite(*r.opt) ? nlohmann::ordered_json(*r.opt) : nlohmann::ordered_json(nullptr);
        if (r.wall_ns) j["wall_ns"] = *r.wall_ns;
        out << j.dump() << '\n';
    }
    nlohmann::ordered_json s;
    s["type"] = "summary";
    s["rows"] = summary.rows;
    s["recall"] = summary.recall;
    s["recall_exact_id"] = summary.recall_exact_id;
    s["mean_work"] = summary.mean_work;
    s["p50_work"] = summary.p50_work;
    s["p90_work"] = summary.p90_work;
    s["p99_work"] = summary.p99_work;
    if (summary.mean_opt) {
        s["mean_opt"] = *summary.mean_opt;
        s["work_over_opt"] = *summary.work_over_opt;
    }
    out << s.dump() << '\n';
}

/// R * 8 trees for the adaptive ensemble, 64 for a single natural forest.
inline unsigned resolved_trees(const ExperimentConfig& cfg, std::size_t n) {
    if (cfg.trees) return cfg.trees;
    if (cfg.algorithm == Algorithm::natural) return 64;
    return EnsembleShape::for_budget(n, 1, cfg.c_r).forests * 8;
}

/// A built query structure; which member is set depends on the algorithm.
struct Structure {
    std::optional<ForestEnsemble> ensemble;
    std::optional<Forest> forest;
    std::unique_ptr<TableSequence> tables;
};

inline Structure build_structure(const ExperimentConfig& cfg, const Dataset& data, unsigned repetition) {
    Structure s;
    const RngSeed seed = RngSeed(cfg.seed).derive("structure", repetition);
    const auto family = LshFamily::for_dataset(data);
    switch (cfg.algorithm) {
        case Algorithm::forest_adaptive: {
            const auto shape = EnsembleShape::for_budget(data.size(), resolved_trees(cfg, data.size()), cfg.c_r);
            s.ensemble.emplace(data, family, cfg.depth, shape, seed, cfg.adaptive);
            break;
        }
        case Algorithm::natural:
            s.forest.emplace(data, family, cfg.depth, resolved_trees(cfg, data.size()), seed);
            break;
        case Algorithm::table_cs:
        case Algorithm::budgeted_cs: {
            const unsigned width = cfg.k_cat ? cfg.k_cat : default_concatenation_width(data, family, seed);
            s.tables = std::make_unique<TableSequence>(data, family, width, cfg.max_tables, seed);
            break;
        }
        case Algorithm::brute: break;
    }
    return s;
}

/// Runs one query against a built structure. Pure given (config, structure, q, seed).
inline QueryRow run_query(const ExperimentConfig& cfg, Structure& s, const Dataset& data, PointView q,
                          const RngSeed& query_seed) {
    QueryRow row;
    switch (cfg.algorithm) {
        case Algorithm::brute:
            row.returned = brute_force_nn(data, q);
            row.distance_computations = data.size();
            row.confirmed = true;
            break;
        case Algorithm::table_cs:
        case Algorithm::budgeted_cs: {
            auto rng = query_seed.stream();
            const auto r = cfg.algorithm == Algorithm::table_cs
                               ? query_nn(*s.tables, q, cfg.delta, rng)
                               : query_nn_budgeted(*s.tables, q, cfg.delta, std::min(cfg.tables_per_round, cfg.max_tables), rng);
            row.returned = r.best;
            row.confirmed = r.confirmed;
            row.hash_evaluations = r.stats.hash_evaluations;
            row.distance_computations = r.stats.distance_computations;
            row.tables = r.stats.tables_queried;
            break;
        }
        case Algorithm::forest_adaptive: {
            const auto& e = *s.ensemble;
            const auto r = adaptive_nearest_neighbor(e, q, query_seed);
            row.returned = r.best;
            row.confirmed = true;
            row.hash_evaluations = r.cost.hash_evaluations;
            row.distance_computations = r.cost.collisions_inspected;
            row.tables = r.final_trees;
            row.level = r.final_level;
            const double trees = static_cast<double>(e.forest_count()) * e.trees_per_forest();
            row.opt = opt_report(profile(data, e.family(), q), trees, e.depth(), data.size()).opt;
            break;
        }
        case Algorithm::natural: {
            const auto& f = *s.forest;
            const unsigned trees = cfg.natural_trees ? std::min(cfg.natural_trees, f.tree_count()) : f.tree_count();
            const unsigned level = cfg.natural_level ? cfg.natural_level : static_level(f, q, cfg.natural_c, trees);
            const auto r = natural_algorithm(f, data, q, level, trees);
            if (r.best) {
                row.returned = *r.best;
                row.distance_computations = r.collisions;
            } else {
                // Every bucket was empty: report a uniform random point.
                auto rng = query_seed.stream();
                const PointId id{static_cast<std::uint32_t>(rng.below(data.size()))};
                row.returned = {data.distance(id, q), id};
                row.distance_computations = 1;
            }
            row.hash_evaluations = r.hash_evaluations;
            row.tables = trees;
            row.level = level;
            row.opt = opt_report(profile(data, f.family(), q), f.tree_count(), f.depth(), data.size()).opt;
            break;
        }
    }
    return row;
}

/// Calls body(k) for k in [0, count) on `threads` workers; results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) body(k);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t k = w; k < count; k += threads) body(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Runs every (repetition, query) cell. `prebuilt` replaces the structure of
/// repetition 0 (used after loading a serialized ensemble).
inline Report run_experiment(const ExperimentConfig& cfg, const Workload& w, Structure* prebuilt = nullptr) {
    if (cfg.repetitions == 0) throw input_error("repetitions must be positive");
    if (cfg.depth == 0 || cfg.depth > HashString::kMaxLength) throw input_error("K must be in [1, 64]");
    if (w.queries.dim() != w.data.dim()) throw input_error("query dimension does not match the data");
    Report rep;
    rep.config = cfg;
    const std::size_t nq = w.queries.size();
    rep.rows.resize(nq * cfg.repetitions);
    const RngSeed master(cfg.seed);
    for (unsigned r = 0; r < cfg.repetitions; ++r) {
        Structure built;
        Structure& s = (r == 0 && prebuilt) ? *prebuilt : (built = build_structure(cfg, w.data, r));
        parallel_for(nq, cfg.threads, [&](std::size_t i) {
            const auto start = std::chrono::steady_clock::now();
            QueryRow row = run_query(cfg, s, w.data, w.queries.point(i), master.derive("query", r).derive("index", i));
            if (cfg.wall_time)
                row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
            row.query = i;
            row.repetition = r;
            row.truth = w.truth.at(i);
            rep.rows[r * nq + i] = row;
        });
    }
    rep.summary = summarize(rep.rows);
    return rep;
}

}  // namespace cslsh
