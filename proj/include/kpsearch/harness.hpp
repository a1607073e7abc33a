#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "kpsearch/external_sut.hpp"
#include "kpsearch/search.hpp"
#include "kpsearch/serialization.hpp"
#include "kpsearch/stats.hpp"
#include "kpsearch/sut.hpp"
#include "kpsearch/synthetic_default.hpp"
#include "kpsearch/tree.hpp"

// Command implementations behind the CLI verbs. Everything here works on a
// resolved RunSpec so tests can drive the exact code paths the binary uses.

namespace kpsearch {

namespace fs = std::filesystem;

struct SutSpec {
    enum class Type { synthetic, external };
    Type type = Type::synthetic;
    SyntheticSutConfig synthetic = default_synthetic_config();
    ExternalSutConfig external;
    GenomeBounds bounds;           // search domain, resolved from the SUT
    std::vector<int> model_ids;

    SutSpec() { resolve_domain(); }

    void resolve_domain() {
        if (type == Type::synthetic) {
            bounds = synthetic.bounds;
            model_ids = synthetic.model_ids();
        } else if (model_ids.empty()) {
            for (int m = 0; m < 10; ++m) model_ids.push_back(m);
        }
    }

    std::unique_ptr<Sut> make() const {
        if (type == Type::synthetic) return std::make_unique<SyntheticSut>(synthetic);
        return std::make_unique<ExternalSut>(external);
    }
};

inline void to_json(json& j, const SutSpec& s) {
    if (s.type == SutSpec::Type::synthetic) {
        j = json{{"type", "synthetic"}, {"config", s.synthetic}};
    } else {
        j = json{{"type", "external"},
                 {"command", s.external.command},
                 {"key_points", s.external.key_points},
                 {"timeout_ms", s.external.timeout_ms},
                 {"bounds", s.bounds},
                 {"model_ids", s.model_ids}};
    }
}

inline void from_json(const json& j, SutSpec& s) {
    std::string type = j.value("type", "synthetic");
    if (type == "synthetic") {
        s.type = SutSpec::Type::synthetic;
        if (j.contains("config")) {
            if (j.at("config").is_string()) {
                s.synthetic = load_synthetic_config(j.at("config").get<std::string>());
            } else {
                s.synthetic = j.at("config").get<SyntheticSutConfig>();
                s.synthetic.validate();
            }
        } else {
            s.synthetic = default_synthetic_config();
        }
    } else if (type == "external") {
        s.type = SutSpec::Type::external;
        s.external.command = j.at("command").get<std::string>();
        s.external.key_points = j.value("key_points", std::size_t{27});
        s.external.timeout_ms = j.value("timeout_ms", 10000);
        if (j.contains("bounds")) j.at("bounds").get_to(s.bounds);
        if (j.contains("model_ids")) j.at("model_ids").get_to(s.model_ids);
        if (s.external.command.empty()) throw ConfigError("external sut: empty command");
    } else {
        throw ConfigError("unknown sut type: " + type);
    }
    s.resolve_domain();
}

// "synthetic", "synthetic:<config.json>" or "external:<command line>".
inline SutSpec parse_sut_flag(const std::string& flag) {
    SutSpec spec;
    if (flag == "synthetic") {
        spec.resolve_domain();
        return spec;
    }
    if (flag.rfind("synthetic:", 0) == 0) {
        spec.synthetic = load_synthetic_config(flag.substr(10));
        spec.resolve_domain();
        return spec;
    }
    if (flag.rfind("external:", 0) == 0) {
        spec.type = SutSpec::Type::external;
        spec.external.command = flag.substr(9);
        if (spec.external.command.empty()) throw ConfigError("external sut: empty command");
        spec.resolve_domain();
        return spec;
    }
    throw ConfigError("unknown --sut value: " + flag);
}

struct RunSpec {
    Algorithm algorithm = Algorithm::mosa;
    std::uint64_t budget = 20000;
    double epsilon = 0.05;
    std::uint64_t seed = 1;
    std::size_t reps = 1;
    std::size_t jobs = 1;
    bool record_trace = true;
    OperatorParams operators;
    SutSpec sut;

    SearchConfig search_config(std::size_t rep) const {
        SearchConfig cfg;
        cfg.algorithm = algorithm;
        cfg.budget = budget;
        cfg.epsilon = epsilon;
        cfg.seed = derive_seed(seed, rep);
        cfg.operators = operators;
        cfg.bounds = sut.bounds;
        cfg.model_ids = sut.model_ids;
        cfg.record_evaluations = record_trace;
        return cfg;
    }

    void validate() const {
        if (reps == 0) throw ConfigError("reps must be >= 1");
        if (budget == 0) throw ConfigError("budget must be >= 1");
        search_config(0).validate();
    }
};

inline void to_json(json& j, const RunSpec& s) {
    j = json{{"algorithm", algorithm_name(s.algorithm)},
             {"budget", s.budget},
             {"epsilon", s.epsilon},
             {"seed", s.seed},
             {"reps", s.reps},
             {"jobs", s.jobs},
             {"record_trace", s.record_trace},
             {"operators", s.operators},
             {"sut", s.sut}};
}

inline void from_json(const json& j, RunSpec& s) {
    if (j.contains("algorithm")) s.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    if (j.contains("budget")) j.at("budget").get_to(s.budget);
    if (j.contains("epsilon")) j.at("epsilon").get_to(s.epsilon);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    if (j.contains("reps")) j.at("reps").get_to(s.reps);
    if (j.contains("jobs")) j.at("jobs").get_to(s.jobs);
    if (j.contains("record_trace")) j.at("record_trace").get_to(s.record_trace);
    if (j.contains("operators")) j.at("operators").get_to(s.operators);
    if (j.contains("sut")) j.at("sut").get_to(s.sut);
}

inline RunSpec load_run_spec(const std::string& path) {
    try {
        RunSpec spec = load_json_file(path).get<RunSpec>();
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError("bad run config " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Repetition driver
// ---------------------------------------------------------------------------

struct RepOutcome {
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    SearchResult result;
};

// Runs `spec.reps` independent repetitions, each on a fresh SUT instance with
// its own derived seed, spreading them over `spec.jobs` worker threads.
inline std::vector<RepOutcome> execute_reps(const RunSpec& spec) {
    spec.validate();
    std::vector<RepOutcome> outcomes(spec.reps);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t rep = next.fetch_add(1);
            if (rep >= spec.reps) return;
            RepOutcome& out = outcomes[rep];
            out.rep = rep;
            SearchConfig cfg = spec.search_config(rep);
            out.seed = cfg.seed;
            try {
                auto sut = spec.sut.make();
                out.result = run_search(*sut, cfg);
            } catch (const std::exception& e) {
                out.result.status = SearchStatus::error;
                out.result.error = e.what();
            }
        }
    };

    std::size_t workers = std::max<std::size_t>(1, std::min(spec.jobs, spec.reps));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return outcomes;
}

inline json rep_summary(const RunSpec& spec, const RepOutcome& out) {
    const std::size_t k = out.result.key_point_count;
    json j{{"algorithm", algorithm_name(spec.algorithm)},
           {"rep", out.rep},
           {"seed", out.seed},
           {"budget", spec.budget},
           {"epsilon", spec.epsilon},
           {"key_points", k},
           {"status", search_status_name(out.result.status)},
           {"evaluations", out.result.evaluations_used},
           {"covered", out.result.archive.size()},
           {"generations", out.result.generations}};
    if (!out.result.error.empty()) j["error"] = out.result.error;
    if (k > 0) {
        j["effectiveness"] = effectiveness_score(out.result.archive, k);
        j["ms"] = misprediction_severity(out.result.archive, k);
    }
    return j;
}

// Shortest round-trip decimal form, the same one the JSON files use.
inline std::string format_double(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline int cmd_run(const RunSpec& spec, const std::string& out_dir) {
    spec.validate();
    fs::create_directories(out_dir);
    write_json_file((fs::path(out_dir) / "config.json").string(), json(spec));

    auto outcomes = execute_reps(spec);

    json per_rep = json::array();
    std::vector<double> es_values;
    bool any_error = false;
    for (const RepOutcome& out : outcomes) {
        fs::path rep_dir = fs::path(out_dir) / ("run_" + std::to_string(out.rep));
        fs::create_directories(rep_dir);
        save_archive((rep_dir / "archive.jsonl").string(), out.result.archive);
        if (spec.record_trace) {
            save_trace((rep_dir / "trace.jsonl").string(), out.result.evaluations);
        }
        write_json_file((rep_dir / "summary.json").string(), rep_summary(spec, out));

        const std::size_t k = out.result.key_point_count;
        json row{{"rep", out.rep},
                 {"seed", out.seed},
                 {"status", search_status_name(out.result.status)},
                 {"covered", out.result.archive.size()}};
        if (out.result.status == SearchStatus::error) {
            any_error = true;
            row["error"] = out.result.error;
        }
        if (k > 0) {
            double es = effectiveness_score(out.result.archive, k);
            es_values.push_back(es);
            row["effectiveness"] = es;
        }
        per_rep.push_back(std::move(row));
        std::cout << "run_" << out.rep << ": " << search_status_name(out.result.status)
                  << ", covered " << out.result.archive.size() << "/"
                  << out.result.key_point_count << "\n";
    }

    json report{{"algorithm", algorithm_name(spec.algorithm)},
                {"reps", spec.reps},
                {"runs", std::move(per_rep)}};
    if (!es_values.empty()) report["median_effectiveness"] = median(es_values);
    write_json_file((fs::path(out_dir) / "report.json").string(), report);
    return any_error ? 1 : 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

// Runs each algorithm over the same derived seed sequence and reports paired
// statistics: Mann-Whitney U plus the Vargha-Delaney effect size on the
// per-rep effectiveness scores, and the Wilcoxon signed-rank test on the
// per-key-point mean severities.
inline int cmd_compare(const std::vector<Algorithm>& algorithms, RunSpec spec,
                       const std::string& out_dir) {
    if (algorithms.size() < 2) throw ConfigError("compare needs at least two algorithms");
    spec.record_trace = false;  // statistics need archives only
    spec.validate();
    fs::create_directories(out_dir);

    struct AlgData {
        std::vector<double> es;               // per rep
        std::vector<std::vector<double>> ms;  // per rep, per key-point
        std::vector<double> ms_mean;          // per key-point, mean over reps
        bool any_error = false;
    };
    std::vector<AlgData> data(algorithms.size());
    std::size_t k = 0;

    std::string es_csv = "algorithm,rep,seed,effectiveness\n";
    std::string ms_csv = "algorithm,rep,key_point,severity\n";

    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        RunSpec alg_spec = spec;
        alg_spec.algorithm = algorithms[a];
        auto outcomes = execute_reps(alg_spec);
        for (const RepOutcome& out : outcomes) {
            if (out.result.status == SearchStatus::error) {
                data[a].any_error = true;
                continue;
            }
            k = out.result.key_point_count;
            double es = effectiveness_score(out.result.archive, k);
            data[a].es.push_back(es);
            data[a].ms.push_back(misprediction_severity(out.result.archive, k));
            es_csv += algorithm_name(algorithms[a]) + "," + std::to_string(out.rep) + "," +
                      std::to_string(out.seed) + "," + format_double(es) + "\n";
            for (std::size_t i = 0; i < k; ++i) {
                ms_csv += algorithm_name(algorithms[a]) + "," + std::to_string(out.rep) + "," +
                          kp_label(i) + "," + format_double(data[a].ms.back()[i]) + "\n";
            }
        }
        data[a].ms_mean.assign(k, 0.0);
        for (const auto& rep_ms : data[a].ms) {
            for (std::size_t i = 0; i < k; ++i) data[a].ms_mean[i] += rep_ms[i];
        }
        if (!data[a].ms.empty()) {
            for (double& v : data[a].ms_mean) v /= static_cast<double>(data[a].ms.size());
        }
    }

    std::string stats_csv =
        "a,b,es_median_a,es_median_b,es_u,es_p,es_exact,es_a12,ms_w,ms_p,ms_exact,ms_a12\n";
    json pairs = json::array();
    bool any_error = false;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        any_error = any_error || data[a].any_error;
        for (std::size_t b = a + 1; b < algorithms.size(); ++b) {
            if (data[a].es.empty() || data[b].es.empty()) continue;
            RankTestResult es_test = mann_whitney_u(data[a].es, data[b].es);
            double es_a12 = vargha_delaney_a(data[a].es, data[b].es);
            json pair{{"a", algorithm_name(algorithms[a])},
                      {"b", algorithm_name(algorithms[b])},
                      {"es_median_a", median(data[a].es)},
                      {"es_median_b", median(data[b].es)},
                      {"es_u", es_test.statistic},
                      {"es_p", es_test.p_value},
                      {"es_exact", es_test.exact},
                      {"es_a12", es_a12}};
            std::string ms_cols = ",,,";
            if (k > 0) {
                // Identical severity profiles leave the signed-rank test with
                // no nonzero differences; report them as indistinguishable.
                RankTestResult ms_test;
                if (data[a].ms_mean != data[b].ms_mean) {
                    ms_test = wilcoxon_signed_rank(data[a].ms_mean, data[b].ms_mean);
                } else {
                    ms_test.exact = true;
                }
                double ms_a12 = vargha_delaney_a(data[a].ms_mean, data[b].ms_mean);
                pair["ms_w"] = ms_test.statistic;
                pair["ms_p"] = ms_test.p_value;
                pair["ms_exact"] = ms_test.exact;
                pair["ms_a12"] = ms_a12;
                ms_cols = format_double(ms_test.statistic) + "," +
                          format_double(ms_test.p_value) + "," +
                          (ms_test.exact ? "true" : "false") + "," + format_double(ms_a12);
            }
            stats_csv += pair["a"].get<std::string>() + "," + pair["b"].get<std::string>() +
                         "," + format_double(pair["es_median_a"].get<double>()) + "," +
                         format_double(pair["es_median_b"].get<double>()) + "," +
                         format_double(es_test.statistic) + "," +
                         format_double(es_test.p_value) + "," +
                         (es_test.exact ? "true" : "false") + "," + format_double(es_a12) +
                         "," + ms_cols + "\n";
            std::cout << pair["a"].get<std::string>() << " vs " << pair["b"].get<std::string>()
                      << ": ES medians " << format_double(pair["es_median_a"].get<double>())
                      << " / " << format_double(pair["es_median_b"].get<double>()) << ", p "
                      << format_double(es_test.p_value) << ", A12 " << format_double(es_a12)
                      << "\n";
            pairs.push_back(std::move(pair));
        }
    }

    write_text_file((fs::path(out_dir) / "es.csv").string(), es_csv);
    write_text_file((fs::path(out_dir) / "ms.csv").string(), ms_csv);
    write_text_file((fs::path(out_dir) / "stats.csv").string(), stats_csv);

    json report{{"budget", spec.budget},
                {"epsilon", spec.epsilon},
                {"seed", spec.seed},
                {"reps", spec.reps},
                {"key_points", k},
                {"pairs", std::move(pairs)}};
    json algs = json::array();
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        json entry{{"algorithm", algorithm_name(algorithms[a])}, {"es", data[a].es}};
        if (!data[a].es.empty()) entry["es_median"] = median(data[a].es);
        entry["ms_mean"] = data[a].ms_mean;
        algs.push_back(std::move(entry));
    }
    report["algorithms"] = std::move(algs);
    write_json_file((fs::path(out_dir) / "report.json").string(), report);
    return any_error ? 1 : 0;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainOptions {
    std::string run_path;       // run directory or single trace file
    std::string target = "nme"; // "nme" or a key-point label like "KP26"
    std::size_t min_leaf = 0;   // 0 = scale with the observation count
    bool prune = true;
    std::size_t folds = 10;
    std::uint64_t seed = 1;
};

// "nme" -> nullopt; "KP26" / "kp26" / "26" -> 0-based index 25.
inline std::optional<std::size_t> parse_explain_target(const std::string& target,
                                                       std::size_t key_points) {
    if (target == "nme" || target == "NME") return std::nullopt;
    std::string digits = target;
    if (digits.size() > 2 && (digits[0] == 'K' || digits[0] == 'k') &&
        (digits[1] == 'P' || digits[1] == 'p')) {
        digits = digits.substr(2);
    }
    std::size_t pos = 0;
    unsigned long value = 0;
    try {
        value = std::stoul(digits, &pos);
    } catch (const std::exception&) {
        throw ConfigError("bad explain target: " + target);
    }
    if (pos != digits.size() || value == 0 || value > key_points) {
        throw ConfigError("bad explain target: " + target);
    }
    return value - 1;
}

inline std::vector<EvaluatedTestCase> load_run_tests(const std::string& run_path) {
    std::vector<std::string> trace_files;
    fs::path p(run_path);
    if (fs::is_regular_file(p)) {
        trace_files.push_back(p.string());
    } else if (fs::is_directory(p)) {
        if (fs::exists(p / "trace.jsonl")) {
            trace_files.push_back((p / "trace.jsonl").string());
        } else {
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_directory() && fs::exists(entry.path() / "trace.jsonl")) {
                    trace_files.push_back((entry.path() / "trace.jsonl").string());
                }
            }
            std::sort(trace_files.begin(), trace_files.end());
        }
    }
    if (trace_files.empty()) throw IoError("no trace.jsonl under " + run_path);

    std::vector<EvaluatedTestCase> tests;
    for (const std::string& file : trace_files) {
        for (EvaluationRecord& rec : load_trace(file)) tests.push_back(std::move(rec.test));
    }
    return tests;
}

inline int cmd_explain(const ExplainOptions& opt, const std::string& out_dir) {
    std::vector<EvaluatedTestCase> tests = load_run_tests(opt.run_path);
    if (tests.empty()) throw IoError("empty trace under " + opt.run_path);
    std::size_t k = tests.front().truth.positions.size();

    std::optional<std::size_t> kp = parse_explain_target(opt.target, k);
    std::vector<Observation> observations =
        kp ? ne_observations(tests, *kp) : nme_observations(tests);
    if (observations.size() < 2) throw IoError("not enough observations for " + opt.target);

    TreeParams params;
    params.min_leaf = opt.min_leaf > 0 ? opt.min_leaf : scaled_min_leaf(observations.size());
    params.prune = opt.prune;
    params.seed = opt.seed;

    RegressionTree tree = RegressionTree::fit(observations, params);
    std::vector<Rule> rules = extract_rules(tree);
    double mae = cv_mae(observations, params, opt.folds);

    fs::create_directories(out_dir);
    std::string rules_txt;
    for (const Rule& r : rules) {
        rules_txt += r.text();
        rules_txt += '\n';
    }
    write_text_file((fs::path(out_dir) / "rules.txt").string(), rules_txt);

    json report{{"target", opt.target},
                {"observations", observations.size()},
                {"min_leaf", params.min_leaf},
                {"max_depth", params.max_depth},
                {"pruned", params.prune},
                {"folds", opt.folds},
                {"cv_mae", mae},
                {"leaf_count", tree.leaf_count()},
                {"rules", rules}};
    write_json_file((fs::path(out_dir) / "explain_report.json").string(), report);

    std::cout << "observations: " << observations.size() << ", leaves: " << tree.leaf_count()
              << ", cv mae: " << format_double(mae) << "\n";
    for (std::size_t i = 0; i < rules.size() && i < 5; ++i) {
        std::cout << "  " << rules[i].text() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

struct ReplayOptions {
    std::string run_dir;
    std::string out_path;     // optional report file
    double tolerance = 1e-9;  // numeric slack for non-deterministic detectors
};

namespace detail {

inline bool close_enough(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool archives_match(const Archive& saved, const Archive& fresh, double tol,
                           std::string& why) {
    if (saved.size() != fresh.size()) {
        why = "covered objective count differs";
        return false;
    }
    for (const auto& [objective, test] : saved.entries()) {
        const EvaluatedTestCase* other = fresh.entry(objective);
        if (!other) {
            why = "objective " + kp_label(objective) + " missing from replay";
            return false;
        }
        const EvaluatedTestCase& a = test;
        const EvaluatedTestCase& b = *other;
        if (a.ic.model_id != b.ic.model_id || !close_enough(a.ic.roll, b.ic.roll, tol) ||
            !close_enough(a.ic.pitch, b.ic.pitch, tol) ||
            !close_enough(a.ic.yaw, b.ic.yaw, tol)) {
            why = "entry " + kp_label(objective) + " has different characteristics";
            return false;
        }
        if (a.fitness.size() != b.fitness.size()) {
            why = "entry " + kp_label(objective) + " has different fitness length";
            return false;
        }
        for (std::size_t i = 0; i < a.fitness.size(); ++i) {
            if (!close_enough(a.fitness[i], b.fitness[i], tol)) {
                why = "entry " + kp_label(objective) + " fitness differs beyond tolerance";
                return false;
            }
        }
    }
    return true;
}

}  // namespace detail

// Re-executes every repetition recorded under run_dir and checks the stored
// archives still come out. Exit 0 only when everything matches.
inline int cmd_replay(const ReplayOptions& opt) {
    RunSpec spec = load_run_spec((fs::path(opt.run_dir) / "config.json").string());

    json reps = json::array();
    bool all_ok = true;
    for (std::size_t rep = 0; rep < spec.reps; ++rep) {
        fs::path rep_dir = fs::path(opt.run_dir) / ("run_" + std::to_string(rep));
        fs::path archive_path = rep_dir / "archive.jsonl";
        if (!fs::exists(archive_path)) {
            reps.push_back(json{{"rep", rep}, {"ok", false}, {"why", "archive.jsonl missing"}});
            std::cout << "run_" << rep << ": missing archive\n";
            all_ok = false;
            continue;
        }
        Archive saved = load_archive(archive_path.string(), spec.epsilon);

        SearchConfig cfg = spec.search_config(rep);
        cfg.record_evaluations = false;
        SearchResult fresh;
        try {
            auto sut = spec.sut.make();
            fresh = run_search(*sut, cfg);
        } catch (const std::exception& e) {
            fresh.status = SearchStatus::error;
            fresh.error = e.what();
        }

        std::string why;
        bool ok = fresh.status != SearchStatus::error &&
                  detail::archives_match(saved, fresh.archive, opt.tolerance, why);
        if (fresh.status == SearchStatus::error) why = fresh.error;

        std::ifstream in(archive_path, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        bool byte_identical = ok && buf.str() == archive_jsonl_string(fresh.archive);

        json row{{"rep", rep}, {"ok", ok}, {"byte_identical", byte_identical}};
        if (!ok) row["why"] = why;
        reps.push_back(std::move(row));
        std::cout << "run_" << rep << ": " << (ok ? "ok" : ("MISMATCH: " + why))
                  << (byte_identical ? " (byte-identical)" : "") << "\n";
        all_ok = all_ok && ok;
    }

    if (!opt.out_path.empty()) {
        write_json_file(opt.out_path, json{{"run_dir", opt.run_dir},
                                           {"tolerance", opt.tolerance},
                                           {"ok", all_ok},
                                           {"reps", std::move(reps)}});
    }
    return all_ok ? 0 : 1;
}

}  // namespace kpsearch
