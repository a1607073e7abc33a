#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpsearch/harness.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            if (!current.empty()) parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) parts.push_back(current);
    return parts;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace kpsearch;

    CLI::App app{"search-based test suite generation for key-point detectors"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string sut_flag;
    std::string algorithm_flag;
    std::string algorithms_flag = "rs,mosa,mosa+";
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    std::size_t jobs = 0;
    std::uint64_t budget = 0;
    double epsilon = 0.0;
    bool no_trace = false;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "master seed; repetition seeds derive from it");
        cmd->add_option("--reps", reps, "independent repetitions");
        cmd->add_option("--jobs", jobs, "worker threads across repetitions");
        cmd->add_option("--budget", budget, "evaluation budget per repetition");
        cmd->add_option("--epsilon", epsilon, "severe misprediction threshold");
        cmd->add_option("--sut", sut_flag,
                        "synthetic | synthetic:<config.json> | external:<command>");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "run one search algorithm");
    add_run_flags(run_cmd);
    run_cmd->add_option("--algorithm", algorithm_flag, "rs | mosa | mosa+ | fitest | fitest+");
    run_cmd->add_flag("--no-trace", no_trace, "skip writing per-evaluation traces");

    CLI::App* compare_cmd =
        app.add_subcommand("compare", "run several algorithms on paired seeds");
    add_run_flags(compare_cmd);
    compare_cmd->add_option("--algorithms", algorithms_flag, "comma-separated algorithm list");

    CLI::App* explain_cmd = app.add_subcommand("explain", "fit rules to recorded traces");
    ExplainOptions explain_opt;
    explain_cmd->add_option("--run", explain_opt.run_path, "run directory or trace file")
        ->required();
    explain_cmd->add_option("--target", explain_opt.target, "nme or a key-point label (KP26)");
    explain_cmd->add_option("--min-leaf", explain_opt.min_leaf,
                            "minimum observations per leaf (0 = scale with data)");
    explain_cmd->add_option("--folds", explain_opt.folds, "cross-validation folds");
    explain_cmd->add_option("--tree-seed", explain_opt.seed, "holdout and fold shuffle seed");
    bool no_prune = false;
    explain_cmd->add_flag("--no-prune", no_prune, "keep the fully grown tree");
    explain_cmd->add_option("--out", out_dir, "output directory");

    CLI::App* replay_cmd = app.add_subcommand("replay", "re-run a recorded run and verify it");
    ReplayOptions replay_opt;
    replay_cmd->add_option("--run", replay_opt.run_dir, "run directory with config.json")
        ->required();
    replay_cmd->add_option("--out", replay_opt.out_path, "optional report JSON path");
    replay_cmd->add_option("--tolerance", replay_opt.tolerance, "numeric comparison slack");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(run_cmd) || app.got_subcommand(compare_cmd)) {
            CLI::App* cmd = app.got_subcommand(run_cmd) ? run_cmd : compare_cmd;
            RunSpec spec;
            if (cmd->count("--config")) spec = load_run_spec(config_path);
            if (cmd->count("--seed")) spec.seed = seed;
            if (cmd->count("--reps")) spec.reps = reps;
            if (cmd->count("--jobs")) spec.jobs = jobs;
            if (cmd->count("--budget")) spec.budget = budget;
            if (cmd->count("--epsilon")) spec.epsilon = epsilon;
            if (cmd->count("--sut")) spec.sut = parse_sut_flag(sut_flag);
            if (app.got_subcommand(run_cmd)) {
                if (run_cmd->count("--algorithm")) {
                    spec.algorithm = parse_algorithm(algorithm_flag);
                }
                if (no_trace) spec.record_trace = false;
                return cmd_run(spec, out_dir);
            }
            std::vector<Algorithm> algorithms;
            for (const std::string& name : split_csv(algorithms_flag)) {
                algorithms.push_back(parse_algorithm(name));
            }
            return cmd_compare(algorithms, spec, out_dir);
        }
        if (app.got_subcommand(explain_cmd)) {
            explain_opt.prune = !no_prune;
            return cmd_explain(explain_opt, out_dir);
        }
        return cmd_replay(replay_opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
