// Command-line entry point. All analysis lives in the library; this file
// only maps flags and config files onto AnalysisConfig, dispatches to the
// run_* drivers, and turns their outcomes into the exit-code contract:
// 0 success, 1 detector conflict, 2 usage or configuration error,
// 3 non-convergence, 70 unexpected internal failure.
//
// Standard output carries exactly one report document per run; everything
// else (written paths, timings, diagnostics) goes to standard error.

#include "chainspec/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace chainspec;

struct CommonFlags {
    std::string config_path, system, schedule, out_dir;
    double resolution = 0.0;
    int depth = 0, prune_budget = 0, window = 0;
    long long seeds = 0;
    std::vector<std::string> pairs;
};

void attach_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path,
                    "configuration file (key = value text or JSON)");
    cmd->add_option("--system", f.system, "zoo system name or system file path");
    cmd->add_option("--resolution", f.resolution, "sample grid spacing");
    cmd->add_option("--depth", f.depth, "depth of the default schedule ladder");
    cmd->add_option("--schedule", f.schedule,
                    "explicit comma-separated epsilons, or 'default'");
    cmd->add_option("--prune-budget", f.prune_budget, "pruning loop round budget");
    cmd->add_option("--window", f.window, "order stabilization window (levels)");
    cmd->add_option("--seeds", f.seeds, "seed echoed into the bundle");
    cmd->add_option("--out", f.out_dir, "directory for report.json and artifacts");
    cmd->add_option("--pair", f.pairs,
                    "point pair \"x;y\", repeatable; appended to config pairs");
}

// Defaults, then the config file, then whichever flags were actually given.
AnalysisConfig merge_config(const CLI::App* cmd, const CommonFlags& f) {
    AnalysisConfig cfg;
    if (cmd->count("--config")) cfg = load_config_file(f.config_path);
    if (cmd->count("--system")) cfg.system = f.system;
    if (cmd->count("--resolution")) cfg.resolution = f.resolution;
    if (cmd->count("--depth")) cfg.schedule_depth = f.depth;
    if (cmd->count("--schedule")) cfg.schedule = parse_schedule_text(f.schedule);
    if (cmd->count("--prune-budget")) cfg.prune_budget = f.prune_budget;
    if (cmd->count("--window")) cfg.stabilization_window = f.window;
    if (cmd->count("--seeds")) cfg.seeds = f.seeds;
    if (cmd->count("--out")) cfg.output_dir = f.out_dir;
    for (const std::string& p : f.pairs) cfg.pairs.push_back(parse_pair_text(p));
    return cfg;
}

int emit(const ReportBundle& bundle, const AnalysisConfig& cfg) {
    if (!cfg.output_dir.empty())
        for (const std::string& path : write_bundle(bundle, cfg.output_dir))
            std::cerr << "wrote " << path << "\n";
    std::cout << bundle.json << "\n";
    for (const StageTiming& t : bundle.timings)
        std::fprintf(stderr, "timing %-24s %.4fs\n", t.stage.c_str(), t.seconds);
    return bundle.exit_code;
}

// Reserved thread override; every current stage is single-threaded, so the
// value is validated and acknowledged but changes nothing.
void check_thread_env() {
    const char* raw = std::getenv("CHAINSPEC_THREADS");
    if (!raw) return;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (*raw == '\0' || *end != '\0' || v < 1)
        throw ConfigError("CHAINSPEC_THREADS must be a positive integer");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"epsilon-chain structure and emergent order spectra of "
                 "sampled dynamical systems"};
    app.require_subcommand(1);

    CLI::App* cmd_systems = app.add_subcommand("systems", "list the built-in zoo");
    bool systems_json = false;
    cmd_systems->add_flag("--json", systems_json, "machine-readable listing");

    CommonFlags flags;
    CLI::App* cmd_analyze = app.add_subcommand(
        "analyze", "full pipeline: components, Conley order, per-pair spectra");
    CLI::App* cmd_chains = app.add_subcommand(
        "chains", "nested chain family, certificate and limit support per pair");
    CLI::App* cmd_spectrum =
        app.add_subcommand("spectrum", "order-type spectrum reports per pair");
    CLI::App* cmd_conley =
        app.add_subcommand("conley", "chain components and the Conley order");
    CLI::App* cmd_prolong = app.add_subcommand(
        "prolong", "prolongation hierarchy of one base point");
    for (CLI::App* c : {cmd_analyze, cmd_chains, cmd_spectrum, cmd_conley, cmd_prolong})
        attach_common(c, flags);

    std::string point_text;
    int alpha_max = 4;
    cmd_prolong->add_option("--point", point_text, "base point (coordinate or x,y)")
        ->required();
    cmd_prolong->add_option("--alpha-max", alpha_max, "deepest prolongation level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n(run with --help for usage)\n";
        return 2;
    }

    try {
        check_thread_env();
        if (cmd_systems->parsed()) {
            std::cout << systems_listing(systems_json);
            return 0;
        }
        auto dispatch = [&flags](CLI::App* cmd, ReportBundle (*runner)(const AnalysisConfig&)) {
            const AnalysisConfig cfg = merge_config(cmd, flags);
            return emit(runner(cfg), cfg);
        };
        if (cmd_analyze->parsed()) return dispatch(cmd_analyze, run_analyze);
        if (cmd_chains->parsed()) return dispatch(cmd_chains, run_chains);
        if (cmd_spectrum->parsed()) return dispatch(cmd_spectrum, run_spectrum);
        if (cmd_conley->parsed()) return dispatch(cmd_conley, run_conley);
        if (cmd_prolong->parsed()) {
            const AnalysisConfig cfg = merge_config(cmd_prolong, flags);
            return emit(run_prolong(cfg, parse_point_text(point_text), alpha_max), cfg);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 70;
    }
    return 2; // no subcommand matched; require_subcommand should prevent this
}
