#pragma once

// Configuration, analysis drivers and serialization for the command-line
// tool: everything between the library calls and the bytes on disk.
//
// Reports are deterministic by construction: fixed key order, shortest
// round-trip float formatting, no timestamps or absolute paths inside the
// document. Wall-clock timings are collected separately and written to their
// own sink so that the analytical outputs of two runs with the same
// configuration can be compared byte for byte.

#include "chainspec/spectrum.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chainspec {

// Invalid configuration or command usage; the tool exits with code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A requested location; the second coordinate is used only by plane spaces.
struct PointSpec {
    double x = 0.0;
    double y = 0.0;
};

struct PairSpec {
    PointSpec from, to;
};

// "x;y" with each side a coordinate or a comma pair: "1;0", "0.5,1;0.5,0".
PairSpec parse_pair_text(const std::string& text);
PointSpec parse_point_text(const std::string& text);

// Comma-separated epsilons, or "default" for the built-in ladder (empty result).
std::vector<double> parse_schedule_text(const std::string& text);

struct AnalysisConfig {
    std::string system = "cascade"; // zoo name or path of a system file
    double resolution = 0.01;
    std::vector<double> schedule;   // explicit epsilons; empty = default ladder
    int schedule_depth = 10;
    int prune_budget = 16;
    int stabilization_window = 3;
    long long seeds = 1;            // echoed; reserved for sampled corpora
    std::string output_dir;         // empty: print only, write nothing
    std::vector<PairSpec> pairs;
};

// Line-oriented `key = value` text with optional [sections]; '#' comments.
// Pairs go into a [pairs] section, one `pair = x;y` line each.
AnalysisConfig parse_config_text(const std::string& text);
// The same fields as a JSON object; "pairs" is an array of [x, y] arrays.
AnalysisConfig parse_config_json(const std::string& text);
// Dispatches on a leading '{' (after whitespace) or a .json suffix.
AnalysisConfig load_config_file(const std::string& path);

// Range checks plus schedule monotonicity; throws ConfigError.
void validate_config(const AnalysisConfig& cfg);

// Zoo lookup by name, or a piecewise-linear interval system loaded from a
// JSON file when the name contains a path separator or .json suffix. The
// loaded definition is stored in `storage`, which must outlive every grid
// sampled from it.
const SystemDef& resolve_system(const AnalysisConfig& cfg, SystemDef& storage);

// Self-map of an interval given by interpolation nodes. The file provides
// {"name", "interval": [lo, hi], "breakpoints": [[x, f(x)], ...]}; between
// nodes the map interpolates linearly, outside them it clamps to the nearest
// node value. Throws ConfigError on malformed input.
SystemDef load_system_file(const std::string& path);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

// One command's outputs. `json` is the deterministic report document;
// `files` maps artifact names (DOT, CSV, family dumps) to their content;
// timings are segregated because they can never be deterministic.
struct ReportBundle {
    std::string json;
    std::map<std::string, std::string> files;
    std::vector<StageTiming> timings;
    int exit_code = 0; // 0 ok, 1 detector conflict, 3 non-convergence
};

// Full pipeline: sample, components, Conley order, per-pair spectra with
// nested-family dumps for the chain-related pairs.
ReportBundle run_analyze(const AnalysisConfig& cfg);

// Nested-family construction for each configured pair: per-level shortest
// chains, pruning loop, certificate and limit support. A pair that is not
// chain related yields a report naming the first failing level; a schedule
// the family cannot follow (the comb's isolated points) yields the thrown
// obstruction message and exit code 3.
ReportBundle run_chains(const AnalysisConfig& cfg);

// Spectrum reports for the configured pairs, nothing else.
ReportBundle run_spectrum(const AnalysisConfig& cfg);

// Chain components and the Conley order, with a DOT rendering.
ReportBundle run_conley(const AnalysisConfig& cfg);

// Prolongation hierarchy of one base point up to alpha_max, with a CSV table.
ReportBundle run_prolong(const AnalysisConfig& cfg, PointSpec base, int alpha_max);

// Zoo listing; the zoo self-test runs on first access and its status is
// reported per system. Text table by default, a JSON array when `as_json`.
std::string systems_listing(bool as_json);

// Writes json to <dir>/report.json, each artifact under its own name and
// timings to <dir>/timings.txt; creates the directory. Returns the paths.
std::vector<std::string> write_bundle(const ReportBundle& bundle,
                                      const std::string& dir);

// Level header (`level <n> eps <e> points <m>`) followed by one point per
// line, coordinates space-separated and round-trip formatted.
std::string dump_family(const NestedFamily& nf);

} // namespace chainspec
