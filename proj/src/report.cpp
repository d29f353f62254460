#include "chainspec/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace chainspec {
namespace {

using nlohmann::ordered_json;

constexpr const char* kToolName = "chainspec";
constexpr const char* kToolVersion = "1.0.0";
constexpr int kSchemaVersion = 1;

// Projection sources run this many levels deeper than the targets; the
// schedule must be at least one level deeper than the shift.
constexpr int kSourceShift = 3;

// ---- deterministic formatting ----------------------------------------------

// Shortest round-trip decimal form; the same bytes for the same double on
// every run, which the bundle determinism contract relies on.
std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec; // 32 chars always suffice for shortest-form doubles
    return std::string(buf, end);
}

bool plane_metric(const Metric& m) {
    return m.kind == MetricKind::euclidean_plane || m.kind == MetricKind::max_product;
}

ordered_json point_json(const Metric& m, const Point& p) {
    if (plane_metric(m)) return ordered_json::array({p.x, p.y});
    return p.x;
}

const char* metric_kind_name(MetricKind k) {
    switch (k) {
    case MetricKind::euclidean_interval: return "euclidean-on-interval";
    case MetricKind::arc_circle: return "arc-length-on-circle";
    case MetricKind::euclidean_plane: return "euclidean-in-plane";
    case MetricKind::max_product: return "max-product";
    }
    return "?";
}

// ---- config text parsing ----------------------------------------------------

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t from = 0;
    while (true) {
        std::size_t at = s.find(sep, from);
        if (at == std::string::npos) {
            out.push_back(s.substr(from));
            return out;
        }
        out.push_back(s.substr(from, at - from));
        from = at + 1;
    }
}

double parse_double(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    const char* begin = t.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + t.size() || t.empty() || !std::isfinite(v))
        throw ConfigError(what + ": expected a finite number, got '" + s + "'");
    return v;
}

long long parse_count(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    const char* begin = t.c_str();
    char* end = nullptr;
    long long v = std::strtoll(begin, &end, 10);
    if (end != begin + t.size() || t.empty())
        throw ConfigError(what + ": expected an integer, got '" + s + "'");
    return v;
}

void apply_key(AnalysisConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "system") cfg.system = trim(value);
    else if (key == "resolution") cfg.resolution = parse_double(value, key);
    else if (key == "schedule") cfg.schedule = parse_schedule_text(value);
    else if (key == "schedule_depth") cfg.schedule_depth = (int)parse_count(value, key);
    else if (key == "prune_budget") cfg.prune_budget = (int)parse_count(value, key);
    else if (key == "stabilization_window")
        cfg.stabilization_window = (int)parse_count(value, key);
    else if (key == "seeds") cfg.seeds = parse_count(value, key);
    else if (key == "output_dir") cfg.output_dir = trim(value);
    else throw ConfigError("unknown configuration key '" + key + "'");
}

} // namespace

std::vector<double> parse_schedule_text(const std::string& text) {
    if (trim(text) == "default") return {};
    std::vector<double> eps;
    for (const std::string& part : split(text, ','))
        eps.push_back(parse_double(part, "schedule"));
    return eps;
}

PointSpec parse_point_text(const std::string& text) {
    const std::vector<std::string> coords = split(text, ',');
    if (coords.size() > 2)
        throw ConfigError("point '" + text + "' has more than two coordinates");
    PointSpec p;
    p.x = parse_double(coords[0], "point");
    if (coords.size() == 2) p.y = parse_double(coords[1], "point");
    return p;
}

PairSpec parse_pair_text(const std::string& text) {
    const std::vector<std::string> sides = split(text, ';');
    if (sides.size() != 2)
        throw ConfigError("pair '" + text + "' must be two points separated by ';'");
    return {parse_point_text(sides[0]), parse_point_text(sides[1])};
}

AnalysisConfig parse_config_text(const std::string& text) {
    AnalysisConfig cfg;
    std::string section = "analysis";
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (std::size_t hash = line.find('#'); hash != std::string::npos)
            line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "analysis" && section != "pairs")
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "pairs") {
            if (key != "pair")
                throw ConfigError(where + ": only 'pair' entries belong in [pairs]");
            cfg.pairs.push_back(parse_pair_text(value));
        } else {
            apply_key(cfg, key, value);
        }
    }
    return cfg;
}

AnalysisConfig parse_config_json(const std::string& text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config JSON: top level must be an object");
    AnalysisConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "system") cfg.system = value.get<std::string>();
            else if (key == "resolution") cfg.resolution = value.get<double>();
            else if (key == "schedule") {
                if (value.is_string() && value.get<std::string>() == "default")
                    cfg.schedule.clear();
                else
                    cfg.schedule = value.get<std::vector<double>>();
            } else if (key == "schedule_depth") cfg.schedule_depth = value.get<int>();
            else if (key == "prune_budget") cfg.prune_budget = value.get<int>();
            else if (key == "stabilization_window")
                cfg.stabilization_window = value.get<int>();
            else if (key == "seeds") cfg.seeds = value.get<long long>();
            else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
            else if (key == "pairs") {
                for (const auto& item : value) {
                    if (!item.is_array() || item.size() != 2)
                        throw ConfigError("config JSON: each pair must have two sides");
                    PairSpec p;
                    auto side = [](const ordered_json& j, const char* which) {
                        PointSpec s;
                        if (j.is_number()) {
                            s.x = j.get<double>();
                        } else if (j.is_array() && (j.size() == 1 || j.size() == 2)) {
                            s.x = j.at(0).get<double>();
                            if (j.size() == 2) s.y = j.at(1).get<double>();
                        } else {
                            throw ConfigError(std::string("config JSON: pair ") + which +
                                              " must be a number or [x, y]");
                        }
                        return s;
                    };
                    p.from = side(item.at(0), "source");
                    p.to = side(item.at(1), "target");
                    cfg.pairs.push_back(p);
                }
            } else {
                throw ConfigError("unknown configuration key '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config JSON key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

AnalysisConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    const bool json = (first != std::string::npos && text[first] == '{') ||
                      (path.size() >= 5 && path.substr(path.size() - 5) == ".json");
    return json ? parse_config_json(text) : parse_config_text(text);
}

void validate_config(const AnalysisConfig& cfg) {
    if (cfg.system.empty()) throw ConfigError("system must be set");
    if (!(cfg.resolution > 0.0) || !std::isfinite(cfg.resolution))
        throw ConfigError("resolution must be positive");
    if (cfg.prune_budget < 1) throw ConfigError("prune_budget must be positive");
    if (cfg.stabilization_window < 2)
        throw ConfigError("stabilization_window must be at least 2 "
                          "(a single level cannot witness stability)");
    if (cfg.seeds < 1) throw ConfigError("seeds must be positive");
    const int depth = cfg.schedule.empty() ? cfg.schedule_depth : (int)cfg.schedule.size();
    if (depth <= kSourceShift)
        throw ConfigError("schedule depth must exceed " + std::to_string(kSourceShift) +
                          " (projection sources run that many levels deeper "
                          "than the targets)");
    for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
        if (!(cfg.schedule[i] > 0.0) || !std::isfinite(cfg.schedule[i]))
            throw ConfigError("explicit schedule entries must be positive");
        if (i > 0 && cfg.schedule[i] >= cfg.schedule[i - 1])
            throw ConfigError("explicit schedule must strictly decrease");
    }
}

// ---- file-defined systems ---------------------------------------------------

namespace {

constexpr int kFileSystemTag = 1000;

bool looks_like_path(const std::string& name) {
    return name.find('/') != std::string::npos ||
           (name.size() >= 5 && name.substr(name.size() - 5) == ".json");
}

} // namespace

SystemDef load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open system file '" + path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("system file '" + path + "': " + e.what());
    }
    double lo, hi;
    std::vector<double> xs, fs;
    std::string name;
    try {
        name = doc.value("name", std::filesystem::path(path).stem().string());
        const auto& iv = doc.at("interval");
        lo = iv.at(0).get<double>();
        hi = iv.at(1).get<double>();
        for (const auto& bp : doc.at("breakpoints")) {
            xs.push_back(bp.at(0).get<double>());
            fs.push_back(bp.at(1).get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("system file '" + path + "': " + e.what());
    }
    if (!(lo < hi)) throw ConfigError("system file: interval must satisfy lo < hi");
    if (xs.size() < 2) throw ConfigError("system file: need at least two breakpoints");
    double max_slope = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] < lo || xs[i] > hi || fs[i] < lo || fs[i] > hi)
            throw ConfigError("system file: breakpoints must stay inside the interval "
                              "(the map must send the space into itself)");
        if (i > 0) {
            if (xs[i] <= xs[i - 1])
                throw ConfigError("system file: breakpoint abscissae must "
                                  "strictly increase");
            max_slope = std::max(max_slope, std::abs(fs[i] - fs[i - 1]) /
                                                (xs[i] - xs[i - 1]));
        }
    }

    SystemDef sys;
    sys.name = name;
    sys.summary = "piecewise-linear interval map loaded from a file";
    sys.metric = {MetricKind::euclidean_interval, 1.0};
    sys.space_tag = kFileSystemTag;
    sys.intervals = {{lo, hi}};
    sys.diam = hi - lo;
    sys.lipschitz = max_slope;
    sys.map = [xs, fs](const Point& p) {
        double v;
        if (p.x <= xs.front()) {
            v = fs.front();
        } else if (p.x >= xs.back()) {
            v = fs.back();
        } else {
            const auto it = std::upper_bound(xs.begin(), xs.end(), p.x);
            const std::size_t i = (std::size_t)(it - xs.begin());
            const double t = (p.x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            v = fs[i - 1] + t * (fs[i] - fs[i - 1]);
        }
        return Point{v, 0.0, p.space_tag};
    };
    return sys;
}

const SystemDef& resolve_system(const AnalysisConfig& cfg, SystemDef& storage) {
    if (const SystemDef* zoo = find_system(cfg.system)) return *zoo;
    if (looks_like_path(cfg.system)) {
        storage = load_system_file(cfg.system);
        return storage;
    }
    throw ConfigError("unknown system '" + cfg.system +
                      "' (try `chainspec systems` for the built-in list)");
}

// ---- shared report plumbing -------------------------------------------------

namespace {

struct Stopwatch {
    std::vector<StageTiming>* sink;
    std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();

    explicit Stopwatch(std::vector<StageTiming>& s) : sink(&s) {}
    void lap(std::string stage) {
        const auto now = std::chrono::steady_clock::now();
        sink->push_back({std::move(stage),
                         std::chrono::duration<double>(now - last).count()});
        last = now;
    }
};

Point make_point(const SystemDef& sys, PointSpec spec) {
    double x = spec.x;
    if (sys.metric.kind == MetricKind::arc_circle) x = canonical_circle(x);
    return Point{x, spec.y, sys.space_tag};
}

RefinementSchedule build_schedule(const AnalysisConfig& cfg, const SystemDef& sys) {
    if (!cfg.schedule.empty()) return user_schedule(cfg.schedule);
    return default_schedule(sys.diam * sys.metric.scale, cfg.schedule_depth);
}

ordered_json config_json(const AnalysisConfig& cfg) {
    ordered_json j;
    j["system"] = cfg.system;
    j["resolution"] = cfg.resolution;
    if (cfg.schedule.empty()) j["schedule"] = "default";
    else j["schedule"] = cfg.schedule;
    j["schedule_depth"] = cfg.schedule_depth;
    j["prune_budget"] = cfg.prune_budget;
    j["stabilization_window"] = cfg.stabilization_window;
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir;
    ordered_json pairs = ordered_json::array();
    for (const PairSpec& p : cfg.pairs)
        pairs.push_back({ordered_json::array({p.from.x, p.from.y}),
                         ordered_json::array({p.to.x, p.to.y})});
    j["pairs"] = std::move(pairs);
    return j;
}

ordered_json base_document(const char* command, const AnalysisConfig& cfg,
                           const SystemDef& sys, const SampleGrid& grid,
                           const RefinementSchedule& sched,
                           std::vector<std::string> warnings) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    doc["command"] = command;
    doc["config"] = config_json(cfg);
    ordered_json sj;
    sj["name"] = sys.name;
    sj["summary"] = sys.summary;
    sj["metric"] = {{"kind", metric_kind_name(sys.metric.kind)},
                    {"scale", sys.metric.scale}};
    sj["diameter"] = sys.diam * sys.metric.scale;
    sj["grid_points"] = grid.size();
    sj["covering_radius"] = grid.covering_radius;
    sj["self_test"] = "ok"; // the zoo self-test throws at load when violated
    doc["system"] = std::move(sj);
    doc["schedule"] = {{"kind", cfg.schedule.empty() ? "default" : "explicit"},
                       {"depth", sched.depth()},
                       {"epsilons", sched.epsilons}};
    doc["warnings"] = std::move(warnings);
    return doc;
}

std::vector<std::string> schedule_warnings(const SampleGrid& grid,
                                           const RefinementSchedule& sched) {
    std::vector<std::string> w;
    const double step = 2.0 * grid.covering_radius;
    if (sched.finest() <= step)
        w.push_back("finest schedule epsilon " + fmt_double(sched.finest()) +
                    " does not exceed the grid step " + fmt_double(step) +
                    "; epsilon graphs at the deepest levels can fall apart into "
                    "singletons (refine the resolution or shorten the schedule)");
    return w;
}

SampleGrid sample_or_config_error(const SystemDef& sys, double resolution) {
    try {
        return sample(sys, resolution);
    } catch (const std::length_error& e) {
        throw ConfigError(std::string("resolution too fine: ") + e.what());
    }
}

ordered_json snap_json(const SampleGrid& grid, const Point& requested) {
    const auto [idx, dist] = grid.snap(requested);
    ordered_json j;
    j["requested"] = point_json(grid.metric, requested);
    j["grid_index"] = idx;
    j["grid_point"] = point_json(grid.metric, grid.points[idx]);
    j["snap_distance"] = dist;
    return j;
}

ordered_json entry_json(const SpectrumEntry& e) {
    ordered_json j;
    j["term"] = to_string(e.term);
    j["confidence"] = to_string(e.confidence);
    j["empirical"] = e.empirical;
    j["evidence"] = e.evidence;
    return j;
}

ordered_json signature_json(const SignatureReport& s) {
    auto side = [](GrowthSide g) { return g == GrowthSide::unbounded ? "unbounded" : "none"; };
    ordered_json j;
    j["left_growth"] = side(s.left_growth);
    j["right_growth"] = side(s.right_growth);
    j["interior_densification"] = s.interior_densification == Densification::none
                                      ? "none"
                                      : s.interior_densification == Densification::everywhere
                                            ? "everywhere"
                                            : "partial";
    j["decided_size_trend"] = s.decided_size_trend;
    ordered_json verdicts = ordered_json::array();
    for (const SignatureVerdict& v : s.verdicts)
        verdicts.push_back({{"term", to_string(v.term)},
                            {"confidence", to_string(v.confidence)},
                            {"evidence", v.evidence}});
    j["verdicts"] = std::move(verdicts);
    j["inconclusive"] = s.inconclusive;
    return j;
}

ordered_json certificate_json(const Metric& m, const NestingCertificate& c) {
    ordered_json j;
    j["nested_step"] = std::vector<int>(c.nested_step.begin(), c.nested_step.end());
    j["acyclic_chain"] = std::vector<int>(c.acyclic_chain.begin(), c.acyclic_chain.end());
    j["order_compatible"] = c.order_compatible;
    j["violating_level"] = c.violating_level;
    if (c.flipping_pair)
        j["flipping_pair"] = ordered_json::array(
            {point_json(m, c.flipping_pair->first), point_json(m, c.flipping_pair->second)});
    j["pass"] = c.pass;
    return j;
}

ordered_json spectrum_json(const SampleGrid& grid, const SpectrumReport& r) {
    ordered_json j;
    j["chain_related"] = r.chain_related;
    ordered_json entries = ordered_json::array();
    for (const SpectrumEntry& e : r.entries) entries.push_back(entry_json(e));
    j["entries"] = std::move(entries);
    j["notes"] = r.notes;
    j["conflict"] = r.conflict;
    j["zeta_contradiction"] = r.zeta_contradiction;
    j["inconclusive"] = r.inconclusive;
    j["prune_converged"] = r.prune_converged;
    if (r.signature) j["signature"] = signature_json(*r.signature);
    if (r.certificate) j["certificate"] = certificate_json(grid.metric, *r.certificate);
    return j;
}

ordered_json components_json(const SampleGrid& grid, const ChainComponentSet& cc) {
    ordered_json comps = ordered_json::array();
    for (std::size_t k = 0; k < cc.components.size(); ++k) {
        ordered_json c;
        c["id"] = (int)k;
        c["members"] = cc.components[k];
        ordered_json pts = ordered_json::array();
        for (int i : cc.components[k]) pts.push_back(point_json(grid.metric, grid.points[i]));
        c["points"] = std::move(pts);
        comps.push_back(std::move(c));
    }
    ordered_json j;
    j["count"] = (int)cc.components.size();
    j["components"] = std::move(comps);
    int recurrent = 0;
    for (int m : cc.member_of) recurrent += m >= 0;
    j["recurrent_points"] = recurrent;
    return j;
}

ordered_json conley_json(const SampleGrid& grid, const ConleyDiagram& cd) {
    ordered_json j;
    j["node_count"] = cd.node_count;
    ordered_json pairs = ordered_json::array();
    for (const auto& [a, b] : cd.order_pairs)
        pairs.push_back(ordered_json::array({a, b}));
    j["order_pairs"] = std::move(pairs);
    ordered_json certs = ordered_json::array();
    for (const auto& [key, chain] : cd.certificates)
        certs.push_back({{"lower", key.first},
                         {"upper", key.second},
                         {"chain_steps", chain.steps()},
                         {"epsilon", chain.epsilon}});
    j["certificates"] = std::move(certs);
    (void)grid;
    return j;
}

// The per-pair nested-family construction shared by the chains and analyze
// commands: per-level shortest chains, pruning, certificate, invariance
// check. Non-convergence is reported in place, never thrown past here.
struct FamilyOutcome {
    ordered_json json;
    std::optional<std::string> dump; // family text when the pipeline ran
    bool failed = false;             // schedule exhausted or not converged
};

FamilyOutcome build_family_report(const SystemDef& sys, const SampleGrid& grid,
                                  const RefinementSchedule& sched,
                                  const AnalysisConfig& cfg, const Point& px,
                                  const Point& py) {
    FamilyOutcome out;
    ordered_json& j = out.json;
    j["x"] = snap_json(grid, px);
    j["y"] = snap_json(grid, py);
    const int xi = j["x"]["grid_index"].get<int>();
    const int yi = j["y"]["grid_index"].get<int>();

    const RefinementSchedule targets = projection_targets(sched, kSourceShift);
    const double tol = grid.covering_radius;

    const ChainRelation rel = chain_related(grid, sched, xi, yi);
    j["chain_related"] = rel.related;
    if (!rel.related) {
        out.failed = true; // no full family can exist for this pair
        int first = -1;
        for (std::size_t n = 0; n < rel.per_level.size(); ++n)
            if (!rel.per_level[n]) {
                first = (int)n;
                break;
            }
        j["first_failing_level"] = first;
        if (first >= 0) j["first_failing_epsilon"] = sched.epsilons[first];
        // Drive the construction with the chains that do exist, toward the
        // full requested schedule, so the report names the precise
        // obstruction (for the comb: no source chain beats the rung-climb
        // step defect once the targets get fine enough).
        std::vector<Chain> prefix;
        for (int n = 0; n < first; ++n) prefix.push_back(*rel.per_level[n]);
        j["usable_levels"] = (int)prefix.size();
        if (!prefix.empty()) {
            try {
                prune_loop(prefix, sched, cfg.prune_budget, tol);
                j["prefix_construction"] =
                    "the usable prefix family projects and prunes cleanly; the "
                    "pair only stops being chain related past the failing level";
            } catch (const ScheduleExhausted& e) {
                j["error"] = e.what();
                j["error_kind"] = "schedule-exhausted";
            } catch (const ProjectionStall& e) {
                j["error"] = e.what();
                j["error_kind"] = "projection-stall";
            } catch (const ProjectionError& e) {
                j["error"] = e.what();
                j["error_kind"] = "projection";
            }
        }
        return out;
    }

    const auto family = chain_family_from_grid(grid, sched, xi, yi);
    if (!family) { // unreachable when related, kept as a guard
        j["error"] = "no per-level chain family despite chain relation";
        out.failed = true;
        return out;
    }
    try {
        const PruneResult pr = prune_loop(*family, targets, cfg.prune_budget, tol);
        j["levels"] = pr.family.depth();
        j["converged"] = pr.converged;
        j["rounds"] = pr.rounds;
        j["removed_per_round"] = pr.removed_per_round;
        j["residual_per_round"] = pr.residual_per_round;
        j["hausdorff_residual"] = pr.limit.hausdorff_residual;
        const NestingCertificate cert =
            verify_ordinately_nested(pr.family, cfg.stabilization_window);
        j["certificate"] = certificate_json(grid.metric, cert);
        const InvarianceReport inv =
            limit_support_check(pr.limit, sys, px, py, 2.0 * grid.covering_radius);
        j["limit_invariance"] = {{"distance", inv.dist}, {"pass", inv.pass}};
        ordered_json support = ordered_json::array();
        for (const Point& p : pr.limit.points.points())
            support.push_back(point_json(grid.metric, p));
        j["limit_support"] = std::move(support);
        out.dump = dump_family(pr.family);
        out.failed = !pr.converged || !cert.pass;
    } catch (const ScheduleExhausted& e) {
        j["error"] = e.what();
        j["error_kind"] = "schedule-exhausted";
        out.failed = true;
    } catch (const ProjectionStall& e) {
        j["error"] = e.what();
        j["error_kind"] = "projection-stall";
        out.failed = true;
    } catch (const ProjectionError& e) {
        j["error"] = e.what();
        j["error_kind"] = "projection";
        out.failed = true;
    }
    return out;
}

std::string finish(ordered_json& doc) { return doc.dump(2); }

} // namespace

// ---- family dump --------------------------------------------------------------

std::string dump_family(const NestedFamily& nf) {
    std::string out;
    for (int n = 0; n < nf.depth(); ++n) {
        const Chain& c = nf.chains[n];
        out += "level " + std::to_string(n) + " eps " + fmt_double(c.epsilon) +
               " points " + std::to_string(c.points.size()) + "\n";
        const bool plane = c.sys && plane_metric(c.sys->metric);
        for (const Point& p : c.points) {
            out += fmt_double(p.x);
            if (plane) out += " " + fmt_double(p.y);
            out += "\n";
        }
    }
    return out;
}

// ---- commands -----------------------------------------------------------------

ReportBundle run_spectrum(const AnalysisConfig& cfg) {
    validate_config(cfg);
    if (cfg.pairs.empty())
        throw ConfigError("spectrum needs at least one pair (--pair \"x;y\")");
    ReportBundle bundle;
    Stopwatch watch(bundle.timings);
    SystemDef storage;
    const SystemDef& sys = resolve_system(cfg, storage);
    const SampleGrid grid = sample_or_config_error(sys, cfg.resolution);
    const RefinementSchedule sched = build_schedule(cfg, sys);
    watch.lap("sample");

    ordered_json doc =
        base_document("spectrum", cfg, sys, grid, sched, schedule_warnings(grid, sched));
    SpectrumOptions opt;
    opt.prune_budget = cfg.prune_budget;
    opt.stability_window = cfg.stabilization_window;

    bool conflict = false, nonconverged = false;
    ordered_json pairs = ordered_json::array();
    for (std::size_t k = 0; k < cfg.pairs.size(); ++k) {
        const Point px = make_point(sys, cfg.pairs[k].from);
        const Point py = make_point(sys, cfg.pairs[k].to);
        const SpectrumReport rep = spectrum(sys, grid, sched, px, py, opt);
        ordered_json pj;
        pj["x"] = snap_json(grid, px);
        pj["y"] = snap_json(grid, py);
        pj["report"] = spectrum_json(grid, rep);
        pairs.push_back(std::move(pj));
        conflict |= rep.conflict;
        nonconverged |= !rep.prune_converged;
        watch.lap("spectrum pair " + std::to_string(k));
    }
    doc["pairs"] = std::move(pairs);
    bundle.exit_code = conflict ? 1 : nonconverged ? 3 : 0;
    bundle.json = finish(doc);
    return bundle;
}

ReportBundle run_chains(const AnalysisConfig& cfg) {
    validate_config(cfg);
    if (cfg.pairs.empty())
        throw ConfigError("chains needs at least one pair (--pair \"x;y\")");
    ReportBundle bundle;
    Stopwatch watch(bundle.timings);
    SystemDef storage;
    const SystemDef& sys = resolve_system(cfg, storage);
    const SampleGrid grid = sample_or_config_error(sys, cfg.resolution);
    const RefinementSchedule sched = build_schedule(cfg, sys);
    watch.lap("sample");

    ordered_json doc =
        base_document("chains", cfg, sys, grid, sched, schedule_warnings(grid, sched));
    bool failed = false;
    ordered_json pairs = ordered_json::array();
    for (std::size_t k = 0; k < cfg.pairs.size(); ++k) {
        FamilyOutcome out = build_family_report(sys, grid, sched, cfg,
                                                make_point(sys, cfg.pairs[k].from),
                                                make_point(sys, cfg.pairs[k].to));
        if (out.dump) {
            const std::string name = "family_" + std::to_string(k) + ".txt";
            out.json["family_file"] = name;
            bundle.files[name] = std::move(*out.dump);
        }
        failed |= out.failed;
        pairs.push_back(std::move(out.json));
        watch.lap("chains pair " + std::to_string(k));
    }
    doc["pairs"] = std::move(pairs);
    bundle.exit_code = failed ? 3 : 0;
    bundle.json = finish(doc);
    return bundle;
}

ReportBundle run_conley(const AnalysisConfig& cfg) {
    validate_config(cfg);
    ReportBundle bundle;
    Stopwatch watch(bundle.timings);
    SystemDef storage;
    const SystemDef& sys = resolve_system(cfg, storage);
    const SampleGrid grid = sample_or_config_error(sys, cfg.resolution);
    const RefinementSchedule sched = build_schedule(cfg, sys);
    watch.lap("sample");

    ordered_json doc =
        base_document("conley", cfg, sys, grid, sched, schedule_warnings(grid, sched));
    const ChainComponentSet cc = chain_components(grid, sched);
    watch.lap("chain components");
    doc["chain_components"] = components_json(grid, cc);
    try {
        const ConleyDiagram cd = conley_order(cc, grid, sched);
        watch.lap("conley order");
        doc["conley"] = conley_json(grid, cd);
        doc["conley"]["dot_file"] = "conley.dot";
        bundle.files["conley.dot"] = conley_dot(cd, cc, grid);
    } catch (const ScheduleTooCoarse& e) {
        doc["conley"] = {{"error", e.what()}, {"error_kind", "schedule-too-coarse"}};
        bundle.exit_code = 3;
    }
    bundle.json = finish(doc);
    return bundle;
}

ReportBundle run_prolong(const AnalysisConfig& cfg, PointSpec base, int alpha_max) {
    validate_config(cfg);
    if (alpha_max < 1) throw ConfigError("alpha_max must be positive");
    ReportBundle bundle;
    Stopwatch watch(bundle.timings);
    SystemDef storage;
    const SystemDef& sys = resolve_system(cfg, storage);
    const SampleGrid grid = sample_or_config_error(sys, cfg.resolution);
    const RefinementSchedule sched = build_schedule(cfg, sys);
    watch.lap("sample");

    ordered_json doc =
        base_document("prolong", cfg, sys, grid, sched, schedule_warnings(grid, sched));
    const Point px = make_point(sys, base);
    const ProlongationTable table = prolongation(grid, sched, px, alpha_max);
    watch.lap("prolongation");

    ordered_json pj;
    pj["x"] = snap_json(grid, px);
    pj["alpha_max"] = alpha_max;
    ordered_json levels = ordered_json::array();
    std::string csv = "alpha,index,x,y,lower_bound\n";
    for (std::size_t a = 0; a < table.levels.size(); ++a) {
        ordered_json lj;
        lj["alpha"] = (int)(a + 1);
        lj["size"] = (int)table.levels[a].size();
        lj["members"] = table.levels[a];
        ordered_json pts = ordered_json::array();
        for (int i : table.levels[a]) {
            pts.push_back(point_json(grid.metric, grid.points[i]));
            csv += std::to_string(a + 1) + "," + std::to_string(i) + "," +
                   fmt_double(grid.points[i].x) + "," + fmt_double(grid.points[i].y) +
                   "," + (table.lower_bound[a] ? "1" : "0") + "\n";
        }
        lj["points"] = std::move(pts);
        lj["lower_bound"] = (bool)table.lower_bound[a];
        levels.push_back(std::move(lj));
    }
    pj["levels"] = std::move(levels);
    pj["csv_file"] = "prolongation.csv";
    doc["prolongation"] = std::move(pj);
    bundle.files["prolongation.csv"] = std::move(csv);
    bundle.json = finish(doc);
    return bundle;
}

ReportBundle run_analyze(const AnalysisConfig& cfg) {
    validate_config(cfg);
    ReportBundle bundle;
    Stopwatch watch(bundle.timings);
    SystemDef storage;
    const SystemDef& sys = resolve_system(cfg, storage);
    const SampleGrid grid = sample_or_config_error(sys, cfg.resolution);
    const RefinementSchedule sched = build_schedule(cfg, sys);
    watch.lap("sample");

    ordered_json doc =
        base_document("analyze", cfg, sys, grid, sched, schedule_warnings(grid, sched));

    const ChainComponentSet cc = chain_components(grid, sched);
    watch.lap("chain components");
    doc["chain_components"] = components_json(grid, cc);
    bool nonconverged = false;
    try {
        const ConleyDiagram cd = conley_order(cc, grid, sched);
        watch.lap("conley order");
        doc["conley"] = conley_json(grid, cd);
        doc["conley"]["dot_file"] = "conley.dot";
        bundle.files["conley.dot"] = conley_dot(cd, cc, grid);
    } catch (const ScheduleTooCoarse& e) {
        doc["conley"] = {{"error", e.what()}, {"error_kind", "schedule-too-coarse"}};
        nonconverged = true;
    }

    SpectrumOptions opt;
    opt.prune_budget = cfg.prune_budget;
    opt.stability_window = cfg.stabilization_window;
    bool conflict = false;
    ordered_json pairs = ordered_json::array();
    for (std::size_t k = 0; k < cfg.pairs.size(); ++k) {
        const Point px = make_point(sys, cfg.pairs[k].from);
        const Point py = make_point(sys, cfg.pairs[k].to);
        ordered_json pj;
        pj["x"] = snap_json(grid, px);
        pj["y"] = snap_json(grid, py);
        const SpectrumReport rep = spectrum(sys, grid, sched, px, py, opt);
        pj["report"] = spectrum_json(grid, rep);
        conflict |= rep.conflict;
        nonconverged |= !rep.prune_converged;
        watch.lap("spectrum pair " + std::to_string(k));
        if (rep.chain_related) {
            FamilyOutcome fam = build_family_report(sys, grid, sched, cfg, px, py);
            if (fam.dump) {
                const std::string name = "family_" + std::to_string(k) + ".txt";
                fam.json["family_file"] = name;
                bundle.files[name] = std::move(*fam.dump);
            }
            nonconverged |= fam.failed;
            pj["family"] = std::move(fam.json);
            watch.lap("family pair " + std::to_string(k));
        }
        pairs.push_back(std::move(pj));
    }
    doc["pairs"] = std::move(pairs);
    bundle.exit_code = conflict ? 1 : nonconverged ? 3 : 0;
    bundle.json = finish(doc);
    return bundle;
}

// ---- zoo listing ---------------------------------------------------------------

std::string systems_listing(bool as_json) {
    const std::vector<SystemDef>& zoo = builtin_systems(); // self-test runs here
    if (as_json) {
        ordered_json arr = ordered_json::array();
        for (const SystemDef& s : zoo) {
            ordered_json j;
            j["name"] = s.name;
            j["summary"] = s.summary;
            j["metric"] = {{"kind", metric_kind_name(s.metric.kind)},
                           {"scale", s.metric.scale}};
            j["diameter"] = s.diam;
            if (!s.intervals.empty()) {
                ordered_json iv = ordered_json::array();
                for (const DomainInterval& d : s.intervals)
                    iv.push_back(ordered_json::array({d.lo, d.hi}));
                j["intervals"] = std::move(iv);
            }
            if (s.lipschitz) j["lipschitz"] = *s.lipschitz;
            if (s.transitive_witness)
                j["transitive_witness"] = point_json(s.metric, *s.transitive_witness);
            j["identity"] = s.identity_map;
            j["self_test"] = "ok";
            arr.push_back(std::move(j));
        }
        return arr.dump(2);
    }

    std::string out = "name                  metric                 domain"
                      "                 self-test  summary\n";
    for (const SystemDef& s : zoo) {
        std::string domain;
        if (s.metric.kind == MetricKind::arc_circle) {
            domain = "circle";
        } else if (!s.intervals.empty()) {
            for (std::size_t i = 0; i < s.intervals.size(); ++i) {
                if (i) domain += " u ";
                domain += "[" + fmt_double(s.intervals[i].lo) + ", " +
                          fmt_double(s.intervals[i].hi) + "]";
            }
        } else {
            domain = "plane sample set";
        }
        auto pad = [](std::string s, std::size_t w) {
            if (s.size() < w) s.append(w - s.size(), ' ');
            else s += ' ';
            return s;
        };
        out += pad(s.name, 22) + pad(metric_kind_name(s.metric.kind), 23) +
               pad(domain, 23) + pad("ok", 11) + s.summary + "\n";
    }
    return out;
}

// ---- bundle writing --------------------------------------------------------------

std::vector<std::string> write_bundle(const ReportBundle& bundle,
                                      const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + path.string() + "'");
        out << content;
        written.push_back(path.string());
    };
    emit("report.json", bundle.json + "\n");
    for (const auto& [name, content] : bundle.files) emit(name, content);
    std::string timings;
    char line[128];
    for (const StageTiming& t : bundle.timings) {
        std::snprintf(line, sizeof line, "%-24s %.4fs\n", t.stage.c_str(), t.seconds);
        timings += line;
    }
    emit("timings.txt", timings);
    return written;
}

} // namespace chainspec
