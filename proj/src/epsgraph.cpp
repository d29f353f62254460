#include "chainspec/epsgraph.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <deque>
#include <map>
#include <string>

namespace chainspec {

namespace {

// Candidate index range [first, last) of sorted xs intersecting (lo, hi).
std::pair<int, int> open_range(const std::vector<double>& xs, double lo, double hi) {
    const int first = (int)(std::upper_bound(xs.begin(), xs.end(), lo) - xs.begin());
    const int last = (int)(std::lower_bound(xs.begin(), xs.end(), hi) - xs.begin());
    return {first, std::max(first, last)};
}

} // namespace

EpsilonGraph build_graph(const SampleGrid& grid, double epsilon,
                         bool closed_balls) {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    EpsilonGraph g;
    g.grid = &grid;
    g.epsilon = epsilon;
    const int n = grid.size();
    g.out.resize(n);
    g.in.resize(n);
    const Metric& m = grid.metric;

    auto push_if_edge = [&](int i, int j) {
        const double d = distance(m, grid.images[i], grid.points[j]);
        if (d < epsilon || (closed_balls && d == epsilon)) g.out[i].push_back(j);
    };

    if (grid.sorted_line || grid.circle) {
        std::vector<double> xs(n);
        for (int j = 0; j < n; ++j) xs[j] = grid.points[j].x;
        // widened raw-coordinate radius; candidates are filtered through the
        // exact metric so the strict predicate is never weakened
        const double e = epsilon / m.scale * (1.0 + 1e-9);
        for (int i = 0; i < n; ++i) {
            const double c = grid.images[i].x;
            if (!grid.circle) {
                const auto [first, last] = open_range(xs, c - e, c + e);
                for (int j = first; j < last; ++j) push_if_edge(i, j);
            } else if (e >= 0.5) {
                for (int j = 0; j < n; ++j) push_if_edge(i, j);
            } else {
                double lo = c - e, hi = c + e;
                if (lo < 0.0) {
                    const auto [f1, l1] = open_range(xs, 0.0 - 1.0, hi);
                    for (int j = f1; j < l1; ++j) push_if_edge(i, j);
                    const auto [f2, l2] = open_range(xs, lo + 1.0, 1.0);
                    for (int j = f2; j < l2; ++j) push_if_edge(i, j);
                } else if (hi > 1.0) {
                    const auto [f1, l1] = open_range(xs, -1.0, hi - 1.0);
                    for (int j = f1; j < l1; ++j) push_if_edge(i, j);
                    const auto [f2, l2] = open_range(xs, lo, 1.0);
                    for (int j = f2; j < l2; ++j) push_if_edge(i, j);
                } else {
                    const auto [first, last] = open_range(xs, lo, hi);
                    for (int j = first; j < last; ++j) push_if_edge(i, j);
                }
            }
        }
    } else if (closed_balls) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) push_if_edge(i, j);
    } else {
        for (int i = 0; i < n; ++i)
            g.out[i] = ball_query(m, grid.points, grid.images[i], epsilon);
    }

    for (int i = 0; i < n; ++i)
        for (int j : g.out[i]) g.in[j].push_back(i);
    return g;
}

void dump_edges(const EpsilonGraph& g, std::ostream& os) {
    for (int i = 0; i < g.size(); ++i)
        for (int j : g.out[i]) os << i << ' ' << j << '\n';
}

ChainCheck check_chain(const SystemDef& sys, const std::vector<Point>& seq,
                       double epsilon) {
    if (seq.size() < 2)
        throw std::invalid_argument("a chain needs at least one step");
    ChainCheck r;
    r.ok = true;
    r.step_dist.reserve(seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        const double d = distance(sys.metric, evaluate(sys, seq[i]), seq[i + 1]);
        r.step_dist.push_back(d);
        r.max_step = std::max(r.max_step, d);
        if (!(d < epsilon) && r.first_violation < 0) {
            r.ok = false;
            r.first_violation = (int)i;
        }
    }
    return r;
}

double chain_quality(const SystemDef& sys, const std::vector<Point>& seq) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i)
        worst = std::max(
            worst, distance(sys.metric, evaluate(sys, seq[i]), seq[i + 1]));
    return worst;
}

std::optional<Chain> find_chain(const EpsilonGraph& g, int x, int y) {
    const int n = g.size();
    if (x < 0 || x >= n || y < 0 || y >= n)
        throw std::invalid_argument("chain endpoints outside the grid");

    // dist[v] = fewest edges from v to y
    std::vector<int> dist(n, -1);
    std::deque<int> queue;
    dist[y] = 0;
    queue.push_back(y);
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int p : g.in[u])
            if (dist[p] == -1) {
                dist[p] = dist[u] + 1;
                queue.push_back(p);
            }
    }

    int best = -1;
    for (int w : g.out[x])
        if (dist[w] >= 0 && (best == -1 || dist[w] < best)) best = dist[w];
    if (best == -1) return std::nullopt;

    // greedy smallest-index successor gives the lexicographically least
    // among the shortest chains (m >= 1: even x -> x walks one full cycle)
    std::vector<int> seq{x};
    int cur = x, remaining = best + 1;
    while (remaining > 0) {
        for (int w : g.out[cur])
            if (dist[w] == remaining - 1) {
                cur = w;
                break;
            }
        seq.push_back(cur);
        --remaining;
    }

    Chain c;
    c.sys = g.grid->sys;
    c.epsilon = g.epsilon;
    c.indices = seq;
    c.points.reserve(seq.size());
    for (int idx : seq) c.points.push_back(g.grid->points[idx]);
    return c;
}

Chain remove_cycles(const Chain& c, int* removed) {
    Chain r = c;
    int cut_points = 0;
    const bool with_indices = !r.indices.empty();
    bool changed = true;
    while (changed) {
        changed = false;
        const std::size_t last = r.points.size() - 1;
        for (std::size_t j = 1; j <= last && !changed; ++j) {
            for (std::size_t i = 0; i < j; ++i) {
                if (!same_point(r.points[i], r.points[j])) continue;
                if (i == 0 && j == last) continue; // x-to-x loop endpoints
                r.points.erase(r.points.begin() + i + 1, r.points.begin() + j + 1);
                if (with_indices)
                    r.indices.erase(r.indices.begin() + i + 1,
                                    r.indices.begin() + j + 1);
                cut_points += (int)(j - i);
                changed = true;
                break;
            }
        }
    }
    if (removed) *removed = cut_points;
    return r;
}

RefinementSchedule default_schedule(double diam, int depth) {
    if (diam <= 0.0) throw std::invalid_argument("diameter must be positive");
    if (depth < 1) throw std::invalid_argument("schedule depth must be >= 1");
    RefinementSchedule s;
    s.epsilons.reserve(depth);
    for (int n = 1; n <= depth; ++n)
        s.epsilons.push_back(4.0 * diam / std::pow(2.0, n));
    return s;
}

RefinementSchedule user_schedule(std::vector<double> epsilons) {
    if (epsilons.empty()) throw std::invalid_argument("schedule must be non-empty");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (epsilons[i] <= 0.0)
            throw std::invalid_argument("schedule entries must be positive");
        if (i > 0 && epsilons[i] >= epsilons[i - 1])
            throw std::invalid_argument("schedule must strictly decrease");
    }
    RefinementSchedule s;
    s.epsilons = std::move(epsilons);
    s.user_supplied = true;
    return s;
}

ChainRelation chain_related(const SampleGrid& grid,
                            const RefinementSchedule& sched, int x, int y) {
    ChainRelation r;
    r.related = true;
    r.per_level.reserve(sched.depth());
    for (double eps : sched.epsilons) {
        const EpsilonGraph g = build_graph(grid, eps);
        r.per_level.push_back(find_chain(g, x, y));
        if (!r.per_level.back()) r.related = false;
    }
    return r;
}

SccResult strongly_connected_components(const std::vector<std::vector<int>>& out) {
    const int n = (int)out.size();
    SccResult r;
    r.comp.assign(n, -1);
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<char> onstack(n, 0);
    std::vector<int> stack;
    std::vector<std::pair<int, std::size_t>> work;
    int next_index = 0;

    for (int s = 0; s < n; ++s) {
        if (index[s] != -1) continue;
        work.push_back({s, 0});
        while (!work.empty()) {
            const int v = work.back().first;
            if (work.back().second == 0) {
                index[v] = low[v] = next_index++;
                stack.push_back(v);
                onstack[v] = 1;
            }
            bool descended = false;
            while (work.back().second < out[v].size()) {
                const int w = out[v][work.back().second++];
                if (index[w] == -1) {
                    work.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (onstack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                while (true) {
                    const int w = stack.back();
                    stack.pop_back();
                    onstack[w] = 0;
                    r.comp[w] = r.count;
                    if (w == v) break;
                }
                ++r.count;
            }
            work.pop_back();
            if (!work.empty())
                low[work.back().first] = std::min(low[work.back().first], low[v]);
        }
    }
    return r;
}

namespace {

bool has_self_loop(const EpsilonGraph& g, int v) {
    return std::binary_search(g.out[v].begin(), g.out[v].end(), v);
}

// Group recurrent vertices by a per-vertex key; label components by their
// smallest member, ascending.
ChainComponentSet assemble_components(int n, const std::vector<int>& key_of,
                                      const std::vector<char>& recurrent) {
    ChainComponentSet cc;
    cc.member_of.assign(n, -1);
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of_key(n, -1);
    for (int v = 0; v < n; ++v) {
        if (!recurrent[v]) continue;
        const int k = key_of[v];
        if (group_of_key[k] == -1) {
            group_of_key[k] = (int)groups.size();
            groups.emplace_back();
        }
        groups[group_of_key[k]].push_back(v);
    }
    // scanning v ascending already yields groups ordered by smallest member
    cc.components = std::move(groups);
    for (std::size_t c = 0; c < cc.components.size(); ++c)
        for (int v : cc.components[c]) cc.member_of[v] = (int)c;
    return cc;
}

} // namespace

ChainComponentSet scc_components(const EpsilonGraph& g) {
    const int n = g.size();
    const SccResult s = strongly_connected_components(g.out);
    std::vector<int> comp_size(s.count, 0);
    for (int v = 0; v < n; ++v) ++comp_size[s.comp[v]];
    std::vector<char> recurrent(n, 0);
    for (int v = 0; v < n; ++v)
        recurrent[v] = comp_size[s.comp[v]] >= 2 || has_self_loop(g, v);
    return assemble_components(n, s.comp, recurrent);
}

ChainComponentSet chain_components(const SampleGrid& grid,
                                   const RefinementSchedule& sched) {
    if (sched.depth() < 1) throw std::invalid_argument("empty schedule");
    const int n = grid.size();
    std::vector<char> recurrent(n, 1);
    std::vector<int> key(n, 0); // running refinement of the equivalence
    int key_count = 1;
    for (double eps : sched.epsilons) {
        const ChainComponentSet lev = scc_components(build_graph(grid, eps));
        // refine: two vertices stay together iff together at this level too
        std::vector<int> fresh(n, -1);
        std::map<std::pair<int, int>, int> relabel;
        for (int v = 0; v < n; ++v) {
            if (lev.member_of[v] == -1) recurrent[v] = 0;
            if (!recurrent[v]) continue;
            const auto k = std::make_pair(key[v], lev.member_of[v]);
            auto [it, inserted] = relabel.try_emplace(k, (int)relabel.size());
            fresh[v] = it->second;
        }
        key.swap(fresh);
        key_count = (int)relabel.size();
    }
    (void)key_count;
    for (int v = 0; v < n; ++v)
        if (!recurrent[v]) key[v] = 0; // unused slot, keep the key in range
    return assemble_components(n, key, recurrent);
}

namespace {

// Per-level reachability digest: for every tracked vertex y, the set of
// level-SCCs reachable from y in at least one step.
struct LevelDigest {
    std::vector<int> comp;                       // level SCC id per vertex
    std::vector<std::vector<std::uint64_t>> one; // per tracked vertex
    int words = 0;
};

LevelDigest level_digest(const EpsilonGraph& g, const std::vector<int>& tracked) {
    LevelDigest d;
    const SccResult s = strongly_connected_components(g.out);
    d.comp = s.comp;
    d.words = (s.count + 63) / 64;
    // closure over the condensation; comp ids ascend from sinks, so every
    // edge target is already complete when its source is processed
    std::vector<std::vector<std::uint64_t>> crow(
        s.count, std::vector<std::uint64_t>(d.words, 0));
    std::vector<std::vector<int>> cadj(s.count);
    for (int v = 0; v < g.size(); ++v)
        for (int w : g.out[v])
            if (s.comp[w] != s.comp[v]) cadj[s.comp[v]].push_back(s.comp[w]);
    for (int c = 0; c < s.count; ++c) {
        auto& a = cadj[c];
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        crow[c][c / 64] |= 1ull << (c % 64);
        for (int t : a)
            for (int w = 0; w < d.words; ++w) crow[c][w] |= crow[t][w];
    }
    d.one.resize(tracked.size(), std::vector<std::uint64_t>(d.words, 0));
    for (std::size_t k = 0; k < tracked.size(); ++k)
        for (int w : g.out[tracked[k]])
            for (int t = 0; t < d.words; ++t)
                d.one[k][t] |= crow[s.comp[w]][t];
    return d;
}

} // namespace

ConleyDiagram conley_order(const ChainComponentSet& cc, const SampleGrid& grid,
                           const RefinementSchedule& sched) {
    ConleyDiagram diag;
    diag.node_count = (int)cc.components.size();

    std::vector<int> tracked;
    for (const auto& comp : cc.components)
        tracked.insert(tracked.end(), comp.begin(), comp.end());
    std::vector<int> slot(grid.size(), -1);
    for (std::size_t k = 0; k < tracked.size(); ++k) slot[tracked[k]] = (int)k;

    std::vector<LevelDigest> digests;
    digests.reserve(sched.depth());
    for (double eps : sched.epsilons)
        digests.push_back(level_digest(build_graph(grid, eps), tracked));

    auto reaches_every_level = [&](int y, int x) {
        for (const LevelDigest& d : digests) {
            const int cx = d.comp[x];
            if (!(d.one[slot[y]][cx / 64] >> (cx % 64) & 1)) return false;
        }
        return true;
    };

    const int K = diag.node_count;
    std::vector<char> rel(std::size_t(K) * K, 0);
    std::vector<std::pair<int, int>> witness(std::size_t(K) * K, {-1, -1});
    for (int lower = 0; lower < K; ++lower) {
        for (int upper = 0; upper < K; ++upper) {
            for (int y : cc.components[upper]) {
                for (int x : cc.components[lower]) {
                    if (reaches_every_level(y, x)) {
                        rel[lower * K + upper] = 1;
                        witness[lower * K + upper] = {y, x};
                        goto next_pair;
                    }
                }
            }
        next_pair:;
        }
    }

    for (int k = 0; k < K; ++k)
        if (!rel[k * K + k])
            throw std::logic_error("chain component lost self-reachability");
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b)
            if (rel[a * K + b] && rel[b * K + a])
                throw ScheduleTooCoarse(
                    "components " + std::to_string(a) + " and " + std::to_string(b) +
                    " are mutually reachable; refine the schedule or grid");
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
            for (int c = 0; c < K; ++c)
                if (rel[a * K + b] && rel[b * K + c] && !rel[a * K + c])
                    throw std::logic_error("conley order lost transitivity");

    const EpsilonGraph finest = build_graph(grid, sched.finest());
    for (int lower = 0; lower < K; ++lower)
        for (int upper = 0; upper < K; ++upper)
            if (rel[lower * K + upper]) {
                diag.order_pairs.push_back({lower, upper});
                const auto [y, x] = witness[lower * K + upper];
                auto cert = find_chain(finest, y, x);
                if (!cert)
                    throw std::logic_error("missing witness at the finest level");
                diag.certificates.emplace(std::make_pair(lower, upper),
                                          std::move(*cert));
            }
    return diag;
}

std::string conley_dot(const ConleyDiagram& d, const ChainComponentSet& cc,
                       const SampleGrid& grid) {
    const int K = d.node_count;
    std::vector<char> rel(std::size_t(K) * K, 0);
    for (const auto& [a, b] : d.order_pairs) rel[a * K + b] = 1;

    std::string out = "digraph conley {\n  rankdir=BT;\n";
    for (int k = 0; k < K; ++k) {
        const Point& rep = grid.points[cc.components[k].front()];
        out += "  K" + std::to_string(k) + " [label=\"K" + std::to_string(k) +
               " (" + std::to_string(rep.x);
        if (grid.metric.kind == MetricKind::euclidean_plane)
            out += ", " + std::to_string(rep.y);
        out += ")\\n" + std::to_string(cc.components[k].size()) + " pts\"];\n";
    }
    // Hasse edges only: drop pairs implied through an intermediate node
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b) {
            if (a == b || !rel[a * K + b]) continue;
            bool covered = false;
            for (int c = 0; c < K && !covered; ++c)
                if (c != a && c != b && rel[a * K + c] && rel[c * K + b])
                    covered = true;
            if (!covered)
                out += "  K" + std::to_string(a) + " -> K" + std::to_string(b) + ";\n";
        }
    out += "}\n";
    return out;
}

int BitMatrix::row_count(int i) const {
    int total = 0;
    for (int w = 0; w < words_; ++w)
        total += std::popcount(bits_[row_w(i) + w]);
    return total;
}

std::vector<int> BitMatrix::row_members(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
        if (test(i, j)) out.push_back(j);
    return out;
}

BitMatrix reachability_closure(const std::vector<std::vector<int>>& out) {
    const int n = (int)out.size();
    const SccResult s = strongly_connected_components(out);
    const int words = (n + 63) / 64;
    std::vector<std::vector<std::uint64_t>> vrow(
        s.count, std::vector<std::uint64_t>(words, 0));
    for (int v = 0; v < n; ++v) vrow[s.comp[v]][v / 64] |= 1ull << (v % 64);
    std::vector<std::vector<int>> cadj(s.count);
    for (int v = 0; v < n; ++v)
        for (int w : out[v])
            if (s.comp[w] != s.comp[v]) cadj[s.comp[v]].push_back(s.comp[w]);
    for (int c = 0; c < s.count; ++c) {
        auto& a = cadj[c];
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        for (int t : a)
            for (int w = 0; w < words; ++w) vrow[c][w] |= vrow[t][w];
    }
    BitMatrix m(n);
    for (int v = 0; v < n; ++v) m.assign_row(v, vrow[s.comp[v]]);
    return m;
}

} // namespace chainspec
