#include "chainspec/spectrum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace chainspec {

namespace {

double scaled_diam(const SystemDef& sys) { return sys.diam * sys.metric.scale; }

// Positive steps at or below this scale right before an exact hit are float
// saturation: a convergent orbit rounding onto its limit, not genuine orbit
// membership. Quadratically convergent orbits land with a final step near
// sqrt(ulp), so the cutoff sits well above that but far below any honest
// displacement at sampling scale. Genuine hits launched within 1e-6 of a
// fixed point are rejected too; that is a documented blind spot.
double artifact_scale(const SystemDef& sys) { return 1e-6 * scaled_diam(sys); }

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// ---- bitset rows ----

using Row = std::vector<std::uint64_t>;
using Rows = std::vector<Row>;

int word_count(int n) { return (n + 63) / 64; }

void row_set(Row& r, int j) { r[j / 64] |= 1ull << (j % 64); }

void row_or(Row& dst, const Row& src) {
    for (std::size_t w = 0; w < dst.size(); ++w) dst[w] |= src[w];
}

void row_and(Row& dst, const Row& src) {
    for (std::size_t w = 0; w < dst.size(); ++w) dst[w] &= src[w];
}

bool row_intersects(const Row& a, const Row& b) {
    for (std::size_t w = 0; w < a.size(); ++w)
        if (a[w] & b[w]) return true;
    return false;
}

bool row_subset(const Row& a, const Row& b) {
    for (std::size_t w = 0; w < a.size(); ++w)
        if (a[w] & ~b[w]) return false;
    return true;
}

std::vector<int> row_members(const Row& r, int n) {
    std::vector<int> out;
    for (int w = 0; w < (int)r.size(); ++w) {
        std::uint64_t bits = r[w];
        while (bits) {
            int j = w * 64 + std::countr_zero(bits);
            if (j < n) out.push_back(j);
            bits &= bits - 1;
        }
    }
    return out;
}

// ---- orbit scanning ----

struct PointKey {
    std::uint64_t a = 0, b = 0;
    int tag = 0;
    bool operator<(const PointKey& o) const {
        if (a != o.a) return a < o.a;
        if (b != o.b) return b < o.b;
        return tag < o.tag;
    }
};

PointKey key_of(const Point& p) {
    PointKey k;
    std::memcpy(&k.a, &p.x, sizeof k.a);
    std::memcpy(&k.b, &p.y, sizeof k.b);
    k.tag = p.space_tag;
    return k;
}

// Forward orbit w_1 = f(x), w_2, ... stored until a point repeats bitwise
// (w_0 = x participates) or the budget runs out. When w_L = w_mu repeats,
// steps holds w_1..w_{L-1} and the infinite orbit is known exactly.
struct OrbitScan {
    std::vector<Point> steps;
    long long mu = -1, lam = -1;

    bool cycled() const { return lam > 0; }
};

OrbitScan scan_orbit(const SystemDef& sys, const Point& x, long long budget) {
    OrbitScan sc;
    std::map<PointKey, long long> seen;
    seen.emplace(key_of(x), 0);
    Point w = x;
    for (long long k = 1; k <= budget; ++k) {
        w = evaluate(sys, w);
        auto [it, fresh] = seen.emplace(key_of(w), k);
        if (!fresh) {
            sc.mu = it->second;
            sc.lam = k - it->second;
            break;
        }
        sc.steps.push_back(w);
    }
    return sc;
}

// Was the entry into the detected cycle a saturation artifact? A genuine
// orbit keeps approaching an attracting cycle; the float orbit eventually
// lands on it. Consecutive steps near a cycle of length > 1 are whole cycle
// hops, so the landing is measured against the point one full period before
// entry: a positive period-spaced gap below the noise scale means rounding
// closed it, not the map.
bool saturated_entry(const SystemDef& sys, const Point& x, const OrbitScan& sc) {
    if (!sc.cycled() || sc.mu < 1 || sc.mu < sc.lam) return false;
    const Point& before = sc.mu == sc.lam ? x : sc.steps[sc.mu - sc.lam - 1];
    double step = distance(sys.metric, before, sc.steps[sc.mu - 1]);
    return step > 0.0 && step <= artifact_scale(sys);
}

OrbitProbe probe_from_scan(const SystemDef& sys, const RefinementSchedule& sched,
                           const Point& x, const Point& y, const OrbitScan& sc,
                           double tol) {
    OrbitProbe r;
    r.cycle_start = sc.mu;
    r.cycle_length = sc.lam;
    const long long len = (long long)sc.steps.size();
    if (len == 0) {
        // x is bitwise fixed; the orbit is {x} forever. A positive distance
        // within tol is a permanent near-miss, not a visit.
        const double d = distance(sys.metric, x, y);
        if (d == 0.0) {
            r.orbit_hit = true;
            r.hit_step = 1;
        }
        for (double eps : sched.epsilons)
            if (d < eps) ++r.levels_entered;
        r.omega = r.levels_entered == sched.depth() && !r.orbit_hit;
        r.limit_hit = d < sched.finest();
        return r;
    }

    std::vector<double> dist(len);
    double dmin = std::numeric_limits<double>::infinity();
    for (long long i = 0; i < len; ++i) {
        dist[i] = distance(sys.metric, sc.steps[i], y);
        dmin = std::min(dmin, dist[i]);
    }

    const bool artifact = saturated_entry(sys, x, sc);
    for (long long k = 1; k <= len; ++k) {
        if (dist[k - 1] > tol) continue;
        if (artifact && k >= sc.mu) break; // the cycle was reached by rounding
        if (dist[k - 1] > 0.0) {
            // A tolerance-only match counts as a visit just when the orbit
            // leaves the ball again. An orbit converging to y stays inside
            // every positive tolerance from some step on; that approach is a
            // limit, and flagging it as a hit would turn every attracting
            // target into a false "y lies on the orbit" refusal.
            bool exits = false;
            for (long long k2 = k + 1; k2 <= len && !exits; ++k2)
                exits = dist[k2 - 1] > tol;
            if (!exits) break; // later entries cannot exit either
        }
        r.orbit_hit = true;
        r.hit_step = k;
        break;
    }

    // Tail clustering: the exact cycle when known, else the last quarter.
    const long long tail_lo = sc.cycled()
                                  ? std::max<long long>(sc.mu, 1)
                                  : len - std::max<long long>(1, len / 4) + 1;
    double dtail = std::numeric_limits<double>::infinity();
    for (long long k = tail_lo; k <= len; ++k) dtail = std::min(dtail, dist[k - 1]);
    if (sc.cycled() && sc.mu == 0)
        dtail = std::min(dtail, distance(sys.metric, x, y));
    r.limit_hit = dtail < sched.finest();

    for (double eps : sched.epsilons)
        if (dmin < eps) ++r.levels_entered;
    r.omega = r.levels_entered == sched.depth() && !r.orbit_hit;

    if (r.levels_entered < sched.depth() && !sc.cycled()) {
        const long long q = std::max<long long>(1, len / 4);
        double head = std::numeric_limits<double>::infinity();
        double last = std::numeric_limits<double>::infinity();
        for (long long i = 0; i < q; ++i) head = std::min(head, dist[i]);
        for (long long i = len - q; i < len; ++i) last = std::min(last, dist[i]);
        r.inconclusive = last < head;
    }
    return r;
}

// ---- grid helpers ----

void require_same_system(const SystemDef& sys, const SampleGrid& grid,
                         const char* who) {
    if (grid.sys != &sys)
        throw std::invalid_argument(std::string(who) +
                                    ": grid was sampled from a different system");
}

void require_schedule(const RefinementSchedule& sched, const char* who) {
    if (sched.depth() < 1)
        throw std::invalid_argument(std::string(who) + ": empty schedule");
}

// Grid indices strictly within eps of center, ascending.
std::vector<int> ball_members(const SampleGrid& grid, const Point& center,
                              double eps) {
    const int n = grid.size();
    std::vector<int> out;
    if (grid.sorted_line && !grid.circle) {
        const double r = eps / grid.metric.scale;
        auto lo = std::lower_bound(
            grid.points.begin(), grid.points.end(), center.x - r,
            [](const Point& a, double v) { return a.x < v; });
        for (auto it = lo; it != grid.points.end() && it->x <= center.x + r; ++it)
            if (distance(grid.metric, *it, center) < eps)
                out.push_back((int)(it - grid.points.begin()));
        return out;
    }
    if (grid.circle) {
        const double r = eps / grid.metric.scale;
        if (2 * r >= 1.0) {
            for (int j = 0; j < n; ++j)
                if (distance(grid.metric, grid.points[j], center) < eps)
                    out.push_back(j);
            return out;
        }
        const double lo = canonical_circle(center.x - r);
        auto it = std::lower_bound(
            grid.points.begin(), grid.points.end(), lo,
            [](const Point& a, double v) { return a.x < v; });
        int start = (int)(it - grid.points.begin());
        for (int t = 0; t < n; ++t) {
            int j = (start + t) % n;
            double fwd = grid.points[j].x - lo;
            if (fwd < 0) fwd += 1.0;
            if (fwd > 2 * r) break;
            if (distance(grid.metric, grid.points[j], center) < eps)
                out.push_back(j);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
    return ball_query(grid.metric, grid.points, center, eps);
}

std::vector<int> grid_next(const SampleGrid& grid) {
    std::vector<int> next(grid.size());
    for (int i = 0; i < grid.size(); ++i) next[i] = grid.snap(grid.images[i]).first;
    return next;
}

// Trail rows over the functional graph i -> next[i]: row i holds every index
// visited from next[i] onward (at least one step taken).
Rows trail_rows(const SampleGrid& grid, const std::vector<int>& next) {
    const int n = grid.size();
    const int w = word_count(n);
    Rows rows(n, Row(w));
    std::vector<signed char> state(n, 0); // 0 fresh, 1 on path, 2 done
    std::vector<int> path;
    for (int start = 0; start < n; ++start) {
        if (state[start] == 2) continue;
        path.clear();
        int v = start;
        while (state[v] == 0) {
            state[v] = 1;
            path.push_back(v);
            v = next[v];
        }
        std::size_t tail = path.size();
        if (state[v] == 1) {
            std::size_t pos = path.size();
            while (pos > 0 && path[pos - 1] != v) --pos;
            --pos; // path[pos] == v, the cycle entry
            Row cyc(w);
            for (std::size_t t = pos; t < path.size(); ++t) row_set(cyc, path[t]);
            for (std::size_t t = pos; t < path.size(); ++t) {
                rows[path[t]] = cyc;
                state[path[t]] = 2;
            }
            tail = pos;
        }
        for (std::size_t t = tail; t-- > 0;) {
            int u = path[t];
            rows[u] = rows[next[u]];
            row_set(rows[u], next[u]);
            state[u] = 2;
        }
    }
    return rows;
}

// Thicken every row by eps: output bit j is set when some member of the
// source row lies strictly within eps of grid point j. On sorted 1-d grids a
// merge sweep checks only the linear neighbours (plus the wrap candidates on
// the circle), which is sound because the members within eps of a point form
// a window in coordinate order.
Rows thicken_rows(const SampleGrid& grid, const Rows& src, double eps) {
    const int n = grid.size();
    const int w = word_count(n);
    Rows out(n, Row(w));
    const bool fast = grid.sorted_line || grid.circle;
    for (int i = 0; i < n; ++i) {
        std::vector<int> mem = row_members(src[i], n);
        if (mem.empty()) continue;
        Row& o = out[i];
        if (fast) {
            std::size_t q = 0;
            for (int j = 0; j < n; ++j) {
                const double xj = grid.points[j].x;
                while (q + 1 < mem.size() && grid.points[mem[q + 1]].x <= xj) ++q;
                bool hit =
                    distance(grid.metric, grid.points[j], grid.points[mem[q]]) < eps;
                if (!hit && q + 1 < mem.size())
                    hit = distance(grid.metric, grid.points[j],
                                   grid.points[mem[q + 1]]) < eps;
                if (!hit && grid.circle)
                    hit = distance(grid.metric, grid.points[j],
                                   grid.points[mem.front()]) < eps ||
                          distance(grid.metric, grid.points[j],
                                   grid.points[mem.back()]) < eps;
                if (hit) row_set(o, j);
            }
        } else {
            for (int j = 0; j < n; ++j)
                for (int m : mem)
                    if (distance(grid.metric, grid.points[j], grid.points[m]) < eps) {
                        row_set(o, j);
                        break;
                    }
        }
    }
    return out;
}

// OR of base rows over an inclusive index range.
struct RowSegTree {
    int sz = 1;
    Rows tree;

    RowSegTree(const Rows& base, int cols) {
        const int n = (int)base.size();
        const int w = word_count(cols);
        while (sz < n) sz *= 2;
        tree.assign(2 * sz, Row(w));
        for (int i = 0; i < n; ++i) tree[sz + i] = base[i];
        for (int i = sz - 1; i >= 1; --i) {
            tree[i] = tree[2 * i];
            row_or(tree[i], tree[2 * i + 1]);
        }
    }

    void query(int lo, int hi, Row& out) const {
        for (lo += sz, hi += sz + 1; lo < hi; lo /= 2, hi /= 2) {
            if (lo & 1) row_or(out, tree[lo++]);
            if (hi & 1) row_or(out, tree[--hi]);
        }
    }
};

// Maximal runs of consecutive indices (circle windows wrap into two runs).
std::vector<std::pair<int, int>> index_runs(const std::vector<int>& sorted) {
    std::vector<std::pair<int, int>> runs;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[j] + 1) ++j;
        runs.emplace_back(sorted[i], sorted[j]);
        i = j + 1;
    }
    return runs;
}

// out[u] = union of rows over the eps-ball around grid point u.
Rows ball_fold(const SampleGrid& grid, const Rows& rows, double eps) {
    const int n = grid.size();
    const int w = word_count(n);
    Rows out(n, Row(w));
    if (grid.sorted_line || grid.circle) {
        RowSegTree st(rows, n);
        for (int u = 0; u < n; ++u)
            for (auto [lo, hi] : index_runs(ball_members(grid, grid.points[u], eps)))
                st.query(lo, hi, out[u]);
    } else {
        for (int u = 0; u < n; ++u)
            for (int z : ball_members(grid, grid.points[u], eps))
                row_or(out[u], rows[z]);
    }
    return out;
}

// Union of relation powers, row u = union over t >= 1 of rel^t(u). With a
// budget of at least n the closure is exact through the SCC condensation;
// smaller budgets truncate the union (callers flag the result as a lower
// bound unless the powers stabilized early).
Rows compose_rows(const Rows& rel, int n, long long budget, bool& exact) {
    const int w = word_count(n);
    if (budget >= n) {
        exact = true;
        std::vector<std::vector<int>> adj(n);
        for (int i = 0; i < n; ++i) adj[i] = row_members(rel[i], n);
        SccResult scc = strongly_connected_components(adj);
        Rows comp(scc.count, Row(w));
        for (int i = 0; i < n; ++i) row_set(comp[scc.comp[i]], i);
        std::vector<std::vector<int>> group(scc.count);
        for (int i = 0; i < n; ++i) group[scc.comp[i]].push_back(i);
        // Condensation edges run from higher component id to lower, so an
        // ascending pass sees every successor finished first.
        for (int a = 0; a < scc.count; ++a)
            for (int u : group[a])
                for (int v : adj[u])
                    if (scc.comp[v] != a) row_or(comp[a], comp[scc.comp[v]]);
        Rows out(n, Row(w));
        for (int i = 0; i < n; ++i)
            for (int v : adj[i]) row_or(out[i], comp[scc.comp[v]]);
        return out;
    }
    exact = false;
    Rows acc = rel;
    Rows pow = rel;
    for (long long t = 2; t <= budget; ++t) {
        Rows nxt(n, Row(w));
        for (int i = 0; i < n; ++i)
            for (int j : row_members(pow[i], n)) row_or(nxt[i], rel[j]);
        pow = std::move(nxt);
        bool grew = false;
        for (int i = 0; i < n; ++i) {
            Row merged = acc[i];
            row_or(merged, pow[i]);
            if (merged != acc[i]) {
                acc[i] = std::move(merged);
                grew = true;
            }
        }
        if (!grew) {
            exact = true;
            break;
        }
    }
    return acc;
}

// Per-level reachability (at least one step) from xi, intersected over the
// schedule.
std::vector<char> related_mask(const SampleGrid& grid,
                               const RefinementSchedule& sched, int xi) {
    const int n = grid.size();
    std::vector<char> mask(n, 1);
    for (double eps : sched.epsilons) {
        EpsilonGraph g = build_graph(grid, eps);
        std::vector<char> vis(n, 0);
        std::queue<int> q;
        for (int j : g.out[xi])
            if (!vis[j]) {
                vis[j] = 1;
                q.push(j);
            }
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int j : g.out[u])
                if (!vis[j]) {
                    vis[j] = 1;
                    q.push(j);
                }
        }
        for (int j = 0; j < n; ++j) mask[j] &= vis[j];
    }
    return mask;
}

// ---- family utilities ----

FiniteSet support_of(const Chain& c) { return FiniteSet(c.points); }

bool chain_acyclic(const std::vector<Point>& pts) {
    const std::size_t last = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (same_point(pts[i], pts[j]) && !(i == 0 && j == last)) return false;
    return true;
}

void recompute_family_flags(NestedFamily& nf) {
    nf.nesting_ok.assign(nf.chains.empty() ? 0 : nf.chains.size() - 1, 0);
    nf.acyclic_ok.assign(nf.chains.size(), 0);
    for (std::size_t i = 0; i + 1 < nf.chains.size(); ++i)
        nf.nesting_ok[i] =
            support_of(nf.chains[i]).subset_of(support_of(nf.chains[i + 1]));
    for (std::size_t i = 0; i < nf.chains.size(); ++i)
        nf.acyclic_ok[i] = chain_acyclic(nf.chains[i].points);
}

// Drop interior points outside `keep`, preserving endpoints and epsilons.
NestedFamily restrict_family(const NestedFamily& nf, const FiniteSet& keep) {
    NestedFamily out;
    out.x = nf.x;
    out.y = nf.y;
    for (const Chain& c : nf.chains) {
        Chain rc;
        rc.sys = c.sys;
        rc.epsilon = c.epsilon;
        rc.points.push_back(c.points.front());
        for (std::size_t i = 1; i + 1 < c.points.size(); ++i)
            if (keep.contains(c.points[i])) rc.points.push_back(c.points[i]);
        rc.points.push_back(c.points.back());
        out.chains.push_back(std::move(rc));
    }
    recompute_family_flags(out);
    return out;
}

// ---- dense-witness machinery ----

// Extends the cached witness orbit on demand; false when the budget is hit.
bool ensure_orbit(const SystemDef& sys, std::vector<Point>& orb, long long m,
                  long long budget) {
    while ((long long)orb.size() <= m) {
        if ((long long)orb.size() > budget) return false;
        orb.push_back(evaluate(sys, orb.back()));
    }
    return true;
}

bool witness_dense(const SystemDef& sys, const SampleGrid& grid,
                   const RefinementSchedule& sched, const Point& z,
                   long long budget, std::vector<Point>& orb, int& missing) {
    const double delta = sched.finest();
    std::vector<char> covered(grid.size(), 0);
    int remaining = grid.size();
    auto mark = [&](const Point& p) {
        for (int j : ball_members(grid, p, delta))
            if (!covered[j]) {
                covered[j] = 1;
                --remaining;
            }
    };
    orb.assign(1, z);
    mark(z);
    while (remaining > 0 && (long long)orb.size() <= budget) {
        orb.push_back(evaluate(sys, orb.back()));
        mark(orb.back());
    }
    missing = remaining;
    return remaining == 0;
}

// The splicing construction: each level inserts an orbit segment w_i..w_j
// between every consecutive pair (a, b) of the previous chain, with
// d(f(a), w_i) < eps and d(w_{j+1}, b) < eps, and all segment indices
// strictly above every index used before. Strictly increasing indices keep
// the chains acyclic, and reusing the previous chain verbatim keeps them
// nested. Returns as many levels as the orbit budget allows.
std::vector<Chain> splice_chains(const SystemDef& sys,
                                 const RefinementSchedule& sched, const Point& x,
                                 const Point& y, std::vector<Point>& orb,
                                 long long budget) {
    FiniteSet used;
    long long max_used = 0;
    auto usable = [&](long long m) {
        const Point& p = orb[m];
        return !same_point(p, x) && !same_point(p, y) && !used.contains(p);
    };
    // Smallest segment [i, j] with i > from, all of w_i..w_j usable,
    // d(fa, w_i) < eps and d(w_{j+1}, b) < eps.
    auto find_segment =
        [&](const Point& fa, const Point& b, double eps,
            long long from) -> std::optional<std::pair<long long, long long>> {
        long long lo = from + 1;
        for (;;) {
            long long i = -1;
            for (long long m = lo;; ++m) {
                if (m > budget || !ensure_orbit(sys, orb, m, budget))
                    return std::nullopt;
                if (usable(m) && distance(sys.metric, fa, orb[m]) < eps) {
                    i = m;
                    break;
                }
            }
            bool restarted = false;
            for (long long m = i;; ++m) {
                if (m + 1 > budget || !ensure_orbit(sys, orb, m + 1, budget))
                    return std::nullopt;
                if (m > i && !usable(m)) {
                    lo = m + 1;
                    restarted = true;
                    break;
                }
                if (distance(sys.metric, orb[m + 1], b) < eps)
                    return std::pair{i, m};
            }
            if (!restarted) return std::nullopt;
        }
    };

    const Point fx = evaluate(sys, x);
    std::vector<Chain> chains;
    std::vector<long long> cur; // -1 for x, -2 for y, else an orbit index
    for (int lvl = 1; lvl <= sched.depth(); ++lvl) {
        const double eps = sched.epsilons[lvl - 1];
        std::vector<long long> nxt;
        nxt.push_back(-1);
        bool ok = true;
        if (lvl == 1) {
            auto seg = find_segment(fx, y, eps, 0);
            if (!seg) break;
            for (long long m = seg->first; m <= seg->second; ++m) nxt.push_back(m);
        } else {
            long long cursor = max_used;
            for (std::size_t t = 0; t + 1 < cur.size() && ok; ++t) {
                const long long a = cur[t], b = cur[t + 1];
                if (a >= 0 && !ensure_orbit(sys, orb, a + 1, budget)) {
                    ok = false;
                    break;
                }
                const Point fa = a == -1 ? fx : orb[a + 1];
                const Point bv = b == -2 ? y : orb[b];
                auto seg = find_segment(fa, bv, eps, cursor);
                if (!seg) {
                    ok = false;
                    break;
                }
                for (long long m = seg->first; m <= seg->second; ++m)
                    nxt.push_back(m);
                cursor = seg->second;
                if (b != -2) nxt.push_back(b);
            }
            if (!ok) break;
        }
        nxt.push_back(-2);
        for (long long e : nxt)
            if (e >= 0 && !used.contains(orb[e])) {
                used.insert(orb[e]);
                max_used = std::max(max_used, e);
            }
        Chain c;
        c.sys = &sys;
        c.epsilon = eps;
        for (long long e : nxt)
            c.points.push_back(e == -1 ? x : e == -2 ? y : orb[e]);
        chains.push_back(std::move(c));
        cur = std::move(nxt);
    }
    return chains;
}

// ---- spectrum assembly ----

// Returns false when an equal term was already present (oracle evidence wins
// over heuristic on such merges).
bool add_entry(SpectrumReport& rep, const OrderTypeTerm& term, Confidence conf,
               bool empirical, const std::string& evidence) {
    for (SpectrumEntry& e : rep.entries) {
        if (!equal_normalized(e.term, term)) continue;
        if (e.confidence != Confidence::oracle_grade &&
            conf == Confidence::oracle_grade) {
            e.confidence = conf;
            e.empirical = empirical;
            e.evidence = evidence;
        }
        return false;
    }
    rep.entries.push_back({term, conf, empirical, evidence});
    return true;
}

} // namespace

// ---- direct detectors ----

std::optional<OrderTypeTerm> detect_finite(const SystemDef& sys, const Point& x,
                                           const Point& y, int kmax, double tol) {
    if (kmax < 0) throw std::invalid_argument("detect_finite: negative kmax");
    if (tol < 0) throw std::invalid_argument("detect_finite: negative tolerance");
    const double art = artifact_scale(sys);
    Point w = x;
    for (int k = 1; k <= kmax + 1; ++k) {
        const Point prev = w;
        w = evaluate(sys, w);
        const double step = distance(sys.metric, prev, w);
        if (distance(sys.metric, w, y) <= tol) {
            if (step > 0.0 && step <= art) return std::nullopt; // saturation
            return fin(k - 1);
        }
        if (step == 0.0) return std::nullopt; // parked on a fixed point != y
    }
    return std::nullopt;
}

OrbitProbe detect_omega(const SystemDef& sys, const RefinementSchedule& sched,
                        const Point& x, const Point& y, long long budget,
                        double tol) {
    require_schedule(sched, "detect_omega");
    if (budget < 1)
        throw std::invalid_argument("detect_omega: budget must be positive");
    if (tol < 0) throw std::invalid_argument("detect_omega: negative tolerance");
    const OrbitScan sc = scan_orbit(sys, x, budget);
    return probe_from_scan(sys, sched, x, y, sc, tol);
}

PeriodicSpectrum detect_periodic_attractor_spectrum(
    const SystemDef& sys, const SampleGrid& grid, const RefinementSchedule& sched,
    const Point& x, const Point& y, int period_cap, double tol, long long budget) {
    require_same_system(sys, grid, "detect_periodic_attractor_spectrum");
    require_schedule(sched, "detect_periodic_attractor_spectrum");
    if (period_cap < 1)
        throw std::invalid_argument(
            "detect_periodic_attractor_spectrum: period cap must be positive");
    if (budget < 1)
        throw std::invalid_argument(
            "detect_periodic_attractor_spectrum: budget must be positive");
    PeriodicSpectrum r;

    Point w = y;
    for (int k = 1; k <= period_cap && !r.period; ++k) {
        w = evaluate(sys, w);
        if (distance(sys.metric, w, y) <= tol) r.period = k;
    }
    if (!r.period) {
        r.diagnostic = "y is not exactly periodic within the period cap";
        return r;
    }
    const int K = r.period;
    const std::vector<Point> orb_y = orbit(sys, y, K - 1);
    auto dist_to_orbit = [&](const Point& p) {
        double d = std::numeric_limits<double>::infinity();
        for (const Point& q : orb_y) d = std::min(d, distance(sys.metric, p, q));
        return d;
    };

    // Attraction: the nearest off-orbit grid points must actually contract
    // onto the orbit, not merely pass within the target distance.
    const double target = sched.finest() / 2;
    std::vector<std::pair<double, int>> byd;
    for (int j = 0; j < grid.size(); ++j)
        byd.emplace_back(distance(grid.metric, grid.points[j], y), j);
    std::sort(byd.begin(), byd.end());
    int probes = 0;
    const long long walk = std::min<long long>(budget, 20000);
    for (auto [d, j] : byd) {
        if (probes == 2) break;
        if (dist_to_orbit(grid.points[j]) <= tol) continue; // on the orbit
        ++probes;
        Point p = grid.points[j];
        const double d0 = dist_to_orbit(p);
        bool converged = false;
        for (long long k = 1; k <= walk && !converged; ++k) {
            p = evaluate(sys, p);
            const double dk = dist_to_orbit(p);
            converged = dk < target && dk <= d0 / 4;
        }
        if (!converged) {
            r.diagnostic = "grid neighbour of y does not converge to the orbit "
                           "(orbit not attracting)";
            return r;
        }
    }
    if (probes == 0) {
        r.diagnostic = "no off-orbit grid point near y to test attraction";
        return r;
    }

    const OrbitScan sc = scan_orbit(sys, x, budget);
    const OrbitProbe pb = probe_from_scan(sys, sched, x, y, sc, tol);
    if (pb.orbit_hit) {
        r.diagnostic = "y lies on the orbit of x";
        return r;
    }
    if (pb.levels_entered < sched.depth()) {
        r.diagnostic = "the orbit of x does not enter every schedule ball around y";
        return r;
    }
    Point p = x;
    bool basin = dist_to_orbit(p) < target;
    for (long long k = 1; k <= budget && !basin; ++k) {
        p = evaluate(sys, p);
        basin = dist_to_orbit(p) < target;
    }
    if (!basin) {
        r.diagnostic = "x does not reach the orbit of y within the budget";
        return r;
    }

    r.applicable = true;
    for (int j = 0; j < K; ++j)
        r.terms.push_back(j == 0 ? omega() : sum_of({omega(), fin(j)}));
    return r;
}

EtaProbe detect_eta(const SystemDef& sys, const SampleGrid& grid,
                    const RefinementSchedule& sched, const Point& x, const Point& y,
                    std::optional<Point> witness, long long budget) {
    require_same_system(sys, grid, "detect_eta");
    require_schedule(sched, "detect_eta");
    if (budget < 1)
        throw std::invalid_argument("detect_eta: budget must be positive");
    EtaProbe r;
    if (sys.identity_map) {
        r.eta = true;
        r.confidence = Confidence::oracle_grade;
        r.note = "identity system: chain-related pairs carry the dense order type";
        return r;
    }
    const std::optional<Point> z = witness ? witness : sys.transitive_witness;
    if (!z) {
        r.note = "no transitive witness to certify density";
        return r;
    }
    std::vector<Point> orb;
    int missing = 0;
    if (!witness_dense(sys, grid, sched, *z, budget, orb, missing)) {
        r.note = "witness orbit not dense at the finest level (" +
                 std::to_string(missing) + " grid points uncovered)";
        return r;
    }
    r.eta = true;
    std::vector<Chain> chains = splice_chains(sys, sched, x, y, orb, budget);
    if ((int)chains.size() >= 4) {
        NestedFamily nf;
        nf.x = x;
        nf.y = y;
        nf.chains = std::move(chains);
        recompute_family_flags(nf);
        if (nf.all_nested() && nf.all_acyclic()) {
            r.confidence = Confidence::oracle_grade;
            r.note = "dense witness orbit; spliced a " +
                     std::to_string(nf.depth()) + "-level witnessing family";
            r.witness_family = std::move(nf);
            return r;
        }
        chains = std::move(nf.chains);
    }
    r.confidence = Confidence::heuristic;
    r.note = "dense witness orbit, but the splicing budget stopped at " +
             std::to_string(chains.size()) + " levels";
    return r;
}

NonwanderingCheck zeta_nonwandering_check(const SystemDef& sys,
                                          const SampleGrid& grid,
                                          const RefinementSchedule& sched,
                                          const Point& x, const Point& y,
                                          bool zeta_claimed) {
    require_same_system(sys, grid, "zeta_nonwandering_check");
    require_schedule(sched, "zeta_nonwandering_check");
    NonwanderingCheck r;
    const std::vector<int> next = grid_next(grid);
    const Rows trails = trail_rows(grid, next);
    const int w = word_count(grid.size());
    for (int ell = 0; ell < sched.depth(); ++ell) {
        const double eps = sched.epsilons[ell];
        Row ybits(w);
        for (int j : ball_members(grid, y, eps)) row_set(ybits, j);
        bool found = false;
        for (int z : ball_members(grid, x, eps))
            if (row_intersects(trails[z], ybits)) {
                found = true;
                break;
            }
        if (!found) {
            r.first_failing_level = ell;
            r.contradiction = zeta_claimed;
            return r;
        }
    }
    r.passes = true;
    return r;
}

// ---- spectrum ----

SpectrumReport spectrum(const SystemDef& sys, const SampleGrid& grid,
                        const RefinementSchedule& sched, const Point& x,
                        const Point& y, const SpectrumOptions& opt) {
    require_same_system(sys, grid, "spectrum");
    require_schedule(sched, "spectrum");
    if (opt.finite_kmax < 0 || opt.orbit_budget < 1 || opt.source_shift < 1 ||
        opt.prune_budget < 1 || opt.stability_window < 2)
        throw std::invalid_argument("spectrum: invalid options");

    SpectrumReport rep;
    rep.x = x;
    rep.y = y;
    const auto [xi, dx] = grid.snap(x);
    const auto [yi, dy] = grid.snap(y);
    rep.xi = xi;
    rep.yi = yi;
    const Point px = grid.points[xi];
    const Point py = grid.points[yi];
    if (dx > 0) rep.notes.push_back("x snapped to the grid (moved " + fmt(dx) + ")");
    if (dy > 0) rep.notes.push_back("y snapped to the grid (moved " + fmt(dy) + ")");

    const ChainRelation rel = chain_related(grid, sched, xi, yi);
    rep.chain_related = rel.related;
    if (!rel.related) {
        int lvl = 0;
        while (lvl < (int)rel.per_level.size() && rel.per_level[lvl]) ++lvl;
        rep.notes.push_back("pair is not chain related (first failing level " +
                            std::to_string(lvl) + "); spectrum is empty");
        return rep;
    }

    const auto finxy = detect_finite(sys, px, py, opt.finite_kmax, opt.exact_tol);
    if (finxy)
        add_entry(rep, *finxy, Confidence::oracle_grade, false,
                  "exact orbit hit: f^" + std::to_string(finxy->count + 1) +
                      "(x) = y");

    const OrbitScan scx = scan_orbit(sys, px, opt.orbit_budget);
    const OrbitProbe probe = probe_from_scan(sys, sched, px, py, scx, opt.exact_tol);
    if (probe.omega)
        add_entry(rep, omega(), Confidence::oracle_grade, false,
                  "orbit enters every schedule ball around y and never hits it");
    if (probe.inconclusive) {
        rep.inconclusive = true;
        rep.notes.push_back("orbit budget exhausted while still approaching y");
    }
    if (finxy && probe.omega) {
        rep.conflict = true;
        rep.notes.push_back("conflict: exact orbit hit and recurrence evidence "
                            "are mutually exclusive");
    }

    const PeriodicSpectrum per = detect_periodic_attractor_spectrum(
        sys, grid, sched, px, py, 64, opt.exact_tol, opt.orbit_budget);
    if (per.applicable) {
        for (int j = 0; j < per.period; ++j)
            add_entry(rep, per.terms[j], Confidence::oracle_grade, false,
                      "attracting period-" + std::to_string(per.period) +
                          " orbit spectrum, offset " + std::to_string(j));
    } else if (per.period > 0) {
        rep.notes.push_back("periodic-attractor detector refused: " +
                            per.diagnostic);
    }

    const EtaProbe etap =
        detect_eta(sys, grid, sched, px, py, std::nullopt, opt.orbit_budget);
    if (etap.eta)
        add_entry(rep, eta(), etap.confidence, false, etap.note);
    else if (!etap.note.empty() && sys.transitive_witness)
        rep.notes.push_back("dense-orbit detector: " + etap.note);

    // Empirical pipeline: per-level grid chains, Hausdorff projection with
    // pruning, first-occurrence order, growth signature.
    std::optional<PruneResult> pruned;
    std::optional<StabilizedOrder> so;
    if (opt.run_empirical && sched.depth() > opt.source_shift) {
        const RefinementSchedule targets = projection_targets(sched, opt.source_shift);
        const int window = std::min(opt.stability_window, targets.depth());
        if (targets.depth() < 2 || window < 2) {
            rep.notes.push_back("schedule too shallow for the projection pipeline");
        } else {
            try {
                const auto src = chain_family_from_grid(grid, sched, xi, yi);
                if (!src)
                    throw ProjectionError("no per-level chain family on the grid");
                const double tol =
                    opt.prune_tol < 0 ? grid.covering_radius : opt.prune_tol;
                pruned = prune_loop(*src, targets, opt.prune_budget, tol);
                rep.prune_converged = pruned->converged;
                if (!pruned->converged)
                    rep.notes.push_back("prune budget exhausted (residual " +
                                        fmt(pruned->limit.hausdorff_residual) + ")");
                so = stabilized_order(pruned->family, window);
                const SignatureReport sig = detect_signature(pruned->family, *so);
                rep.signature = sig;
                rep.certificate = verify_ordinately_nested(pruned->family, window);
                // A frozen family reads as a finite ordinal, but that reading
                // is only trustworthy when the frozen chain is an exact orbit
                // (step defect zero). A chain that still needs its epsilon
                // slack froze because projection ran out of room at the grid
                // scale, so the finite entry is withheld instead of reported.
                const double floor_q =
                    chain_quality(sys, pruned->family.chains.back().points);
                const bool grid_floor = floor_q > 0.0;
                for (const SignatureVerdict& v : sig.verdicts) {
                    const OrderTypeTerm vn = normalize(v.term);
                    if (grid_floor && vn.kind == TermKind::fin &&
                        v.confidence == Confidence::oracle_grade) {
                        rep.notes.push_back(
                            "pruned chains froze at the grid floor (step defect " +
                            fmt(floor_q) + "); finite reading " + to_string(vn) +
                            " withheld");
                        continue;
                    }
                    if (!add_entry(rep, v.term, v.confidence, true, v.evidence))
                        rep.notes.push_back("signature corroborates " +
                                            to_string(normalize(v.term)));
                }
                // A frozen exact orbit's finite ordinal must agree with brute
                // orbit enumeration; a growth signature claiming recurrence
                // must not coexist with an exact hit.
                for (const SignatureVerdict& v : sig.verdicts) {
                    const OrderTypeTerm vn = normalize(v.term);
                    if (vn.kind == TermKind::fin && !grid_floor &&
                        v.confidence == Confidence::oracle_grade &&
                        (!finxy || !equal_normalized(*finxy, vn))) {
                        rep.conflict = true;
                        rep.notes.push_back(
                            "conflict: frozen chains report " + to_string(vn) +
                            " but orbit enumeration " +
                            (finxy ? "found " + to_string(*finxy)
                                   : std::string("found no hit")));
                    }
                    if (finxy && equal_normalized(vn, omega())) {
                        rep.conflict = true;
                        rep.notes.push_back(
                            "conflict: growth signature suggests recurrence but "
                            "the orbit hits y exactly");
                    }
                }
            } catch (const ScheduleExhausted& e) {
                rep.notes.push_back(
                    std::string("projection pipeline unavailable: ") + e.what());
            } catch (const ProjectionStall& e) {
                rep.notes.push_back(std::string("projection pipeline stalled: ") +
                                    e.what());
            } catch (const ProjectionError& e) {
                rep.notes.push_back(std::string("projection failed: ") + e.what());
            }
        }
    } else if (opt.run_empirical) {
        rep.notes.push_back("schedule too shallow for the projection pipeline");
    }

    // zeta entries put the pair inside the nonwandering relation; check it.
    bool zeta_present = false;
    for (const SpectrumEntry& e : rep.entries)
        zeta_present |= equal_normalized(e.term, zeta());
    if (zeta_present) {
        const NonwanderingCheck zc =
            zeta_nonwandering_check(sys, grid, sched, px, py, true);
        if (!zc.passes) {
            rep.zeta_contradiction = true;
            rep.notes.push_back(
                "zeta claimed but the pair fails the nonwandering check at level " +
                std::to_string(zc.first_failing_level));
        }
    }

    // Component blocks along the decided order. A descending ladder of
    // components shows up as several transit runs sandwiched between
    // component blocks, each run acquiring points near both of its bounding
    // components as the levels refine; every such run is a zeta factor.
    if (opt.run_blocks && so && so->fully_decided() && !so->support.empty() &&
        pruned && pruned->family.depth() >= 2) {
        try {
            const ChainComponentSet cc = chain_components(grid, sched);
            const ConleyDiagram cd = conley_order(cc, grid, sched);
            const BlockDecomposition bd = conley_blocks(*so, grid, cc, cd);
            const std::vector<Point> seq = so->decided_sequence();
            const int window = std::min(3, pruned->family.depth());
            int comp_blocks = 0, two_sided = 0;
            for (const ComponentBlock& b : bd.blocks) {
                if (b.component >= 0) {
                    ++comp_blocks;
                    continue;
                }
                FiniteSet vals;
                for (int t = b.first; t <= b.last; ++t) vals.insert(seq[t]);
                const NestedFamily sub = restrict_family(pruned->family, vals);
                if (sub.depth() < window) continue;
                const SignatureReport ss =
                    detect_signature(sub, stabilized_order(sub, window));
                if (ss.left_growth == GrowthSide::unbounded &&
                    ss.right_growth == GrowthSide::unbounded)
                    ++two_sided;
            }
            if (comp_blocks >= 2 && two_sided >= 2)
                add_entry(rep, prod_of(zeta(), omega()), Confidence::heuristic, true,
                          std::to_string(two_sided) +
                              " connecting runs grow at both ends (repeated "
                              "zeta pattern)");
        } catch (const ScheduleTooCoarse& e) {
            rep.notes.push_back(std::string("component blocks unavailable: ") +
                                e.what());
        } catch (const BlockStructureError& e) {
            rep.notes.push_back(std::string("component blocks unavailable: ") +
                                e.what());
        }
    }

    // Limit-set biconditional: y clusters the orbit tail iff the spectrum
    // shows recurrence or a finite cycle through both points. Skipped for a
    // strictly preperiodic x landing exactly on the cycle through y, where
    // the two sides legitimately diverge.
    const bool preperiodic_hit = finxy && scx.cycled() && scx.mu >= 1 &&
                                 probe.orbit_hit && probe.hit_step >= scx.mu;
    if (probe.inconclusive) {
        rep.notes.push_back("limit-set cross-check skipped (orbit probe "
                            "inconclusive)");
    } else if (preperiodic_hit) {
        rep.notes.push_back("limit-set cross-check inapplicable (x is strictly "
                            "preperiodic onto the cycle through y)");
    } else {
        const auto finyx = detect_finite(sys, py, px, opt.finite_kmax, opt.exact_tol);
        const bool lhs = probe.limit_hit;
        const bool rhs = probe.omega || per.applicable ||
                         (finxy.has_value() && finyx.has_value());
        if (lhs != rhs) {
            rep.conflict = true;
            rep.notes.push_back(
                std::string("limit-set cross-check disagrees: tail clustering ") +
                (lhs ? "present" : "absent") + ", spectrum recurrence " +
                (rhs ? "present" : "absent"));
        }
    }

    return rep;
}

std::vector<int> xi_class(const SystemDef& sys, const SampleGrid& grid,
                          const RefinementSchedule& sched, const OrderTypeTerm& xi,
                          const Point& x, bool oracle_only,
                          const SpectrumOptions& opt) {
    require_same_system(sys, grid, "xi_class");
    require_schedule(sched, "xi_class");
    const int xidx = grid.snap(x).first;
    const Point px = grid.points[xidx];
    const OrderTypeTerm xin = normalize(xi);
    const std::vector<char> related = related_mask(grid, sched, xidx);
    std::vector<int> out;

    if (!oracle_only) {
        for (int j = 0; j < grid.size(); ++j) {
            if (!related[j]) continue;
            const SpectrumReport rep =
                spectrum(sys, grid, sched, px, grid.points[j], opt);
            for (const SpectrumEntry& e : rep.entries)
                if (equal_normalized(e.term, xin)) {
                    out.push_back(j);
                    break;
                }
        }
        return out;
    }

    if (xin.kind == TermKind::fin) {
        for (int j = 0; j < grid.size(); ++j) {
            if (!related[j]) continue;
            const auto f =
                detect_finite(sys, px, grid.points[j], (int)xin.count, opt.exact_tol);
            if (f && equal_normalized(*f, xin)) out.push_back(j);
        }
        return out;
    }
    if (equal_normalized(xin, omega())) {
        const OrbitScan sc = scan_orbit(sys, px, opt.orbit_budget);
        for (int j = 0; j < grid.size(); ++j) {
            if (!related[j]) continue;
            const OrbitProbe pb =
                probe_from_scan(sys, sched, px, grid.points[j], sc, opt.exact_tol);
            if (pb.omega) out.push_back(j);
        }
        return out;
    }
    if (equal_normalized(xin, eta())) {
        bool dense = sys.identity_map;
        if (!dense && sys.transitive_witness) {
            std::vector<Point> orb;
            int missing = 0;
            dense = witness_dense(sys, grid, sched, *sys.transitive_witness,
                                  opt.orbit_budget, orb, missing);
        }
        if (dense)
            for (int j = 0; j < grid.size(); ++j)
                if (related[j]) out.push_back(j);
        return out;
    }
    // The remaining oracle-detectable terms are attracting-orbit spectra.
    for (int j = 0; j < grid.size(); ++j) {
        if (!related[j]) continue;
        const PeriodicSpectrum per = detect_periodic_attractor_spectrum(
            sys, grid, sched, px, grid.points[j], 64, opt.exact_tol,
            opt.orbit_budget);
        if (!per.applicable) continue;
        for (const OrderTypeTerm& t : per.terms)
            if (equal_normalized(t, xin)) {
                out.push_back(j);
                break;
            }
    }
    return out;
}

// ---- component blocks ----

BlockDecomposition conley_blocks(const StabilizedOrder& so, const SampleGrid& grid,
                                 const ChainComponentSet& cc,
                                 const ConleyDiagram& cd) {
    if (!so.fully_decided())
        throw std::invalid_argument("conley_blocks: order has undecided pairs");
    if ((int)cc.member_of.size() != grid.size())
        throw std::invalid_argument(
            "conley_blocks: component set does not match the grid");
    if (cd.node_count != (int)cc.components.size())
        throw std::invalid_argument(
            "conley_blocks: diagram does not match the component set");

    const std::vector<Point> seq = so.decided_sequence();
    BlockDecomposition bd;
    if (seq.empty()) return bd;

    std::vector<int> comp(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t)
        comp[t] = cc.member_of[grid.snap(seq[t]).first];

    std::map<int, int> run_end; // component -> last position of its closed run
    std::vector<int> visited;
    for (std::size_t t = 0; t < seq.size();) {
        std::size_t s = t;
        while (s + 1 < seq.size() && comp[s + 1] == comp[t]) ++s;
        if (comp[t] >= 0) {
            const auto it = run_end.find(comp[t]);
            if (it != run_end.end())
                throw BlockStructureError(
                    "component block interrupted in the decided order",
                    it->second, (int)t);
            run_end[comp[t]] = (int)s;
            visited.push_back(comp[t]);
        }
        bd.blocks.push_back({comp[t], (int)t, (int)s});
        t = s + 1;
    }

    const std::set<std::pair<int, int>> pairs(cd.order_pairs.begin(),
                                              cd.order_pairs.end());
    for (std::size_t a = 0; a < visited.size(); ++a)
        for (std::size_t b = a + 1; b < visited.size(); ++b)
            if (!pairs.count({visited[b], visited[a]}))
                throw BlockStructureError(
                    "decided order disagrees with the Conley order", visited[a],
                    visited[b]);

    bd.induced_order.assign(visited.rbegin(), visited.rend());
    return bd;
}

// ---- attractor-repeller structure ----

std::vector<AttractorRepellerPair> find_attractors(const SampleGrid& grid,
                                                   double epsilon) {
    if (grid.size() < 1) throw std::invalid_argument("find_attractors: empty grid");
    if (epsilon <= 0)
        throw std::invalid_argument("find_attractors: epsilon must be positive");
    const int n = grid.size();
    const EpsilonGraph g = build_graph(grid, epsilon);
    const SccResult scc = strongly_connected_components(g.out);
    const std::vector<int> next = grid_next(grid);

    std::vector<std::vector<int>> comp_adj(scc.count);
    for (int u = 0; u < n; ++u)
        for (int v : g.out[u])
            if (scc.comp[u] != scc.comp[v])
                comp_adj[scc.comp[u]].push_back(scc.comp[v]);
    for (auto& a : comp_adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    const BitMatrix reach = reachability_closure(comp_adj);

    std::set<std::vector<int>> seen_candidates;
    std::set<std::vector<int>> seen_attractors;
    std::vector<AttractorRepellerPair> out;

    // Candidate inward sets: everything reachable from one component. Such a
    // set maps strictly inside itself up to the edge tolerance, which is the
    // grid reading of an inward neighbourhood.
    for (int c = 0; c < scc.count; ++c) {
        std::vector<char> comp_in(scc.count, 0);
        for (int b : reach.row_members(c)) comp_in[b] = 1;
        std::vector<int> verts;
        for (int v = 0; v < n; ++v)
            if (comp_in[scc.comp[v]]) verts.push_back(v);
        if ((int)verts.size() == n) continue; // the whole grid is trivial
        if (!seen_candidates.insert(verts).second) continue;

        std::vector<char> in_u(n, 0);
        for (int v : verts) in_u[v] = 1;

        // The attractor is the stable part of the iterated image of U; the
        // image stays inside U because U is closed under the edge relation.
        std::vector<char> s = in_u;
        for (;;) {
            std::vector<char> t(n, 0);
            for (int u = 0; u < n; ++u)
                if (s[u])
                    for (int v : g.out[u]) t[v] = 1;
            if (t == s) break;
            s = std::move(t);
        }
        std::vector<int> attractor;
        for (int v = 0; v < n; ++v)
            if (s[v]) attractor.push_back(v);
        if (attractor.empty()) continue;
        if (!seen_attractors.insert(attractor).second) continue;

        // Basin: grid orbits that enter U.
        std::vector<signed char> st(n, 0); // 0 unknown, 1 on path, 2 in, 3 out
        for (int v0 = 0; v0 < n; ++v0) {
            if (st[v0]) continue;
            std::vector<int> path;
            int v = v0;
            signed char verdict = 0;
            for (;;) {
                if (in_u[v]) {
                    verdict = 2;
                    break;
                }
                if (st[v] == 2 || st[v] == 3) {
                    verdict = st[v];
                    break;
                }
                if (st[v] == 1) {
                    verdict = 3; // cycled outside U
                    break;
                }
                st[v] = 1;
                path.push_back(v);
                v = next[v];
            }
            for (int u : path) st[u] = verdict;
        }
        AttractorRepellerPair pair;
        pair.inward = verts;
        pair.attractor = std::move(attractor);
        for (int v = 0; v < n; ++v)
            (st[v] == 2 || in_u[v] ? pair.basin : pair.repeller).push_back(v);
        out.push_back(std::move(pair));
    }

    // Wider inward sets around the same trap produce fattened copies of the
    // same attractor (the iterated image keeps the extra epsilon margin).
    // Keep only pairs whose attractor contains no other candidate's
    // attractor; incomparable attractors all survive.
    std::vector<char> keep(out.size(), 1);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j)
            if (out[j].attractor.size() < out[i].attractor.size() &&
                std::includes(out[i].attractor.begin(), out[i].attractor.end(),
                              out[j].attractor.begin(), out[j].attractor.end())) {
                keep[i] = 0;
                break;
            }
    std::vector<AttractorRepellerPair> minimal;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (keep[i]) minimal.push_back(std::move(out[i]));
    out = std::move(minimal);

    std::sort(out.begin(), out.end(),
              [](const AttractorRepellerPair& a, const AttractorRepellerPair& b) {
                  return a.attractor < b.attractor;
              });
    return out;
}

ArDecomposition ar_decompose(const SystemDef& sys, const SampleGrid& grid,
                             const NestedFamily& nf, const StabilizedOrder& so,
                             const AttractorRepellerPair& pair) {
    require_same_system(sys, grid, "ar_decompose");
    if (nf.depth() < 2)
        throw std::invalid_argument("ar_decompose: need at least two levels");
    if (!so.fully_decided())
        throw std::invalid_argument("ar_decompose: order has undecided pairs");

    std::vector<char> in_a(grid.size(), 0), in_r(grid.size(), 0);
    for (int j : pair.attractor) in_a[j] = 1;
    for (int j : pair.repeller) in_r[j] = 1;
    auto exact_grid = [&](const Point& p) -> int {
        const int j = grid.snap(p).first;
        return same_point(grid.points[j], p) ? j : -1;
    };
    if (!in_r[grid.snap(nf.x).first])
        throw std::invalid_argument("ar_decompose: x is not in the repeller");
    if (!in_a[grid.snap(nf.y).first])
        throw std::invalid_argument("ar_decompose: y is not in the attractor");

    const std::vector<Point> seq = so.decided_sequence();
    ArDecomposition out;
    int phase = 0; // 0 repeller side, 1 connecting, 2 attractor side
    std::vector<Point> middle;
    for (const Point& p : seq) {
        const int j = exact_grid(p);
        const bool a = j >= 0 && in_a[j];
        const bool r = j >= 0 && in_r[j];
        if (r) {
            if (phase != 0)
                throw DecompositionError(
                    "repeller points reappear after the connecting segment");
            out.s_r.insert(p);
        } else if (a) {
            phase = 2;
            out.s_a.insert(p);
        } else {
            if (phase == 2)
                throw DecompositionError(
                    "connecting points reappear after the attractor side");
            phase = 1;
            middle.push_back(p);
            out.s_prime.insert(p);
        }
    }

    // The connecting segment must be one exact orbit: each member maps
    // bitwise onto the next.
    for (std::size_t t = 0; t + 1 < middle.size(); ++t)
        if (!same_point(evaluate(sys, middle[t]), middle[t + 1]))
            throw DecompositionError("connecting segment is not an exact orbit "
                                     "segment (resolution too coarse)");

    const int window = std::min(3, nf.depth());
    const NestedFamily mid_f = restrict_family(nf, out.s_prime);
    const SignatureReport mid_sig =
        detect_signature(mid_f, stabilized_order(mid_f, window));
    const bool left = mid_sig.left_growth == GrowthSide::unbounded;
    const bool right = mid_sig.right_growth == GrowthSide::unbounded;
    if (left && right)
        out.middle = zeta();
    else if (left)
        out.middle = omega_star();
    else
        throw DecompositionError(
            "connecting segment does not grow toward the repeller");

    const NestedFamily beta_f = restrict_family(nf, out.s_r);
    out.beta = detect_signature(beta_f, stabilized_order(beta_f, window));
    const NestedFamily betap_f = restrict_family(nf, out.s_a);
    out.beta_prime = detect_signature(betap_f, stabilized_order(betap_f, window));
    return out;
}

// ---- prolongation ----

ProlongationTable prolongation(const SampleGrid& grid,
                               const RefinementSchedule& sched, const Point& x,
                               int alpha_max, long long composition_budget) {
    if (grid.size() < 1) throw std::invalid_argument("prolongation: empty grid");
    require_schedule(sched, "prolongation");
    if (alpha_max < 1)
        throw std::invalid_argument("prolongation: alpha_max must be positive");
    if (composition_budget < 1)
        throw std::invalid_argument("prolongation: budget must be positive");

    const int n = grid.size();
    const std::vector<int> next = grid_next(grid);
    const Rows trails = trail_rows(grid, next);

    ProlongationTable table;
    table.x = x;
    table.xi = grid.snap(x).first;
    table.lower_bound.assign(alpha_max, false);

    // Stage alpha takes the union of powers of the previous relation (the
    // raw orbit trails at stage one), applies it to the eps-ball around each
    // source, closes up by eps, and intersects the whole relation over the
    // schedule. Only the initial ball and the closure carry the scale; the
    // relation handed to the next stage is schedule-free, so a single stage
    // cannot chain eps-sized hops the way a pseudo-orbit would.
    Rows rel;
    bool truncated = false;
    for (int alpha = 1; alpha <= alpha_max; ++alpha) {
        Rows base;
        if (alpha == 1) {
            base = trails;
        } else {
            bool exact = true;
            base = compose_rows(rel, n, composition_budget, exact);
            if (!exact) truncated = true;
        }
        // A truncated union of powers stays an underestimate forever after.
        if (truncated) table.lower_bound[alpha - 1] = true;

        Rows inter;
        for (std::size_t li = 0; li < sched.epsilons.size(); ++li) {
            const double eps = sched.epsilons[li];
            Rows lvl = thicken_rows(grid, ball_fold(grid, base, eps), eps);
            if (li == 0) {
                inter = std::move(lvl);
            } else {
                for (int u = 0; u < n; ++u) row_and(inter[u], lvl[u]);
            }
        }
        if (alpha > 1)
            for (int u = 0; u < n; ++u)
                if (!row_subset(rel[u], inter[u]))
                    throw std::logic_error(
                        "prolongation: levels lost monotonicity");
        rel = std::move(inter);
        table.levels.push_back(row_members(rel[table.xi], n));
    }
    return table;
}

} // namespace chainspec
