#include "chainspec/nesting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace chainspec {

namespace {

FiniteSet support_of(const std::vector<Point>& pts) {
    FiniteSet s;
    for (const Point& p : pts) s.insert(p);
    return s;
}

// The paper's acyclicity: no interior repeats and the interior never
// revisits an endpoint; only the two endpoints may coincide.
bool is_acyclic(const std::vector<Point>& pts) {
    const std::size_t last = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (same_point(pts[i], pts[j]) && !(i == 0 && j == last))
                return false;
    return true;
}

double min_positive_pairwise(const Metric& m, const std::vector<Point>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (!same_point(pts[i], pts[j]))
                best = std::min(best, distance(m, pts[i], pts[j]));
    return best;
}

int nearest_index(const Metric& m, const std::vector<Point>& pool,
                  const Point& p) {
    int best = 0;
    double bd = distance(m, pool[0], p);
    for (int i = 1; i < (int)pool.size(); ++i) {
        const double d = distance(m, pool[i], p);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// Radius delta such that d(u, v) < delta forces image displacement below
// `target`. Analytic when a Lipschitz constant ships with the system;
// otherwise probed empirically with a halving sweep and safety factor 2.
double continuity_radius(const SystemDef& sys, double target) {
    if (sys.lipschitz) {
        const double lip = *sys.lipschitz;
        if (lip <= 0.0) return std::numeric_limits<double>::infinity();
        return target / lip;
    }
    if (sys.intervals.empty())
        throw std::invalid_argument(
            "system '" + sys.name +
            "' has neither a Lipschitz constant nor a 1-d domain to probe");
    double delta = target;
    for (int iter = 0; iter < 80; ++iter) {
        double worst = 0.0;
        for (const DomainInterval& iv : sys.intervals) {
            const int steps = 512;
            const double h = (iv.hi - iv.lo) / steps;
            for (int s = 0; s <= steps; ++s) {
                const double t = iv.lo + s * h;
                double u = t + delta;
                if (sys.metric.kind != MetricKind::arc_circle && u > iv.hi)
                    u = iv.hi;
                const Point a{sys.metric.kind == MetricKind::arc_circle
                                  ? canonical_circle(t)
                                  : t,
                              0.0, sys.space_tag};
                const Point b{sys.metric.kind == MetricKind::arc_circle
                                  ? canonical_circle(u)
                                  : u,
                              0.0, sys.space_tag};
                worst = std::max(worst, distance(sys.metric, evaluate(sys, a),
                                                 evaluate(sys, b)));
            }
        }
        if (2.0 * worst < target) return delta;
        delta /= 2.0;
    }
    throw ProjectionStall("no usable uniform-continuity radius for '" +
                          sys.name + "' at displacement target " +
                          std::to_string(target));
}

struct StepResult {
    std::vector<Point> points;
    int source = -1;
    double delta = 0.0;
    int collapsed = 0;
};

// One induction step: lift the current chain to the next level through a
// fine source chain, filling unmatched positions from the limit support.
StepResult project_step(const SystemDef& sys, const std::vector<Point>& cur,
                        double eps, const std::vector<Chain>& family,
                        const FiniteSet& limit) {
    const Metric& metric = sys.metric;
    StepResult r;

    const double pinch = min_positive_pairwise(metric, cur);
    double delta = std::min(eps / 6.0, pinch / 2.0) * (1.0 - 1e-9);
    delta = std::min(delta, continuity_radius(sys, eps / 6.0));
    r.delta = delta;
    if (!(delta > sys.diam * 1e-13))
        throw ProjectionStall("delta collapsed to " + std::to_string(delta) +
                              " (near-duplicate chain points)");

    for (std::size_t k = 0; k < family.size(); ++k) {
        if (!(chain_quality(sys, family[k].points) < eps / 6.0)) continue;
        if (!(hausdorff_distance(metric, family[k].points,
                                 limit.points()) < delta / 2.0))
            continue;
        r.source = (int)k;
        break;
    }
    if (r.source < 0)
        throw ScheduleExhausted(
            "no source chain of quality below " + std::to_string(eps / 6.0) +
            " lies within " + std::to_string(delta / 2.0) +
            " of the limit support");

    const std::vector<Point>& src = family[r.source].points;
    const int m_src = (int)src.size() - 1;

    // nearest-point matching, distinct values only; x lands on position 0
    // by the smallest-index tie rule, y is pinned to the final position
    std::vector<Point> values;
    for (const Point& p : cur) {
        bool seen = false;
        for (const Point& v : values) seen = seen || same_point(v, p);
        if (!seen) values.push_back(p);
    }
    std::vector<int> claim(src.size(), -1);
    for (int vi = 0; vi < (int)values.size(); ++vi) {
        const Point& v = values[vi];
        const int pos = same_point(v, cur.back()) ? m_src
                                                  : nearest_index(metric, src, v);
        const double d = distance(metric, src[pos], v);
        if (!(d <= delta / 2.0))
            throw ProjectionError("matched point (" + std::to_string(v.x) +
                                  ") is " + std::to_string(d) +
                                  " from its target, beyond delta/2");
        if (claim[pos] >= 0)
            throw ProjectionError(
                "injectivity lost: points " + std::to_string(values[claim[pos]].x) +
                " and " + std::to_string(v.x) + " both match source position " +
                std::to_string(pos));
        claim[pos] = vi;
    }

    // walk the source chain, substituting matches and projecting the rest
    // onto the limit support; adjacent equal outputs merge
    for (int p = 0; p <= m_src; ++p) {
        Point q;
        if (claim[p] >= 0) {
            q = values[claim[p]];
        } else {
            q = limit.points()[nearest_index(metric, limit.points(), src[p])];
            const double d = distance(metric, q, src[p]);
            if (!(d <= delta / 2.0))
                throw ProjectionError(
                    "no limit point within delta/2 of unmatched source position " +
                    std::to_string(p));
            if (limit.contains(src[p]) && !same_point(q, src[p]))
                throw std::logic_error(
                    "nearest limit point differs from a source point already "
                    "in the limit");
        }
        if (!r.points.empty() && same_point(r.points.back(), q)) {
            ++r.collapsed;
            continue;
        }
        r.points.push_back(q);
    }

    // the construction guarantees strict eps/2 steps; verify, never trust
    for (std::size_t i = 0; i + 1 < r.points.size(); ++i) {
        const double d =
            distance(metric, evaluate(sys, r.points[i]), r.points[i + 1]);
        if (!(d < eps / 2.0))
            throw ProjectionError("built chain step " + std::to_string(i) +
                                  " measures " + std::to_string(d) +
                                  ", missing the " + std::to_string(eps / 2.0) +
                                  " bound");
    }
    return r;
}

void recompute_flags(NestedFamily& nf) {
    nf.nesting_ok.clear();
    nf.acyclic_ok.clear();
    for (std::size_t n = 0; n + 1 < nf.chains.size(); ++n)
        nf.nesting_ok.push_back(support_of(nf.chains[n].points)
                                    .subset_of(support_of(nf.chains[n + 1].points)));
    for (const Chain& c : nf.chains)
        nf.acyclic_ok.push_back(is_acyclic(c.points));
}

const SystemDef& family_system(const std::vector<Chain>& family) {
    if (family.empty())
        throw std::invalid_argument("chain family is empty");
    const SystemDef* sys = family.front().sys;
    if (!sys) throw std::invalid_argument("chain family has no system");
    for (const Chain& c : family) {
        if (c.sys != sys)
            throw std::invalid_argument("chain family mixes systems");
        if (c.points.size() < 2)
            throw std::invalid_argument("chain family contains a bare point");
        if (!same_point(c.points.front(), family.front().points.front()) ||
            !same_point(c.points.back(), family.front().points.back()))
            throw std::invalid_argument("chain family endpoints disagree");
    }
    return *sys;
}

} // namespace

bool NestedFamily::all_nested() const {
    for (char ok : nesting_ok)
        if (!ok) return false;
    return true;
}

bool NestedFamily::all_acyclic() const {
    for (char ok : acyclic_ok)
        if (!ok) return false;
    return true;
}

namespace {

// Shared core: run the induction against an explicitly chosen limit set.
// The public entry derives the limit from the family; the pruning loop
// passes the shrunken one so removed points cannot leak back in.
ProjectionResult project_onto(const SystemDef& sys,
                              const std::vector<Chain>& sources,
                              const RefinementSchedule& sched, FiniteSet limit,
                              double residual) {
    for (std::size_t n = 0; n + 1 < sched.epsilons.size(); ++n)
        if (sched.epsilons[n + 1] < sched.epsilons[n] / 2.0 * (1.0 - 1e-12))
            throw std::invalid_argument(
                "schedule drops faster than halving; projected chains only "
                "guarantee eps/2 per level");
    if (sched.depth() < 1)
        throw std::invalid_argument("schedule is empty");

    ProjectionResult r;
    r.family.x = sources.front().points.front();
    r.family.y = sources.front().points.back();
    r.limit.points = std::move(limit);
    r.limit.hausdorff_residual = residual;

    Chain first;
    first.sys = &sys;
    first.epsilon = sched.epsilons.front();
    first.points = {r.family.x, r.family.y};
    if (!check_chain(sys, first.points, first.epsilon).ok)
        throw std::invalid_argument(
            "the two-point seed is not a chain at the coarsest level; "
            "schedule does not start at 2 diam");
    r.family.chains.push_back(std::move(first));

    for (int n = 0; n + 1 < sched.depth(); ++n) {
        StepResult step =
            project_step(sys, r.family.chains[n].points, sched.epsilons[n],
                         sources, r.limit.points);
        Chain next;
        next.sys = &sys;
        next.epsilon = sched.epsilons[n + 1];
        next.points = std::move(step.points);
        r.family.chains.push_back(std::move(next));
        r.stats.source_index.push_back(step.source);
        r.stats.delta.push_back(step.delta);
        r.stats.collapsed_duplicates += step.collapsed;
    }
    recompute_flags(r.family);
    return r;
}

} // namespace

ProjectionResult hausdorff_project(const std::vector<Chain>& family,
                                   const RefinementSchedule& sched) {
    const SystemDef& sys = family_system(family);
    const double residual =
        family.size() >= 2
            ? hausdorff_distance(sys.metric, family.back().points,
                                 family[family.size() - 2].points)
            : 0.0;
    return project_onto(sys, family, sched,
                        support_of(family.back().points), residual);
}

PruneResult prune_loop(const std::vector<Chain>& family,
                       const RefinementSchedule& sched, int budget, double tol) {
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const SystemDef& sys = family_system(family);
    const Metric& metric = sys.metric;

    PruneResult r;
    std::vector<Chain> current = family;
    FiniteSet prev_limit = support_of(family.back().points);

    for (int round = 1; round <= budget; ++round) {
        // later rounds may fall back on the original family for levels the
        // pruned chains are too coarse to drive; originals qualify only
        // while they still hug the shrunken limit
        std::vector<Chain> sources = current;
        if (round > 1)
            sources.insert(sources.end(), family.begin(), family.end());

        ProjectionResult proj =
            project_onto(sys, sources, sched, prev_limit, 0.0);

        int removed_total = 0;
        for (Chain& c : proj.family.chains) {
            int removed = 0;
            c = remove_cycles(c, &removed);
            removed_total += removed;
        }
        recompute_flags(proj.family);

        const FiniteSet limit = support_of(proj.family.chains.back().points);
        const double residual =
            hausdorff_distance(metric, limit.points(), prev_limit.points());

        r.rounds = round;
        r.removed_per_round.push_back(removed_total);
        r.residual_per_round.push_back(residual);
        r.limit_history.push_back(limit);
        r.family = std::move(proj.family);
        r.limit.points = limit;
        r.limit.hausdorff_residual = residual;

        if (removed_total == 0 && residual <= tol) {
            r.converged = true;
            break;
        }
        current = r.family.chains;
        prev_limit = limit;
    }
    return r;
}

int FirstOccurrenceOrder::rank_of(const Point& p) const {
    for (const auto& [q, idx] : rank)
        if (same_point(q, p)) return idx;
    return -1;
}

FirstOccurrenceOrder first_occurrence_order(const Chain& c) {
    if (c.points.size() < 2)
        throw std::invalid_argument("chain needs at least one step");
    FirstOccurrenceOrder r;
    r.chain = &c;
    for (int pos = 1; pos + 1 < (int)c.points.size(); ++pos)
        if (r.rank_of(c.points[pos]) < 0)
            r.rank.push_back({c.points[pos], pos});
    return r;
}

PairOrder StabilizedOrder::at(int i, int j) const {
    const int k = (int)support.size();
    if (i == j || i < 0 || j < 0 || i >= k || j >= k)
        throw std::invalid_argument("pair indices out of range");
    const bool flip = i > j;
    if (flip) std::swap(i, j);
    const std::size_t idx =
        (std::size_t)i * k - (std::size_t)i * (i + 1) / 2 + (j - i - 1);
    const PairOrder p = pairs[idx];
    if (!flip || p == PairOrder::unstable) return p;
    return p == PairOrder::before ? PairOrder::after : PairOrder::before;
}

bool StabilizedOrder::fully_decided() const {
    for (PairOrder p : pairs)
        if (p == PairOrder::unstable) return false;
    return true;
}

std::vector<std::pair<int, int>> StabilizedOrder::unstable_pairs() const {
    std::vector<std::pair<int, int>> out;
    const int k = (int)support.size();
    std::size_t idx = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++idx)
            if (pairs[idx] == PairOrder::unstable) out.push_back({i, j});
    return out;
}

std::vector<Point> StabilizedOrder::decided_sequence() const {
    if (!fully_decided())
        throw std::logic_error("order has unstable pairs; no unique sequence");
    const int k = (int)support.size();
    std::vector<std::pair<int, int>> by_wins(k); // (# points before it, index)
    for (int i = 0; i < k; ++i) {
        int earlier = 0;
        for (int j = 0; j < k; ++j)
            if (j != i && at(j, i) == PairOrder::before) ++earlier;
        by_wins[i] = {earlier, i};
    }
    std::sort(by_wins.begin(), by_wins.end());
    std::vector<Point> seq;
    for (int t = 0; t < k; ++t) {
        if (by_wins[t].first != t)
            throw std::logic_error("decided relation is not a total order");
        seq.push_back(support.points()[by_wins[t].second]);
    }
    return seq;
}

StabilizedOrder stabilized_order(const NestedFamily& nf, int window) {
    if (window < 2) throw std::invalid_argument("window must be at least 2");
    if (nf.depth() < window)
        throw std::invalid_argument("family is shallower than the window");

    StabilizedOrder so;
    so.stability_window = window;
    for (const Chain& c : nf.chains)
        for (int pos = 1; pos + 1 < (int)c.points.size(); ++pos) {
            const Point& p = c.points[pos];
            if (!same_point(p, nf.x) && !same_point(p, nf.y))
                so.support.insert(p);
        }

    const int k = (int)so.support.size();
    const int levels = nf.depth();
    std::vector<std::vector<int>> rk(levels, std::vector<int>(k, -1));
    for (int n = 0; n < levels; ++n) {
        const auto& pts = nf.chains[n].points;
        for (int pos = 1; pos + 1 < (int)pts.size(); ++pos) {
            const auto& sp = so.support.points();
            const auto it = std::lower_bound(sp.begin(), sp.end(), pts[pos],
                                             point_less);
            if (it == sp.end() || !same_point(*it, pts[pos])) continue;
            const int vi = (int)(it - sp.begin());
            if (rk[n][vi] < 0) rk[n][vi] = pos;
        }
    }

    so.pairs.assign((std::size_t)k * (k - 1) / 2, PairOrder::unstable);
    std::size_t idx = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++idx) {
            if (rk[levels - 1][i] < 0 || rk[levels - 1][j] < 0) continue;
            // last `window` levels where both values occur
            std::vector<int> common;
            for (int n = levels - 1; n >= 0 && (int)common.size() < window; --n)
                if (rk[n][i] >= 0 && rk[n][j] >= 0) common.push_back(n);
            bool before = true, after = true;
            for (int n : common) {
                before = before && rk[n][i] < rk[n][j];
                after = after && rk[n][i] > rk[n][j];
            }
            if (before)
                so.pairs[idx] = PairOrder::before;
            else if (after)
                so.pairs[idx] = PairOrder::after;
        }

    // guard: decided cycles cannot arise from per-chain linear ranks, but a
    // cycle would silently corrupt downstream block logic, so demote any
    std::vector<std::vector<int>> out(k);
    idx = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++idx) {
            if (so.pairs[idx] == PairOrder::before) out[i].push_back(j);
            if (so.pairs[idx] == PairOrder::after) out[j].push_back(i);
        }
    const SccResult scc = strongly_connected_components(out);
    std::vector<int> comp_size(scc.count, 0);
    for (int v = 0; v < k; ++v) ++comp_size[scc.comp[v]];
    idx = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++idx)
            if (scc.comp[i] == scc.comp[j] && comp_size[scc.comp[i]] > 1)
                so.pairs[idx] = PairOrder::unstable;
    return so;
}

NestingCertificate verify_ordinately_nested(const NestedFamily& nf,
                                            int window) {
    NestingCertificate cert;
    for (std::size_t n = 0; n + 1 < nf.chains.size(); ++n)
        cert.nested_step.push_back(
            support_of(nf.chains[n].points)
                .subset_of(support_of(nf.chains[n + 1].points)));
    for (const Chain& c : nf.chains)
        cert.acyclic_chain.push_back(is_acyclic(c.points));

    for (std::size_t n = 0; n < cert.nested_step.size(); ++n)
        if (!cert.nested_step[n] && cert.violating_level < 0)
            cert.violating_level = (int)n;
    for (std::size_t n = 0; n < cert.acyclic_chain.size(); ++n)
        if (!cert.acyclic_chain[n] && cert.violating_level < 0)
            cert.violating_level = (int)n;

    const int effective = std::min<int>(window, nf.depth());
    if (effective >= 2) {
        const StabilizedOrder so = stabilized_order(nf, effective);
        const auto unstable = so.unstable_pairs();
        cert.order_compatible = unstable.empty();
        if (!unstable.empty())
            cert.flipping_pair = {so.support.points()[unstable.front().first],
                                  so.support.points()[unstable.front().second]};
    } else {
        cert.order_compatible = true; // nothing to flip in a 1-deep family
    }

    bool nested = true, acyclic = true;
    for (char ok : cert.nested_step) nested = nested && ok;
    for (char ok : cert.acyclic_chain) acyclic = acyclic && ok;
    cert.pass = nested && acyclic && cert.order_compatible;
    return cert;
}

InvarianceReport limit_support_check(const LimitSupport& ls,
                                     const SystemDef& sys, const Point& x,
                                     const Point& y, double tol) {
    FiniteSet lhs;
    for (const Point& p : ls.points.points()) lhs.insert(evaluate(sys, p));
    lhs.insert(x);
    FiniteSet rhs = ls.points;
    rhs.insert(evaluate(sys, y));
    InvarianceReport r;
    r.dist = hausdorff_distance(sys.metric, lhs.points(), rhs.points());
    r.pass = r.dist <= tol;
    return r;
}

namespace {

FiniteSet interior_support(const Chain& c, const Point& x, const Point& y) {
    FiniteSet s;
    for (int pos = 1; pos + 1 < (int)c.points.size(); ++pos)
        if (!same_point(c.points[pos], x) && !same_point(c.points[pos], y))
            s.insert(c.points[pos]);
    return s;
}

int first_position(const std::vector<Point>& pts, const Point& p) {
    for (int i = 0; i < (int)pts.size(); ++i)
        if (same_point(pts[i], p)) return i;
    return -1;
}

} // namespace

SignatureReport detect_signature(const NestedFamily& nf,
                                 const StabilizedOrder& so) {
    SignatureReport rep;
    const int levels = nf.depth();

    std::vector<FiniteSet> interior;
    for (const Chain& c : nf.chains)
        interior.push_back(interior_support(c, nf.x, nf.y));

    // a point counts as decided when the stabilized order places it against
    // every other support point
    const auto& sp = so.support.points();
    std::vector<char> stable(sp.size(), 1);
    for (const auto& [i, j] : so.unstable_pairs()) {
        stable[i] = 0;
        stable[j] = 0;
    }
    auto support_index = [&](const Point& p) {
        const auto it = std::lower_bound(sp.begin(), sp.end(), p, point_less);
        if (it == sp.end() || !same_point(*it, p)) return -1;
        return (int)(it - sp.begin());
    };
    for (const FiniteSet& s : interior) {
        int cnt = 0;
        for (const Point& p : s.points()) {
            const int vi = support_index(p);
            if (vi >= 0 && stable[vi]) ++cnt;
        }
        rep.decided_size_trend.push_back(cnt);
    }

    if (levels < 4) {
        rep.inconclusive = true;
        return rep;
    }

    bool any_left = false, any_right = false, any_interior = false;
    for (int n = 0; n + 1 < levels; ++n) {
        if (interior[n].empty()) continue; // seeding, no sides to speak of
        const auto& next = nf.chains[n + 1].points;
        int min_old = (int)next.size(), max_old = -1;
        for (const Point& p : interior[n].points()) {
            const int pos = first_position(next, p);
            if (pos < 0) continue; // non-nested input, skip the stray
            min_old = std::min(min_old, pos);
            max_old = std::max(max_old, pos);
        }
        if (max_old < 0) continue;
        for (const Point& p : interior[n + 1].points()) {
            if (interior[n].contains(p)) continue;
            const int pos = first_position(next, p);
            if (pos < min_old)
                any_left = true;
            else if (pos > max_old)
                any_right = true;
            else
                any_interior = true;
        }
    }

    // decided gaps: adjacent interior entries of an early chain whose pair
    // the stabilized order resolves, filled when the deepest chain puts
    // something strictly between them
    int gaps = 0, filled = 0;
    const auto& deepest = nf.chains.back().points;
    for (int n = 0; n + 2 < levels; ++n) {
        const auto& pts = nf.chains[n].points;
        std::vector<Point> seq;
        for (const Point& p : pts)
            if (!same_point(p, nf.x) && !same_point(p, nf.y) &&
                first_position(seq, p) < 0)
                seq.push_back(p);
        for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            const int ui = support_index(seq[t]);
            const int vi = support_index(seq[t + 1]);
            if (ui < 0 || vi < 0 || so.at(ui, vi) == PairOrder::unstable)
                continue;
            const int a = first_position(deepest, seq[t]);
            const int b = first_position(deepest, seq[t + 1]);
            if (a < 0 || b < 0) continue;
            ++gaps;
            if (std::abs(a - b) > 1) ++filled;
        }
    }
    if (!any_interior)
        rep.interior_densification = Densification::none;
    else if (gaps > 0 && filled == gaps)
        rep.interior_densification = Densification::everywhere;
    else
        rep.interior_densification = Densification::partial;

    // exactly frozen interior over the last few levels (sorted sets compare
    // elementwise) pins the finite case down without any tolerance
    const int tail = 3;
    bool frozen = true;
    for (int n = levels - tail; n + 1 < levels; ++n) {
        const auto& a = interior[n].points();
        const auto& b = interior[n + 1].points();
        frozen = frozen && a.size() == b.size();
        for (std::size_t t = 0; frozen && t < a.size(); ++t)
            frozen = frozen && same_point(a[t], b[t]);
    }

    auto add = [&](OrderTypeTerm t, Confidence c, std::string why) {
        rep.verdicts.push_back({std::move(t), c, std::move(why)});
    };

    if (frozen) {
        add(fin((int)interior.back().size()), Confidence::oracle_grade,
            "interior support constant over the last " + std::to_string(tail) +
                " levels");
        return rep;
    }
    rep.left_growth = any_left ? GrowthSide::unbounded : GrowthSide::none;
    rep.right_growth = any_right ? GrowthSide::unbounded : GrowthSide::none;

    if (any_right && !any_left && !any_interior) {
        add(omega(), Confidence::heuristic, "new points only enter adjacent to y");
    } else if (any_left && !any_right && !any_interior) {
        add(omega_star(), Confidence::heuristic,
            "new points only enter adjacent to x");
    } else if (any_left && any_right && !any_interior) {
        add(zeta(), Confidence::heuristic,
            "growth at both ends with a frozen interior");
    } else if (rep.interior_densification == Densification::everywhere) {
        add(eta(), Confidence::heuristic,
            "every interior gap receives a new point");
    } else {
        std::vector<OrderTypeTerm> parts;
        if (any_left) parts.push_back(omega_star());
        if (any_interior) parts.push_back(eta());
        if (any_right) parts.push_back(omega());
        add(normalize(sum_of(parts)), Confidence::heuristic,
            "mixed growth pattern; composite guess from the active sides");
    }
    return rep;
}

std::optional<std::vector<Chain>> chain_family_from_grid(
    const SampleGrid& grid, const RefinementSchedule& source_sched, int xi,
    int yi) {
    ChainRelation rel = chain_related(grid, source_sched, xi, yi);
    if (!rel.related) return std::nullopt;
    std::vector<Chain> family;
    family.reserve(rel.per_level.size());
    for (auto& c : rel.per_level) family.push_back(std::move(*c));
    return family;
}

RefinementSchedule projection_targets(const RefinementSchedule& source,
                                      int shift) {
    if (shift < 1) throw std::invalid_argument("shift must be at least 1");
    if (source.depth() <= shift)
        throw std::invalid_argument("schedule too shallow for the source shift");
    RefinementSchedule t;
    t.epsilons.assign(source.epsilons.begin(),
                      source.epsilons.end() - shift);
    t.user_supplied = source.user_supplied;
    return t;
}

} // namespace chainspec
