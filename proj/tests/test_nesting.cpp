#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chainspec/nesting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

using namespace chainspec;

namespace {

const SystemDef& sys(const char* name) {
    const SystemDef* s = find_system(name);
    REQUIRE(s != nullptr);
    return *s;
}

Chain make_chain(const SystemDef& s, std::vector<double> xs, double eps) {
    Chain c;
    c.sys = &s;
    c.epsilon = eps;
    for (double x : xs) c.points.push_back(Point{x, 0.0, s.space_tag});
    return c;
}

std::vector<double> chain_xs(const Chain& c) {
    std::vector<double> xs;
    for (const Point& p : c.points) xs.push_back(p.x);
    return xs;
}

// C_k walks the exact orbit of 1 down to 2^-(k+2) and closes with a jump to
// the fixed point; quality is the size of that last jump, 2^-(k+3).
std::vector<Chain> halving_family(const SystemDef& s, int count) {
    std::vector<Chain> fam;
    for (int k = 1; k <= count; ++k) {
        std::vector<double> xs;
        for (int j = 0; j <= k + 2; ++j) xs.push_back(std::ldexp(1.0, -j));
        xs.push_back(0.0);
        fam.push_back(make_chain(s, std::move(xs), std::ldexp(1.0, -(k + 2))));
    }
    return fam;
}

// Orbit prefix plus endpoint, matching what the projection must rebuild.
std::vector<double> halving_level(int n) {
    if (n == 1) return {1.0, 0.0};
    std::vector<double> xs;
    for (int j = 0; j <= 2 * n - 1; ++j) xs.push_back(std::ldexp(1.0, -j));
    xs.push_back(0.0);
    return xs;
}

NestedFamily synth(const SystemDef& s,
                   const std::vector<std::vector<double>>& levels) {
    NestedFamily nf;
    double eps = 4.0 * s.diam;
    for (const auto& xs : levels) {
        eps /= 2.0;
        nf.chains.push_back(make_chain(s, xs, eps));
    }
    nf.x = nf.chains.front().points.front();
    nf.y = nf.chains.front().points.back();
    return nf;
}

int interior_pos(const std::vector<Point>& pts, const Point& p) {
    for (int i = 1; i + 1 < (int)pts.size(); ++i)
        if (same_point(pts[i], p)) return i;
    return -1;
}

// The stabilized-order contract evaluated directly from the definitions.
PairOrder naive_pair(const NestedFamily& nf, const Point& u, const Point& v,
                     int window) {
    if (interior_pos(nf.chains.back().points, u) < 0 ||
        interior_pos(nf.chains.back().points, v) < 0)
        return PairOrder::unstable;
    std::vector<std::pair<int, int>> occ;
    for (int n = nf.depth() - 1; n >= 0 && (int)occ.size() < window; --n) {
        const int a = interior_pos(nf.chains[n].points, u);
        const int b = interior_pos(nf.chains[n].points, v);
        if (a >= 0 && b >= 0) occ.push_back({a, b});
    }
    bool before = !occ.empty(), after = !occ.empty();
    for (auto [a, b] : occ) {
        before = before && a < b;
        after = after && a > b;
    }
    if (before) return PairOrder::before;
    if (after) return PairOrder::after;
    return PairOrder::unstable;
}

// All acyclic eps-chains between two grid indices, by exhaustive DFS.
void simple_paths(const std::vector<std::vector<int>>& out, int at, int to,
                  std::vector<int>& path, std::vector<char>& used,
                  std::vector<std::vector<int>>& found) {
    if (at == to && path.size() > 1) {
        found.push_back(path);
        return;
    }
    for (int w : out[at]) {
        if (used[w]) continue;
        used[w] = 1;
        path.push_back(w);
        simple_paths(out, w, to, path, used, found);
        path.pop_back();
        used[w] = 0;
    }
}

std::vector<std::vector<int>> all_chains(const SampleGrid& g, double eps,
                                         int from, int to) {
    std::vector<std::vector<int>> out(g.size());
    for (int i = 0; i < g.size(); ++i)
        for (int j = 0; j < g.size(); ++j)
            if (distance(g.metric, g.images[i], g.points[j]) < eps)
                out[i].push_back(j);
    std::vector<std::vector<int>> found;
    std::vector<int> path{from};
    std::vector<char> used(g.size(), 0);
    used[from] = 1;
    simple_paths(out, from, to, path, used, found);
    return found;
}

} // namespace

TEST_CASE("two-point seed grows into the halving orbit, two points a level") {
    const SystemDef& s = sys("halving");
    const auto fam = halving_family(s, 9);
    const auto sched = default_schedule(s.diam, 5); // 2, 1, 0.5, 0.25, 0.125

    const ProjectionResult r = hausdorff_project(fam, sched);
    REQUIRE(r.family.depth() == 5);
    for (int n = 0; n < 5; ++n) {
        CHECK(chain_xs(r.family.chains[n]) == halving_level(n + 1));
        CHECK(r.family.chains[n].epsilon == sched.epsilons[n]);
    }
    CHECK(r.family.all_nested());
    CHECK(r.family.all_acyclic());

    // each level needs a source 2 levels deeper than the last one used
    CHECK(r.stats.source_index == std::vector<int>{0, 2, 4, 6});
    CHECK(r.stats.collapsed_duplicates == 0);

    // limit is the deepest input; residual is the single new point's gap
    CHECK(r.limit.points.size() == 13);
    CHECK(r.limit.hausdorff_residual == std::ldexp(1.0, -11));

    // distance from level support to the limit halves twice per level
    double prev = 1e9;
    for (const Chain& c : r.family.chains) {
        const double d =
            hausdorff_distance(s.metric, c.points, r.limit.points.points());
        CHECK(d <= prev);
        prev = d;
    }
    CHECK(prev == std::ldexp(1.0, -10));
}

TEST_CASE("halving family: order, signature, and the invariance identity") {
    const SystemDef& s = sys("halving");
    const auto fam = halving_family(s, 9);
    const ProjectionResult r = hausdorff_project(fam, default_schedule(s.diam, 5));

    const StabilizedOrder so = stabilized_order(r.family, 3);
    CHECK(so.fully_decided());
    const auto seq = so.decided_sequence();
    REQUIRE(seq.size() == 9);
    for (int t = 0; t < 9; ++t) CHECK(seq[t].x == std::ldexp(1.0, -(t + 1)));

    // the decided order refines every windowed first-occurrence order
    const auto& sp = so.support.points();
    for (int n = 2; n < r.family.depth(); ++n) {
        const auto foo = first_occurrence_order(r.family.chains[n]);
        for (int i = 0; i < (int)sp.size(); ++i)
            for (int j = i + 1; j < (int)sp.size(); ++j) {
                const int a = foo.rank_of(sp[i]);
                const int b = foo.rank_of(sp[j]);
                if (a < 0 || b < 0) continue;
                if (so.at(i, j) == PairOrder::before) CHECK(a < b);
                if (so.at(i, j) == PairOrder::after) CHECK(a > b);
            }
    }

    const SignatureReport rep = detect_signature(r.family, so);
    REQUIRE(rep.verdicts.size() == 1);
    CHECK(equal_normalized(rep.verdicts[0].term, omega()));
    CHECK(rep.verdicts[0].confidence == Confidence::heuristic);
    CHECK(rep.left_growth == GrowthSide::none);
    CHECK(rep.right_growth == GrowthSide::unbounded);
    CHECK(rep.interior_densification == Densification::none);
    CHECK(rep.decided_size_trend == std::vector<int>{0, 3, 5, 7, 9});
    CHECK_FALSE(rep.inconclusive);

    const NestingCertificate cert = verify_ordinately_nested(r.family);
    CHECK(cert.pass);
    CHECK(cert.order_compatible);
    CHECK(cert.violating_level == -1);
    CHECK_FALSE(cert.flipping_pair.has_value());

    // f(L) u {x} vs L u {f(y)}: one fresh orbit point deep down
    const Point x{1.0, 0.0, s.space_tag};
    const Point y{0.0, 0.0, s.space_tag};
    const InvarianceReport good =
        limit_support_check(r.limit, s, x, y, std::ldexp(1.0, -11));
    CHECK(good.pass);
    CHECK(good.dist == std::ldexp(1.0, -12));
    CHECK_FALSE(limit_support_check(r.limit, s, x, y, std::ldexp(1.0, -13)).pass);
}

TEST_CASE("probed continuity radius reproduces the analytic run") {
    const SystemDef& lip = sys("halving");
    SystemDef probed = lip;
    probed.lipschitz.reset();

    const auto fam_a = halving_family(lip, 9);
    const auto fam_b = halving_family(probed, 9);
    const auto sched = default_schedule(1.0, 5);
    const ProjectionResult a = hausdorff_project(fam_a, sched);
    const ProjectionResult b = hausdorff_project(fam_b, sched);
    REQUIRE(a.family.depth() == b.family.depth());
    for (int n = 0; n < a.family.depth(); ++n)
        CHECK(chain_xs(a.family.chains[n]) == chain_xs(b.family.chains[n]));
}

TEST_CASE("a repeated identity chain is a fixed point of the projection") {
    const SystemDef& s = sys("identity-interval");
    std::vector<double> xs;
    for (int j = 0; j <= 16; ++j) xs.push_back(j / 16.0);
    const std::vector<Chain> fam(3, make_chain(s, xs, 0.125));

    const ProjectionResult r = hausdorff_project(fam, default_schedule(1.0, 4));
    REQUIRE(r.family.depth() == 4);
    CHECK(r.family.chains[0].points.size() == 2);
    for (int n = 1; n < 4; ++n) CHECK(chain_xs(r.family.chains[n]) == xs);
    CHECK(r.family.all_nested());
    CHECK(r.family.all_acyclic());
    CHECK(r.limit.hausdorff_residual == 0.0);

    const StabilizedOrder so = stabilized_order(r.family, 3);
    const SignatureReport rep = detect_signature(r.family, so);
    REQUIRE(rep.verdicts.size() == 1);
    CHECK(equal_normalized(rep.verdicts[0].term, fin(15)));
    CHECK(rep.verdicts[0].confidence == Confidence::oracle_grade);
    CHECK(rep.decided_size_trend == std::vector<int>{0, 15, 15, 15});
    CHECK(verify_ordinately_nested(r.family).pass);
}

TEST_CASE("family coarser than the requested depth exhausts the schedule") {
    const SystemDef& s = sys("identity-interval");
    const std::vector<Chain> fam{make_chain(s, {0.0, 0.3, 0.7, 1.0}, 0.5)};
    const ProjectionResult shallow =
        hausdorff_project(fam, default_schedule(1.0, 1));
    CHECK(shallow.family.depth() == 1);
    CHECK_THROWS_AS(hausdorff_project(fam, default_schedule(1.0, 2)),
                    ScheduleExhausted);
}

TEST_CASE("comb: rung bottleneck stops the construction mid-schedule") {
    const SystemDef& s = sys("comb");
    const SampleGrid grid = sample(s, 0.05);
    const auto [xi, dx] = grid.snap(Point{0.0, 0.0, s.space_tag});
    const auto [yi, dy] = grid.snap(Point{0.0, 1.0, s.space_tag});
    REQUIRE(dx < 1e-12);
    REQUIRE(dy < 1e-12);

    // per-level witnesses exist down to eps_7 > 1/7, and no further
    const auto fam = chain_family_from_grid(grid, default_schedule(s.diam, 7),
                                            xi, yi);
    REQUIRE(fam.has_value());
    REQUIRE(fam->size() == 7);
    CHECK_FALSE(chain_family_from_grid(grid, default_schedule(s.diam, 8), xi, yi)
                    .has_value());

    const ProjectionResult r =
        hausdorff_project(*fam, default_schedule(s.diam, 5));
    CHECK(r.family.all_nested());
    CHECK(r.family.all_acyclic());
    CHECK(r.stats.source_index == std::vector<int>{6, 6, 6, 6});

    // any route from (0,0) to (0,1) climbs a rung column, so every source
    // has a step of at least 1/7; level 6 would need better than eps_5/6
    CHECK_THROWS_AS(hausdorff_project(*fam, default_schedule(s.diam, 8)),
                    ScheduleExhausted);
}

TEST_CASE("pruning cuts a reconstructed loop and reconverges in two rounds") {
    const SystemDef& s = sys("circle-attract-2");
    const Chain loop = make_chain(s, {0.25, 0.75, 0.25, 0.75, 0.3}, 0.1);
    const auto sched = default_schedule(s.diam, 3); // 1, 0.5, 0.25

    const PruneResult pr = prune_loop({loop}, sched, 16, 1e-9);
    CHECK(pr.converged);
    CHECK(pr.rounds == 2);
    CHECK(pr.removed_per_round == std::vector<int>{4, 0});
    REQUIRE(pr.residual_per_round.size() == 2);
    CHECK(pr.residual_per_round[1] == 0.0);
    CHECK(pr.family.all_acyclic());
    CHECK(pr.family.all_nested());
    CHECK(chain_xs(pr.family.chains[2]) == std::vector<double>{0.25, 0.75, 0.3});
    CHECK(pr.limit.points.size() == 3);
    REQUIRE(pr.limit_history.size() == 2);
    CHECK(pr.limit_history[1].subset_of(pr.limit_history[0]));

    // a finished prune satisfies the full certificate
    const NestingCertificate cert = verify_ordinately_nested(pr.family);
    CHECK(cert.pass);

    // with no budget to re-project, the same input is flagged unconverged
    const PruneResult once = prune_loop({loop}, sched, 1, 1e-9);
    CHECK_FALSE(once.converged);
    CHECK(once.rounds == 1);
    CHECK(once.family.all_acyclic());
    CHECK(once.removed_per_round == std::vector<int>{4});
}

TEST_CASE("pruning an excursion shrinks the limit and rebuilds on it") {
    const SystemDef& s = sys("identity-interval");
    const Chain c =
        make_chain(s, {0.0, 0.05, 0.1, 0.15, 0.2, 0.15, 0.1}, 0.1);
    const PruneResult pr = prune_loop({c}, default_schedule(1.0, 4), 16, 1e-9);

    CHECK(pr.converged);
    CHECK(pr.rounds == 2);
    CHECK(pr.removed_per_round == std::vector<int>{12, 0});
    CHECK(pr.residual_per_round == std::vector<double>{0.1, 0.0});
    CHECK(pr.limit.points.size() == 3);
    for (int n = 1; n < 4; ++n)
        CHECK(chain_xs(pr.family.chains[n]) ==
              std::vector<double>{0.0, 0.05, 0.1});

    // the discarded excursion points never re-enter later limits
    const Point far{0.2, 0.0, s.space_tag};
    for (const FiniteSet& ls : pr.limit_history) CHECK_FALSE(ls.contains(far));
}

TEST_CASE("synthetic growth patterns map to the expected signatures") {
    const SystemDef& s = sys("identity-interval");

    SUBCASE("growth at both ends, frozen middle") {
        const NestedFamily nf = synth(
            s, {{0, 1},
                {0, 0.25, 0.75, 1},
                {0, 0.125, 0.25, 0.75, 0.875, 1},
                {0, 0.0625, 0.125, 0.25, 0.75, 0.875, 0.9375, 1},
                {0, 0.03125, 0.0625, 0.125, 0.25, 0.75, 0.875, 0.9375, 0.96875,
                 1}});
        const StabilizedOrder so = stabilized_order(nf, 3);
        CHECK(so.fully_decided());
        const SignatureReport rep = detect_signature(nf, so);
        REQUIRE(rep.verdicts.size() == 1);
        CHECK(equal_normalized(rep.verdicts[0].term, zeta()));
        CHECK(rep.left_growth == GrowthSide::unbounded);
        CHECK(rep.right_growth == GrowthSide::unbounded);
        CHECK(rep.interior_densification == Densification::none);
        CHECK(rep.decided_size_trend == std::vector<int>{0, 2, 4, 6, 8});
    }

    SUBCASE("growth toward x only") {
        const NestedFamily nf = synth(s, {{0, 1},
                                          {0, 0.5, 1},
                                          {0, 0.25, 0.5, 1},
                                          {0, 0.125, 0.25, 0.5, 1},
                                          {0, 0.0625, 0.125, 0.25, 0.5, 1}});
        const StabilizedOrder so = stabilized_order(nf, 3);
        const SignatureReport rep = detect_signature(nf, so);
        REQUIRE(rep.verdicts.size() == 1);
        CHECK(equal_normalized(rep.verdicts[0].term, omega_star()));
        CHECK(rep.left_growth == GrowthSide::unbounded);
        CHECK(rep.right_growth == GrowthSide::none);
    }

    SUBCASE("dyadic refinement densifies every gap") {
        std::vector<std::vector<double>> levels;
        for (int n = 1; n <= 6; ++n) {
            std::vector<double> xs;
            const int m = 1 << n;
            for (int i = 0; i <= m; ++i) xs.push_back((double)i / m);
            levels.push_back(std::move(xs));
        }
        const NestedFamily nf = synth(s, levels);
        const StabilizedOrder so = stabilized_order(nf, 3);
        CHECK(so.fully_decided());
        const auto seq = so.decided_sequence();
        REQUIRE(seq.size() == so.support.size());
        for (std::size_t t = 0; t < seq.size(); ++t)
            CHECK(same_point(seq[t], so.support.points()[t]));
        const SignatureReport rep = detect_signature(nf, so);
        REQUIRE(rep.verdicts.size() == 1);
        CHECK(equal_normalized(rep.verdicts[0].term, eta()));
        CHECK(rep.interior_densification == Densification::everywhere);
        CHECK(rep.decided_size_trend ==
              std::vector<int>{1, 3, 7, 15, 31, 63});
    }

    SUBCASE("partial densification plus right growth reads as a sum") {
        const NestedFamily nf = synth(
            s, {{0, 1},
                {0, 0.2, 0.4, 1},
                {0, 0.2, 0.3, 0.4, 0.6, 1},
                {0, 0.2, 0.25, 0.3, 0.4, 0.6, 0.7, 1},
                {0, 0.2, 0.22, 0.25, 0.3, 0.4, 0.6, 0.7, 0.8, 1}});
        const StabilizedOrder so = stabilized_order(nf, 3);
        const SignatureReport rep = detect_signature(nf, so);
        REQUIRE(rep.verdicts.size() == 1);
        CHECK(equal_normalized(rep.verdicts[0].term,
                               sum_of({eta(), omega()})));
        CHECK(rep.interior_densification == Densification::partial);
        CHECK(rep.left_growth == GrowthSide::none);
        CHECK(rep.right_growth == GrowthSide::unbounded);
    }

    SUBCASE("three levels are not enough to call anything") {
        const NestedFamily nf =
            synth(s, {{0, 1}, {0, 0.5, 1}, {0, 0.25, 0.5, 1}});
        const StabilizedOrder so = stabilized_order(nf, 2);
        const SignatureReport rep = detect_signature(nf, so);
        CHECK(rep.inconclusive);
        CHECK(rep.verdicts.empty());
        CHECK(rep.decided_size_trend.size() == 3);
    }
}

TEST_CASE("an alternating pair stays unstable but the size verdict is exact") {
    const SystemDef& s = sys("identity-interval");
    const NestedFamily nf = synth(s, {{0, 0.4, 0.6, 1},
                                      {0, 0.6, 0.4, 1},
                                      {0, 0.4, 0.6, 1},
                                      {0, 0.6, 0.4, 1}});
    const StabilizedOrder so = stabilized_order(nf, 3);
    CHECK_FALSE(so.fully_decided());
    CHECK(so.unstable_pairs() == std::vector<std::pair<int, int>>{{0, 1}});
    CHECK(so.at(0, 1) == PairOrder::unstable);
    CHECK_THROWS_AS(so.decided_sequence(), std::logic_error);

    const NestingCertificate cert = verify_ordinately_nested(nf, 3);
    CHECK_FALSE(cert.pass);
    CHECK_FALSE(cert.order_compatible);
    CHECK(cert.violating_level == -1); // nesting and acyclicity are fine
    REQUIRE(cert.flipping_pair.has_value());
    CHECK(cert.flipping_pair->first.x == 0.4);
    CHECK(cert.flipping_pair->second.x == 0.6);

    // frozen support of size 2, whatever the traversal order does
    const SignatureReport rep = detect_signature(nf, so);
    REQUIRE(rep.verdicts.size() == 1);
    CHECK(equal_normalized(rep.verdicts[0].term, fin(2)));
    CHECK(rep.verdicts[0].confidence == Confidence::oracle_grade);
    CHECK(rep.decided_size_trend == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("certificate pinpoints nesting and acyclicity failures") {
    const SystemDef& s = sys("identity-interval");

    const NestedFamily drops =
        synth(s, {{0, 0.5, 1}, {0, 0.4, 1}, {0, 0.4, 1}});
    const NestingCertificate c1 = verify_ordinately_nested(drops);
    CHECK_FALSE(c1.pass);
    CHECK(c1.nested_step == std::vector<char>{0, 1});
    CHECK(c1.violating_level == 0);

    const NestedFamily revisit =
        synth(s, {{0, 0.3, 1}, {0, 0.3, 0.6, 0.3, 1}});
    const NestingCertificate c2 = verify_ordinately_nested(revisit);
    CHECK_FALSE(c2.pass);
    CHECK(c2.acyclic_chain == std::vector<char>{1, 0});
    CHECK(c2.violating_level == 1);
    CHECK(c2.order_compatible);
}

TEST_CASE("first-occurrence ranks ignore repeats and endpoints") {
    const SystemDef& s = sys("identity-interval");
    const Chain c = make_chain(s, {0, 0.3, 0.5, 0.3, 0.7, 1}, 1.0);
    const FirstOccurrenceOrder foo = first_occurrence_order(c);
    REQUIRE(foo.rank.size() == 3);
    CHECK(foo.rank_of(Point{0.3, 0.0, s.space_tag}) == 1);
    CHECK(foo.rank_of(Point{0.5, 0.0, s.space_tag}) == 2);
    CHECK(foo.rank_of(Point{0.7, 0.0, s.space_tag}) == 4);
    CHECK(foo.rank_of(Point{0.9, 0.0, s.space_tag}) == -1);
    CHECK(foo.rank_of(Point{0.0, 0.0, s.space_tag}) == -1);

    // an endpoint value revisited in the interior does get a rank
    const Chain loop = make_chain(s, {0.2, 0.5, 0.2, 0.6, 0.2}, 1.0);
    CHECK(first_occurrence_order(loop).rank_of(Point{0.2, 0.0, s.space_tag}) ==
          2);

    Chain bare;
    bare.sys = &s;
    bare.points = {Point{0.5, 0.0, s.space_tag}};
    CHECK_THROWS_AS(first_occurrence_order(bare), std::invalid_argument);
}

TEST_CASE("exhaustive family enumeration agrees with the library checks") {
    const SystemDef& s = sys("identity-interval");
    const SampleGrid g = sample(s, 0.25);
    REQUIRE(g.size() == 5);
    const auto sched = default_schedule(1.0, 3); // 2, 1, 0.5

    const auto lvl1 = all_chains(g, sched.epsilons[0], 0, 4);
    const auto lvl2 = all_chains(g, sched.epsilons[1], 0, 4);
    const auto lvl3 = all_chains(g, sched.epsilons[2], 0, 4);
    REQUIRE(lvl3.size() == 1); // only the monotone walk survives eps 0.5

    auto to_points = [&](const std::vector<int>& idx, double eps) {
        std::vector<double> xs;
        for (int i : idx) xs.push_back(g.points[i].x);
        return make_chain(s, xs, eps);
    };
    auto support_subset = [&](const std::vector<int>& a,
                              const std::vector<int>& b) {
        for (int i : a)
            if (std::find(b.begin(), b.end(), i) == b.end()) return false;
        return true;
    };

    int families = 0, decided = 0, undecided = 0;
    for (const auto& c1 : lvl1)
        for (const auto& c2 : lvl2) {
            if (!support_subset(c1, c2)) continue;
            ++families;
            NestedFamily nf;
            nf.chains = {to_points(c1, sched.epsilons[0]),
                         to_points(c2, sched.epsilons[1]),
                         to_points(lvl3[0], sched.epsilons[2])};
            nf.x = nf.chains[0].points.front();
            nf.y = nf.chains[0].points.back();

            const NestingCertificate cert = verify_ordinately_nested(nf, 3);
            CHECK(cert.nested_step == std::vector<char>{1, 1});
            CHECK(cert.acyclic_chain == std::vector<char>{1, 1, 1});
            CHECK(cert.pass == cert.order_compatible);

            const StabilizedOrder so = stabilized_order(nf, 3);
            const auto& sp = so.support.points();
            for (int i = 0; i < (int)sp.size(); ++i)
                for (int j = i + 1; j < (int)sp.size(); ++j)
                    CHECK(so.at(i, j) == naive_pair(nf, sp[i], sp[j], 3));
            (so.fully_decided() ? decided : undecided) += 1;
        }
    CHECK(families >= 20);
    CHECK(decided > 0);
    CHECK(undecided > 0); // e.g. a level-1 chain walking 0.5 before 0.25
}

TEST_CASE("nesting entry points validate their inputs") {
    const SystemDef& s = sys("identity-interval");
    const SystemDef& other = sys("halving");
    const auto sched = default_schedule(1.0, 3);

    CHECK_THROWS_AS(hausdorff_project({}, sched), std::invalid_argument);
    CHECK_THROWS_AS(
        hausdorff_project({make_chain(s, {0, 0.5, 1}, 1.0),
                           make_chain(s, {0, 0.5, 0.9}, 1.0)},
                          sched),
        std::invalid_argument);
    CHECK_THROWS_AS(
        hausdorff_project({make_chain(s, {0, 1}, 1.0),
                           make_chain(other, {0, 1}, 1.0)},
                          sched),
        std::invalid_argument);
    CHECK_THROWS_AS(hausdorff_project({make_chain(s, {0.5}, 1.0)}, sched),
                    std::invalid_argument);

    // a schedule that outpaces the eps/2 guarantee is rejected up front
    CHECK_THROWS_AS(hausdorff_project({make_chain(s, {0, 0.5, 1}, 1.0)},
                                      user_schedule({2.0, 0.9})),
                    std::invalid_argument);
    // a seed pair that is not a chain at the coarsest level
    CHECK_THROWS_AS(hausdorff_project({make_chain(s, {0, 0.5, 1}, 1.0)},
                                      user_schedule({0.5, 0.25})),
                    std::invalid_argument);

    // near-coincident endpoints starve the separation bound
    const std::vector<Chain> tight{make_chain(s, {0.5, 0.5 + 1e-15}, 1.0)};
    CHECK_THROWS_AS(hausdorff_project(tight, default_schedule(1.0, 2)),
                    ProjectionStall);

    const std::vector<Chain> fam{make_chain(s, {0, 0.5, 1}, 1.0)};
    CHECK_THROWS_AS(prune_loop(fam, sched, 0, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(prune_loop(fam, sched, 4, 0.0), std::invalid_argument);

    NestedFamily shallow = synth(s, {{0, 0.5, 1}, {0, 0.25, 0.5, 1}});
    CHECK_THROWS_AS(stabilized_order(shallow, 1), std::invalid_argument);
    CHECK_THROWS_AS(stabilized_order(shallow, 3), std::invalid_argument);

    CHECK_THROWS_AS(projection_targets(sched, 0), std::invalid_argument);
    CHECK_THROWS_AS(projection_targets(sched, 3), std::invalid_argument);
    const RefinementSchedule deep = default_schedule(1.0, 8);
    const RefinementSchedule cut = projection_targets(deep);
    CHECK(cut.depth() == 5);
    CHECK(cut.epsilons == std::vector<double>(deep.epsilons.begin(),
                                              deep.epsilons.begin() + 5));
    const RefinementSchedule user =
        projection_targets(user_schedule({1.0, 0.5, 0.25, 0.2}), 1);
    CHECK(user.user_supplied);
    CHECK(user.epsilons == std::vector<double>{1.0, 0.5, 0.25});
}

TEST_CASE("invariance identity on hand-made limit sets") {
    const SystemDef& id = sys("identity-interval");
    LimitSupport fixed;
    for (double v : {0.0, 0.5, 1.0})
        fixed.points.insert(Point{v, 0.0, id.space_tag});
    const InvarianceReport ok = limit_support_check(
        fixed, id, Point{0.0, 0.0, id.space_tag}, Point{1.0, 0.0, id.space_tag},
        1e-12);
    CHECK(ok.pass);
    CHECK(ok.dist == 0.0);

    // {0, 1} is not halving-invariant: f pushes 1 to the uncovered middle
    const SystemDef& h = sys("halving");
    LimitSupport gap;
    gap.points.insert(Point{0.0, 0.0, h.space_tag});
    gap.points.insert(Point{1.0, 0.0, h.space_tag});
    const InvarianceReport bad = limit_support_check(
        gap, h, Point{1.0, 0.0, h.space_tag}, Point{0.0, 0.0, h.space_tag},
        0.1);
    CHECK_FALSE(bad.pass);
    CHECK(bad.dist == 0.5);
}
