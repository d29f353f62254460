#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chainspec/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

using namespace chainspec;

namespace {

const SystemDef& sys(const char* name) {
    const SystemDef* s = find_system(name);
    REQUIRE(s != nullptr);
    return *s;
}

Point P(const SystemDef& s, double v) { return Point{v, 0.0, s.space_tag}; }

bool has_note(const SpectrumReport& r, const std::string& needle) {
    for (const std::string& n : r.notes)
        if (n.find(needle) != std::string::npos) return true;
    return false;
}

const SpectrumEntry* entry_for(const SpectrumReport& r, const OrderTypeTerm& t) {
    for (const SpectrumEntry& e : r.entries)
        if (equal_normalized(e.term, t)) return &e;
    return nullptr;
}

Chain make_chain(const SystemDef& s, std::vector<Point> pts, double eps) {
    Chain c;
    c.sys = &s;
    c.epsilon = eps;
    c.points = std::move(pts);
    return c;
}

NestedFamily make_family(const SystemDef& s, std::vector<std::vector<Point>> levels,
                         double eps0) {
    NestedFamily nf;
    nf.x = levels.front().front();
    nf.y = levels.front().back();
    double eps = eps0;
    for (auto& pts : levels) {
        nf.chains.push_back(make_chain(s, std::move(pts), eps));
        eps /= 2;
    }
    // the consumers below never look at these flags; mark everything fine
    nf.nesting_ok.assign(nf.chains.size() - 1, 1);
    nf.acyclic_ok.assign(nf.chains.size(), 1);
    return nf;
}

} // namespace

// ---- finite ordinals --------------------------------------------------------

TEST_CASE("finite ordinals come from exact orbit hits only") {
    const SystemDef& rot8 = sys("rotation-eighth");
    const SystemDef& halving = sys("halving");
    const SystemDef& cascade = sys("cascade");

    const auto f = detect_finite(rot8, P(rot8, 0.0), P(rot8, 0.375));
    REQUIRE(f.has_value());
    CHECK(equal_normalized(*f, fin(2))); // f^3(0) = 3/8 exactly

    const auto f0 = detect_finite(rot8, P(rot8, 0.0), P(rot8, 0.125));
    REQUIRE(f0.has_value());
    CHECK(f0->count == 0); // empty interior: f(x) = y

    CHECK_FALSE(detect_finite(rot8, P(rot8, 0.0), P(rot8, 0.3)).has_value());

    // The float orbit of 1 under halving underflows onto 0 after ~1074 steps;
    // the landing step is positive and microscopic, so it is not a hit.
    CHECK_FALSE(detect_finite(halving, P(halving, 1.0), P(halving, 0.0), 2000)
                    .has_value());

    // Same saturation guard on the cascade branch map: 0.75 converges onto
    // 0.5 quadratically and lands bitwise within a few dozen steps.
    CHECK_FALSE(detect_finite(cascade, P(cascade, 0.75), P(cascade, 0.5))
                    .has_value());
    const auto fc = detect_finite(cascade, P(cascade, 0.75), P(cascade, 0.625));
    REQUIRE(fc.has_value());
    CHECK(fc->count == 0);

    // A genuinely fixed x reports Fin(0) against itself and nothing else.
    const SystemDef& ident = sys("identity-interval");
    const auto fi = detect_finite(ident, P(ident, 0.3), P(ident, 0.3));
    REQUIRE(fi.has_value());
    CHECK(fi->count == 0);
    CHECK_FALSE(detect_finite(ident, P(ident, 0.3), P(ident, 0.7)).has_value());

    CHECK_THROWS_AS(detect_finite(rot8, P(rot8, 0.0), P(rot8, 0.5), -1),
                    std::invalid_argument);
    CHECK_THROWS_AS(detect_finite(rot8, P(rot8, 0.0), P(rot8, 0.5), 4, -0.1),
                    std::invalid_argument);
}

TEST_CASE("orbit periodicity pairs finite ordinals into the period") {
    // On the exact 8-cycle of the eighth rotation, k steps one way and k'
    // the other way satisfy k + k' + 2 = 8.
    const SystemDef& rot8 = sys("rotation-eighth");
    for (int k = 0; k <= 6; ++k) {
        const Point y = P(rot8, (k + 1) / 8.0);
        const auto fwd = detect_finite(rot8, P(rot8, 0.0), y);
        const auto back = detect_finite(rot8, y, P(rot8, 0.0));
        REQUIRE(fwd.has_value());
        REQUIRE(back.has_value());
        CHECK(fwd->count == k);
        CHECK(fwd->count + back->count + 2 == 8);
    }
}

// ---- omega ------------------------------------------------------------------

TEST_CASE("recurrence without a hit is omega") {
    const SystemDef& halving = sys("halving");
    const OrbitProbe p =
        detect_omega(halving, default_schedule(1.0, 10), P(halving, 1.0),
                     P(halving, 0.0));
    CHECK(p.omega);
    CHECK_FALSE(p.orbit_hit);
    CHECK(p.limit_hit);
    CHECK_FALSE(p.inconclusive);

    const SystemDef& golden = sys("rotation-golden");
    const OrbitProbe q =
        detect_omega(golden, default_schedule(0.5, 10), P(golden, 0.1),
                     P(golden, 0.7));
    CHECK(q.omega);
    CHECK_FALSE(q.orbit_hit);

    // An exact orbit hit wins over recurrence.
    const SystemDef& rot8 = sys("rotation-eighth");
    const OrbitProbe r =
        detect_omega(rot8, default_schedule(0.5, 10), P(rot8, 0.0), P(rot8, 0.375));
    CHECK(r.orbit_hit);
    CHECK(r.hit_step == 3);
    CHECK_FALSE(r.omega);
    CHECK(r.limit_hit); // y lies on the cycle the orbit settles into

    CHECK_THROWS_AS(
        detect_omega(halving, default_schedule(1.0, 10), P(halving, 1.0),
                     P(halving, 0.0), 0),
        std::invalid_argument);
}

TEST_CASE("saturation onto a 2-cycle is recurrence, not a hit") {
    // The orbit of 0.3 lands bitwise on the exact float cycle {0.25, 0.75}.
    // Consecutive steps near the cycle are half-turn hops, so the landing is
    // only visible in the period-spaced gap; it must still read as omega.
    const SystemDef& att2 = sys("circle-attract-2");
    const OrbitProbe p =
        detect_omega(att2, default_schedule(0.5, 10), P(att2, 0.3), P(att2, 0.25));
    CHECK(p.cycle_length == 2);
    CHECK_FALSE(p.orbit_hit);
    CHECK(p.omega);
    CHECK(p.limit_hit);
}

TEST_CASE("omega survives a metric rescale") {
    const SystemDef& halving = sys("halving");
    const SystemDef scaled = with_metric_scale(halving, 7.0);
    const OrbitProbe p = detect_omega(scaled, default_schedule(scaled.diam, 10),
                                      P(scaled, 1.0), P(scaled, 0.0));
    CHECK(p.omega);
    CHECK_FALSE(p.orbit_hit);
}

// ---- attracting periodic orbits ----------------------------------------------

TEST_CASE("attracting fixed point yields the singleton omega block") {
    const SystemDef& att1 = sys("circle-attract-1");
    const SampleGrid grid = sample(att1, 0.01);
    const PeriodicSpectrum per = detect_periodic_attractor_spectrum(
        att1, grid, default_schedule(0.5, 12), P(att1, 0.3), P(att1, 0.5));
    REQUIRE(per.applicable);
    CHECK(per.period == 1);
    REQUIRE(per.terms.size() == 1);
    CHECK(equal_normalized(per.terms[0], omega()));
}

TEST_CASE("attracting 2-cycle yields omega and omega+1") {
    // Regression: the basin orbit saturates onto the exact float cycle; that
    // landing must not be mistaken for an orbit hit and refuse the theorem.
    const SystemDef& att2 = sys("circle-attract-2");
    const SampleGrid grid = sample(att2, 0.01);
    const PeriodicSpectrum per = detect_periodic_attractor_spectrum(
        att2, grid, default_schedule(0.5, 12), P(att2, 0.3), P(att2, 0.25));
    REQUIRE(per.applicable);
    CHECK(per.period == 2);
    REQUIRE(per.terms.size() == 2);
    CHECK(equal_normalized(per.terms[0], omega()));
    CHECK(equal_normalized(per.terms[1], sum_of({omega(), fin(1)})));
}

TEST_CASE("periodic detector refuses when the hypotheses fail") {
    const SystemDef& rot8 = sys("rotation-eighth");
    const SampleGrid g8 = sample(rot8, 1.0 / 64);
    const PeriodicSpectrum pr = detect_periodic_attractor_spectrum(
        rot8, g8, default_schedule(0.5, 12), P(rot8, 0.3), P(rot8, 0.375));
    CHECK_FALSE(pr.applicable);
    CHECK(pr.period == 8); // the period is real, the attraction is not
    CHECK(pr.diagnostic.find("does not converge") != std::string::npos);

    const SystemDef& ident = sys("identity-interval");
    const SampleGrid gi = sample(ident, 0.01);
    const PeriodicSpectrum pi = detect_periodic_attractor_spectrum(
        ident, gi, default_schedule(1.0, 9), P(ident, 0.3), P(ident, 0.7));
    CHECK_FALSE(pi.applicable);
    CHECK(pi.diagnostic.find("does not converge") != std::string::npos);

    // y on the orbit of x: the finite ordinal owns this pair instead.
    const SystemDef& att2 = sys("circle-attract-2");
    const SampleGrid g2 = sample(att2, 0.01);
    const PeriodicSpectrum po = detect_periodic_attractor_spectrum(
        att2, g2, default_schedule(0.5, 12), P(att2, 0.25), P(att2, 0.75));
    CHECK_FALSE(po.applicable);
    CHECK(po.diagnostic.find("orbit of x") != std::string::npos);

    CHECK_THROWS_AS(detect_periodic_attractor_spectrum(
                        att2, g2, default_schedule(0.5, 12), P(att2, 0.3),
                        P(att2, 0.25), 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(detect_periodic_attractor_spectrum(
                        att2, g2, default_schedule(0.5, 12), P(att2, 0.3),
                        P(att2, 0.25), 64, 0.0, 0),
                    std::invalid_argument);
}

TEST_CASE("periodic theorem transports through a circle conjugacy") {
    // The warp moves every point by an analytic displacement; the conjugate
    // system keeps its attracting fixed point at the warped 0.5, up to a few
    // ulp of inverse-warp rounding. The orbit tolerance absorbs that. The
    // basin orbit eventually stays within any positive tolerance of the fixed
    // point; the probe must read that as convergence, not as a visit to y,
    // or the theorem would refuse every attracting target.
    const SystemDef& att1 = sys("circle-attract-1");
    const SystemDef warped = make_circle_conjugate(att1, 0.3);
    const SampleGrid grid = sample(warped, 0.01);
    const Point wx = P(warped, circle_warp(0.3, 0.3));
    const Point wy = P(warped, circle_warp(0.5, 0.3));
    const PeriodicSpectrum per = detect_periodic_attractor_spectrum(
        warped, grid, default_schedule(0.5, 12), wx, wy, 64, 1e-9);
    REQUIRE(per.applicable);
    CHECK(per.period == 1);
    CHECK(equal_normalized(per.terms[0], omega()));
}

// ---- eta ---------------------------------------------------------------------

TEST_CASE("dense witness orbit certifies eta with a spliced family") {
    const SystemDef& golden = sys("rotation-golden");
    const SampleGrid grid = sample(golden, 0.01);
    const EtaProbe ep = detect_eta(golden, grid, default_schedule(0.5, 14),
                                   P(golden, 0.1), P(golden, 0.7));
    REQUIRE(ep.eta);
    CHECK(ep.confidence == Confidence::oracle_grade);
    CHECK(ep.note.find("spliced") != std::string::npos);
    REQUIRE(ep.witness_family.has_value());

    const NestedFamily& nf = *ep.witness_family;
    REQUIRE(nf.depth() == 6);
    CHECK(nf.all_nested());
    CHECK(nf.all_acyclic());
    const std::vector<std::size_t> sizes{3, 5, 10, 34, 256, 4225};
    for (int n = 0; n < nf.depth(); ++n)
        CHECK(nf.chains[n].points.size() == sizes[n]);
    // every spliced level is a valid chain at its own epsilon
    for (const Chain& c : nf.chains)
        CHECK(check_chain(golden, c.points, c.epsilon).ok);
}

TEST_CASE("identity systems carry eta without a witness") {
    const SystemDef& ident = sys("identity-interval");
    const SampleGrid grid = sample(ident, 0.005);
    const EtaProbe ep = detect_eta(ident, grid, default_schedule(1.0, 9),
                                   P(ident, 0.3), P(ident, 0.7));
    CHECK(ep.eta);
    CHECK(ep.confidence == Confidence::oracle_grade);
    CHECK(ep.note.find("identity system") != std::string::npos);
    CHECK_FALSE(ep.witness_family.has_value());
}

TEST_CASE("eta stays inconclusive without a density certificate") {
    const SystemDef& att2 = sys("circle-attract-2");
    const SampleGrid grid = sample(att2, 0.01);
    const EtaProbe ep = detect_eta(att2, grid, default_schedule(0.5, 12),
                                   P(att2, 0.3), P(att2, 0.25));
    CHECK_FALSE(ep.eta);
    CHECK(ep.confidence == Confidence::inconclusive);
    CHECK(ep.note.find("no transitive witness") != std::string::npos);
}

// ---- nonwandering check -------------------------------------------------------

TEST_CASE("zeta nonwandering check on grid-exact rotation points") {
    const SystemDef& rot8 = sys("rotation-eighth");
    const SampleGrid g8 = sample(rot8, 1.0 / 64);
    // 19/64 rotates onto 35/64 after two steps; both are grid values, so the
    // balls around x never empty out and every level finds the passage.
    const NonwanderingCheck ok = zeta_nonwandering_check(
        rot8, g8, default_schedule(0.5, 10), P(rot8, 19.0 / 64), P(rot8, 35.0 / 64),
        true);
    CHECK(ok.passes);
    CHECK(ok.first_failing_level == -1);
    CHECK_FALSE(ok.contradiction);

    // Off-grid base points fail once the ball radius drops below the snap
    // distance; that is a resolution artifact the caller must avoid.
    const NonwanderingCheck off = zeta_nonwandering_check(
        rot8, g8, default_schedule(0.5, 10), P(rot8, 0.3), P(rot8, 0.55), false);
    CHECK_FALSE(off.passes);
    CHECK(off.first_failing_level == 9);
    CHECK_FALSE(off.contradiction); // nothing was claimed

    const SystemDef& halving = sys("halving");
    const SampleGrid gh = sample(halving, 0.01);
    const NonwanderingCheck bad = zeta_nonwandering_check(
        halving, gh, default_schedule(1.0, 9), P(halving, 0.3), P(halving, 0.6),
        true);
    CHECK_FALSE(bad.passes);
    CHECK(bad.first_failing_level == 3);
    CHECK(bad.contradiction);
}

// ---- spectrum assembly ---------------------------------------------------------

TEST_CASE("spectrum: exact rotation pair reduces to one finite ordinal") {
    const SystemDef& rot8 = sys("rotation-eighth");
    const SampleGrid g8 = sample(rot8, 1.0 / 64);
    const SpectrumReport r = spectrum(rot8, g8, default_schedule(0.5, 10),
                                      P(rot8, 0.0), P(rot8, 0.375));
    CHECK(r.chain_related);
    CHECK_FALSE(r.conflict);
    CHECK_FALSE(r.zeta_contradiction);
    CHECK(r.prune_converged);
    REQUIRE(r.entries.size() == 1);
    CHECK(equal_normalized(r.entries[0].term, fin(2)));
    CHECK(r.entries[0].confidence == Confidence::oracle_grade);
    CHECK_FALSE(r.entries[0].empirical);
    // the pruned chains collapse onto the exact orbit and agree
    CHECK(has_note(r, "signature corroborates fin:2"));
}

TEST_CASE("spectrum: attracting fixed point pair is exactly omega") {
    const SystemDef& halving = sys("halving");
    const SampleGrid gh = sample(halving, 0.01);
    const SpectrumReport r = spectrum(halving, gh, default_schedule(1.0, 9),
                                      P(halving, 1.0), P(halving, 0.0));
    CHECK(r.chain_related);
    CHECK_FALSE(r.conflict);
    REQUIRE(r.entries.size() == 1);
    CHECK(equal_normalized(r.entries[0].term, omega()));
    CHECK(r.entries[0].confidence == Confidence::oracle_grade);
    // the pipeline froze at the grid scale; its finite reading is withheld
    CHECK(has_note(r, "froze at the grid floor"));
}

TEST_CASE("spectrum: identity pairs carry the dense type") {
    const SystemDef& ident = sys("identity-interval");
    const SampleGrid gi = sample(ident, 0.005);
    const RefinementSchedule sc = default_schedule(1.0, 9);

    const SpectrumReport self =
        spectrum(ident, gi, sc, P(ident, 0.3), P(ident, 0.3));
    CHECK(self.chain_related);
    CHECK_FALSE(self.conflict);
    CHECK(entry_for(self, fin(0)) != nullptr); // f(x) = x: the empty interior
    CHECK(entry_for(self, eta()) != nullptr);

    const SpectrumReport pair =
        spectrum(ident, gi, sc, P(ident, 0.3), P(ident, 0.7));
    CHECK(pair.chain_related);
    CHECK_FALSE(pair.conflict);
    REQUIRE(pair.entries.size() == 1);
    CHECK(equal_normalized(pair.entries[0].term, eta()));
    CHECK(pair.entries[0].confidence == Confidence::oracle_grade);
    CHECK(has_note(pair, "froze at the grid floor"));
}

TEST_CASE("spectrum: chain cut empties the report across components") {
    const SystemDef& isplit = sys("identity-split");
    const SampleGrid gs = sample(isplit, 0.02);
    const SpectrumReport r = spectrum(isplit, gs, default_schedule(3.0, 9),
                                      P(isplit, 0.5), P(isplit, 2.5));
    CHECK_FALSE(r.chain_related);
    CHECK(r.entries.empty());
    CHECK(has_note(r, "not chain related"));
}

TEST_CASE("spectrum: basin pair of a 2-cycle gets the full omega block") {
    const SystemDef& att2 = sys("circle-attract-2");
    const SampleGrid ga = sample(att2, 0.01);
    const SpectrumReport r = spectrum(att2, ga, default_schedule(0.5, 8),
                                      P(att2, 0.3), P(att2, 0.25));
    CHECK(r.chain_related);
    CHECK_FALSE(r.conflict);
    REQUIRE(r.entries.size() == 2);
    CHECK(entry_for(r, omega()) != nullptr);
    CHECK(entry_for(r, sum_of({omega(), fin(1)})) != nullptr);
    for (const SpectrumEntry& e : r.entries)
        CHECK(e.confidence == Confidence::oracle_grade);
}

TEST_CASE("spectrum: transitive rotation pair carries omega and eta") {
    const SystemDef& golden = sys("rotation-golden");
    const SampleGrid gg = sample(golden, 0.005);
    const SpectrumReport r = spectrum(golden, gg, default_schedule(0.5, 8),
                                      P(golden, 0.1), P(golden, 0.7));
    CHECK(r.chain_related);
    CHECK_FALSE(r.conflict);
    const SpectrumEntry* w = entry_for(r, omega());
    const SpectrumEntry* e = entry_for(r, eta());
    REQUIRE(w != nullptr);
    REQUIRE(e != nullptr);
    CHECK(w->confidence == Confidence::oracle_grade);
    CHECK(e->confidence == Confidence::oracle_grade);
}

TEST_CASE("spectrum: cascade pair stays honest when no theorem applies") {
    // The descending ladder pair (1, 0) matches no single-theorem shape; the
    // report must stay empty rather than promote the frozen grid reading.
    const SystemDef& cascade = sys("cascade");
    const SampleGrid gc = sample(cascade, 0.005);
    const SpectrumReport r = spectrum(cascade, gc, default_schedule(1.0, 8),
                                      P(cascade, 1.0), P(cascade, 0.0));
    CHECK(r.chain_related);
    CHECK_FALSE(r.conflict);
    CHECK(r.entries.empty());
    CHECK(has_note(r, "froze at the grid floor"));
}

TEST_CASE("spectrum validates its options") {
    const SystemDef& halving = sys("halving");
    const SampleGrid gh = sample(halving, 0.05);
    const RefinementSchedule sc = default_schedule(1.0, 6);
    SpectrumOptions bad;
    bad.finite_kmax = -1;
    CHECK_THROWS_AS(spectrum(halving, gh, sc, P(halving, 1.0), P(halving, 0.0), bad),
                    std::invalid_argument);
    bad = {};
    bad.orbit_budget = 0;
    CHECK_THROWS_AS(spectrum(halving, gh, sc, P(halving, 1.0), P(halving, 0.0), bad),
                    std::invalid_argument);
    bad = {};
    bad.source_shift = 0;
    CHECK_THROWS_AS(spectrum(halving, gh, sc, P(halving, 1.0), P(halving, 0.0), bad),
                    std::invalid_argument);
    bad = {};
    bad.stability_window = 1;
    CHECK_THROWS_AS(spectrum(halving, gh, sc, P(halving, 1.0), P(halving, 0.0), bad),
                    std::invalid_argument);
}

// ---- xi classes -----------------------------------------------------------------

TEST_CASE("xi classes over the oracle detectors") {
    const SystemDef& rot8 = sys("rotation-eighth");
    const SampleGrid g8 = sample(rot8, 1.0 / 64);
    const std::vector<int> xc = xi_class(rot8, g8, default_schedule(0.5, 10),
                                         fin(1), P(rot8, 0.0));
    REQUIRE(xc.size() == 1);
    CHECK(g8.points[xc[0]].x == doctest::Approx(0.25).epsilon(1e-12));

    // The omega class of 1 under halving is the orbit closure minus the
    // orbit, read at grid scale: grid points within the finest ball of the
    // tail all qualify, an eps-resolution halo around the limit point 0.
    const SystemDef& halving = sys("halving");
    const SampleGrid gh = sample(halving, 0.01);
    const RefinementSchedule sc = default_schedule(1.0, 9);
    const std::vector<int> xo =
        xi_class(halving, gh, sc, omega(), P(halving, 1.0));
    REQUIRE_FALSE(xo.empty());
    const int zero_idx = gh.snap(P(halving, 0.0)).first;
    CHECK(std::find(xo.begin(), xo.end(), zero_idx) != xo.end());
    for (int j : xo) {
        double d = gh.points[j].x; // distance to the limit point 0
        for (int n = 0; n < 60; ++n)
            d = std::min(d, std::abs(gh.points[j].x - std::ldexp(1.0, -n)));
        CHECK(d < sc.finest());
    }

    // identity: every chain-related point carries eta, including x itself
    const SystemDef& ident = sys("identity-interval");
    const SampleGrid gi = sample(ident, 0.01);
    const std::vector<int> xe = xi_class(ident, gi, default_schedule(1.0, 8),
                                         eta(), P(ident, 0.3));
    CHECK((int)xe.size() == gi.size());
}

// ---- component blocks -------------------------------------------------------------

TEST_CASE("single-component identity support forms one block") {
    const SystemDef& ident = sys("identity-interval");
    const SampleGrid gi = sample(ident, 0.01);
    const RefinementSchedule sc = default_schedule(1.0, 8);
    const int xi = gi.snap(P(ident, 0.3)).first;
    const int yi = gi.snap(P(ident, 0.7)).first;

    const auto fam = chain_family_from_grid(gi, sc, xi, yi);
    REQUIRE(fam.has_value());
    const PruneResult pr =
        prune_loop(*fam, projection_targets(sc, 3), 16, gi.covering_radius);
    REQUIRE(pr.converged);
    const StabilizedOrder so = stabilized_order(pr.family, 3);
    REQUIRE(so.fully_decided());
    REQUIRE_FALSE(so.support.empty());

    const ChainComponentSet cc = chain_components(gi, sc);
    const ConleyDiagram cd = conley_order(cc, gi, sc);
    const BlockDecomposition bd = conley_blocks(so, gi, cc, cd);
    REQUIRE(bd.blocks.size() == 1);
    CHECK(bd.blocks[0].component >= 0);
    CHECK(bd.induced_order == std::vector<int>{bd.blocks[0].component});
}

TEST_CASE("interrupted and inverted component runs are structural errors") {
    const SystemDef& att1 = sys("circle-attract-1");
    const SampleGrid grid = sample(att1, 0.005);
    const RefinementSchedule sc = default_schedule(0.5, 8);
    const ChainComponentSet cc = chain_components(grid, sc);
    const ConleyDiagram cd = conley_order(cc, grid, sc);

    const int rcomp = cc.member_of[grid.snap(P(att1, 0.0)).first];
    const int acomp = cc.member_of[grid.snap(P(att1, 0.5)).first];
    REQUIRE(rcomp >= 0);
    REQUIRE(acomp >= 0);
    REQUIRE(rcomp != acomp);
    REQUIRE(cc.member_of[grid.snap(P(att1, 0.2)).first] == -1); // transit

    auto frozen = [&](std::vector<double> xs) {
        std::vector<Point> pts;
        pts.push_back(P(att1, 0.3)); // transit endpoints, excluded from support
        for (double v : xs) pts.push_back(P(att1, v));
        pts.push_back(P(att1, 0.31));
        return make_family(att1, {pts, pts, pts}, 0.25);
    };

    // The repeller run is interrupted by the attractor: 0.001 is a distinct
    // support value but snaps onto the repeller component's grid point.
    const NestedFamily split = frozen({0.0, 0.5, 0.001});
    const StabilizedOrder so1 = stabilized_order(split, 3);
    REQUIRE(so1.fully_decided());
    CHECK_THROWS_AS(conley_blocks(so1, grid, cc, cd), BlockStructureError);

    // attractor visited before the repeller: descends against the order
    const NestedFamily inverted = frozen({0.5, 0.2, 0.0});
    const StabilizedOrder so2 = stabilized_order(inverted, 3);
    REQUIRE(so2.fully_decided());
    try {
        conley_blocks(so2, grid, cc, cd);
        FAIL("expected a BlockStructureError");
    } catch (const BlockStructureError& e) {
        CHECK(e.a == acomp);
        CHECK(e.b == rcomp);
    }

    // a run in the right direction passes and orders R above A
    const NestedFamily fine = frozen({0.0, 0.2, 0.5});
    const BlockDecomposition bd = conley_blocks(stabilized_order(fine, 3), grid,
                                                cc, cd);
    REQUIRE(bd.induced_order.size() == 2);
    CHECK(bd.induced_order.front() == acomp);
    CHECK(bd.induced_order.back() == rcomp);

    ConleyDiagram wrong = cd;
    wrong.node_count += 1;
    CHECK_THROWS_AS(conley_blocks(stabilized_order(fine, 3), grid, cc, wrong),
                    std::invalid_argument);
}

// ---- attractor-repeller pairs ------------------------------------------------------

TEST_CASE("attractor census over the zoo") {
    auto check_pair = [](const AttractorRepellerPair& p, int grid_size) {
        std::vector<int> attr = p.attractor, inw = p.inward;
        std::sort(attr.begin(), attr.end());
        std::sort(inw.begin(), inw.end());
        CHECK(std::includes(inw.begin(), inw.end(), attr.begin(), attr.end()));
        std::vector<int> both = p.basin;
        both.insert(both.end(), p.repeller.begin(), p.repeller.end());
        std::sort(both.begin(), both.end());
        CHECK(std::adjacent_find(both.begin(), both.end()) == both.end());
        CHECK((int)both.size() == grid_size);
    };

    const SystemDef& halving = sys("halving");
    const SampleGrid gh = sample(halving, 0.01);
    const auto ph = find_attractors(gh, 0.05);
    REQUIRE(ph.size() == 1);
    CHECK(ph[0].attractor.size() == 10);
    CHECK(ph[0].repeller.empty()); // everything falls toward 0
    check_pair(ph[0], gh.size());

    const SystemDef& att1 = sys("circle-attract-1");
    const SampleGrid g1 = sample(att1, 0.005);
    const auto p1 = find_attractors(g1, 0.05);
    REQUIRE(p1.size() == 1);
    REQUIRE(p1[0].attractor.size() == 41);
    std::vector<int> a1 = p1[0].attractor;
    std::sort(a1.begin(), a1.end());
    CHECK(g1.points[a1.front()].x == doctest::Approx(0.4));
    CHECK(g1.points[a1.back()].x == doctest::Approx(0.6));
    CHECK(p1[0].basin.size() == 197);
    CHECK(p1[0].repeller.size() == 3); // the strip around the repelling 0
    check_pair(p1[0], g1.size());

    // the period-2 attractor needs a smaller eps: at 0.05 the thickened
    // strips swallow the repelling cycle {0, 0.5} and no proper trap remains
    const SystemDef& att2 = sys("circle-attract-2");
    const SampleGrid g2 = sample(att2, 0.005);
    CHECK(find_attractors(g2, 0.05).empty());
    const auto p2 = find_attractors(g2, 0.02);
    REQUIRE(p2.size() == 1);
    CHECK(p2[0].attractor.size() == 30);
    std::vector<int> a2 = p2[0].attractor;
    std::sort(a2.begin(), a2.end());
    CHECK(g2.points[a2.front()].x == doctest::Approx(0.215));
    CHECK(g2.points[a2.back()].x == doctest::Approx(0.785));
    CHECK(p2[0].basin.size() == 194);
    CHECK(p2[0].repeller.size() == 6);
    check_pair(p2[0], g2.size());

    // a rotation has no proper attractor
    const SystemDef& rot8 = sys("rotation-eighth");
    CHECK(find_attractors(sample(rot8, 1.0 / 64), 0.05).empty());

    // two components, two incomparable attractors, both kept
    const SystemDef& isplit = sys("identity-split");
    const SampleGrid gs = sample(isplit, 0.02);
    const auto ps = find_attractors(gs, 0.06);
    REQUIRE(ps.size() == 2);
    for (const AttractorRepellerPair& p : ps) {
        CHECK(p.attractor.size() == 51);
        CHECK(p.basin.size() == 51);
        CHECK(p.repeller.size() == 51);
        check_pair(p, gs.size());
    }

    CHECK_THROWS_AS(find_attractors(g1, 0.0), std::invalid_argument);
}

TEST_CASE("ar_decompose splits a decided order along the pair") {
    const SystemDef& att1 = sys("circle-attract-1");
    const SampleGrid grid = sample(att1, 0.005);
    const auto pairs = find_attractors(grid, 0.05);
    REQUIRE(pairs.size() == 1);
    const AttractorRepellerPair& pair = pairs[0];

    // exact float orbit from a transit seed; the iterates are off-grid, so
    // they land in the connecting segment of the decomposition
    const std::vector<Point> orb = orbit(att1, P(att1, 0.11), 24);

    auto family = [&](int grow_left, int grow_right) {
        std::vector<std::vector<Point>> levels;
        for (int l = 0; l < 4; ++l) {
            std::vector<Point> pts;
            pts.push_back(P(att1, 0.0)); // repelling fixed point, on the grid
            const int lo = 8 - grow_left * 2 * l;
            const int hi = 12 + grow_right * 2 * l;
            for (int t = lo; t <= hi; ++t) pts.push_back(orb[t]);
            pts.push_back(P(att1, 0.5)); // attracting fixed point
            levels.push_back(std::move(pts));
        }
        return make_family(att1, std::move(levels), 0.25);
    };

    const NestedFamily left_nf = family(1, 0);
    const ArDecomposition left =
        ar_decompose(att1, grid, left_nf, stabilized_order(left_nf, 3), pair);
    CHECK(equal_normalized(left.middle, omega_star()));
    CHECK(left.s_prime.size() == 11); // orbit steps 2..12
    CHECK(left.s_r.empty());          // endpoints are not support members
    CHECK(left.s_a.empty());
    REQUIRE_FALSE(left.beta.verdicts.empty());
    CHECK(equal_normalized(left.beta.verdicts[0].term, fin(0)));
    CHECK(equal_normalized(left.beta_prime.verdicts[0].term, fin(0)));

    const NestedFamily both_nf = family(1, 1);
    const ArDecomposition both =
        ar_decompose(att1, grid, both_nf, stabilized_order(both_nf, 3), pair);
    CHECK(equal_normalized(both.middle, zeta()));

    // a middle value that is not an iterate breaks the exact-orbit check
    NestedFamily broken = family(1, 0);
    for (Chain& c : broken.chains)
        c.points[c.points.size() - 3] = P(att1, 0.493);
    CHECK_THROWS_AS(
        ar_decompose(att1, grid, broken, stabilized_order(broken, 3), pair),
        DecompositionError);

    // x must sit in the repeller, y in the attractor
    NestedFamily off = family(1, 0);
    for (Chain& c : off.chains) c.points.front() = P(att1, 0.2);
    off.x = P(att1, 0.2);
    CHECK_THROWS_AS(ar_decompose(att1, grid, off, stabilized_order(off, 3), pair),
                    std::invalid_argument);

    // connecting points may not reappear once the attractor side started
    REQUIRE(grid.snap(P(att1, 0.47)).second < 1e-12);
    std::vector<Point> tangled{P(att1, 0.0), orb[8], P(att1, 0.47), orb[13],
                               P(att1, 0.5)};
    const NestedFamily tnf = make_family(att1, {tangled, tangled, tangled}, 0.25);
    CHECK_THROWS_AS(ar_decompose(att1, grid, tnf, stabilized_order(tnf, 3), pair),
                    DecompositionError);
}

// ---- prolongation ---------------------------------------------------------------

TEST_CASE("prolongation climbs the cascade ladder at the second stage") {
    const SystemDef& cascade = sys("cascade");
    const SampleGrid gc = sample(cascade, 0.005);
    const RefinementSchedule sc = default_schedule(1.0, 8);
    const ProlongationTable pt = prolongation(gc, sc, P(cascade, 1.0), 3);

    REQUIRE(pt.levels.size() == 3);
    const int zero_idx = gc.snap(P(cascade, 0.0)).first;

    // the first stage is the orbit closure from the ball around 1: the top
    // branch only, nothing below its fixed point 1/2
    CHECK(pt.levels[0].size() == 78);
    CHECK(gc.points[pt.levels[0].front()].x == doctest::Approx(0.485));
    CHECK(std::find(pt.levels[0].begin(), pt.levels[0].end(), zero_idx) ==
          pt.levels[0].end());

    // the second stage composes the relation through every branch at once
    CHECK((int)pt.levels[1].size() == gc.size());
    CHECK(std::find(pt.levels[1].begin(), pt.levels[1].end(), zero_idx) !=
          pt.levels[1].end());
    CHECK(pt.levels[2] == pt.levels[1]);

    for (std::size_t a = 0; a + 1 < pt.levels.size(); ++a)
        CHECK(std::includes(pt.levels[a + 1].begin(), pt.levels[a + 1].end(),
                            pt.levels[a].begin(), pt.levels[a].end()));
    for (bool lb : pt.lower_bound) CHECK_FALSE(lb);

    // a starved composition budget truncates and says so
    const ProlongationTable cut = prolongation(gc, sc, P(cascade, 1.0), 3, 1);
    CHECK(cut.lower_bound[1]);
    CHECK(cut.levels[1].size() == 107);
    CHECK(cut.levels[1].size() <= pt.levels[1].size());

    CHECK_THROWS_AS(prolongation(gc, sc, P(cascade, 1.0), 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(prolongation(gc, sc, P(cascade, 1.0), 3, 0),
                    std::invalid_argument);
}

TEST_CASE("prolongation of an identity point never grows") {
    const SystemDef& ident = sys("identity-interval");
    const SampleGrid gi = sample(ident, 0.01);
    const ProlongationTable pt =
        prolongation(gi, default_schedule(1.0, 12), P(ident, 0.5), 3);
    const int self = gi.snap(P(ident, 0.5)).first;
    for (const auto& lvl : pt.levels) {
        REQUIRE(lvl.size() == 1);
        CHECK(lvl[0] == self);
    }
}

TEST_CASE("two-interval prolongation leaks across the junction at grid scale") {
    // Mathematically the second stage reaches 0 only as a limit and cannot
    // restart from it, so -1 enters one stage later. On a sampled grid the
    // ball around the near-zero stall points spans both signs as soon as eps
    // reaches the resolution, so -1 shows up a stage early. Frozen here as a
    // documented resolution artifact.
    const SystemDef& twoint = sys("two-interval");
    const SampleGrid gt = sample(twoint, 0.01);
    const ProlongationTable pt =
        prolongation(gt, default_schedule(2.0, 8), P(twoint, 1.0), 3);
    const int neg_idx = gt.snap(P(twoint, -1.0)).first;
    const int zero_idx = gt.snap(P(twoint, 0.0)).first;
    auto has = [](const std::vector<int>& v, int j) {
        return std::find(v.begin(), v.end(), j) != v.end();
    };
    CHECK(pt.levels[0].size() == 54);
    CHECK_FALSE(has(pt.levels[0], zero_idx));
    CHECK_FALSE(has(pt.levels[0], neg_idx));
    CHECK(has(pt.levels[1], zero_idx));
    CHECK(has(pt.levels[1], neg_idx)); // one stage before the true entry
}
