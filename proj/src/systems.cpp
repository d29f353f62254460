#include "chainspec/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace chainspec {

namespace {

void ensure(bool ok, const char* what) {
    if (!ok) throw std::logic_error(std::string("system self-test failed: ") + what);
}

// f(x) = 2^{-k} (x - 2^k)^2 + 2^k on the branch [2^k, 2^{k+1}), k = floor(log2 x).
// Each branch is a parabola fixing both endpoints; interior points descend
// monotonically toward the left endpoint. Slope is in [0, 2] on every branch.
double cascade_map(double x) {
    if (x <= 0.0) return 0.0;
    int e = 0;
    std::frexp(x, &e); // x = m * 2^e with m in [0.5, 1), so x in [2^{e-1}, 2^e)
    const int k = e - 1;
    const double b = std::ldexp(1.0, k);
    const double t = x - b;
    return std::ldexp(t * t, -k) + b;
}

// Extension to [-1, 1]: the left half is the increasing parabola (x+1)^2 - 1
// fixing -1 and 0, with (-1, 0) descending toward -1.
double two_interval_map(double x) {
    if (x >= 0.0) return cascade_map(x);
    const double u = x + 1.0;
    return u * u - 1.0;
}

// theta + a sin(2 pi K theta) / (2 pi K) + 1/K: attracting period-K orbit at
// the odd half-multiples (2j+1)/(2K) (multiplier 1-a), repelling one at j/K
// (multiplier 1+a). Degree-one homeomorphism for |a| < 1.
double circle_attract_map(double theta, int K, double a) {
    const double twoPiK = 2.0 * std::numbers::pi * K;
    return theta + a * std::sin(twoPiK * theta) / twoPiK + 1.0 / K;
}

double golden_alpha() { return (std::sqrt(5.0) - 1.0) / 2.0; }

// ---- wandering-interval circle map -------------------------------------

DenjoyLayout build_denjoy_layout(int N, double c) {
    DenjoyLayout L;
    L.alpha = golden_alpha();
    L.truncation = N;

    const int M = 2 * N + 1;
    struct Slot { double pos; int n; double len; };
    std::vector<Slot> slots;
    slots.reserve(M);
    for (int n = -N; n <= N; ++n) {
        const double pos = canonical_circle(n * L.alpha);
        slots.push_back({pos, n, c / (1.0 + double(n) * double(n))});
    }
    std::sort(slots.begin(), slots.end(),
              [](const Slot& s, const Slot& t) { return s.pos < t.pos; });

    L.base_points.resize(M);
    L.orbit_index.resize(M);
    L.prefix.assign(M + 1, 0.0);
    std::vector<double> len(M);
    for (int i = 0; i < M; ++i) {
        L.base_points[i] = slots[i].pos;
        L.orbit_index[i] = slots[i].n;
        len[i] = slots[i].len;
        L.prefix[i + 1] = L.prefix[i] + len[i];
    }
    const double total = L.prefix[M];
    L.sigma = 1.0 / (1.0 + total);

    L.lo.resize(M);
    L.hi.resize(M);
    for (int i = 0; i < M; ++i) {
        L.lo[i] = L.sigma * (L.base_points[i] + L.prefix[i]);
        L.hi[i] = L.sigma * (L.base_points[i] + L.prefix[i + 1]);
    }

    std::vector<int> pos_of(M, -1); // orbit index n -> slot, shifted by +N
    for (int i = 0; i < M; ++i) pos_of[L.orbit_index[i] + N] = i;

    L.collapse_point = L.embed_gap(canonical_circle((N + 1) * L.alpha));

    // Piecewise-affine description: breakpoints at every interval endpoint,
    // images lifted to a nondecreasing degree-one circle map. Gaps between
    // inserted intervals interpolate affinely, which agrees with the induced
    // rotation everywhere except the single gap feeding the earliest backward
    // interval (that gap stretches across it, keeping the map continuous).
    L.node.reserve(2 * M);
    std::vector<double> raw;
    raw.reserve(2 * M);
    for (int i = 0; i < M; ++i) {
        const int n = L.orbit_index[i];
        double img_lo, img_hi;
        if (n < N) {
            const int j = pos_of[n + 1 + N];
            img_lo = L.lo[j];
            img_hi = L.hi[j];
        } else {
            img_lo = img_hi = L.collapse_point;
        }
        L.node.push_back(L.lo[i]);
        raw.push_back(img_lo);
        L.node.push_back(L.hi[i]);
        raw.push_back(img_hi);
    }
    L.node_image.resize(raw.size());
    L.node_image[0] = raw[0];
    for (std::size_t j = 1; j < raw.size(); ++j) {
        double v = raw[j];
        while (v < L.node_image[j - 1] - 1e-15) v += 1.0;
        L.node_image[j] = v;
    }
    ensure(L.node_image.back() - L.node_image.front() <= 1.0 + 1e-12,
           "wandering-interval map must have degree one");
    return L;
}

double denjoy_eval(const DenjoyLayout& L, double u) {
    u = canonical_circle(u);
    const auto& x = L.node;
    const auto& v = L.node_image;
    const std::size_t m = x.size();
    double x0, x1, v0, v1;
    if (u < x.front()) {
        // wrap piece, approached from below the first breakpoint
        x0 = x.back() - 1.0;
        v0 = v.back() - 1.0;
        x1 = x.front();
        v1 = v.front();
    } else {
        const std::size_t j =
            std::upper_bound(x.begin(), x.end(), u) - x.begin() - 1;
        if (j + 1 == m) {
            x0 = x.back();
            v0 = v.back();
            x1 = x.front() + 1.0;
            v1 = v.front() + 1.0;
        } else {
            x0 = x[j];
            v0 = v[j];
            x1 = x[j + 1];
            v1 = v[j + 1];
        }
    }
    const double t = (x1 > x0) ? (u - x0) / (x1 - x0) : 0.0;
    return canonical_circle(v0 + t * (v1 - v0));
}

double denjoy_max_slope(const DenjoyLayout& L) {
    double worst = 0.0;
    const std::size_t m = L.node.size();
    for (std::size_t j = 0; j + 1 <= m; ++j) {
        const double dx = (j + 1 < m) ? L.node[j + 1] - L.node[j]
                                      : L.node.front() + 1.0 - L.node.back();
        const double dv = (j + 1 < m) ? L.node_image[j + 1] - L.node_image[j]
                                      : L.node_image.front() + 1.0 - L.node_image.back();
        if (dx > 1e-15) worst = std::max(worst, dv / dx);
    }
    return worst;
}

// ---- comb space ---------------------------------------------------------

constexpr int kCombTeeth = 6;

std::vector<Point> comb_sample(double resolution, int tag) {
    std::vector<Point> pts;
    const double span = kCombTeeth;
    const int n = std::max(1, (int)std::ceil(span / resolution - 1e-12));
    const double h = span / n;
    for (int i = 0; i <= n; ++i) {
        const double t = (i == n) ? span : i * h;
        pts.push_back({t, 0.0, tag});
        pts.push_back({t, 1.0, tag});
    }
    for (int k = 1; k <= kCombTeeth; ++k)
        for (int r = 1; r <= k; ++r)
            pts.push_back({double(k), double(r) / (k + 1), tag});
    std::sort(pts.begin(), pts.end(), point_less);
    pts.erase(std::unique(pts.begin(), pts.end(), same_point), pts.end());
    return pts;
}

// ---- zoo assembly -------------------------------------------------------

std::function<Point(const Point&)> lift1d(double (*f)(double)) {
    return [f](const Point& p) { return Point{f(p.x), 0.0, p.space_tag}; };
}

std::vector<SystemDef> make_zoo() {
    std::vector<SystemDef> zoo;
    int tag = 1;

    {
        SystemDef s;
        s.name = "identity-interval";
        s.summary = "identity map on [0,1]";
        s.metric = {MetricKind::euclidean_interval, 1.0};
        s.space_tag = tag++;
        s.intervals = {{0.0, 1.0}};
        s.diam = 1.0;
        s.map = [](const Point& p) { return p; };
        s.lipschitz = 1.0;
        s.identity_map = true;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "identity-split";
        s.summary = "identity map on the disjoint union [0,1] u [2,3]";
        s.metric = {MetricKind::euclidean_interval, 1.0};
        s.space_tag = tag++;
        s.intervals = {{0.0, 1.0}, {2.0, 3.0}};
        s.diam = 3.0;
        s.map = [](const Point& p) { return p; };
        s.lipschitz = 1.0;
        s.identity_map = true;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "halving";
        s.summary = "x -> x/2 on [0,1], globally attracting fixed point 0";
        s.metric = {MetricKind::euclidean_interval, 1.0};
        s.space_tag = tag++;
        s.intervals = {{0.0, 1.0}};
        s.diam = 1.0;
        s.map = lift1d(+[](double x) { return x / 2.0; });
        s.lipschitz = 0.5;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "cascade";
        s.summary = "parabolic staircase on [0,1]: fixed points 2^-n and 0, "
                    "each branch descends to its left endpoint";
        s.metric = {MetricKind::euclidean_interval, 1.0};
        s.space_tag = tag++;
        s.intervals = {{0.0, 1.0}};
        s.diam = 1.0;
        s.map = lift1d(&cascade_map);
        s.lipschitz = 2.0;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "two-interval";
        s.summary = "cascade on [0,1] glued to the increasing parabola "
                    "(x+1)^2-1 on [-1,0]";
        s.metric = {MetricKind::euclidean_interval, 1.0};
        s.space_tag = tag++;
        s.intervals = {{-1.0, 1.0}};
        s.diam = 2.0;
        s.map = lift1d(&two_interval_map);
        s.lipschitz = 2.0;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "rotation-eighth";
        s.summary = "rigid circle rotation by 1/8 (exact in binary)";
        s.metric = {MetricKind::arc_circle, 1.0};
        s.space_tag = tag++;
        s.diam = 0.5;
        s.map = lift1d(+[](double x) { return x + 0.125; });
        s.lipschitz = 1.0;
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "rotation-golden";
        s.summary = "rigid circle rotation by the golden-ratio conjugate "
                    "(irrational, minimal)";
        s.metric = {MetricKind::arc_circle, 1.0};
        s.space_tag = tag++;
        s.diam = 0.5;
        s.map = lift1d(+[](double x) { return x + golden_alpha(); });
        s.lipschitz = 1.0;
        s.transitive_witness = Point{0.0, 0.0, s.space_tag};
        zoo.push_back(std::move(s));
    }
    for (int K = 1; K <= 3; ++K) {
        SystemDef s;
        s.name = "circle-attract-" + std::to_string(K);
        s.summary = "circle map with an attracting and a repelling period-" +
                    std::to_string(K) + " orbit";
        s.metric = {MetricKind::arc_circle, 1.0};
        s.space_tag = tag++;
        s.diam = 0.5;
        s.map = [K](const Point& p) {
            return Point{circle_attract_map(p.x, K, 0.5), 0.0, p.space_tag};
        };
        s.lipschitz = 1.5;
        zoo.push_back(std::move(s));
    }
    {
        const DenjoyLayout& L = denjoy_layout();
        SystemDef s;
        s.name = "denjoy";
        s.summary = "golden rotation with the orbit of 0 blown up into "
                    "wandering intervals (truncated at |n|<=" +
                    std::to_string(L.truncation) + ")";
        s.metric = {MetricKind::arc_circle, 1.0};
        s.space_tag = tag++;
        s.diam = 0.5;
        s.map = [&L](const Point& p) {
            return Point{denjoy_eval(L, p.x), 0.0, p.space_tag};
        };
        s.lipschitz = denjoy_max_slope(L);
        zoo.push_back(std::move(s));
    }
    {
        SystemDef s;
        s.name = "comb";
        s.summary = "identity on two horizontal segments plus isolated rungs "
                    "(k, h/(k+1)); rung isolation defeats nested-chain "
                    "construction below scale 1/(k+1)";
        s.metric = {MetricKind::euclidean_plane, 1.0};
        s.space_tag = tag++;
        s.diam = std::sqrt(kCombTeeth * double(kCombTeeth) + 1.0);
        s.map = [](const Point& p) { return p; };
        s.lipschitz = 1.0;
        s.identity_map = true;
        const int t = s.space_tag;
        s.plane_sampler = [t](double res) { return comb_sample(res, t); };
        zoo.push_back(std::move(s));
    }
    return zoo;
}

void self_test(const std::vector<SystemDef>& zoo) {
    auto sys = [&](const char* name) -> const SystemDef& {
        for (const auto& s : zoo)
            if (s.name == name) return s;
        throw std::logic_error("zoo misses a required system");
    };

    // identity really is the identity
    ensure(evaluate(sys("identity-interval"), {0.3, 0.0, 1}).x == 0.3,
           "identity fixes 0.3");

    // cascade: fixed points at 0 and 2^-n, strict descent inside branches
    const SystemDef& casc = sys("cascade");
    ensure(evaluate(casc, {0.0, 0.0, casc.space_tag}).x == 0.0, "cascade fixes 0");
    for (int n = 0; n <= 10; ++n) {
        const double p = std::ldexp(1.0, -n);
        ensure(evaluate(casc, {p, 0.0, casc.space_tag}).x == p,
               "cascade fixes 2^-n");
        const double mid = p * 0.75; // interior of the branch below 2^-n
        const double im = evaluate(casc, {mid, 0.0, casc.space_tag}).x;
        ensure(im < mid && im > p / 2.0, "cascade branches descend");
    }

    // two-interval: fixed points -1, 0, 1 and descent on (-1, 0)
    const SystemDef& two = sys("two-interval");
    for (double p : {-1.0, 0.0, 1.0})
        ensure(evaluate(two, {p, 0.0, two.space_tag}).x == p,
               "two-interval fixed points");
    ensure(evaluate(two, {-0.5, 0.0, two.space_tag}).x < -0.5,
           "left branch descends");

    // attracting/repelling orbits of the circle-attract family
    for (int K = 1; K <= 3; ++K) {
        const SystemDef& s = sys(("circle-attract-" + std::to_string(K)).c_str());
        Point a{1.0 / (2.0 * K), 0.0, s.space_tag};
        Point r{0.0, 0.0, s.space_tag};
        Point ai = a, ri = r;
        for (int i = 0; i < K; ++i) {
            ai = evaluate(s, ai);
            ri = evaluate(s, ri);
        }
        ensure(distance(s.metric, a, ai) < 1e-9, "attracting orbit is periodic");
        ensure(distance(s.metric, r, ri) < 1e-9, "repelling orbit is periodic");
        Point probe{1.0 / (2.0 * K) + 0.02, 0.0, s.space_tag};
        for (int i = 0; i < 60 * K; ++i) probe = evaluate(s, probe);
        double gap = 1.0;
        Point q = a;
        for (int i = 0; i < K; ++i) {
            gap = std::min(gap, distance(s.metric, probe, q));
            q = evaluate(s, q);
        }
        ensure(gap < 1e-6, "nearby points converge to the attracting orbit");
    }

    // wandering intervals: pairwise disjoint, mapped onto their successors
    const DenjoyLayout& L = denjoy_layout();
    const SystemDef& den = sys("denjoy");
    const int M = (int)L.lo.size();
    for (int i = 0; i + 1 < M; ++i)
        ensure(L.hi[i] < L.lo[i + 1] + 1e-15, "inserted intervals are disjoint");
    std::vector<int> pos_of(M, -1);
    for (int i = 0; i < M; ++i) pos_of[L.orbit_index[i] + L.truncation] = i;
    for (int i = 0; i < M; ++i) {
        const int n = L.orbit_index[i];
        if (n == L.truncation) {
            const double img = evaluate(den, {L.lo[i], 0.0, den.space_tag}).x;
            ensure(std::abs(img - L.collapse_point) < 1e-12,
                   "last interval collapses to its image point");
            continue;
        }
        const int j = pos_of[n + 1 + L.truncation];
        const double img_lo = evaluate(den, {L.lo[i], 0.0, den.space_tag}).x;
        const double img_hi = evaluate(den, {L.hi[i], 0.0, den.space_tag}).x;
        ensure(std::abs(img_lo - L.lo[j]) < 1e-12 &&
                   std::abs(img_hi - L.hi[j]) < 1e-12,
               "interval maps onto its successor");
    }
}

} // namespace

const DenjoyLayout& denjoy_layout() {
    static const DenjoyLayout layout = build_denjoy_layout(24, 0.05);
    return layout;
}

double DenjoyLayout::embed_gap(double t) const {
    t = canonical_circle(t);
    const std::size_t c =
        std::upper_bound(base_points.begin(), base_points.end(), t) -
        base_points.begin();
    if (c > 0 && base_points[c - 1] == t)
        throw std::invalid_argument("embed_gap called on a blown-up orbit point");
    return sigma * (t + prefix[c]);
}

Point evaluate(const SystemDef& sys, const Point& p) {
    Point q = sys.map(p);
    q.space_tag = sys.space_tag;
    switch (sys.metric.kind) {
    case MetricKind::arc_circle:
        q.x = canonical_circle(q.x);
        q.y = 0.0;
        break;
    case MetricKind::euclidean_plane:
        break;
    default: {
        if (sys.intervals.empty()) break;
        q.y = 0.0;
        bool inside = false;
        for (const auto& iv : sys.intervals) {
            if (q.x >= iv.lo - 1e-9 && q.x <= iv.hi + 1e-9) {
                q.x = std::clamp(q.x, iv.lo, iv.hi);
                inside = true;
                break;
            }
        }
        if (!inside)
            throw std::domain_error("map left the domain of system " + sys.name);
        break;
    }
    }
    return q;
}

std::vector<Point> orbit(const SystemDef& sys, const Point& p, int n) {
    std::vector<Point> out;
    out.reserve(n + 1);
    Point q = p;
    q.space_tag = sys.space_tag;
    out.push_back(q);
    for (int i = 0; i < n; ++i) {
        q = evaluate(sys, q);
        out.push_back(q);
    }
    return out;
}

std::pair<int, double> SampleGrid::snap(const Point& p) const {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
        const double d = distance(metric, p, points[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, best_d};
}

SampleGrid sample(const SystemDef& sys, double resolution, int max_points) {
    if (resolution <= 0.0)
        throw std::invalid_argument("resolution must be positive");
    SampleGrid g;
    g.sys = &sys;
    g.metric = sys.metric;
    g.space_tag = sys.space_tag;
    g.resolution = resolution;

    if (sys.plane_sampler) {
        g.points = sys.plane_sampler(resolution);
        if ((int)g.points.size() > max_points)
            throw std::length_error("sample grid exceeds the point budget");
        g.component.assign(g.points.size(), 0);
        g.covering_radius = resolution / 2.0 * sys.metric.scale;
    } else if (sys.metric.kind == MetricKind::arc_circle) {
        const double nd = std::ceil(1.0 / resolution - 1e-12);
        if (nd > max_points)
            throw std::length_error("sample grid exceeds the point budget");
        const int n = std::max(1, (int)nd);
        g.circle = true;
        g.points.reserve(n);
        for (int i = 0; i < n; ++i)
            g.points.push_back({double(i) / n, 0.0, sys.space_tag});
        g.component.assign(g.points.size(), 0);
        g.covering_radius = 0.5 / n * sys.metric.scale;
    } else {
        g.sorted_line = true;
        double worst_gap = 0.0;
        long total = 0;
        std::vector<DomainInterval> ivs = sys.intervals;
        std::sort(ivs.begin(), ivs.end(),
                  [](const DomainInterval& a, const DomainInterval& b) {
                      return a.lo < b.lo;
                  });
        for (std::size_t c = 0; c < ivs.size(); ++c) {
            const double range = ivs[c].hi - ivs[c].lo;
            const double nd = std::ceil(range / resolution - 1e-12);
            if (nd > max_points || (total += (long)nd + 1) > max_points)
                throw std::length_error("sample grid exceeds the point budget");
            const int n = std::max(1, (int)nd);
            const double h = range / n;
            worst_gap = std::max(worst_gap, h);
            for (int i = 0; i <= n; ++i) {
                const double x = (i == n) ? ivs[c].hi : ivs[c].lo + i * h;
                g.points.push_back({x, 0.0, sys.space_tag});
                g.component.push_back((int)c);
            }
        }
        g.covering_radius = worst_gap / 2.0 * sys.metric.scale;
    }

    g.images.reserve(g.points.size());
    for (const Point& p : g.points) g.images.push_back(evaluate(sys, p));
    return g;
}

const std::vector<SystemDef>& builtin_systems() {
    static const std::vector<SystemDef> zoo = [] {
        auto z = make_zoo();
        self_test(z);
        return z;
    }();
    return zoo;
}

const SystemDef* find_system(const std::string& name) {
    for (const auto& s : builtin_systems())
        if (s.name == name) return &s;
    return nullptr;
}

double circle_warp(double t, double amplitude) {
    return canonical_circle(t + amplitude * std::sin(2.0 * std::numbers::pi * t) /
                                    (2.0 * std::numbers::pi));
}

double circle_warp_inverse(double s, double amplitude) {
    s = canonical_circle(s);
    // The lift h(t) = t + amplitude sin(2 pi t)/(2 pi) is strictly increasing
    // for |amplitude| < 1 and deviates from t by less than 1/(2 pi).
    double lo = s - 0.25, hi = s + 0.25;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double val =
            mid + amplitude * std::sin(2.0 * std::numbers::pi * mid) /
                      (2.0 * std::numbers::pi);
        (val < s ? lo : hi) = mid;
    }
    return canonical_circle(0.5 * (lo + hi));
}

SystemDef make_circle_conjugate(const SystemDef& base, double amplitude) {
    if (base.metric.kind != MetricKind::arc_circle)
        throw std::invalid_argument("conjugation helper only warps circle systems");
    if (std::abs(amplitude) >= 1.0)
        throw std::invalid_argument("warp amplitude must satisfy |a| < 1");
    SystemDef s = base;
    s.name = base.name + "-warped";
    s.summary = base.summary + " (conjugated by a fixed sine warp)";
    auto inner = base.map;
    s.map = [inner, amplitude](const Point& p) {
        Point q = p;
        q.x = circle_warp_inverse(p.x, amplitude);
        q = inner(q);
        q.x = circle_warp(canonical_circle(q.x), amplitude);
        return q;
    };
    if (base.lipschitz)
        s.lipschitz = *base.lipschitz * (1.0 + std::abs(amplitude)) /
                      (1.0 - std::abs(amplitude));
    if (base.transitive_witness) {
        Point w = *base.transitive_witness;
        w.x = circle_warp(w.x, amplitude);
        s.transitive_witness = w;
    }
    return s;
}

SystemDef with_metric_scale(const SystemDef& base, double scale) {
    if (scale <= 0.0)
        throw std::invalid_argument("metric scale must be positive");
    SystemDef s = base;
    s.metric.scale = base.metric.scale * scale;
    s.diam = base.diam * scale;
    s.name = base.name + "-rescaled";
    return s;
}

} // namespace chainspec
