#pragma once

// Sampled dynamical systems: a system is a compact metric space together
// with a continuous self-map, and analysis happens on a finite sample grid
// whose covering radius is recorded. The built-in zoo collects the maps the
// rest of the project is exercised on.

#include "chainspec/geometry.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace chainspec {

struct DomainInterval {
    double lo = 0.0;
    double hi = 1.0;
};

struct SystemDef {
    std::string name;
    std::string summary;
    Metric metric;
    int space_tag = 0;
    // Interval/circle systems describe their domain here; plane systems
    // (the comb) produce their sample set directly in the sampler hook.
    std::vector<DomainInterval> intervals; // empty for circle/plane
    double diam = 1.0;                     // exact diameter under scale 1
    std::function<Point(const Point&)> map;
    std::optional<double> lipschitz;       // analytic constant when known
    std::optional<Point> transitive_witness;
    bool identity_map = false;
    // Custom sampler for plane systems; null for interval/circle systems.
    std::function<std::vector<Point>(double)> plane_sampler;
};

// Applies the map once and canonicalizes the result (circle wrap, clamping
// of sub-1e-9 numerical overshoot past interval endpoints).
Point evaluate(const SystemDef& sys, const Point& p);

// p, f(p), ..., f^n(p): n+1 points.
std::vector<Point> orbit(const SystemDef& sys, const Point& p, int n);

struct SampleGrid {
    const SystemDef* sys = nullptr;
    Metric metric;
    int space_tag = 0;
    double resolution = 0.0;      // requested spacing
    double covering_radius = 0.0; // measured: every domain point this close to a sample
    bool sorted_line = false;     // 1-D spaces keep points sorted for range queries
    bool circle = false;
    std::vector<Point> points;
    std::vector<Point> images;    // images[i] = f(points[i])
    std::vector<int> component;   // owning domain interval (0 elsewhere)

    int size() const { return static_cast<int>(points.size()); }
    // Nearest sample to an arbitrary point of the space (smallest index on ties)
    // together with the snap distance.
    std::pair<int, double> snap(const Point& p) const;
};

// Uniform sampling with spacing <= resolution on every interval (interval
// endpoints are always included exactly); ceil(1/resolution) equispaced
// points on the circle; the system's own sampler for plane systems.
// Throws std::length_error when the grid would exceed max_points.
SampleGrid sample(const SystemDef& sys, double resolution, int max_points = 1000000);

// The built-in zoo. Systems are constructed once and cached.
const std::vector<SystemDef>& builtin_systems();
const SystemDef* find_system(const std::string& name); // null when unknown

// h o f o h^{-1} for a circle system, with the fixed degree-one
// homeomorphism h(t) = t + amplitude * sin(2 pi t) / (2 pi), |amplitude| < 1.
// Used by the conjugacy-invariance checks; transports witnesses through h.
SystemDef make_circle_conjugate(const SystemDef& base, double amplitude);
double circle_warp(double t, double amplitude);         // h itself
double circle_warp_inverse(double t, double amplitude); // h^{-1} via bisection

// Variant of a system with the metric scale changed (d' = scale * d);
// diameter is rescaled accordingly. Used by the metric-swap checks.
SystemDef with_metric_scale(const SystemDef& base, double scale);

// Geometry of the wandering-interval circle map ("denjoy" in the zoo): the
// orbit {R_a^n(0) : |n| <= truncation} of the golden rotation is blown up
// into disjoint intervals of length proportional to 1/(1+n^2), the circle is
// renormalized to circumference 1, and the map sends each inserted interval
// affinely onto its successor. The last forward interval has no successor
// and collapses to a point; the map stays continuous because the gap that
// would feed the first backward interval is spread affinely across it.
struct DenjoyLayout {
    double alpha = 0.0;             // rotation number of the base rotation
    int truncation = 0;             // orbit indices run over [-truncation, truncation]
    std::vector<int> orbit_index;   // orbit index n of the i-th interval, sorted by position
    std::vector<double> lo, hi;     // inserted intervals in blown-up coordinates
    double collapse_point = 0.0;    // common image of the last forward interval

    // Blown-up coordinate of a base-circle point that is not on the orbit.
    double embed_gap(double t) const;

    // Internals shared with the map evaluator.
    std::vector<double> base_points; // sorted orbit points on the base circle
    std::vector<double> prefix;      // prefix sums of inserted lengths (size M+1)
    double sigma = 1.0;              // 1 / (1 + total inserted length)
    std::vector<double> node;        // piecewise-affine breakpoints (all lo/hi)
    std::vector<double> node_image;  // lifted images at the breakpoints
};

const DenjoyLayout& denjoy_layout();

} // namespace chainspec
