#pragma once

// Points, metrics and finite-set primitives shared by every other module.
//
// All spaces in this project are compact metric spaces presented in one of
// three concrete forms: a finite union of closed real intervals, the unit
// circle with arc-length metric (coordinates canonicalized to [0,1)), or a
// bounded subset of the plane. A Point carries a space_tag so that distances
// between points of different spaces are rejected instead of silently
// computed.

#include <cstddef>
#include <vector>

namespace chainspec {

struct Point {
    double x = 0.0;
    double y = 0.0; // used only by plane spaces
    int space_tag = 0;
};

// Exact (bitwise) coincidence. Support bookkeeping throughout the nesting
// module relies on points being propagated verbatim, so exact comparison is
// the intended semantics, not a tolerance.
bool same_point(const Point& a, const Point& b);

// Lexicographic (x, y) order used to keep finite sets canonical.
bool point_less(const Point& a, const Point& b);

enum class MetricKind {
    euclidean_interval, // |a - b| on a subset of the real line
    arc_circle,         // min(|a-b|, 1-|a-b|) on [0,1)
    euclidean_plane,    // sqrt(dx^2 + dy^2)
    max_product,        // max(|dx|, |dy|), bi-Lipschitz equivalent to the above
};

// scale is a global bi-Lipschitz re-metrization knob (d' = scale * d) used by
// the invariance checks; it defaults to the canonical metric.
struct Metric {
    MetricKind kind = MetricKind::euclidean_interval;
    double scale = 1.0;
};

// Wraps an arbitrary real circle coordinate into [0,1).
double canonical_circle(double t);

// Throws std::invalid_argument when the space tags differ.
double distance(const Metric& m, const Point& a, const Point& b);

// Finite set of points kept sorted by point_less with exact-equality dedup.
class FiniteSet {
public:
    FiniteSet() = default;
    explicit FiniteSet(const std::vector<Point>& pts);

    // Returns true when the point was not already present.
    bool insert(const Point& p);
    bool contains(const Point& p) const;
    std::size_t size() const { return pts_.size(); }
    bool empty() const { return pts_.empty(); }
    const std::vector<Point>& points() const { return pts_; }

    // Set inclusion under exact equality.
    bool subset_of(const FiniteSet& other) const;

private:
    std::vector<Point> pts_;
};

// Brute-force two-directional sup-inf. Either argument may be empty only if
// both are (then the distance is 0); one-sided emptiness throws.
double hausdorff_distance(const Metric& m, const std::vector<Point>& a,
                          const std::vector<Point>& b);

// Indices (ascending) of the points of `set` strictly within eps of center.
// Open ball: boundary points at distance exactly eps are excluded.
std::vector<int> ball_query(const Metric& m, const std::vector<Point>& set,
                            const Point& center, double eps);

} // namespace chainspec
