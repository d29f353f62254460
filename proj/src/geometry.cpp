#include "chainspec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chainspec {

bool same_point(const Point& a, const Point& b) {
    return a.x == b.x && a.y == b.y && a.space_tag == b.space_tag;
}

bool point_less(const Point& a, const Point& b) {
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
}

double canonical_circle(double t) {
    double w = t - std::floor(t);
    // floor of a value infinitesimally below an integer can round the
    // difference to exactly 1.0; fold that back to 0.
    if (w >= 1.0) w = 0.0;
    return w;
}

double distance(const Metric& m, const Point& a, const Point& b) {
    if (a.space_tag != b.space_tag)
        throw std::invalid_argument("distance: points belong to different spaces");
    double d = 0.0;
    switch (m.kind) {
    case MetricKind::euclidean_interval:
        d = std::fabs(a.x - b.x);
        break;
    case MetricKind::arc_circle: {
        double raw = std::fabs(canonical_circle(a.x) - canonical_circle(b.x));
        d = std::min(raw, 1.0 - raw);
        break;
    }
    case MetricKind::euclidean_plane:
        d = std::hypot(a.x - b.x, a.y - b.y);
        break;
    case MetricKind::max_product:
        d = std::max(std::fabs(a.x - b.x), std::fabs(a.y - b.y));
        break;
    }
    return m.scale * d;
}

FiniteSet::FiniteSet(const std::vector<Point>& pts) {
    for (const Point& p : pts) insert(p);
}

bool FiniteSet::insert(const Point& p) {
    auto it = std::lower_bound(pts_.begin(), pts_.end(), p, point_less);
    if (it != pts_.end() && same_point(*it, p)) return false;
    pts_.insert(it, p);
    return true;
}

bool FiniteSet::contains(const Point& p) const {
    auto it = std::lower_bound(pts_.begin(), pts_.end(), p, point_less);
    return it != pts_.end() && same_point(*it, p);
}

bool FiniteSet::subset_of(const FiniteSet& other) const {
    for (const Point& p : pts_)
        if (!other.contains(p)) return false;
    return true;
}

double hausdorff_distance(const Metric& m, const std::vector<Point>& a,
                          const std::vector<Point>& b) {
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff_distance: one side is empty");
    double h = 0.0;
    auto one_sided = [&](const std::vector<Point>& from, const std::vector<Point>& to) {
        for (const Point& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Point& q : to) best = std::min(best, distance(m, p, q));
            h = std::max(h, best);
        }
    };
    one_sided(a, b);
    one_sided(b, a);
    return h;
}

std::vector<int> ball_query(const Metric& m, const std::vector<Point>& set,
                            const Point& center, double eps) {
    std::vector<int> out;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (distance(m, set[i], center) < eps) out.push_back(static_cast<int>(i));
    return out;
}

} // namespace chainspec
