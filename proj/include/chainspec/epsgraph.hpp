#pragma once

// The combinatorial core: finite directed graphs whose edges are the
// single-step epsilon-chain moves between sample points, plus everything
// built on top of them (shortest chains, cycle removal, the chain relation
// over a refinement schedule, chain components, and the Conley order).

#include "chainspec/systems.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace chainspec {

// Raised when the approximate Conley order loses antisymmetry; the remedy is
// a finer schedule or grid, so callers treat it as non-convergence.
struct ScheduleTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpsilonGraph {
    const SampleGrid* grid = nullptr;
    double epsilon = 0.0;
    std::vector<std::vector<int>> out; // ascending target indices
    std::vector<std::vector<int>> in;

    int size() const { return (int)out.size(); }
};

// Edge i -> j iff distance(images[i], points[j]) < epsilon (strict).
// closed_balls switches the predicate to <= for robustness experiments.
EpsilonGraph build_graph(const SampleGrid& grid, double epsilon,
                         bool closed_balls = false);

void dump_edges(const EpsilonGraph& g, std::ostream& os); // "i j" per line

struct Chain {
    const SystemDef* sys = nullptr;
    double epsilon = 0.0;
    std::vector<Point> points;  // x_0 .. x_m, m >= 1
    std::vector<int> indices;   // grid indices when graph-backed, else empty

    int steps() const { return (int)points.size() - 1; }
    const Point& from() const { return points.front(); }
    const Point& to() const { return points.back(); }
};

struct ChainCheck {
    bool ok = false;
    std::vector<double> step_dist;  // d(f(x_i), x_{i+1}) per step
    int first_violation = -1;
    double max_step = 0.0;
};

ChainCheck check_chain(const SystemDef& sys, const std::vector<Point>& seq,
                       double epsilon);
// Worst step distance; the measured quality of a pseudo-orbit (0 for orbits).
double chain_quality(const SystemDef& sys, const std::vector<Point>& seq);

// Shortest chain from x to y with at least one step (x = y needs a cycle);
// among shortest, the lexicographically smallest index sequence.
std::optional<Chain> find_chain(const EpsilonGraph& g, int x, int y);

// Deterministic cycle elimination: repeatedly cut the span between the first
// repeated value pair (endpoint pair of an x-to-x chain excluded). The cut
// preserves per-step validity exactly because the seam points carry equal
// values. Output: no interior repeats, interior disjoint from endpoints.
Chain remove_cycles(const Chain& c, int* removed = nullptr);

struct RefinementSchedule {
    std::vector<double> epsilons; // strictly decreasing, all positive
    bool user_supplied = false;

    int depth() const { return (int)epsilons.size(); }
    double finest() const { return epsilons.back(); }
};

// The standard ladder eps_n = 4 diam / 2^n, n = 1..depth.
RefinementSchedule default_schedule(double diam, int depth = 14);
RefinementSchedule user_schedule(std::vector<double> epsilons);

struct ChainRelation {
    bool related = false;                       // reachable at every level
    std::vector<std::optional<Chain>> per_level; // certificates, schedule order
};

ChainRelation chain_related(const SampleGrid& grid,
                            const RefinementSchedule& sched, int x, int y);

// ---- components and the Conley order ------------------------------------

struct SccResult {
    int count = 0;
    std::vector<int> comp; // component ids; edges in the condensation go
                           // from higher id to lower id (sinks get id 0)
};
SccResult strongly_connected_components(const std::vector<std::vector<int>>& out);

struct ChainComponentSet {
    std::vector<std::vector<int>> components; // sorted members; labels by
                                              // smallest member index
    std::vector<int> member_of;               // -1 for non-recurrent points
};

// Single-level version: SCCs restricted to vertices lying on a directed
// cycle (self-loop or nontrivial component).
ChainComponentSet scc_components(const EpsilonGraph& g);

// Intersection of the per-level equivalences over the whole schedule; points
// that fail self-reachability at any level are dropped.
ChainComponentSet chain_components(const SampleGrid& grid,
                                   const RefinementSchedule& sched);

struct ConleyDiagram {
    int node_count = 0;
    std::vector<std::pair<int, int>> order_pairs; // (K, K2) meaning K <= K2
    // finest-level witness chains, keyed by (lower, upper)
    std::map<std::pair<int, int>, Chain> certificates;
};

// K <= K2 iff some y in K2 chain-reaches some x in K at every level (one
// fixed pair across the schedule). Reflexive pairs included. Throws
// ScheduleTooCoarse on an antisymmetry violation.
ConleyDiagram conley_order(const ChainComponentSet& cc, const SampleGrid& grid,
                           const RefinementSchedule& sched);

std::string conley_dot(const ConleyDiagram& d, const ChainComponentSet& cc,
                       const SampleGrid& grid);

// ---- reachability utilities ----------------------------------------------

// Dense n-by-n bit matrix; row i holds the vertex set reachable from i.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(int n) : n_(n), words_((n + 63) / 64), bits_(std::size_t(n) * words_) {}
    int size() const { return n_; }
    void set(int i, int j) { bits_[row_w(i) + j / 64] |= 1ull << (j % 64); }
    bool test(int i, int j) const {
        return bits_[row_w(i) + j / 64] >> (j % 64) & 1;
    }
    void or_row(int dst, int src) {
        for (int w = 0; w < words_; ++w)
            bits_[row_w(dst) + w] |= bits_[row_w(src) + w];
    }
    bool row_equal(int a, int b) const {
        for (int w = 0; w < words_; ++w)
            if (bits_[row_w(a) + w] != bits_[row_w(b) + w]) return false;
        return true;
    }
    void assign_row(int i, const std::vector<std::uint64_t>& src) {
        std::copy(src.begin(), src.end(), bits_.begin() + row_w(i));
    }
    int row_count(int i) const;
    std::vector<int> row_members(int i) const;

private:
    std::size_t row_w(int i) const { return std::size_t(i) * words_; }
    int n_ = 0;
    int words_ = 0;
    std::vector<std::uint64_t> bits_;
};

// Reflexive-transitive closure of an adjacency list (SCC condensation walk).
BitMatrix reachability_closure(const std::vector<std::vector<int>>& out);

} // namespace chainspec
