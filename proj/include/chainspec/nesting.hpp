#pragma once

// Hausdorff projection of chain families onto their limit support, the
// cycle-removal/re-projection pruning loop, first-occurrence and stabilized
// orders, nesting certificates, and growth-signature detection.

#include "chainspec/epsgraph.hpp"
#include "chainspec/ordertypes.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace chainspec {

// Injectivity or distance-bound violation inside a projection step; usually
// means the delta bound was computed too loosely for the data at hand.
struct ProjectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No input chain is both fine enough (quality < eps/6) and close enough to
// the limit support; the family cannot drive the construction any deeper.
struct ScheduleExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The delta bound collapsed to the float noise floor (near-duplicate points
// in the current chain); reported rather than worked around.
struct ProjectionStall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LimitSupport {
    FiniteSet points;                 // approximation of the Hausdorff limit
    double hausdorff_residual = 0.0;  // d_H between the last two inputs
};

struct NestedFamily {
    Point x, y;
    std::vector<Chain> chains;     // chain n at level epsilons[n]
    std::vector<char> nesting_ok;  // per consecutive pair of chains
    std::vector<char> acyclic_ok;  // per chain

    bool all_nested() const;
    bool all_acyclic() const;
    int depth() const { return (int)chains.size(); }
};

struct ProjectionStats {
    std::vector<int> source_index;   // which input chain drove each level
    std::vector<double> delta;       // delta_n per transition
    int collapsed_duplicates = 0;    // adjacent equal points merged
};

struct ProjectionResult {
    NestedFamily family;
    LimitSupport limit;
    ProjectionStats stats;
};

// The level-by-level induction: S_1 = (x, y); each step matches the current
// chain into a fine input chain and splices limit-support points into the
// unmatched positions. Output chains live on the limit support and nest
// exactly. Requires epsilons[n+1] >= epsilons[n]/2 (the built chains are
// only guaranteed to beat eps_n/2).
ProjectionResult hausdorff_project(const std::vector<Chain>& family,
                                   const RefinementSchedule& sched);

struct PruneResult {
    NestedFamily family;
    LimitSupport limit;
    bool converged = false;
    int rounds = 0;
    std::vector<int> removed_per_round;      // points cut by cycle removal
    std::vector<double> residual_per_round;  // d_H of successive limits
    std::vector<FiniteSet> limit_history;
};

// Rounds of (project -> remove cycles -> shrink limit) until a round cuts
// nothing and the limit moved at most tol, or the budget runs out (partial
// result flagged non-converged). Supports shrink monotonically.
PruneResult prune_loop(const std::vector<Chain>& family,
                       const RefinementSchedule& sched, int budget, double tol);

struct FirstOccurrenceOrder {
    const Chain* chain = nullptr;
    std::vector<std::pair<Point, int>> rank;  // interior values, ascending rank

    int rank_of(const Point& p) const;  // -1 when absent from the interior
};

// Rank every interior value by its smallest interior position.
FirstOccurrenceOrder first_occurrence_order(const Chain& c);

enum class PairOrder { before, after, unstable };

struct StabilizedOrder {
    FiniteSet support;        // union of interior values, endpoints excluded
    int stability_window = 3;
    std::vector<PairOrder> pairs;  // upper triangle, row-major over support

    PairOrder at(int i, int j) const;  // i != j, either orientation
    bool fully_decided() const;
    std::vector<std::pair<int, int>> unstable_pairs() const;
    // The unique total order when fully decided; throws otherwise.
    std::vector<Point> decided_sequence() const;
};

// A pair is decided when both points occur in the final chain and their
// relative first-occurrence order is constant across the last `window`
// chains in which both occur. Decided cycles (impossible for per-chain
// linear data, kept as a guard) are downgraded to unstable.
StabilizedOrder stabilized_order(const NestedFamily& nf, int window = 3);

struct NestingCertificate {
    std::vector<char> nested_step;
    std::vector<char> acyclic_chain;
    bool order_compatible = false;
    int violating_level = -1;  // first nesting or acyclicity failure
    std::optional<std::pair<Point, Point>> flipping_pair;
    bool pass = false;
};

// The three-part certificate: exact support nesting, per-chain acyclicity,
// and a stabilized order with no unstable pairs.
NestingCertificate verify_ordinately_nested(const NestedFamily& nf,
                                            int window = 3);

struct InvarianceReport {
    double dist = 0.0;
    bool pass = false;
};

// Finite form of the limit invariance identity: compares f(L) with x added
// against L with f(y) added, in Hausdorff distance.
InvarianceReport limit_support_check(const LimitSupport& ls,
                                     const SystemDef& sys, const Point& x,
                                     const Point& y, double tol);

// Classify where new points enter between consecutive levels and condense
// the pattern into order-type verdicts. Needs at least 4 levels.
SignatureReport detect_signature(const NestedFamily& nf,
                                 const StabilizedOrder& so);

// Shortest per-level chains between two grid indices, or nullopt when some
// level has none. The usual source family for hausdorff_project.
std::optional<std::vector<Chain>> chain_family_from_grid(
    const SampleGrid& grid, const RefinementSchedule& source_sched, int xi,
    int yi);

// Prefix of a source schedule usable as projection targets: the sources
// run `shift` levels deeper than the targets so a quality-eps/6 source
// always exists (eps_{n+3} = eps_n/8 < eps_n/6).
RefinementSchedule projection_targets(const RefinementSchedule& source,
                                      int shift = 3);

} // namespace chainspec
