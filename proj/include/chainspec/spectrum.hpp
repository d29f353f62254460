#pragma once

// Assembles the emergent order spectrum of a pair: direct orbit-based
// detectors for the theorem-backed order types (finite ordinals, omega,
// attracting-orbit spectra, eta), the empirical projection pipeline from the
// nesting module, and the structural consumers of a stabilized order
// (component blocks, attractor-repeller decompositions, prolongation tables).
//
// Evidence discipline: every entry in a report is either oracle_grade (a
// checked instance of a characterization theorem) or heuristic (growth
// signature of the pruned chain family). Detectors never overrule each
// other; disagreements set the conflict flag and are spelled out in notes.

#include "chainspec/nesting.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainspec {

// ---- direct detectors -----------------------------------------------------

// Smallest k <= kmax with d(f^{k+1}(x), y) <= tol; Fin(0) means f(x) = y and
// denotes the empty interior. Float orbits that converge onto a cycle
// eventually land on it bitwise; such underflow landings (a positive step
// smaller than ~1e-12 diameters right before the hit) are rejected, because
// the true orbit only approaches. Exact-zero steps are genuine fixed points.
std::optional<OrderTypeTerm> detect_finite(const SystemDef& sys, const Point& x,
                                           const Point& y, int kmax = 32,
                                           double tol = 0.0);

struct OrbitProbe {
    bool omega = false;         // orbit closure contains y, orbit never hits it
    bool orbit_hit = false;     // genuine exact hit (saturation artifacts removed)
    bool limit_hit = false;     // tail of the orbit clusters at y (finest ball)
    bool inconclusive = false;  // budget ran out while distances still shrank
    int levels_entered = 0;     // schedule balls around y the orbit visited
    long long hit_step = -1;    // first genuine k with f^k(x) = y
    long long cycle_start = -1; // mu of the bitwise cycle, -1 when none found
    long long cycle_length = -1;
};

// omega membership surrogate: the orbit of x enters every schedule ball
// around y and never genuinely hits y. Orbits are iterated until they repeat
// bitwise or the budget runs out; once a cycle is known the probe is exact.
OrbitProbe detect_omega(const SystemDef& sys, const RefinementSchedule& sched,
                        const Point& x, const Point& y, long long budget = 100000,
                        double tol = 0.0);

struct PeriodicSpectrum {
    bool applicable = false;
    int period = 0;                   // detected exact period of y, 0 if none
    std::vector<OrderTypeTerm> terms; // omega + j for j = 0..period-1
    std::string diagnostic;           // which hypothesis failed, empty if none
};

// {omega + j : j < K} for y on an exactly periodic orbit that attracts its
// grid neighbours, with x in the basin and y not on the orbit of x. Each
// hypothesis is verified numerically; any failure refuses with a diagnostic
// instead of guessing.
PeriodicSpectrum detect_periodic_attractor_spectrum(
    const SystemDef& sys, const SampleGrid& grid, const RefinementSchedule& sched,
    const Point& x, const Point& y, int period_cap = 64, double tol = 0.0,
    long long budget = 100000);

struct EtaProbe {
    bool eta = false;
    Confidence confidence = Confidence::inconclusive;
    std::string note;
    // Spliced orbit-segment family realizing eta, built when a dense witness
    // orbit is available. Segments use strictly increasing orbit indices, so
    // every chain stays acyclic and the nesting is exact by construction.
    std::optional<NestedFamily> witness_family;
};

// Oracle path for eta: a transitive witness (explicit or from the system
// definition) whose orbit is dense at the finest schedule level yields a
// witnessing family by splicing orbit segments between consecutive chain
// points. Identity systems short-circuit to the oracle without a witness.
EtaProbe detect_eta(const SystemDef& sys, const SampleGrid& grid,
                    const RefinementSchedule& sched, const Point& x, const Point& y,
                    std::optional<Point> witness = std::nullopt,
                    long long budget = 100000);

struct NonwanderingCheck {
    bool passes = false;
    int first_failing_level = -1; // schedule index, -1 when all levels pass
    bool contradiction = false;   // failed although zeta was claimed
};

// zeta membership forces the pair into the nonwandering relation: some grid
// point within eps of x must have a forward grid orbit entering the eps-ball
// around y, at every schedule level.
NonwanderingCheck zeta_nonwandering_check(const SystemDef& sys, const SampleGrid& grid,
                                          const RefinementSchedule& sched,
                                          const Point& x, const Point& y,
                                          bool zeta_claimed);

// ---- spectrum assembly ------------------------------------------------------

struct SpectrumEntry {
    OrderTypeTerm term;
    Confidence confidence = Confidence::heuristic;
    bool empirical = false; // true when the evidence is the growth signature
    std::string evidence;   // theorem instance or signature justification
};

struct SpectrumOptions {
    int finite_kmax = 32;
    double exact_tol = 0.0;
    long long orbit_budget = 100000;
    int source_shift = 3;      // projection sources come this many levels deeper
    int prune_budget = 16;
    int stability_window = 3;
    double prune_tol = -1.0;   // < 0: use the grid covering radius
    bool run_empirical = true;
    bool run_blocks = true;    // component-block scan (zeta.omega evidence)
};

struct SpectrumReport {
    Point x, y;
    int xi = -1, yi = -1; // snapped grid indices
    bool chain_related = false;
    std::vector<SpectrumEntry> entries;
    std::vector<std::string> notes;
    bool conflict = false;           // detectors disagree; exit code 1 upstream
    bool zeta_contradiction = false; // zeta claimed but (x,y) fails the N check
    bool inconclusive = false;       // some budget ran out while approaching
    bool prune_converged = true;
    std::optional<SignatureReport> signature;
    std::optional<NestingCertificate> certificate;
};

// Runs every detector plus the empirical pipeline and merges the evidence.
// Entries are empty exactly when the pair is not chain related. Oracle
// entries win duplicate terms; cross-checks (finite-ordinal exactness, the
// limit-set biconditional, the zeta nonwandering requirement) mark conflicts
// instead of resolving them.
SpectrumReport spectrum(const SystemDef& sys, const SampleGrid& grid,
                        const RefinementSchedule& sched, const Point& x,
                        const Point& y, const SpectrumOptions& opt = {});

// Grid indices y whose spectrum contains xi. The oracle-only mode uses the
// theorem detectors (finite ordinals, omega, eta); with heuristics included
// the full pipeline runs per chain-related candidate, so keep grids small.
std::vector<int> xi_class(const SystemDef& sys, const SampleGrid& grid,
                          const RefinementSchedule& sched, const OrderTypeTerm& xi,
                          const Point& x, bool oracle_only = true,
                          const SpectrumOptions& opt = {});

// ---- component blocks -------------------------------------------------------

struct ComponentBlock {
    int component = -1; // chain-component id, -1 for transit runs
    int first = 0;      // inclusive positions into the decided sequence
    int last = 0;
};

struct BlockDecomposition {
    std::vector<ComponentBlock> blocks; // in decided-sequence order
    std::vector<int> induced_order;     // visited components, ascending
};

// Convexity or order violations carry the offending pair: decided-sequence
// positions for an interrupted block, component ids for an order mismatch.
struct BlockStructureError : std::runtime_error {
    int a = -1, b = -1;
    BlockStructureError(const std::string& msg, int a_, int b_)
        : std::runtime_error(msg), a(a_), b(b_) {}
};

// Requires a fully decided order. Each chain component met along the decided
// sequence must occupy one contiguous run; runs outside every component
// become transit blocks; the traversal must descend the Conley order.
BlockDecomposition conley_blocks(const StabilizedOrder& so, const SampleGrid& grid,
                                 const ChainComponentSet& cc, const ConleyDiagram& cd);

// ---- attractor-repeller structure -------------------------------------------

struct AttractorRepellerPair {
    std::vector<int> inward;    // grid set U with f(U) inside U at margin eps
    std::vector<int> attractor; // A: stable part of the iterated image of U
    std::vector<int> basin;     // points whose forward grid orbit enters U
    std::vector<int> repeller;  // complement of the basin
};

// Candidate inward sets are the downward-closed reachability sets of the
// eps-graph condensation (edge-closure supplies the inwardness margin); the
// full grid is discarded as trivial and duplicates by attractor are merged.
std::vector<AttractorRepellerPair> find_attractors(const SampleGrid& grid,
                                                   double epsilon);

struct DecompositionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArDecomposition {
    FiniteSet s_r, s_a, s_prime; // decided support split by exact membership
    OrderTypeTerm middle;        // omega_star() or zeta()
    SignatureReport beta;        // restricted signature on the repeller side
    SignatureReport beta_prime;  // restricted signature on the attractor side
};

// Splits a fully decided support along an attractor-repeller pair. The
// middle part must be a single exact orbit segment (unique predecessor and
// successor under f, checked bitwise); it classifies as Zeta when it grows
// at both ends across levels and OmegaStar when it only grows toward x.
// Preconditions (x in R, y in A) throw std::invalid_argument; structural
// failures throw DecompositionError naming the defect.
ArDecomposition ar_decompose(const SystemDef& sys, const SampleGrid& grid,
                             const NestedFamily& nf, const StabilizedOrder& so,
                             const AttractorRepellerPair& pair);

// ---- prolongation -----------------------------------------------------------

struct ProlongationTable {
    Point x;
    int xi = -1;
    std::vector<std::vector<int>> levels; // levels[a] = J_{a+1}(x) grid indices
    std::vector<bool> lower_bound;        // per alpha: composition was truncated
};

// Finite prolongation hierarchy. J_1 at level eps collects the grid points
// whose ball around y is entered by the forward grid orbit of some grid
// point near x; deeper levels compose the previous relation to a fixpoint
// (or to composition_budget applications, flagging the result as a lower
// bound when truncated), thicken by eps, and intersect over the schedule.
// J_alpha subset J_{alpha+1} holds by construction and is asserted.
ProlongationTable prolongation(const SampleGrid& grid, const RefinementSchedule& sched,
                               const Point& x, int alpha_max = 4,
                               long long composition_budget = 1 << 20);

} // namespace chainspec
