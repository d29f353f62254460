#pragma once

// Symbolic countable linear order-types. The term grammar covers finite
// orders, omega, its reverse, zeta = w* + w, the dense type eta, finite
// sums, and products (a.b = b-indexed sum of copies of a). Normalization
// applies a small sound rewrite system; it makes no attempt at a complete
// isomorphism decision, so equal_normalized(a, b) == false only means "not
// provably equal by these rules".

#include <string>
#include <vector>

namespace chainspec {

enum class TermKind { fin, omega, omega_star, zeta, eta, sum, prod };

struct OrderTypeTerm {
    TermKind kind = TermKind::fin;
    long long count = 0;               // fin only; Fin(0) is the empty order
    std::vector<OrderTypeTerm> parts;  // sum: flattened children; prod: {left, right}
};

OrderTypeTerm fin(long long k);
OrderTypeTerm omega();
OrderTypeTerm omega_star();
OrderTypeTerm zeta();
OrderTypeTerm eta();
OrderTypeTerm sum_of(std::vector<OrderTypeTerm> parts);
OrderTypeTerm prod_of(OrderTypeTerm left, OrderTypeTerm right);

bool structurally_equal(const OrderTypeTerm& a, const OrderTypeTerm& b);
bool term_less(const OrderTypeTerm& a, const OrderTypeTerm& b); // arbitrary total order

// Rewrites, applied to a fixed point inside sums: flatten; drop Fin(0);
// Fin(a)+Fin(b) -> Fin(a+b); Fin(k)+w -> w; w*+Fin(k) -> w*; e+Fin(1)+e -> e;
// e+e -> e; z -> w*+w; t.Fin(k) -> k-fold sum. Anything else is left alone.
OrderTypeTerm normalize(const OrderTypeTerm& t);
bool equal_normalized(const OrderTypeTerm& a, const OrderTypeTerm& b);

// Exact order-arithmetic facts, isomorphism invariants of the denoted order.
// Tests use them to cross-check that the rewrite system never merges terms
// with observably different structure.
struct TermTraits {
    bool empty = false;
    bool finite = false;
    long long size = -1;            // -1 when infinite
    bool has_min = false;
    bool has_max = false;
    bool has_adjacent_pair = false; // some element with an immediate successor
};
TermTraits term_traits(const OrderTypeTerm& t);

// Concrete syntax: `fin:k`, `w`, `w*`, `z`, `e`, `+`, `.` (product, binds
// tighter), parentheses. Example: "z.w+z".
std::string to_string(const OrderTypeTerm& t);
OrderTypeTerm parse_term(const std::string& text); // throws std::invalid_argument

// ---- empirical growth signatures ----------------------------------------
// Filled by the nested-family analyzer; consumed by the spectrum assembler.

enum class GrowthSide { none, unbounded };
enum class Densification { none, everywhere, partial };
enum class Confidence { oracle_grade, heuristic, inconclusive };

std::string to_string(Confidence c);

struct SignatureVerdict {
    OrderTypeTerm term;
    Confidence confidence = Confidence::heuristic;
    std::string evidence; // one-line justification for the report
};

struct SignatureReport {
    GrowthSide left_growth = GrowthSide::none;   // new points adjacent to x
    GrowthSide right_growth = GrowthSide::none;  // new points adjacent to y
    Densification interior_densification = Densification::none;
    std::vector<int> decided_size_trend;         // decided interior size per level
    std::vector<SignatureVerdict> verdicts;
    bool inconclusive = false;                   // fewer than 4 usable levels
};

} // namespace chainspec
