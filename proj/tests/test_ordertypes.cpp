#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chainspec/ordertypes.hpp"
#include "term_gen.hpp"

#include <random>
#include <stdexcept>

using namespace chainspec;

TEST_CASE("classical absorption identities rewrite as expected") {
    CHECK(equal_normalized(sum_of({fin(3), omega()}), omega()));
    CHECK(equal_normalized(sum_of({omega_star(), fin(7)}), omega_star()));
    CHECK(equal_normalized(sum_of({eta(), fin(1), eta()}), eta()));
    CHECK(equal_normalized(sum_of({eta(), eta()}), eta()));
    CHECK(equal_normalized(zeta(), sum_of({omega_star(), omega()})));
    CHECK(equal_normalized(sum_of({fin(2), fin(3)}), fin(5)));
}

TEST_CASE("unsound-looking pairs stay distinct") {
    CHECK(!equal_normalized(omega(), omega_star()));
    CHECK(!equal_normalized(sum_of({omega(), fin(1)}), omega())); // w+1 has a max
    CHECK(!equal_normalized(sum_of({eta(), fin(2), eta()}), eta()));
    // the two spectra labels from the wandering-interval analysis
    const OrderTypeTerm a = parse_term("z.w+z");
    const OrderTypeTerm b = parse_term("z.w+w*");
    CHECK(!equal_normalized(a, b));
    CHECK(equal_normalized(a, a));
}

TEST_CASE("products distribute over finite right factors only") {
    CHECK(equal_normalized(prod_of(fin(2), fin(3)), fin(6)));
    CHECK(equal_normalized(prod_of(omega(), fin(2)), sum_of({omega(), omega()})));
    CHECK(equal_normalized(prod_of(zeta(), fin(1)), zeta()));
    CHECK(equal_normalized(prod_of(eta(), fin(0)), fin(0)));
    // left factors and infinite right factors stay opaque
    const OrderTypeTerm zw = normalize(prod_of(zeta(), omega()));
    CHECK(zw.kind == TermKind::prod);
    CHECK(!equal_normalized(prod_of(zeta(), omega()), prod_of(eta(), omega())));
}

TEST_CASE("normalize is idempotent on random terms") {
    std::mt19937 rng(20260814);
    for (int i = 0; i < 2000; ++i) {
        const OrderTypeTerm t = testgen::random_term(rng, 5);
        const OrderTypeTerm n1 = normalize(t);
        CHECK(structurally_equal(n1, normalize(n1)));
    }
}

TEST_CASE("normalize preserves exact order invariants") {
    std::mt19937 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const OrderTypeTerm t = testgen::random_term(rng, 5);
        const TermTraits a = term_traits(t);
        const TermTraits b = term_traits(normalize(t));
        CHECK(a.empty == b.empty);
        CHECK(a.finite == b.finite);
        CHECK(a.size == b.size);
        CHECK(a.has_min == b.has_min);
        CHECK(a.has_max == b.has_max);
        CHECK(a.has_adjacent_pair == b.has_adjacent_pair);
    }
}

TEST_CASE("term traits match hand-computed structure") {
    const TermTraits w = term_traits(omega());
    CHECK((w.has_min && !w.has_max && !w.finite && w.has_adjacent_pair));
    const TermTraits e = term_traits(eta());
    CHECK((!e.has_min && !e.has_max && !e.has_adjacent_pair));
    const TermTraits z = term_traits(zeta());
    CHECK((!z.has_min && !z.has_max && z.has_adjacent_pair));
    const TermTraits zw = term_traits(prod_of(zeta(), omega()));
    CHECK((!zw.has_min && !zw.has_max && zw.has_adjacent_pair && !zw.finite));
    // 1 + eta + 1: extremes exist, no adjacency anywhere inside
    const TermTraits t = term_traits(sum_of({fin(1), eta(), fin(1)}));
    CHECK((t.has_min && t.has_max && !t.has_adjacent_pair));
    const TermTraits f0 = term_traits(fin(0));
    CHECK((f0.empty && f0.size == 0));
}

TEST_CASE("parser and printer round-trip") {
    std::mt19937 rng(99);
    for (int i = 0; i < 500; ++i) {
        const OrderTypeTerm t = testgen::random_term(rng, 4);
        CHECK(structurally_equal(parse_term(to_string(t)), t));
    }
    CHECK(to_string(parse_term("z.w+z")) == "z.w+z");
    CHECK(to_string(parse_term("(w*+w).w")) == "(w*+w).w");
    CHECK(to_string(fin(12)) == "fin:12");
    CHECK(structurally_equal(parse_term(" w* + fin:2 . e "),
                             sum_of({omega_star(), prod_of(fin(2), eta())})));
    CHECK_THROWS_AS((void)parse_term("fin:"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_term("q"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_term("w+"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_term("(w"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_term("w)w"), std::invalid_argument);
}

TEST_CASE("soundness sweep: provably-equal terms have identical invariants") {
    std::mt19937 rng(1234);
    int hits = 0;
    for (int i = 0; i < 4000; ++i) {
        const OrderTypeTerm a = testgen::random_term(rng, 4);
        const OrderTypeTerm b = testgen::random_term(rng, 4);
        if (!equal_normalized(a, b)) continue;
        ++hits;
        const TermTraits ta = term_traits(a), tb = term_traits(b);
        CHECK(ta.has_min == tb.has_min);
        CHECK(ta.has_max == tb.has_max);
        CHECK(ta.size == tb.size);
        CHECK(ta.has_adjacent_pair == tb.has_adjacent_pair);
    }
    CHECK(hits > 0); // the sweep must actually exercise equal pairs
}
