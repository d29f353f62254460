#include "chainspec/ordertypes.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace chainspec {

OrderTypeTerm fin(long long k) {
    if (k < 0) throw std::invalid_argument("Fin(k) needs k >= 0");
    OrderTypeTerm t;
    t.kind = TermKind::fin;
    t.count = k;
    return t;
}

OrderTypeTerm omega() { return {TermKind::omega, 0, {}}; }
OrderTypeTerm omega_star() { return {TermKind::omega_star, 0, {}}; }
OrderTypeTerm zeta() { return {TermKind::zeta, 0, {}}; }
OrderTypeTerm eta() { return {TermKind::eta, 0, {}}; }

OrderTypeTerm sum_of(std::vector<OrderTypeTerm> parts) {
    OrderTypeTerm t;
    t.kind = TermKind::sum;
    t.parts = std::move(parts);
    return t;
}

OrderTypeTerm prod_of(OrderTypeTerm left, OrderTypeTerm right) {
    OrderTypeTerm t;
    t.kind = TermKind::prod;
    t.parts.push_back(std::move(left));
    t.parts.push_back(std::move(right));
    return t;
}

bool structurally_equal(const OrderTypeTerm& a, const OrderTypeTerm& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == TermKind::fin) return a.count == b.count;
    if (a.parts.size() != b.parts.size()) return false;
    for (std::size_t i = 0; i < a.parts.size(); ++i)
        if (!structurally_equal(a.parts[i], b.parts[i])) return false;
    return true;
}

bool term_less(const OrderTypeTerm& a, const OrderTypeTerm& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.kind == TermKind::fin) return a.count < b.count;
    const std::size_t n = std::min(a.parts.size(), b.parts.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (term_less(a.parts[i], b.parts[i])) return true;
        if (term_less(b.parts[i], a.parts[i])) return false;
    }
    return a.parts.size() < b.parts.size();
}

namespace {

bool is_fin(const OrderTypeTerm& t, long long k) {
    return t.kind == TermKind::fin && t.count == k;
}

// One left-to-right contraction pass over a flattened sum; true if changed.
bool contract_once(std::vector<OrderTypeTerm>& p) {
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const TermKind a = p[i].kind, b = p[i + 1].kind;
        if (a == TermKind::fin && b == TermKind::fin) {
            p[i].count += p[i + 1].count;
            p.erase(p.begin() + i + 1);
            return true;
        }
        if (a == TermKind::fin && b == TermKind::omega) {
            p.erase(p.begin() + i);
            return true;
        }
        if (a == TermKind::omega_star && b == TermKind::fin) {
            p.erase(p.begin() + i + 1);
            return true;
        }
        if (a == TermKind::eta && b == TermKind::eta) {
            p.erase(p.begin() + i + 1);
            return true;
        }
        if (i + 2 < p.size() && a == TermKind::eta && is_fin(p[i + 1], 1) &&
            p[i + 2].kind == TermKind::eta) {
            p.erase(p.begin() + i + 1, p.begin() + i + 3);
            return true;
        }
    }
    return false;
}

OrderTypeTerm normalized_sum(std::vector<OrderTypeTerm> parts) {
    std::vector<OrderTypeTerm> flat;
    for (auto& q : parts) {
        if (q.kind == TermKind::sum)
            for (auto& r : q.parts) flat.push_back(std::move(r));
        else
            flat.push_back(std::move(q));
    }
    std::erase_if(flat, [](const OrderTypeTerm& q) { return is_fin(q, 0); });
    while (contract_once(flat)) {
    }
    if (flat.empty()) return fin(0);
    if (flat.size() == 1) return flat.front();
    return sum_of(std::move(flat));
}

} // namespace

OrderTypeTerm normalize(const OrderTypeTerm& t) {
    switch (t.kind) {
    case TermKind::fin:
    case TermKind::omega:
    case TermKind::omega_star:
    case TermKind::eta:
        return t;
    case TermKind::zeta:
        return sum_of({omega_star(), omega()});
    case TermKind::prod: {
        OrderTypeTerm l = normalize(t.parts[0]);
        OrderTypeTerm r = normalize(t.parts[1]);
        if (r.kind == TermKind::fin) {
            std::vector<OrderTypeTerm> copies;
            copies.reserve(r.count);
            for (long long i = 0; i < r.count; ++i) copies.push_back(l);
            return normalized_sum(std::move(copies));
        }
        return prod_of(std::move(l), std::move(r));
    }
    case TermKind::sum: {
        std::vector<OrderTypeTerm> kids;
        kids.reserve(t.parts.size());
        for (const auto& q : t.parts) kids.push_back(normalize(q));
        return normalized_sum(std::move(kids));
    }
    }
    throw std::logic_error("unreachable term kind");
}

bool equal_normalized(const OrderTypeTerm& a, const OrderTypeTerm& b) {
    return structurally_equal(normalize(a), normalize(b));
}

TermTraits term_traits(const OrderTypeTerm& t) {
    TermTraits r;
    switch (t.kind) {
    case TermKind::fin:
        r.empty = t.count == 0;
        r.finite = true;
        r.size = t.count;
        r.has_min = r.has_max = t.count >= 1;
        r.has_adjacent_pair = t.count >= 2;
        return r;
    case TermKind::omega:
        r.has_min = true;
        r.has_adjacent_pair = true;
        return r;
    case TermKind::omega_star:
        r.has_max = true;
        r.has_adjacent_pair = true;
        return r;
    case TermKind::zeta:
        r.has_adjacent_pair = true;
        return r;
    case TermKind::eta:
        return r; // dense, no extrema
    case TermKind::sum: {
        std::vector<TermTraits> ks;
        for (const auto& q : t.parts) {
            TermTraits k = term_traits(q);
            if (!k.empty) ks.push_back(k);
        }
        if (ks.empty()) {
            r.empty = true;
            r.finite = true;
            r.size = 0;
            return r;
        }
        r.finite = true;
        r.size = 0;
        for (const auto& k : ks) {
            if (!k.finite) {
                r.finite = false;
                r.size = -1;
                break;
            }
            r.size += k.size;
        }
        r.has_min = ks.front().has_min;
        r.has_max = ks.back().has_max;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i].has_adjacent_pair) r.has_adjacent_pair = true;
            if (i + 1 < ks.size() && ks[i].has_max && ks[i + 1].has_min)
                r.has_adjacent_pair = true; // junction pair
        }
        return r;
    }
    case TermKind::prod: {
        const TermTraits l = term_traits(t.parts[0]);
        const TermTraits rr = term_traits(t.parts[1]);
        if (l.empty || rr.empty) {
            r.empty = true;
            r.finite = true;
            r.size = 0;
            return r;
        }
        r.finite = l.finite && rr.finite;
        r.size = r.finite ? l.size * rr.size : -1;
        r.has_min = l.has_min && rr.has_min;
        r.has_max = l.has_max && rr.has_max;
        // adjacency inside a copy, or a junction between consecutive copies
        r.has_adjacent_pair =
            l.has_adjacent_pair ||
            (rr.has_adjacent_pair && l.has_max && l.has_min);
        return r;
    }
    }
    throw std::logic_error("unreachable term kind");
}

namespace {

void print(const OrderTypeTerm& t, std::string& out, bool parenthesize_sum) {
    switch (t.kind) {
    case TermKind::fin:
        out += "fin:" + std::to_string(t.count);
        return;
    case TermKind::omega:
        out += 'w';
        return;
    case TermKind::omega_star:
        out += "w*";
        return;
    case TermKind::zeta:
        out += 'z';
        return;
    case TermKind::eta:
        out += 'e';
        return;
    case TermKind::sum: {
        if (parenthesize_sum) out += '(';
        for (std::size_t i = 0; i < t.parts.size(); ++i) {
            if (i) out += '+';
            print(t.parts[i], out, true);
        }
        if (parenthesize_sum) out += ')';
        return;
    }
    case TermKind::prod:
        print(t.parts[0], out, true);
        out += '.';
        // right-hand products need parens to survive a left-assoc reparse
        if (t.parts[1].kind == TermKind::prod) {
            out += '(';
            print(t.parts[1], out, true);
            out += ')';
        } else {
            print(t.parts[1], out, true);
        }
        return;
    }
}

struct Parser {
    const std::string& s;
    std::size_t i = 0;

    void skip() {
        while (i < s.size() && std::isspace((unsigned char)s[i])) ++i;
    }
    bool eat(char c) {
        skip();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("order-type syntax error at position " +
                                    std::to_string(i) + ": " + what);
    }

    OrderTypeTerm atom() {
        skip();
        if (i >= s.size()) fail("unexpected end of input");
        if (eat('(')) {
            OrderTypeTerm t = sum();
            if (!eat(')')) fail("expected ')'");
            return t;
        }
        if (s[i] == 'w') {
            ++i;
            if (i < s.size() && s[i] == '*') {
                ++i;
                return omega_star();
            }
            return omega();
        }
        if (s[i] == 'z') {
            ++i;
            return zeta();
        }
        if (s[i] == 'e') {
            ++i;
            return eta();
        }
        if (s.compare(i, 4, "fin:") == 0) {
            i += 4;
            if (i >= s.size() || !std::isdigit((unsigned char)s[i]))
                fail("expected digits after fin:");
            long long k = 0;
            while (i < s.size() && std::isdigit((unsigned char)s[i])) {
                k = k * 10 + (s[i] - '0');
                if (k > 1000000000) fail("finite order too large");
                ++i;
            }
            return fin(k);
        }
        fail("expected w, w*, z, e, fin:k, or '('");
    }

    OrderTypeTerm product() {
        OrderTypeTerm t = atom();
        while (eat('.')) t = prod_of(std::move(t), atom());
        return t;
    }

    OrderTypeTerm sum() {
        std::vector<OrderTypeTerm> parts;
        parts.push_back(product());
        while (eat('+')) parts.push_back(product());
        if (parts.size() == 1) return parts.front();
        return sum_of(std::move(parts));
    }
};

} // namespace

std::string to_string(const OrderTypeTerm& t) {
    std::string out;
    print(t, out, false);
    return out;
}

OrderTypeTerm parse_term(const std::string& text) {
    Parser p{text};
    OrderTypeTerm t = p.sum();
    p.skip();
    if (p.i != text.size()) p.fail("trailing input");
    return t;
}

std::string to_string(Confidence c) {
    switch (c) {
    case Confidence::oracle_grade: return "oracle-grade";
    case Confidence::heuristic: return "heuristic";
    case Confidence::inconclusive: return "inconclusive";
    }
    return "?";
}

} // namespace chainspec
