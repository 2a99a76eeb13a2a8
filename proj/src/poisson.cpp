#include "kamnf/poisson.hpp"

#include <stdexcept>

namespace kamnf {

HamiltonianPoly bracket(const HamiltonianPoly& h1, const HamiltonianPoly& h2, OpStats* stats) {
    if (h1.basis() != Basis::Plain || h2.basis() != Basis::Plain)
        throw std::invalid_argument("bracket: inputs must be plain basis");
    if (!(h1.truncation() == h2.truncation()))
        throw std::invalid_argument("bracket: truncation mismatch");
    HamiltonianPoly out(Basis::Plain, h1.truncation());
    const Complex minus_i{0.0, -1.0};
    for (const auto& [key1, c1] : h1.terms()) {
        for (const auto& [key2, c2] : h2.terms()) {
            // modes j where k_j K'_j - k'_j K_j can be nonzero
            auto visit = [&](int j) {
                long factor = static_cast<long>(key1.k.get(j)) * key2.kp.get(j) -
                              static_cast<long>(key1.kp.get(j)) * key2.k.get(j);
                if (factor == 0) return;
                TermKey key{key1.a.plus(key2.a), MultiIndex{}, key1.k.plus(key2.k),
                            key1.kp.plus(key2.kp)};
                key.k.bump(j, -1);
                key.kp.bump(j, -1);
                out.add_term_or_drop(key, minus_i * static_cast<double>(factor) * c1 * c2, stats);
            };
            // merge supports of (k1, k'1) against (k2, k'2)
            auto it1k = key1.k.entries().begin(), it1p = key1.kp.entries().begin();
            int last = 0;
            auto step = [&](int j) {
                if (j != last) {
                    if (key2.k.get(j) != 0 || key2.kp.get(j) != 0) visit(j);
                    last = j;
                }
            };
            while (it1k != key1.k.entries().end() || it1p != key1.kp.entries().end()) {
                if (it1p == key1.kp.entries().end() ||
                    (it1k != key1.k.entries().end() && it1k->first <= it1p->first)) {
                    step(it1k->first);
                    ++it1k;
                } else {
                    step(it1p->first);
                    ++it1p;
                }
            }
        }
    }
    out.prune();
    return out;
}

HamiltonianPoly normal_form_bracket(std::span<const double> lambda, const HamiltonianPoly& p) {
    if (p.basis() != Basis::Plain)
        throw std::invalid_argument("normal_form_bracket: input must be plain basis");
    HamiltonianPoly out(Basis::Plain, p.truncation());
    for (const auto& [key, c] : p.terms()) {
        // same split the solver divides by: exact integer part plus a
        // compensated sum over the omega parts
        long int_part = 0;
        double sum = 0.0, comp = 0.0;
        auto accumulate = [&](int mode, int sign_count) {
            if (mode > static_cast<int>(lambda.size()))
                throw std::invalid_argument("normal_form_bracket: lambda does not cover all modes");
            int_part += static_cast<long>(sign_count) * mode;
            double term = sign_count * (lambda[mode - 1] - mode);
            double y = term - comp;
            double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        };
        for (const auto& [mode, e] : key.k.entries()) accumulate(mode, e);
        for (const auto& [mode, e] : key.kp.entries()) accumulate(mode, -e);
        double div = static_cast<double>(int_part) + sum;
        if (div != 0.0) out.add_term(key, Complex{0.0, 1.0} * div * c);
    }
    return out;
}

namespace {

LieResult lie_series(const HamiltonianPoly& h, const HamiltonianPoly& f, int min_order,
                     int max_order, double tail_tol, double rho, double theta) {
    if (min_order < 0) throw std::invalid_argument("lie_compose: order must be >= 0");
    LieResult res;
    res.poly = h;
    HamiltonianPoly term = h;
    for (int p = 1; p <= max_order; ++p) {
        term = bracket(term, f, &res.stats);
        term.scale(1.0 / p);
        res.order_used = p;
        res.last_term_norm = term.empty() ? 0.0 : norm_rho(term, rho, theta);
        if (term.empty()) break;
        res.poly += term;
        if (p >= min_order && res.last_term_norm <= tail_tol) break;
    }
    return res;
}

} // namespace

LieResult lie_compose(const HamiltonianPoly& h, const HamiltonianPoly& f, int order, double rho,
                      double theta) {
    return lie_series(h, f, order, order, 0.0, rho, theta);
}

LieResult lie_compose_adaptive(const HamiltonianPoly& h, const HamiltonianPoly& f, int min_order,
                               int max_order, double tail_tol, double rho, double theta) {
    return lie_series(h, f, min_order, max_order, tail_tol, rho, theta);
}

} // namespace kamnf
