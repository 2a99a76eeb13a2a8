// Poisson bracket of monomial Hamiltonians and truncated Lie-series
// composition with the time-1 flow of a generating Hamiltonian.
#pragma once

#include "kamnf/hampoly.hpp"

namespace kamnf {

// {H1,H2} with coefficient formula
//   B = -i sum_j (k_j K'_j - k'_j K_j) b_{akk'} B_{AKK'}
// on plain-basis polynomials of a common truncation. I(0) factors are inert;
// overflowing product keys are dropped into stats.
HamiltonianPoly bracket(const HamiltonianPoly& h1, const HamiltonianPoly& h2, OpStats* stats = nullptr);

// {N, P} for N = sum lambda_n |z_n|^2 in closed form: each key of P is
// scaled by i sum (k_n - k'_n) lambda_n (compensated summation, exact key
// set). This is the bracket the homological solve inverts.
HamiltonianPoly normal_form_bracket(std::span<const double> lambda, const HamiltonianPoly& p);

struct LieResult {
    HamiltonianPoly poly;
    int order_used = 0;
    double last_term_norm = 0.0;   // plain norm of the final series term
    OpStats stats;
};

// Truncated Lie series sum_{p<=order} ad_F^p H / p! with ad_F H = {H,F},
// i.e. the pullback H o X_F^1 up to the series tail. Terms that vanish
// early end the series before `order`.
LieResult lie_compose(const HamiltonianPoly& h, const HamiltonianPoly& f, int order,
                      double rho = 0.0, double theta = 0.5);

// Same series, but the order is raised past min_order until the last term's
// norm falls below tail_tol (or max_order is hit).
LieResult lie_compose_adaptive(const HamiltonianPoly& h, const HamiltonianPoly& f, int min_order,
                               int max_order, double tail_tol, double rho, double theta);

} // namespace kamnf
