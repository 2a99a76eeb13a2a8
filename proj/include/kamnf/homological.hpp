// Averaging, small-divisor solution of the homological equations, and the
// residual identity check.
#pragma once

#include "kamnf/hampoly.hpp"
#include "kamnf/resonance.hpp"

namespace kamnf {

struct Averages {
    HamiltonianPoly r0_avg;    // class-0 keys with l = l' = 0 (pure I(0) monomials)
    HamiltonianPoly r1_avg;    // class-1 keys with l = l' = 0 (J_m times I(0) monomials)
    HamiltonianPoly r0_rest;   // the parts to be killed
    HamiltonianPoly r1_rest;
};

Averages averages(const HamiltonianPoly& r0, const HamiltonianPoly& r1);

struct SolveResult {
    HamiltonianPoly f0;
    HamiltonianPoly f1;
    HamiltonianPoly deferred0;   // keys outside the truncation rule, untouched
    HamiltonianPoly deferred1;
    long case1_keys = 0;         // n_3* < n_2* (condition-2 regime)
    long case2_keys = 0;
};

// F = i B / sum (l_n - l'_n) lambda_n on every retained key; the factor i
// makes {N,F} + R - [R] vanish exactly under the bracket sign convention.
// Keys whose residual rearrangement violates sum_{i>=3} n_i^theta <= Bs are
// deferred instead of solved. An exactly zero divisor raises ResonanceError.
SolveResult solve(const FrequencyModel& fm, const HamiltonianPoly& r0_nonres,
                  const HamiltonianPoly& r1_nonres, double bs, double theta);

// Max coefficient magnitude of {N,F} + R0 + R1 - [R0] - [R1] over the
// retained keys, relative to the input coefficient scale.
double residual(const FrequencyModel& fm, const HamiltonianPoly& f0, const HamiltonianPoly& f1,
                const HamiltonianPoly& r0, const HamiltonianPoly& r1, const HamiltonianPoly& r0_avg,
                const HamiltonianPoly& r1_avg, const HamiltonianPoly& deferred0,
                const HamiltonianPoly& deferred1);

} // namespace kamnf
