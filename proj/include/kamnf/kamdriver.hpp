// Newton-type KAM iteration: parameter schedule, one step (average, solve,
// compose, renormalize), frequency-shift accounting, parameter freezing by
// replaying the pipeline at perturbed potentials, and the outer loop.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kamnf/homological.hpp"
#include "kamnf/poisson.hpp"

namespace kamnf {

// Step s (0-based) maps H_s -> H_{s+1}. The first step uses delta = rho
// (the 1/s^2 shrinkage starts at s = 1).
class KamSchedule {
public:
    KamSchedule(double rho0, double theta, double eps0, double c_theta, double sup_omega);

    double rho0() const { return rho0_; }
    double theta() const { return theta_; }
    double eps0() const { return eps0_; }

    double delta(int s) const;     // rho / max(s,1)^2
    double rho(int s) const;       // rho_{s+1} = rho_s + 3 delta_s
    double eps(int s) const;       // eps0^{(3/2)^s}
    double bs(int s) const;        // ln(1/eps_{s+1}) / ((2-2^theta) delta_s)
    double d(int s) const;         // d_{s+1} = d_s + 1/(pi^2 (s+1)^2), < 1/6
    double lambda_factor(int s) const;   // e^{-C(theta) (ln 1/eps_{s+1})^{4/(theta+4)}}
    double eta(int s) const;       // eta_0 = 1.1 - sup omega, eta_{s+1} = lambda_s eta_s / 20

    // rho_s < r/2 for every scheduled step
    void validate_domain(double r, int max_steps) const;

private:
    double rho0_, theta_, eps0_, c_theta_, sup_omega_;
};

struct KamState {
    int s = 0;
    std::vector<double> lambda;    // current normal-form frequencies
    std::vector<double> i0;        // torus actions
    HamiltonianPoly r;             // perturbation, adapted basis
    double const_ledger = 0.0;     // absorbed constants ([R0] and J folds)
};

struct KamStepOptions {
    int lie_order = 6;             // raised automatically until the tail is small
    int lie_max_order = 16;
    double r = 1.0;                // amplitude-domain radius for phi sampling
    int phi_samples = 100;
    std::uint64_t seed = 1;
    bool compute_phi = true;
    bool compute_residual = true;
};

struct StepDiag {
    int s = 0;
    double rho_next = 0.0, bs = 0.0;
    ClassNorms norms_before, norms_after;
    double eps_r0 = 0.0, eps_r1 = 0.0, eps_r2 = 0.0;   // targets for the new state
    bool accepted = false;
    double residual_rel = 0.0;
    double max_shift = 0.0;
    double shift_bound_ratio = 0.0;    // measured |shift_n| n / (eps_s^0.6 P(r,theta))
    double dropped_mass = 0.0;
    long dropped_count = 0;
    int lie_order_used = 0;
    double lie_tail = 0.0;
    long deferred_keys = 0;
    double phi_displacement = 0.0;     // sampled sup ||Phi - id||_{r,theta}
    long case1_keys = 0, case2_keys = 0;
};

// One KAM step at fixed potential: R0/R1 killed up to averages and the
// Bs-truncation, N_+ = N + [R0] + [R1] folded numerically, remainder
// composed exactly through the time-1 Lie transform.
KamState kam_step(const KamState& state, const KamSchedule& sched, const KamStepOptions& opts,
                  StepDiag* diag = nullptr);

// shift_n = sum_a B^{(n)}_{a00} prod I_m(0)^{a_m} from a class-1 averaged
// polynomial (J_m times pure I(0) monomials).
double frequency_shift(const HamiltonianPoly& r1_avg, std::span<const double> i0, int n);

struct FreezeReport {
    int iterations = 0;
    double jacobian_deviation = 0.0;   // ||dVtilde/dV - I||_{inf->inf}
    double residual = 0.0;             // max_n |sqrt(n^2+Vtilde_n) - n - omega_n|
};

struct FreezeError : std::runtime_error {
    double jacobian_deviation;
    FreezeError(const std::string& what, double dev)
        : std::runtime_error(what), jacobian_deviation(dev) {}
};

// Newton solve of sqrt(n^2 + Vtilde_n(V*)) = n + omega_n with a forward
// finite-difference Jacobian; requires ||dVtilde/dV - I|| < 1/2.
std::vector<double> freeze_parameters(
    const std::function<std::vector<double>(const std::vector<double>&)>& vtilde,
    std::span<const double> omega, double tol, double fd_step = 1e-7, FreezeReport* report = nullptr);

struct KamProblem {
    // H_0 at a given potential; the quadratic diagonal must match the model.
    std::function<HamiltonianPoly(const FrequencyModel&)> build;
    std::vector<double> i0;
    std::vector<double> omega;     // prescribed frequencies minus n
};

struct KamRunOptions {
    int max_steps = 3;
    double eps0 = 1e-6;            // schedule base
    double rho = 0.005;
    double theta = 0.5;
    double r = 1.0;
    double c_theta = 1.0;
    double newton_tol = 1e-12;
    double fd_step = 1e-7;
    bool jacobian_probe = true;    // one extra replay per freeze
    std::uint64_t seed = 1;
    KamStepOptions step;
};

struct KamStepRecord {
    StepDiag diag;
    std::vector<double> vstar;
    double v_drift = 0.0;              // ||V*_{s+1} - V*_s||_inf
    HamiltonianPoly r_snapshot;        // adapted remainder after the step
    std::vector<double> lambda_after;
};

struct KamRunResult {
    bool ok = true;
    int failure_code = 0;              // 0 ok, 3 resonance, 4 contraction/freeze
    std::string failure_detail;
    double eps0 = 0.0;
    std::vector<double> lambda_final;
    HamiltonianPoly r_final;           // adapted
    double const_ledger = 0.0;
    std::vector<double> v0star, vstar_final;
    double v_drift_total = 0.0;
    std::vector<KamStepRecord> steps;
    ClassNorms final_norms_10rho;      // reported against eps^{0.4}
};

// Outer loop: step, then freeze the potential so the frequencies return to
// n + omega_n, replaying the pipeline from H_0(V) as the concrete Vtilde map.
KamRunResult run(const KamProblem& problem, const KamRunOptions& opts);

} // namespace kamnf
