// Truncated nonlinear-wave Hamiltonian in the Dirichlet eigenbasis, torus
// actions, the verification integrator, and the linear-stability probe.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kamnf/hampoly.hpp"
#include "kamnf/resonance.hpp"

namespace kamnf {

struct NlwConfig {
    int max_mode = 6;
    int max_degree = 6;
    double eps = 1e-6;
    double r = 1.0;
    double theta = 0.5;
    double h = 5e-4;               // integrator step
    double horizon = 100.0;        // T

    void validate(double rho) const;   // r > 100 rho / (2 - 2^theta), h max-lambda < 0.5
};

struct IntegratorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// G_ijkl = (lambda_i lambda_j lambda_k lambda_l)^{-1/2} int_0^pi
// phi_i phi_j phi_k phi_l dx with phi_n = sqrt(2/pi) sin(nx); the integral
// is S/(2 pi) where S is the signed count of sign patterns i±j±k±l = 0.
double coupling(int i, int j, int k, int l, const FrequencyModel& fm);

// H = sum lambda_n z_n zbar_n
//   + (eps/16) sum_{±i±j±k±l=0} G_ijkl (z_i+zbar_i)(z_j+zbar_j)(z_k+zbar_k)(z_l+zbar_l)
HamiltonianPoly build_hamiltonian(const NlwConfig& cfg, const FrequencyModel& fm);

// I_n(0) = (3/4) eps^2 e^{-2 r n^theta}
std::vector<double> initial_torus(const NlwConfig& cfg);

struct Trajectory {
    double h = 0.0;
    int stride = 1;                      // recording stride in steps
    std::vector<double> times;
    std::vector<std::vector<Complex>> states;
};

// Implicit-midpoint trajectory of zdot = -i dH/dzbar; fixed-point inner
// solve, IntegratorError on nonconvergence.
Trajectory flow(const HamiltonianPoly& h_poly, std::vector<Complex> z0, std::span<const double> i0,
                double h, double horizon, int record_stride = 1, double fp_tol = 1e-14);

struct TorusReport {
    double max_action_drift = 0.0;       // max_n max_t ||z_n|^2 - I_n(0)| / I_n(0)
    double freq_error = 0.0;             // max_n |fit - (n + omega_n)|
    std::vector<double> fitted_freqs;
    double energy_drift = 0.0;           // relative |H(z(t)) - H(z(0))|
};

// Starts on |z_n|^2 = I_n(0) with seeded phases and measures invariance and
// the least-squares phase-fit frequencies against the targets.
TorusReport torus_residual(const HamiltonianPoly& h_star, std::span<const double> i0,
                           std::span<const double> target_freqs, double h, double horizon,
                           std::uint64_t seed);

struct StabilityReport {
    std::vector<double> moduli;          // Floquet multipliers' absolute values
    double max_deviation = 0.0;          // max | |mu| - 1 |
    double period = 0.0;
};

// Monodromy of the variational equations over one period of the fastest
// mode, integrated along the torus trajectory.
StabilityReport linear_stability(const HamiltonianPoly& h_star, std::span<const double> i0,
                                 std::span<const double> target_freqs, double h, std::uint64_t seed);

} // namespace kamnf
