#include "kamnf/nlw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "kamnf/rng.hpp"

namespace kamnf {

void NlwConfig::validate(double rho) const {
    double gap = 2.0 - std::pow(2.0, theta);
    if (!(r > 100.0 * rho / gap))
        throw std::invalid_argument("nlw: domain requires r > 100 rho / (2 - 2^theta)");
    if (!(h * (max_mode + 1) < 0.5))
        throw std::invalid_argument("nlw: integrator step requires h * max lambda < 0.5");
    if (max_degree < 4) throw std::invalid_argument("nlw: maxDegree must admit the quartic term");
}

double coupling(int i, int j, int k, int l, const FrequencyModel& fm) {
    if (i < 1 || j < 1 || k < 1 || l < 1) throw std::invalid_argument("coupling: modes must be >= 1");
    int s = 0;
    for (int e2 : {-1, 1})
        for (int e3 : {-1, 1})
            for (int e4 : {-1, 1})
                if (i + e2 * j + e3 * k + e4 * l == 0) s += e2 * e3 * e4;
    if (s == 0) return 0.0;
    double denom = std::sqrt(fm.lambda(i) * fm.lambda(j) * fm.lambda(k) * fm.lambda(l));
    return static_cast<double>(s) / (2.0 * std::numbers::pi * denom);
}

HamiltonianPoly build_hamiltonian(const NlwConfig& cfg, const FrequencyModel& fm) {
    if (fm.max_mode() < cfg.max_mode)
        throw std::invalid_argument("build_hamiltonian: frequency model does not cover maxMode");
    Truncation trunc{cfg.max_mode, cfg.max_degree};
    std::vector<double> lambda(cfg.max_mode);
    for (int n = 1; n <= cfg.max_mode; ++n) lambda[n - 1] = fm.lambda(n);
    HamiltonianPoly h = normal_form(lambda, trunc);

    const int n_modes = cfg.max_mode;
    for (int i = 1; i <= n_modes; ++i)
        for (int j = 1; j <= n_modes; ++j)
            for (int k = 1; k <= n_modes; ++k)
                for (int l = 1; l <= n_modes; ++l) {
                    double g = coupling(i, j, k, l, fm);
                    if (g == 0.0) continue;
                    double base = cfg.eps / 16.0 * g;
                    int modes[4] = {i, j, k, l};
                    for (int mask = 0; mask < 16; ++mask) {
                        MultiIndex zk, zkp;
                        for (int f = 0; f < 4; ++f)
                            (mask & (1 << f)) ? zkp.bump(modes[f], 1) : zk.bump(modes[f], 1);
                        h.add_term({MultiIndex{}, MultiIndex{}, zk, zkp}, base);
                    }
                }
    h.prune();
    return h;
}

std::vector<double> initial_torus(const NlwConfig& cfg) {
    std::vector<double> i0(cfg.max_mode);
    for (int n = 1; n <= cfg.max_mode; ++n)
        i0[n - 1] = 0.75 * cfg.eps * cfg.eps * std::exp(-2.0 * cfg.r * std::pow(n, cfg.theta));
    return i0;
}

namespace {

// vector field flattened to per-mode term lists with I(0) powers folded in
struct CompiledField {
    int max_mode = 0;
    struct Term {
        Complex coeff;
        std::vector<std::pair<int, int>> zpow;
        std::vector<std::pair<int, int>> zbarpow;
    };
    std::vector<std::vector<Term>> per_mode;

    static CompiledField compile(const HamiltonianPoly& h, std::span<const double> i0) {
        HamiltonianPoly plain = h.basis() == Basis::Plain ? h : to_plain(h);
        CompiledField cf;
        cf.max_mode = plain.truncation().max_mode;
        if (i0.size() < static_cast<std::size_t>(cf.max_mode))
            throw std::invalid_argument("flow: I(0) does not cover all modes");
        cf.per_mode.resize(cf.max_mode);
        const Complex minus_i{0.0, -1.0};
        for (const auto& [key, c] : plain.terms()) {
            Complex folded = c;
            for (const auto& [mode, e] : key.a.entries())
                for (int t = 0; t < e; ++t) folded *= i0[mode - 1];
            if (folded == Complex{}) continue;
            for (const auto& [m, em] : key.kp.entries()) {
                Term term;
                term.coeff = minus_i * folded * static_cast<double>(em);
                term.zpow.assign(key.k.entries().begin(), key.k.entries().end());
                for (const auto& [mode, e] : key.kp.entries()) {
                    int p = (mode == m) ? e - 1 : e;
                    if (p > 0) term.zbarpow.push_back({mode, p});
                }
                cf.per_mode[m - 1].push_back(std::move(term));
            }
        }
        return cf;
    }

    void eval(const std::vector<Complex>& z, std::vector<Complex>& out) const {
        for (int n = 0; n < max_mode; ++n) {
            Complex acc = 0.0;
            for (const Term& t : per_mode[n]) {
                Complex v = t.coeff;
                for (const auto& [mode, e] : t.zpow)
                    for (int i = 0; i < e; ++i) v *= z[mode - 1];
                for (const auto& [mode, e] : t.zbarpow) {
                    Complex zb = std::conj(z[mode - 1]);
                    for (int i = 0; i < e; ++i) v *= zb;
                }
                acc += v;
            }
            out[n] = acc;
        }
    }
};

// one implicit-midpoint step; returns the midpoint state for reuse
std::vector<Complex> midpoint_step(const CompiledField& field, std::vector<Complex>& z, double h,
                                   double fp_tol) {
    const int n = field.max_mode;
    std::vector<Complex> mid = z, fx(n), prev(n);
    double scale = 1e-300;
    for (const Complex& v : z) scale = std::max(scale, std::abs(v));
    for (int iter = 0; iter < 60; ++iter) {
        field.eval(mid, fx);
        double delta = 0.0;
        for (int i = 0; i < n; ++i) {
            Complex next = z[i] + 0.5 * h * fx[i];
            delta = std::max(delta, std::abs(next - mid[i]));
            mid[i] = next;
        }
        if (delta <= fp_tol * scale) {
            for (int i = 0; i < n; ++i) z[i] = 2.0 * mid[i] - z[i];
            return mid;
        }
    }
    throw IntegratorError("flow: implicit midpoint fixed point did not converge");
}

} // namespace

Trajectory flow(const HamiltonianPoly& h_poly, std::vector<Complex> z0, std::span<const double> i0,
                double h, double horizon, int record_stride, double fp_tol) {
    if (h == 0.0 || horizon / h < 0.0)
        throw std::invalid_argument("flow: step and horizon must share a sign");
    if (record_stride < 1) throw std::invalid_argument("flow: record stride must be >= 1");
    CompiledField field = CompiledField::compile(h_poly, i0);
    if (z0.size() != static_cast<std::size_t>(field.max_mode))
        throw std::invalid_argument("flow: state does not cover all modes up to maxMode");
    Trajectory traj;
    traj.h = h;
    traj.stride = record_stride;
    long steps = static_cast<long>(std::llround(horizon / h));
    traj.times.push_back(0.0);
    traj.states.push_back(z0);
    std::vector<Complex> z = std::move(z0);
    for (long step = 1; step <= steps; ++step) {
        midpoint_step(field, z, h, fp_tol);
        if (step % record_stride == 0 || step == steps) {
            traj.times.push_back(step * h);
            traj.states.push_back(z);
        }
    }
    return traj;
}

namespace {

double fit_slope(const std::vector<double>& t, const std::vector<double>& y) {
    double n = static_cast<double>(t.size());
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= n;
    ym /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        num += (t[i] - tm) * (y[i] - ym);
        den += (t[i] - tm) * (t[i] - tm);
    }
    return num / den;
}

} // namespace

TorusReport torus_residual(const HamiltonianPoly& h_star, std::span<const double> i0,
                           std::span<const double> target_freqs, double h, double horizon,
                           std::uint64_t seed) {
    const int n_modes = h_star.truncation().max_mode;
    std::vector<Complex> z0(n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        double phase = 2.0 * std::numbers::pi * rng::uniform01(seed, rng::kTorusPhase, n);
        z0[n - 1] = std::polar(std::sqrt(i0[n - 1]), phase);
    }
    // a few thousand records suffice for drift and the phase fit
    long steps = static_cast<long>(std::llround(horizon / h));
    int stride = std::max(1L, steps / 2000);
    HamiltonianPoly plain = h_star.basis() == Basis::Plain ? h_star : to_plain(h_star);
    Trajectory traj = flow(plain, z0, i0, h, horizon, stride);

    TorusReport rep;
    std::vector<std::vector<double>> phases(n_modes);
    for (const auto& state : traj.states) {
        for (int n = 0; n < n_modes; ++n) {
            double drift = std::abs(std::norm(state[n]) - i0[n]) / i0[n];
            rep.max_action_drift = std::max(rep.max_action_drift, drift);
        }
    }
    for (int n = 0; n < n_modes; ++n) {
        std::vector<double> phi;
        phi.reserve(traj.states.size());
        double prev = std::arg(traj.states.front()[n]);
        double unwrapped = prev;
        for (const auto& state : traj.states) {
            double raw = std::arg(state[n]);
            double d = raw - prev;
            while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
            while (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
            unwrapped += d;
            prev = raw;
            phi.push_back(unwrapped);
        }
        // remove the duplicated first sample's zero increment
        phi.front() = std::arg(traj.states.front()[n]);
        double freq = -fit_slope(traj.times, phi);
        rep.fitted_freqs.push_back(freq);
        rep.freq_error = std::max(rep.freq_error, std::abs(freq - target_freqs[n]));
    }
    Complex e0 = evaluate(plain, traj.states.front(), i0);
    double scale = std::max(std::abs(e0), 1e-300);
    for (std::size_t j = 0; j < traj.states.size(); j += 10) {
        Complex e = evaluate(plain, traj.states[j], i0);
        rep.energy_drift = std::max(rep.energy_drift, std::abs(e - e0) / scale);
    }
    return rep;
}

StabilityReport linear_stability(const HamiltonianPoly& h_star, std::span<const double> i0,
                                 std::span<const double> target_freqs, double h, std::uint64_t seed) {
    const int n_modes = h_star.truncation().max_mode;
    HamiltonianPoly plain = h_star.basis() == Basis::Plain ? h_star : to_plain(h_star);

    // second derivatives: A(n,m) = d2H/dzbar_n dz_m, B(n,m) = d2H/dzbar_n dzbar_m
    std::vector<std::vector<HamiltonianPoly>> dA(n_modes), dB(n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        HamiltonianPoly dn = derivative_zbar(plain, n);
        for (int m = 1; m <= n_modes; ++m) {
            dA[n - 1].push_back(derivative_z(dn, m));
            dB[n - 1].push_back(derivative_zbar(dn, m));
        }
    }

    double lam_max = 0.0;
    for (double f : target_freqs) lam_max = std::max(lam_max, f);
    StabilityReport rep;
    rep.period = 2.0 * std::numbers::pi / lam_max;
    long steps = std::max(1L, static_cast<long>(std::llround(rep.period / h)));
    double h_eff = rep.period / static_cast<double>(steps);

    std::vector<Complex> z(n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        double phase = 2.0 * std::numbers::pi * rng::uniform01(seed, rng::kTorusPhase, n);
        z[n - 1] = std::polar(std::sqrt(i0[n - 1]), phase);
    }
    CompiledField field = CompiledField::compile(plain, i0);

    const int dim = 2 * n_modes;
    Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd mvar(dim, dim);
    std::vector<Complex> zmid(n_modes);
    for (long step = 0; step < steps; ++step) {
        zmid = midpoint_step(field, z, h_eff, 1e-14);
        // variational matrix at the midpoint state:
        //   dxi/dt  = (A2+B2) xi + (A1-B1) eta
        //   deta/dt = -(A1+B1) xi + (A2-B2) eta
        for (int n = 0; n < n_modes; ++n)
            for (int m = 0; m < n_modes; ++m) {
                Complex a = evaluate(dA[n][m], zmid, i0);
                Complex b = evaluate(dB[n][m], zmid, i0);
                mvar(n, m) = a.imag() + b.imag();
                mvar(n, n_modes + m) = a.real() - b.real();
                mvar(n_modes + n, m) = -(a.real() + b.real());
                mvar(n_modes + n, n_modes + m) = a.imag() - b.imag();
            }
        Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(dim, dim) - 0.5 * h_eff * mvar;
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(dim, dim) + 0.5 * h_eff * mvar;
        psi = lhs.partialPivLu().solve(rhs * psi);
    }

    Eigen::EigenSolver<Eigen::MatrixXd> eig(psi);
    for (int i = 0; i < dim; ++i) {
        double modulus = std::abs(eig.eigenvalues()(i));
        rep.moduli.push_back(modulus);
        rep.max_deviation = std::max(rep.max_deviation, std::abs(modulus - 1.0));
    }
    std::sort(rep.moduli.begin(), rep.moduli.end());
    return rep;
}

} // namespace kamnf
