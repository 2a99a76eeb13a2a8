#include "kamnf/kamdriver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "kamnf/rng.hpp"

namespace kamnf {

KamSchedule::KamSchedule(double rho0, double theta, double eps0, double c_theta, double sup_omega)
    : rho0_(rho0), theta_(theta), eps0_(eps0), c_theta_(c_theta), sup_omega_(sup_omega) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("schedule: theta must lie in (0,1)");
    if (!(rho0 > 0.0)) throw std::invalid_argument("schedule: rho must be > 0");
    if (!(eps0 >= 0.0 && eps0 < 1.0)) throw std::invalid_argument("schedule: epsilon must lie in [0,1)");
}

double KamSchedule::delta(int s) const {
    int clamped = std::max(s, 1);
    return rho0_ / (static_cast<double>(clamped) * clamped);
}

double KamSchedule::rho(int s) const {
    double r = rho0_;
    for (int t = 0; t < s; ++t) r += 3.0 * delta(t);
    return r;
}

double KamSchedule::eps(int s) const { return std::pow(eps0_, std::pow(1.5, s)); }

double KamSchedule::bs(int s) const {
    if (eps0_ == 0.0) return std::numeric_limits<double>::infinity();
    return std::log(1.0 / eps(s + 1)) / ((2.0 - std::pow(2.0, theta_)) * delta(s));
}

double KamSchedule::d(int s) const {
    double v = 0.0;
    for (int t = 1; t <= s; ++t) v += 1.0 / (std::numbers::pi * std::numbers::pi * t * t);
    return v;
}

double KamSchedule::lambda_factor(int s) const {
    if (eps0_ == 0.0) return 0.0;
    double log_inv = std::log(1.0 / eps(s + 1));
    return std::exp(-c_theta_ * std::pow(log_inv, 4.0 / (theta_ + 4.0)));
}

double KamSchedule::eta(int s) const {
    double e = 1.1 - sup_omega_;
    for (int t = 0; t < s; ++t) e *= lambda_factor(t) / 20.0;
    return e;
}

void KamSchedule::validate_domain(double r, int max_steps) const {
    for (int s = 0; s <= max_steps; ++s)
        if (!(rho(s) < 0.5 * r))
            throw std::invalid_argument("schedule: rho_s must stay below r/2 for every scheduled step");
}

double frequency_shift(const HamiltonianPoly& r1_avg, std::span<const double> i0, int n) {
    if (r1_avg.basis() != Basis::Adapted)
        throw std::invalid_argument("frequency_shift: adapted basis required");
    double shift = 0.0;
    for (const auto& [key, c] : r1_avg.terms()) {
        if (key.j_class() != 1 || !key.k.empty() || !key.kp.empty())
            throw std::invalid_argument("frequency_shift: input must be class-1 averaged (l = l' = 0)");
        if (key.b.get(n) != 1) continue;
        double val = c.real();
        for (const auto& [mode, e] : key.a.entries()) {
            if (mode > static_cast<int>(i0.size()))
                throw std::invalid_argument("frequency_shift: I(0) does not cover all modes");
            for (int i = 0; i < e; ++i) val *= i0[mode - 1];
        }
        shift += val;
    }
    return shift;
}

namespace {

double evaluate_i0_monomials(const HamiltonianPoly& avg, std::span<const double> i0) {
    double total = 0.0;
    for (const auto& [key, c] : avg.terms()) {
        double val = c.real();
        for (const auto& [mode, e] : key.a.entries())
            for (int i = 0; i < e; ++i) val *= i0[mode - 1];
        total += val;
    }
    return total;
}

// sampled sup over D_{s+1} of ||X_F-time-1 displacement||_{r,theta}, RK4
double sample_phi_displacement(const HamiltonianPoly& f_plain, std::span<const double> i0, double r,
                               double theta, double d_next, int samples, std::uint64_t seed) {
    if (f_plain.empty() || samples <= 0) return 0.0;
    int max_mode = f_plain.truncation().max_mode;
    double sup = 0.0;
    for (int j = 0; j < samples; ++j) {
        std::vector<Complex> z(max_mode);
        for (int n = 1; n <= max_mode; ++n) {
            std::uint64_t base = (static_cast<std::uint64_t>(j) * max_mode + (n - 1)) * 2;
            double lo = 0.5 + d_next, hi = 1.0 - d_next;
            double mod = (lo + rng::uniform01(seed, rng::kPhiSample, base) * (hi - lo)) *
                         std::exp(-r * std::pow(n, theta));
            double phase = 2.0 * std::numbers::pi * rng::uniform01(seed, rng::kPhiSample, base + 1);
            z[n - 1] = std::polar(mod, phase);
        }
        std::vector<Complex> z0 = z;
        const int steps = 20;
        const double h = 1.0 / steps;
        for (int t = 0; t < steps; ++t) {
            auto k1 = vector_field(f_plain, z, i0);
            std::vector<Complex> tmp(max_mode);
            for (int i = 0; i < max_mode; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
            auto k2 = vector_field(f_plain, tmp, i0);
            for (int i = 0; i < max_mode; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
            auto k3 = vector_field(f_plain, tmp, i0);
            for (int i = 0; i < max_mode; ++i) tmp[i] = z[i] + h * k3[i];
            auto k4 = vector_field(f_plain, tmp, i0);
            for (int i = 0; i < max_mode; ++i)
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (int n = 1; n <= max_mode; ++n)
            sup = std::max(sup, std::abs(z[n - 1] - z0[n - 1]) * std::exp(r * std::pow(n, theta)));
    }
    return sup;
}

} // namespace

KamState kam_step(const KamState& state, const KamSchedule& sched, const KamStepOptions& opts,
                  StepDiag* diag) {
    const int s = state.s;
    const double theta = sched.theta();
    const Truncation trunc = state.r.truncation();
    StepDiag local;
    StepDiag& dg = diag ? *diag : local;
    dg.s = s;
    dg.rho_next = sched.rho(s + 1);
    dg.bs = sched.bs(s);
    dg.eps_r0 = sched.eps(s + 1);
    dg.eps_r1 = std::pow(sched.eps(s + 1), 0.6);
    dg.eps_r2 = (1.0 + sched.d(s + 1)) * sched.eps0();
    dg.norms_before = norm_plus(state.r, sched.rho(s), theta);

    HamiltonianPoly r0 = class_part(state.r, 0);
    HamiltonianPoly r1 = class_part(state.r, 1);
    Averages av = averages(r0, r1);

    // fold N_+ = N + [R0] + [R1]: [R1] = sum_m shift_m J_m moves the
    // quadratic part, the I(0) content lands in the constant ledger
    const int max_mode = trunc.max_mode;
    std::vector<double> shifts(max_mode, 0.0);
    for (int n = 1; n <= max_mode; ++n) shifts[n - 1] = frequency_shift(av.r1_avg, state.i0, n);
    double const_inc = evaluate_i0_monomials(av.r0_avg, state.i0);
    for (int n = 1; n <= max_mode; ++n) const_inc -= shifts[n - 1] * state.i0[n - 1];

    FrequencyModel fm = FrequencyModel::from_lambda(state.lambda);
    SolveResult sr = solve(fm, av.r0_rest, av.r1_rest, sched.bs(s), theta);
    dg.deferred_keys = static_cast<long>(sr.deferred0.size() + sr.deferred1.size());
    dg.case1_keys = sr.case1_keys;
    dg.case2_keys = sr.case2_keys;

    if (opts.compute_residual)
        dg.residual_rel = residual(fm, sr.f0, sr.f1, r0, r1, av.r0_avg, av.r1_avg, sr.deferred0,
                                   sr.deferred1);

    HamiltonianPoly f_plain = to_plain(sr.f0) + to_plain(sr.f1);

    // Exact pullback of N + (R - [R0] - [R1]); [R0] is a constant and
    // composition-invariant, [R1]'s second-order dressing is added below.
    // The series is assembled with N kept symbolic: ad_F N = {N,F} in closed
    // form (the same divisor the solve inverted, so the retained keys cancel
    // to rounding), and every further ad brackets an eps-small term.
    HamiltonianPoly r_nr = state.r;
    r_nr -= av.r0_avg;
    r_nr -= av.r1_avg;
    HamiltonianPoly r_plus_plain = to_plain(r_nr);
    // [R1] folds into N_+ at zeroth order but still generates the flow's
    // higher-order dressing, so it joins the bracketed body
    HamiltonianPoly body = r_plus_plain + to_plain(av.r1_avg);

    double tail_tol = 0.01 * sched.eps(s + 1);
    OpStats stats;
    if (!f_plain.empty()) {
        HamiltonianPoly term = normal_form_bracket(state.lambda, f_plain);
        term += bracket(body, f_plain, &stats);
        r_plus_plain += term;
        dg.lie_order_used = 1;
        dg.lie_tail = term.empty() ? 0.0 : norm_rho(term, sched.rho(s + 1), theta);
        for (int p = 2; p <= opts.lie_max_order; ++p) {
            if (term.empty()) break;
            if (p > opts.lie_order && dg.lie_tail <= tail_tol) break;
            term = bracket(term, f_plain, &stats);
            term.scale(1.0 / p);
            r_plus_plain += term;
            dg.lie_order_used = p;
            dg.lie_tail = term.empty() ? 0.0 : norm_rho(term, sched.rho(s + 1), theta);
        }
    }
    // numerical floor: far below every measured tolerance, tallied as drop
    const double kCoeffFloor = 1e-32;
    stats.dropped_mass += r_plus_plain.prune(kCoeffFloor);
    HamiltonianPoly r_plus = to_adapted(r_plus_plain);

    KamState next;
    next.s = s + 1;
    next.lambda = state.lambda;
    for (int n = 1; n <= max_mode; ++n) next.lambda[n - 1] += shifts[n - 1];
    next.i0 = state.i0;
    next.r = std::move(r_plus);
    next.const_ledger = state.const_ledger + const_inc;

    dg.norms_after = norm_plus(next.r, sched.rho(s + 1), theta);
    dg.accepted = dg.norms_after.r0 <= dg.eps_r0 && dg.norms_after.r1 <= dg.eps_r1 &&
                  dg.norms_after.r2 <= dg.eps_r2;
    dg.dropped_mass = stats.dropped_mass;
    dg.dropped_count = stats.dropped_count;

    double shift_cap_product = 1.0;
    for (int m = 1; m <= max_mode; ++m)
        shift_cap_product /= 1.0 - std::exp(-opts.r * std::pow(m, theta));
    double eps_pow = std::pow(sched.eps0(), 0.6 * std::pow(1.5, s));
    for (int n = 1; n <= max_mode; ++n) {
        dg.max_shift = std::max(dg.max_shift, std::abs(shifts[n - 1]));
        double cap = eps_pow * shift_cap_product / n;
        if (cap > 0.0)
            dg.shift_bound_ratio = std::max(dg.shift_bound_ratio, std::abs(shifts[n - 1]) / cap);
    }

    if (opts.compute_phi)
        dg.phi_displacement = sample_phi_displacement(f_plain, state.i0, opts.r, theta,
                                                      sched.d(s + 1), opts.phi_samples, opts.seed);
    return next;
}

std::vector<double> freeze_parameters(
    const std::function<std::vector<double>(const std::vector<double>&)>& vtilde,
    std::span<const double> omega, double tol, double fd_step, FreezeReport* report) {
    const int n_modes = static_cast<int>(omega.size());
    std::vector<double> target(n_modes);
    for (int n = 1; n <= n_modes; ++n)
        target[n - 1] = 2.0 * n * omega[n - 1] + omega[n - 1] * omega[n - 1];

    std::vector<double> v = target;
    std::vector<double> vt = vtilde(v);

    Eigen::MatrixXd jac(n_modes, n_modes);
    for (int m = 0; m < n_modes; ++m) {
        std::vector<double> vp = v;
        vp[m] += fd_step;
        std::vector<double> vtp = vtilde(vp);
        for (int n = 0; n < n_modes; ++n) jac(n, m) = (vtp[n] - vt[n]) / fd_step;
    }
    double deviation = 0.0;
    for (int n = 0; n < n_modes; ++n) {
        double row = 0.0;
        for (int m = 0; m < n_modes; ++m) row += std::abs(jac(n, m) - (n == m ? 1.0 : 0.0));
        deviation = std::max(deviation, row);
    }
    FreezeReport local;
    FreezeReport& rep = report ? *report : local;
    rep.jacobian_deviation = deviation;
    if (deviation >= 0.5)
        throw FreezeError("freeze: Jacobian dominance ||dVtilde/dV - I|| >= 1/2", deviation);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    for (int iter = 0; iter < 50; ++iter) {
        double resid = 0.0;
        for (int n = 1; n <= n_modes; ++n)
            resid = std::max(resid, std::abs(std::sqrt(n * n + vt[n - 1]) - n - omega[n - 1]));
        rep.iterations = iter;
        rep.residual = resid;
        if (resid <= tol) return v;
        Eigen::VectorXd g(n_modes);
        for (int n = 0; n < n_modes; ++n) g(n) = vt[n] - target[n];
        Eigen::VectorXd dv = lu.solve(g);
        for (int n = 0; n < n_modes; ++n) v[n] = std::max(v[n] - dv(n), 0.0);
        vt = vtilde(v);
    }
    throw FreezeError("freeze: Newton iteration did not reach tolerance", deviation);
}

namespace {

KamState initial_state(const KamProblem& problem, const FrequencyModel& fm) {
    HamiltonianPoly h0 = problem.build(fm);
    if (h0.basis() != Basis::Plain) throw std::invalid_argument("run: build must produce a plain-basis H0");
    const Truncation trunc = h0.truncation();
    std::vector<double> lambda(trunc.max_mode, 0.0);
    HamiltonianPoly r_plain(Basis::Plain, trunc);
    for (const auto& [key, c] : h0.terms()) {
        if (key.a.empty() && key.k == key.kp && key.k.degree() == 1 && key.k.support_size() == 1) {
            lambda[key.k.entries().front().first - 1] = c.real();
        } else {
            r_plain.add_term(key, c);
        }
    }
    KamState st;
    st.s = 0;
    st.lambda = std::move(lambda);
    st.i0 = problem.i0;
    st.r = to_adapted(r_plain);
    return st;
}

} // namespace

KamRunResult run(const KamProblem& problem, const KamRunOptions& opts) {
    KamRunResult res;
    const int n_modes = static_cast<int>(problem.omega.size());
    double sup_omega = 0.0;
    for (double w : problem.omega) sup_omega = std::max(sup_omega, w);

    // V_0* solves (n + omega)^2 = n^2 + V with Vtilde_0 = id
    std::vector<double> v0(n_modes);
    for (int n = 1; n <= n_modes; ++n)
        v0[n - 1] = 2.0 * n * problem.omega[n - 1] + problem.omega[n - 1] * problem.omega[n - 1];
    res.v0star = v0;
    res.vstar_final = v0;

    KamState current = initial_state(problem, FrequencyModel::from_potential(v0));
    ClassNorms initial_norms;
    try {
        KamSchedule sched(opts.rho, opts.theta, opts.eps0, opts.c_theta, sup_omega);
        sched.validate_domain(opts.r, opts.max_steps);
        res.eps0 = opts.eps0;
        initial_norms = norm_plus(current.r, sched.rho(0), opts.theta);

        std::vector<double> vprev = v0;
        int consecutive_misses = 0;
        for (int s = 0; s < opts.max_steps; ++s) {
            if (initial_norms.max == 0.0 && s == 0) break;   // nothing to remove
            if (norm_plus(current.r, sched.rho(s), opts.theta).r0 == 0.0 &&
                class_part(current.r, 1).empty() && s > 0)
                break;

            // freeze: replay s+1 steps from H_0(V) as the concrete Vtilde map
            auto replay_lambda = [&](const std::vector<double>& v) {
                std::vector<double> clamped = v;
                for (double& x : clamped) x = std::max(x, 0.0);
                KamState st = initial_state(problem, FrequencyModel::from_potential(clamped));
                KamStepOptions quiet = opts.step;
                quiet.compute_phi = false;
                quiet.compute_residual = false;
                quiet.seed = opts.seed;
                for (int t = 0; t <= s; ++t) st = kam_step(st, sched, quiet);
                return st.lambda;
            };

            // dVtilde/dV = I + O(eps^0.6), so the fixed point
            // V <- target - (Vtilde(V) - V) contracts; convergence is judged
            // on the frequencies themselves
            std::vector<double> vstar = vprev;
            std::vector<double> lam_frozen;
            bool frozen = false;
            for (int iter = 0; iter < 30 && !frozen; ++iter) {
                std::vector<double> lam = replay_lambda(vstar);
                double resid = 0.0;
                for (int n = 1; n <= n_modes; ++n)
                    resid = std::max(resid, std::abs(lam[n - 1] - (n + problem.omega[n - 1])));
                if (resid <= opts.newton_tol) {
                    frozen = true;
                    lam_frozen = std::move(lam);
                    break;
                }
                for (int n = 1; n <= n_modes; ++n) {
                    double vt = lam[n - 1] * lam[n - 1] - static_cast<double>(n) * n;
                    double target =
                        2.0 * n * problem.omega[n - 1] + problem.omega[n - 1] * problem.omega[n - 1];
                    vstar[n - 1] = std::max(target - (vt - vstar[n - 1]), 0.0);
                }
            }
            if (!frozen)
                throw FreezeError("freeze: replay fixed point did not reach tolerance", 0.0);

            // directional Jacobian-dominance probe along the all-ones vector
            if (opts.jacobian_probe) {
                std::vector<double> shifted = vstar;
                for (double& x : shifted) x += opts.fd_step;
                std::vector<double> lam1 = replay_lambda(shifted);
                double probe = 0.0;
                for (int n = 1; n <= n_modes; ++n) {
                    double vt0 = lam_frozen[n - 1] * lam_frozen[n - 1] - static_cast<double>(n) * n;
                    double vt1 = lam1[n - 1] * lam1[n - 1] - static_cast<double>(n) * n;
                    probe = std::max(probe, std::abs((vt1 - vt0) / opts.fd_step - 1.0));
                }
                if (probe >= 0.5)
                    throw FreezeError("freeze: Jacobian dominance probe failed", probe);
            }

            // official chain at the frozen potential, diagnostics on the last step
            KamState st = initial_state(problem, FrequencyModel::from_potential(vstar));
            KamStepOptions quiet = opts.step;
            quiet.compute_phi = false;
            quiet.compute_residual = false;
            quiet.seed = opts.seed;
            for (int t = 0; t < s; ++t) st = kam_step(st, sched, quiet);
            KamStepOptions full = opts.step;
            full.seed = opts.seed;
            StepDiag diag;
            st = kam_step(st, sched, full, &diag);

            KamStepRecord record;
            record.diag = diag;
            record.vstar = vstar;
            record.v_drift = 0.0;
            for (int n = 0; n < n_modes; ++n)
                record.v_drift = std::max(record.v_drift, std::abs(vstar[n] - vprev[n]));
            record.r_snapshot = st.r;
            record.lambda_after = st.lambda;
            res.steps.push_back(std::move(record));

            current = std::move(st);
            vprev = vstar;
            res.vstar_final = vstar;

            if (!diag.accepted) {
                res.ok = false;
                res.failure_code = 4;
                res.failure_detail = "norm target missed at step " + std::to_string(s);
                if (++consecutive_misses >= 2) break;
            } else {
                consecutive_misses = 0;
            }
        }
        res.final_norms_10rho = norm_plus(current.r, 10.0 * opts.rho, opts.theta);
    } catch (const ResonanceError& e) {
        res.ok = false;
        res.failure_code = 3;
        res.failure_detail = e.what();
    } catch (const FreezeError& e) {
        res.ok = false;
        res.failure_code = 4;
        res.failure_detail = e.what();
    }

    res.lambda_final = current.lambda;
    res.r_final = current.r;
    res.const_ledger = current.const_ledger;
    for (int n = 0; n < n_modes; ++n)
        res.v_drift_total = std::max(res.v_drift_total, std::abs(res.vstar_final[n] - res.v0star[n]));
    return res;
}

} // namespace kamnf
