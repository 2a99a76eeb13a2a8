#include "kamnf/homological.hpp"

#include <algorithm>
#include <cmath>

namespace kamnf {

namespace {

void require_class(const HamiltonianPoly& h, int cls, const char* what) {
    if (h.basis() != Basis::Adapted) throw std::invalid_argument(std::string(what) + ": adapted basis required");
    for (const auto& [key, c] : h.terms())
        if (key.j_class() != cls) throw std::invalid_argument(std::string(what) + ": wrong J class");
}

bool is_averaged(const TermKey& key) { return key.k.empty() && key.kp.empty(); }

} // namespace

Averages averages(const HamiltonianPoly& r0, const HamiltonianPoly& r1) {
    require_class(r0, 0, "averages(R0)");
    require_class(r1, 1, "averages(R1)");
    Averages out;
    out.r0_avg = HamiltonianPoly(Basis::Adapted, r0.truncation());
    out.r0_rest = HamiltonianPoly(Basis::Adapted, r0.truncation());
    out.r1_avg = HamiltonianPoly(Basis::Adapted, r1.truncation());
    out.r1_rest = HamiltonianPoly(Basis::Adapted, r1.truncation());
    for (const auto& [key, c] : r0.terms())
        (is_averaged(key) ? out.r0_avg : out.r0_rest).add_term(key, c);
    for (const auto& [key, c] : r1.terms())
        (is_averaged(key) ? out.r1_avg : out.r1_rest).add_term(key, c);
    return out;
}

namespace {

// divisor split into the exact integer part and the compensated omega part
double divisor_split(const FrequencyModel& fm, const SignedIndex& l, long* int_part) {
    long m = 0;
    double sum = 0.0, comp = 0.0;
    for (const auto& [mode, e] : l.entries()) {
        m += static_cast<long>(e) * mode;
        double term = e * fm.omega(mode);
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    if (int_part) *int_part = m;
    return sum;
}

double tail_theta_sum(const TermKey& key, double theta) {
    Rearrangement seq = rearrangement(key.a, key.k, key.kp);
    double tail = 0.0;
    for (std::size_t i = 2; i < seq.size(); ++i) tail += std::pow(seq[i], theta);
    return tail;
}

} // namespace

SolveResult solve(const FrequencyModel& fm, const HamiltonianPoly& r0_nonres,
                  const HamiltonianPoly& r1_nonres, double bs, double theta) {
    require_class(r0_nonres, 0, "solve(R0)");
    require_class(r1_nonres, 1, "solve(R1)");
    SolveResult out;
    out.f0 = HamiltonianPoly(Basis::Adapted, r0_nonres.truncation());
    out.deferred0 = HamiltonianPoly(Basis::Adapted, r0_nonres.truncation());
    out.f1 = HamiltonianPoly(Basis::Adapted, r1_nonres.truncation());
    out.deferred1 = HamiltonianPoly(Basis::Adapted, r1_nonres.truncation());

    auto divide = [&](const HamiltonianPoly& src, HamiltonianPoly& f, HamiltonianPoly& deferred) {
        for (const auto& [key, c] : src.terms()) {
            if (is_averaged(key))
                throw std::invalid_argument("solve: averaged key (k = k') belongs to averages");
            if (tail_theta_sum(key, theta) > bs) {
                deferred.add_term(key, c);
                continue;
            }
            SignedIndex l = SignedIndex::difference(key.k, key.kp);
            long int_part = 0;
            double omega_part = divisor_split(fm, l, &int_part);
            if (int_part == 0 && std::abs(omega_part) < 1e-300) throw ResonanceError(l);
            double div = static_cast<double>(int_part) + omega_part;
            Rearrangement star = starred_rearrangement(l);
            if (star.size() >= 3 && star[2] < star[1])
                ++out.case1_keys;
            else
                ++out.case2_keys;
            f.add_term(key, Complex{0.0, 1.0} * c / div);
        }
    };
    divide(r0_nonres, out.f0, out.deferred0);
    divide(r1_nonres, out.f1, out.deferred1);
    return out;
}

double residual(const FrequencyModel& fm, const HamiltonianPoly& f0, const HamiltonianPoly& f1,
                const HamiltonianPoly& r0, const HamiltonianPoly& r1, const HamiltonianPoly& r0_avg,
                const HamiltonianPoly& r1_avg, const HamiltonianPoly& deferred0,
                const HamiltonianPoly& deferred1) {
    // {N, F} in closed form: the J factors commute with N, so per key
    // {N,F} = i (sum (l_n - l'_n) lambda_n) F, with the solver's divisor.
    HamiltonianPoly p = r0 + r1;
    p -= r0_avg;
    p -= r1_avg;
    p -= deferred0;
    p -= deferred1;
    for (const HamiltonianPoly* f : {&f0, &f1})
        for (const auto& [key, c] : f->terms()) {
            SignedIndex l = SignedIndex::difference(key.k, key.kp);
            long int_part = 0;
            double omega_part = divisor_split(fm, l, &int_part);
            double div = static_cast<double>(int_part) + omega_part;
            p.add_term(key, Complex{0.0, 1.0} * div * c);
        }
    double scale = std::max({r0.max_abs_coeff(), r1.max_abs_coeff(), 1e-300});
    return p.max_abs_coeff() / scale;
}

} // namespace kamnf
