// Test-only oracles, kept independent of the library code paths they check:
// a from-scratch monomial calculus for bracket equivalence, Simpson
// quadrature for the coupling integrals, a subset-sum check for signed
// zero-sum admissibility, an RK4 integrator, an independent class-norm
// recomputation, and deterministic random-polynomial generators.
#pragma once

#include <bitset>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "kamnf/hampoly.hpp"
#include "kamnf/rng.hpp"

namespace oracles {

using kamnf::Basis;
using kamnf::Complex;
using kamnf::HamiltonianPoly;
using kamnf::MultiIndex;
using kamnf::TermKey;
using kamnf::Truncation;

// ----- independent monomial calculus (maps keyed by (a,k,k') vectors) -----

struct Mono {
    std::vector<std::pair<int, int>> a, k, kp;
    bool operator<(const Mono& o) const {
        if (a != o.a) return a < o.a;
        if (k != o.k) return k < o.k;
        return kp < o.kp;
    }
};

using Poly = std::map<Mono, Complex>;

inline Poly to_oracle(const HamiltonianPoly& h) {
    Poly p;
    for (const auto& [key, c] : h.terms()) {
        Mono m{key.a.entries(), key.k.entries(), key.kp.entries()};
        p[m] += c;
    }
    return p;
}

inline void oracle_add(Poly& p, const Mono& m, Complex c) {
    auto it = p.find(m);
    if (it == p.end())
        p[m] = c;
    else
        it->second += c;
}

inline std::vector<std::pair<int, int>> vec_bump(std::vector<std::pair<int, int>> v, int mode,
                                                 int delta) {
    for (auto it = v.begin(); it != v.end(); ++it) {
        if (it->first == mode) {
            it->second += delta;
            if (it->second == 0) v.erase(it);
            return v;
        }
        if (it->first > mode) {
            v.insert(it, {mode, delta});
            return v;
        }
    }
    v.push_back({mode, delta});
    return v;
}

inline int vec_get(const std::vector<std::pair<int, int>>& v, int mode) {
    for (const auto& [m, e] : v)
        if (m == mode) return e;
    return 0;
}

inline Poly oracle_dz(const Poly& p, int mode) {
    Poly out;
    for (const auto& [m, c] : p) {
        int e = vec_get(m.k, mode);
        if (e == 0) continue;
        oracle_add(out, {m.a, vec_bump(m.k, mode, -1), m.kp}, c * static_cast<double>(e));
    }
    return out;
}

inline Poly oracle_dzbar(const Poly& p, int mode) {
    Poly out;
    for (const auto& [m, c] : p) {
        int e = vec_get(m.kp, mode);
        if (e == 0) continue;
        oracle_add(out, {m.a, m.k, vec_bump(m.kp, mode, -1)}, c * static_cast<double>(e));
    }
    return out;
}

inline std::vector<std::pair<int, int>> vec_merge(const std::vector<std::pair<int, int>>& x,
                                                  const std::vector<std::pair<int, int>>& y) {
    std::vector<std::pair<int, int>> out = x;
    for (const auto& [mode, e] : y) out = vec_bump(out, mode, e);
    return out;
}

inline Poly oracle_mul(const Poly& p, const Poly& q) {
    Poly out;
    for (const auto& [m1, c1] : p)
        for (const auto& [m2, c2] : q)
            oracle_add(out, {vec_merge(m1.a, m2.a), vec_merge(m1.k, m2.k), vec_merge(m1.kp, m2.kp)},
                       c1 * c2);
    return out;
}

// -i sum_n (dH1/dz_n dH2/dzbar_n - dH1/dzbar_n dH2/dz_n)
inline Poly oracle_bracket(const HamiltonianPoly& h1, const HamiltonianPoly& h2, int max_mode) {
    Poly p1 = to_oracle(h1), p2 = to_oracle(h2);
    Poly out;
    const Complex minus_i{0.0, -1.0};
    for (int n = 1; n <= max_mode; ++n) {
        for (const auto& [m, c] : oracle_mul(oracle_dz(p1, n), oracle_dzbar(p2, n)))
            oracle_add(out, m, minus_i * c);
        for (const auto& [m, c] : oracle_mul(oracle_dzbar(p1, n), oracle_dz(p2, n)))
            oracle_add(out, m, -minus_i * c);
    }
    return out;
}

// max |coeff| of (oracle poly - library poly)
inline double oracle_diff(const Poly& oracle, const HamiltonianPoly& lib) {
    Poly rhs = to_oracle(lib);
    Poly diff = oracle;
    for (const auto& [m, c] : rhs) oracle_add(diff, m, -c);
    double worst = 0.0;
    for (const auto& [m, c] : diff) worst = std::max(worst, std::abs(c));
    return worst;
}

// ----- quadrature oracle for int_0^pi phi_i phi_j phi_k phi_l dx -----

inline double simpson_sine_product(int i, int j, int k, int l, long panels = 4000) {
    auto f = [&](double x) {
        double s = std::sin(i * x) * std::sin(j * x) * std::sin(k * x) * std::sin(l * x);
        return s * 4.0 / (std::numbers::pi * std::numbers::pi);   // (2/pi)^2 normalization
    };
    double h = std::numbers::pi / (2.0 * panels);
    double sum = f(0.0) + f(std::numbers::pi);
    for (long t = 1; t < 2 * panels; ++t) sum += f(t * h) * ((t % 2) ? 4.0 : 2.0);
    return sum * h / 3.0;
}

// ----- signed zero-sum admissibility (subset-sum bitset DP) -----

inline bool admits_zero_sum(const std::vector<int>& seq) {
    if (seq.empty()) return true;
    long total = 0;
    for (int n : seq) total += n;
    if (total % 2 != 0) return false;
    constexpr std::size_t kMax = 4096;
    if (total / 2 >= static_cast<long>(kMax)) return false;
    std::bitset<kMax> reachable;
    reachable[0] = true;
    for (int n : seq) reachable |= reachable << static_cast<std::size_t>(n);
    return reachable[static_cast<std::size_t>(total / 2)];
}

// ----- independent class-norm recomputation (the acceptance cross-check) -----

struct OracleClassNorms {
    double r0 = 0.0, r1 = 0.0, r2 = 0.0;
};

inline OracleClassNorms recompute_norm_plus(const HamiltonianPoly& h, double rho, double theta) {
    OracleClassNorms out;
    for (const auto& [key, c] : h.terms()) {
        // decreasing rearrangement of the residual monomial, from scratch
        std::vector<int> seq;
        for (const auto& [mode, e] : key.a.entries())
            for (int t = 0; t < 2 * e; ++t) seq.push_back(mode);
        for (const auto& [mode, e] : key.k.entries())
            for (int t = 0; t < e; ++t) seq.push_back(mode);
        for (const auto& [mode, e] : key.kp.entries())
            for (int t = 0; t < e; ++t) seq.push_back(mode);
        std::sort(seq.begin(), seq.end(), std::greater<int>());
        double expo = 0.0;
        for (int n : seq) expo += std::pow(n, theta);
        if (!seq.empty()) expo -= 2.0 * std::pow(seq.front(), theta);
        double logw = std::log(std::abs(c)) - rho * expo;
        for (const auto& [mode, e] : key.a.entries()) logw += e * std::log(double(mode));
        for (const auto& [mode, e] : key.k.entries()) logw += 0.5 * e * std::log(double(mode));
        for (const auto& [mode, e] : key.kp.entries()) logw += 0.5 * e * std::log(double(mode));
        std::vector<int> jm;
        for (const auto& [mode, e] : key.b.entries())
            for (int t = 0; t < e; ++t) jm.push_back(mode);
        for (int m : jm) logw += std::log(double(m)) - 2.0 * rho * std::pow(m, theta);
        double w = std::exp(logw);
        if (jm.size() == 0) out.r0 = std::max(out.r0, w);
        if (jm.size() == 1) out.r1 = std::max(out.r1, w);
        if (jm.size() == 2) out.r2 = std::max(out.r2, w);
    }
    return out;
}

// ----- plain RK4 for flow cross-checks (independent of the midpoint code) -----

template <typename Field>
std::vector<Complex> rk4_flow(const Field& field, std::vector<Complex> z, double h, double t_end) {
    long steps = std::lround(t_end / h);
    std::size_t n = z.size();
    for (long s = 0; s < steps; ++s) {
        auto k1 = field(z);
        std::vector<Complex> tmp(n);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
        auto k2 = field(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
        auto k3 = field(tmp);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h * k3[i];
        auto k4 = field(tmp);
        for (std::size_t i = 0; i < n; ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return z;
}

// ----- deterministic random generators -----

class Rand {
public:
    Rand(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    double uniform() { return kamnf::rng::uniform01(seed_, stream_, counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) {   // inclusive
        return lo + static_cast<int>(uniform() * (hi - lo + 1e-12));
    }

private:
    std::uint64_t seed_, stream_;
    std::uint64_t counter_ = 0;
};

inline MultiIndex random_index(Rand& rnd, int max_mode, int budget) {
    MultiIndex m;
    int used = 0;
    while (used < budget) {
        if (rnd.uniform() < 0.4) break;
        int mode = rnd.integer(1, max_mode);
        m.bump(mode, 1);
        ++used;
    }
    return m;
}

// real-symmetric plain polynomial: coeff(a,k,k') = conj(coeff(a,k',k))
inline HamiltonianPoly random_real_plain(std::uint64_t seed, int max_mode, int max_degree,
                                         int n_terms) {
    Rand rnd(seed, kamnf::rng::kTestPoly);
    HamiltonianPoly h(Basis::Plain, Truncation{max_mode, max_degree});
    for (int t = 0; t < n_terms; ++t) {
        int deg_budget = max_degree;
        MultiIndex a = random_index(rnd, max_mode, deg_budget / 4);
        deg_budget -= 2 * a.degree();
        MultiIndex k = random_index(rnd, max_mode, deg_budget / 2);
        deg_budget -= k.degree();
        MultiIndex kp = random_index(rnd, max_mode, deg_budget);
        Complex c(rnd.uniform(-1.0, 1.0), rnd.uniform(-1.0, 1.0));
        TermKey key{a, MultiIndex{}, k, kp};
        h.add_term(key, 0.5 * c);
        h.add_term(key.conjugate(), 0.5 * std::conj(c));
    }
    h.prune();
    return h;
}

// class-0 or class-1 adapted polynomial with disjoint (l,l'), no averaged keys
inline HamiltonianPoly random_class_poly(std::uint64_t seed, int cls, int max_mode, int max_degree,
                                         int n_terms) {
    Rand rnd(seed, kamnf::rng::kTestPoly + 7);
    HamiltonianPoly h(Basis::Adapted, Truncation{max_mode, max_degree});
    for (int t = 0; t < n_terms; ++t) {
        MultiIndex b;
        if (cls == 1) b = MultiIndex::single(rnd.integer(1, max_mode));
        int deg_budget = max_degree - 2 * b.degree();
        MultiIndex a = random_index(rnd, max_mode, deg_budget / 4);
        deg_budget -= 2 * a.degree();
        MultiIndex l, lp;
        for (int tries = 0; tries < 40 && (l.empty() && lp.empty()); ++tries) {
            l = MultiIndex{};
            lp = MultiIndex{};
            int zc = rnd.integer(1, std::max(1, deg_budget));
            for (int f = 0; f < zc; ++f) {
                int mode = rnd.integer(1, max_mode);
                if (rnd.uniform() < 0.5) {
                    if (lp.get(mode) == 0) l.bump(mode, 1);
                } else {
                    if (l.get(mode) == 0) lp.bump(mode, 1);
                }
            }
        }
        if (l.empty() && lp.empty()) continue;
        Complex c(rnd.uniform(-1.0, 1.0), rnd.uniform(-1.0, 1.0));
        TermKey key{a, b, l, lp};
        h.add_term(key, 0.5 * c);
        h.add_term(key.conjugate(), 0.5 * std::conj(c));
    }
    h.prune();
    return h;
}

inline std::vector<Complex> random_state(std::uint64_t seed, int max_mode, double scale) {
    Rand rnd(seed, kamnf::rng::kTestState);
    std::vector<Complex> z(max_mode);
    for (int n = 0; n < max_mode; ++n)
        z[n] = std::polar(scale * rnd.uniform(0.1, 1.0), 2.0 * std::numbers::pi * rnd.uniform());
    return z;
}

} // namespace oracles
