// Sparse Hamiltonian polynomials over monomial keys
//   plain basis:    prod I_n(0)^{a_n} z_n^{k_n} zbar_n^{k'_n}
//   adapted basis:  prod I_n(0)^{a_n} J_n^{b_n} z_n^{l_n} zbar_n^{l'_n}
// with J_n = |z_n|^2 - I_n(0). Adapted keys carry at most two J factors;
// classes R0/R1/R2 are |b| = 0, 1, 2. Both weighted norms, basis
// conversion, evaluation and the Hamiltonian vector field live here.
#pragma once

#include <complex>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kamnf/multiindex.hpp"

namespace kamnf {

using Complex = std::complex<double>;

enum class Basis { Plain, Adapted };

struct Truncation {
    int max_mode = 0;
    int max_degree = 0;   // counts 2|a| + 2|b| + |k| + |k'|

    bool operator==(const Truncation&) const = default;
};

struct TermKey {
    MultiIndex a;    // I_n(0) exponents
    MultiIndex b;    // J_n exponents, empty in plain basis
    MultiIndex k;    // z exponents (l in adapted basis)
    MultiIndex kp;   // zbar exponents (l' in adapted basis)

    int degree() const { return 2 * a.degree() + 2 * b.degree() + k.degree() + kp.degree(); }
    int max_mode() const;
    int j_class() const { return b.degree(); }
    TermKey conjugate() const { return {a, b, kp, k}; }

    bool operator==(const TermKey& o) const = default;
    bool operator<(const TermKey& o) const;
};

// Accounting for keys dropped by hard truncation during products/brackets.
struct OpStats {
    double dropped_mass = 0.0;
    long dropped_count = 0;

    void merge(const OpStats& o) {
        dropped_mass += o.dropped_mass;
        dropped_count += o.dropped_count;
    }
};

class HamiltonianPoly {
public:
    using TermMap = std::map<TermKey, Complex>;

    HamiltonianPoly() = default;
    HamiltonianPoly(Basis basis, Truncation trunc) : basis_(basis), trunc_(trunc) {}

    Basis basis() const { return basis_; }
    const Truncation& truncation() const { return trunc_; }
    const TermMap& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    // Adds into an existing coefficient; throws on truncation overflow or a
    // key that violates the basis invariant.
    void add_term(const TermKey& key, Complex coeff);
    // Adds if the key fits the truncation, otherwise tallies it into stats.
    void add_term_or_drop(const TermKey& key, Complex coeff, OpStats* stats);
    Complex coeff(const TermKey& key) const;

    double prune(double floor = 0.0);   // remove |c| <= floor; returns removed mass
    void scale(Complex factor);
    HamiltonianPoly& operator+=(const HamiltonianPoly& o);
    HamiltonianPoly& operator-=(const HamiltonianPoly& o);

    double max_abs_coeff() const;
    bool is_real_symmetric(double tol = 1e-12) const;

    void check_key(const TermKey& key) const;   // basis + truncation invariants

private:
    Basis basis_ = Basis::Plain;
    Truncation trunc_;
    TermMap terms_;
};

HamiltonianPoly operator+(HamiltonianPoly lhs, const HamiltonianPoly& rhs);
HamiltonianPoly operator-(HamiltonianPoly lhs, const HamiltonianPoly& rhs);

// N = sum lambda_n |z_n|^2 as a plain polynomial.
HamiltonianPoly normal_form(std::span<const double> lambda, Truncation trunc);

// Exact rewrite into the adapted basis: paired z zbar factors become
// I(0) + J, expanded until two J factors have been extracted; the remaining
// pairs stay as z zbar (classes R0/R1 keep disjoint supports, R2 does not).
HamiltonianPoly to_adapted(const HamiltonianPoly& h);

// Exact inverse rewrite J_n = z_n zbar_n - I_n(0).
HamiltonianPoly to_plain(const HamiltonianPoly& h);

// Keys of the given J class (0, 1 or 2) as a standalone polynomial.
HamiltonianPoly class_part(const HamiltonianPoly& h, int j_class);

// sup over keys of prod n^{(2a_n+k_n+k'_n)/2} |B| / e^{rho * gap_exponent}.
double norm_rho(const HamiltonianPoly& h, double rho, double theta);

struct ClassNorms {
    double r0 = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double max = 0.0;
};

// Class-wise weighted sups on an adapted polynomial: the J modes enter as
// |m B| (resp. |m1 m2 B|) weights and +2m^theta exponent surcharges; the
// residual monomial (a, l, l') supplies the gap exponent.
ClassNorms norm_plus(const HamiltonianPoly& h, double rho, double theta);

Complex evaluate(const HamiltonianPoly& h, std::span<const Complex> z, std::span<const double> i0);

// zdot_n = -i dH/dzbar_n, on a plain-basis polynomial.
std::vector<Complex> vector_field(const HamiltonianPoly& h, std::span<const Complex> z,
                                  std::span<const double> i0);

// Monomial product with hard-truncation dropping.
HamiltonianPoly multiply(const HamiltonianPoly& h1, const HamiltonianPoly& h2, OpStats* stats = nullptr);

// d/dz_n and d/dzbar_n on plain polynomials.
HamiltonianPoly derivative_z(const HamiltonianPoly& h, int mode);
HamiltonianPoly derivative_zbar(const HamiltonianPoly& h, int mode);

// Documented JSON checkpoint shape (terms sorted by key).
std::string to_json_string(const HamiltonianPoly& h, int indent = -1);
HamiltonianPoly poly_from_json_string(const std::string& text);

} // namespace kamnf
