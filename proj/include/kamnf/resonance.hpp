// Frequency model lambda_n = sqrt(n^2 + V_n), small divisors, the two
// nonresonance conditions, and Monte Carlo measure estimation of the
// resonant parameter set.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "kamnf/multiindex.hpp"

namespace kamnf {

class FrequencyModel {
public:
    FrequencyModel() = default;

    static FrequencyModel from_potential(std::vector<double> v);
    // lambda_n = n + omega_n, i.e. V_n = 2 n omega_n + omega_n^2 exactly.
    static FrequencyModel from_omega(std::span<const double> omega);
    // Direct frequencies (shifted mid-iteration values); no V_n >= 0 check.
    static FrequencyModel from_lambda(std::span<const double> lambda);

    int max_mode() const { return static_cast<int>(v_.size()); }
    double v(int mode) const { return v_.at(mode - 1); }
    double lambda(int mode) const { return lambda_.at(mode - 1); }
    double omega(int mode) const { return omega_.at(mode - 1); }
    const std::vector<double>& v_values() const { return v_; }
    const std::vector<double>& lambda_values() const { return lambda_; }
    const std::vector<double>& omega_values() const { return omega_; }

private:
    std::vector<double> v_, lambda_, omega_;
};

// Raised by the homological solver when a retained key has an exactly zero
// small divisor; carries the offending difference index.
struct ResonanceError : std::runtime_error {
    SignedIndex l;
    explicit ResonanceError(SignedIndex offending);
};

// sum l_n lambda_n with compensated summation.
double divisor(const SignedIndex& l, const FrequencyModel& fm);

// dist(x, Z), ties resolved to even.
double dist_to_integers(double x);

struct ConditionResult {
    bool applicable = true;
    bool pass = false;
    double margin = 0.0;   // lhs - rhs
    double lhs = 0.0;
    double rhs = 0.0;
};

// ||sum l_n omega_n|| >= gamma prod 1/(1 + l_n^2 n^5)
ConditionResult check_condition_1(const FrequencyModel& fm, const SignedIndex& l, double gamma);

// applies when n_3* < n_2* and sum |l_n| >= 3:
// ||sum l_n omega_n|| >= (gamma^3/16) prod_{n != n_1*, n_2*} (1/(1 + l_n^2 n^6))^4
ConditionResult check_condition_2(const FrequencyModel& fm, const SignedIndex& l, double gamma);

// omega_n uniform on [0, 1/n], independent, deterministic per (seed, n).
std::vector<double> sample_omega(std::uint64_t seed, int max_mode);

struct MeasureResult {
    double gamma = 0.0;
    double fraction = 0.0;
    double ci = 0.0;              // 95% binomial half-width
    long cond1_failures = 0;      // samples failing condition 1 for some l
    long cond2_failures = 0;
    long samples = 0;
};

struct MeasureGrid {
    int max_mode = 12;
    int max_entry = 3;            // L
    int max_support = 3;          // S
    long samples = 100000;
    std::uint64_t seed = 1;
    long enumeration_budget = 2000000;
};

// Sign-canonical grid of difference indices: support size <= S over modes
// <= N, entries in [-L,L] \ {0}, first nonzero entry positive (l and -l
// give identical checks). Throws when the grid exceeds the budget.
std::vector<SignedIndex> enumerate_indices(int max_mode, int max_entry, int max_support,
                                           long budget = 2000000);

// Fraction of sampled omega failing condition 1 or (where applicable)
// condition 2 against every enumerated l. One pass serves all gammas.
std::vector<MeasureResult> measure_scan(std::span<const double> gammas, const MeasureGrid& grid,
                                        int threads = 1);
MeasureResult measure_estimate(double gamma, int max_mode, int max_entry, int max_support,
                               long samples, std::uint64_t seed);

struct CompensationTerms {
    double log_lhs = 0.0;     // log of prod_{n excluded}... * e^{-delta * gap}
    double delta_pow = 0.0;   // delta^{-5/theta}, the fit abscissa
};

// Left side of the compensation estimate in log space, for fitting the
// empirical constant C(theta). The two largest starred modes are excluded
// from the product only when the starred sequence has at least two entries.
CompensationTerms compensation_terms(const SignedIndex& l, const MultiIndex& a, const MultiIndex& k,
                                     const MultiIndex& kp, double delta, double theta);

} // namespace kamnf
