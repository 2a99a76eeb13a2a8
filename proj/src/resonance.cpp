#include "kamnf/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>

#include "kamnf/rng.hpp"

namespace kamnf {

FrequencyModel FrequencyModel::from_potential(std::vector<double> v) {
    FrequencyModel fm;
    fm.v_ = std::move(v);
    fm.lambda_.reserve(fm.v_.size());
    fm.omega_.reserve(fm.v_.size());
    for (std::size_t i = 0; i < fm.v_.size(); ++i) {
        double n = static_cast<double>(i + 1);
        if (fm.v_[i] < 0.0) throw std::invalid_argument("frequency model: V_n must be >= 0");
        double lam = std::sqrt(n * n + fm.v_[i]);
        fm.lambda_.push_back(lam);
        fm.omega_.push_back(lam - n);
    }
    return fm;
}

FrequencyModel FrequencyModel::from_omega(std::span<const double> omega) {
    FrequencyModel fm;
    fm.v_.reserve(omega.size());
    fm.lambda_.reserve(omega.size());
    fm.omega_.reserve(omega.size());
    for (std::size_t i = 0; i < omega.size(); ++i) {
        double n = static_cast<double>(i + 1);
        if (omega[i] < 0.0) throw std::invalid_argument("frequency model: omega_n must be >= 0");
        fm.omega_.push_back(omega[i]);
        fm.lambda_.push_back(n + omega[i]);
        fm.v_.push_back(2.0 * n * omega[i] + omega[i] * omega[i]);
    }
    return fm;
}

FrequencyModel FrequencyModel::from_lambda(std::span<const double> lambda) {
    FrequencyModel fm;
    fm.v_.reserve(lambda.size());
    fm.lambda_.reserve(lambda.size());
    fm.omega_.reserve(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        double n = static_cast<double>(i + 1);
        fm.lambda_.push_back(lambda[i]);
        fm.omega_.push_back(lambda[i] - n);
        fm.v_.push_back(lambda[i] * lambda[i] - n * n);
    }
    return fm;
}

ResonanceError::ResonanceError(SignedIndex offending)
    : std::runtime_error("resonance: exactly zero small divisor"), l(std::move(offending)) {}

double divisor(const SignedIndex& l, const FrequencyModel& fm) {
    double sum = 0.0, comp = 0.0;
    for (const auto& [mode, e] : l.entries()) {
        if (mode > fm.max_mode())
            throw std::invalid_argument("divisor: index support outside frequency model");
        double term = e * fm.lambda(mode);
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

double dist_to_integers(double x) { return std::abs(std::remainder(x, 1.0)); }

namespace {

double fractional_part_of_divisor(const FrequencyModel& fm, const SignedIndex& l) {
    double sum = 0.0, comp = 0.0;
    for (const auto& [mode, e] : l.entries()) {
        if (mode > fm.max_mode())
            throw std::invalid_argument("condition check: index support outside frequency model");
        double term = e * fm.omega(mode);
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return dist_to_integers(sum);
}

} // namespace

ConditionResult check_condition_1(const FrequencyModel& fm, const SignedIndex& l, double gamma) {
    if (l.empty()) throw std::invalid_argument("check_condition_1: l must be nonzero");
    ConditionResult res;
    res.lhs = fractional_part_of_divisor(fm, l);
    double log_prod = 0.0;
    for (const auto& [mode, e] : l.entries())
        log_prod += std::log1p(static_cast<double>(e) * e * std::pow(static_cast<double>(mode), 5));
    res.rhs = gamma * std::exp(-log_prod);
    res.pass = res.lhs >= res.rhs;
    res.margin = res.lhs - res.rhs;
    return res;
}

ConditionResult check_condition_2(const FrequencyModel& fm, const SignedIndex& l, double gamma) {
    ConditionResult res;
    Rearrangement star = starred_rearrangement(l);
    if (l.abs_degree() < 3 || star.size() < 3 || star[2] >= star[1]) {
        res.applicable = false;
        return res;
    }
    res.lhs = fractional_part_of_divisor(fm, l);
    double log_prod = 0.0;
    for (const auto& [mode, e] : l.entries()) {
        if (mode == star[0] || mode == star[1]) continue;
        log_prod += 4.0 * std::log1p(static_cast<double>(e) * e * std::pow(static_cast<double>(mode), 6));
    }
    res.rhs = gamma * gamma * gamma / 16.0 * std::exp(-log_prod);
    res.pass = res.lhs >= res.rhs;
    res.margin = res.lhs - res.rhs;
    return res;
}

std::vector<double> sample_omega(std::uint64_t seed, int max_mode) {
    if (max_mode < 1) throw std::invalid_argument("sample_omega: max_mode must be >= 1");
    std::vector<double> omega(max_mode);
    for (int n = 1; n <= max_mode; ++n)
        omega[n - 1] = rng::uniform01(seed, rng::kOmega, static_cast<std::uint64_t>(n)) / n;
    return omega;
}

std::vector<SignedIndex> enumerate_indices(int max_mode, int max_entry, int max_support,
                                           long budget) {
    double count = 0.0;
    for (int s = 1; s <= max_support; ++s) {
        double c = 1.0;
        for (int i = 0; i < s; ++i) c = c * (max_mode - i) / (i + 1);
        count += c * std::pow(2.0 * max_entry, s);
    }
    if (count / 2.0 > static_cast<double>(budget))
        throw std::invalid_argument("measure: enumeration budget exceeded for the requested l grid");

    std::vector<SignedIndex> out;
    std::vector<SignedIndex::Entry> stack;
    std::function<void(int, int)> rec = [&](int next_mode, int remaining) {
        if (!stack.empty() && stack.front().second > 0) out.push_back(SignedIndex(stack));
        if (remaining == 0) return;
        for (int m = next_mode; m <= max_mode; ++m) {
            for (int v = -max_entry; v <= max_entry; ++v) {
                if (v == 0) continue;
                stack.push_back({m, v});
                rec(m + 1, remaining - 1);
                stack.pop_back();
            }
        }
    };
    rec(1, max_support);
    return out;
}

namespace {

// Flat per-l data for the scan hot loop; the condition right-hand sides do
// not depend on omega, so they are precomputed once.
struct FlatGrid {
    std::vector<int> mode;          // concatenated supports
    std::vector<double> val;
    std::vector<int> offset;        // entry i spans [offset[i], offset[i+1])
    std::vector<double> prod1;      // prod (1 + l^2 n^5)
    std::vector<double> prod2;      // prod_{n != n1*,n2*} (1 + l^2 n^6)^4, <= 0 when inapplicable
};

FlatGrid build_grid(const MeasureGrid& grid) {
    std::vector<SignedIndex> indices =
        enumerate_indices(grid.max_mode, grid.max_entry, grid.max_support, grid.enumeration_budget);
    FlatGrid flat;
    flat.offset.push_back(0);
    for (const SignedIndex& l : indices) {
        double log1 = 0.0;
        for (const auto& [mode, v] : l.entries()) {
            flat.mode.push_back(mode);
            flat.val.push_back(static_cast<double>(v));
            log1 += std::log1p(static_cast<double>(v) * v * std::pow(static_cast<double>(mode), 5));
        }
        flat.offset.push_back(static_cast<int>(flat.mode.size()));
        flat.prod1.push_back(std::exp(log1));
        Rearrangement star = starred_rearrangement(l);
        bool applicable = l.abs_degree() >= 3 && star.size() >= 3 && star[2] < star[1];
        double p2 = -1.0;
        if (applicable) {
            double log2 = 0.0;
            for (const auto& [mode, v] : l.entries()) {
                if (mode == star[0] || mode == star[1]) continue;
                log2 += 4.0 * std::log1p(static_cast<double>(v) * v *
                                         std::pow(static_cast<double>(mode), 6));
            }
            // past the double range the rhs is untestably tiny and cannot fail
            p2 = log2 > 690.0 ? -1.0 : std::exp(log2);
        }
        flat.prod2.push_back(p2);
    }
    return flat;
}

// Per-draw critical gammas: the draw fails condition i at gamma iff
// gamma > gstar_i.
struct CriticalGammas {
    double g1 = std::numeric_limits<double>::infinity();
    double g2 = std::numeric_limits<double>::infinity();
};

CriticalGammas critical_gammas(const FlatGrid& grid, std::uint64_t seed, long draw, int max_mode) {
    double omega[64];
    for (int n = 1; n <= max_mode; ++n) {
        std::uint64_t index = static_cast<std::uint64_t>(draw) * max_mode + (n - 1);
        omega[n - 1] = rng::uniform01(seed, rng::kMeasure, index) / n;
    }
    CriticalGammas out;
    const std::size_t entries = grid.prod1.size();
    for (std::size_t e = 0; e < entries; ++e) {
        double dot = 0.0;
        for (int i = grid.offset[e]; i < grid.offset[e + 1]; ++i)
            dot += grid.val[i] * omega[grid.mode[i] - 1];
        double dist = std::abs(dot - std::nearbyint(dot));
        double t1 = dist * grid.prod1[e];
        out.g1 = std::min(out.g1, t1);
        if (grid.prod2[e] > 0.0) {
            double t2 = std::cbrt(16.0 * dist * grid.prod2[e]);
            out.g2 = std::min(out.g2, t2);
        }
    }
    return out;
}

} // namespace

std::vector<MeasureResult> measure_scan(std::span<const double> gammas, const MeasureGrid& grid,
                                        int threads) {
    if (grid.samples < 1000) throw std::invalid_argument("measure: samples must be >= 1000");
    if (grid.max_mode < 1 || grid.max_entry < 1 || grid.max_support < 1)
        throw std::invalid_argument("measure: grid bounds must be positive");
    if (grid.max_mode > 64) throw std::invalid_argument("measure: maxMode above the supported 64");
    FlatGrid entries = build_grid(grid);

    struct Counts {
        std::vector<long> fail, fail1, fail2;
    };
    auto count_range = [&](long begin, long end) {
        Counts c{std::vector<long>(gammas.size(), 0), std::vector<long>(gammas.size(), 0),
                 std::vector<long>(gammas.size(), 0)};
        for (long i = begin; i < end; ++i) {
            CriticalGammas g = critical_gammas(entries, grid.seed, i, grid.max_mode);
            for (std::size_t j = 0; j < gammas.size(); ++j) {
                bool f1 = gammas[j] > g.g1;
                bool f2 = gammas[j] > g.g2;
                if (f1) ++c.fail1[j];
                if (f2) ++c.fail2[j];
                if (f1 || f2) ++c.fail[j];
            }
        }
        return c;
    };

    Counts total{std::vector<long>(gammas.size(), 0), std::vector<long>(gammas.size(), 0),
                 std::vector<long>(gammas.size(), 0)};
    threads = std::max(1, threads);
    if (threads == 1) {
        total = count_range(0, grid.samples);
    } else {
        long chunk = (grid.samples + threads - 1) / threads;
        std::vector<std::future<Counts>> futures;
        for (int t = 0; t < threads; ++t) {
            long b = t * chunk, e = std::min<long>(grid.samples, b + chunk);
            if (b >= e) break;
            futures.push_back(std::async(std::launch::async, count_range, b, e));
        }
        for (auto& f : futures) {
            Counts c = f.get();
            for (std::size_t j = 0; j < gammas.size(); ++j) {
                total.fail[j] += c.fail[j];
                total.fail1[j] += c.fail1[j];
                total.fail2[j] += c.fail2[j];
            }
        }
    }

    std::vector<MeasureResult> out;
    for (std::size_t j = 0; j < gammas.size(); ++j) {
        MeasureResult r;
        r.gamma = gammas[j];
        r.samples = grid.samples;
        r.fraction = static_cast<double>(total.fail[j]) / grid.samples;
        r.ci = 1.96 * std::sqrt(std::max(r.fraction * (1.0 - r.fraction), 0.0) / grid.samples);
        r.cond1_failures = total.fail1[j];
        r.cond2_failures = total.fail2[j];
        out.push_back(r);
    }
    return out;
}

MeasureResult measure_estimate(double gamma, int max_mode, int max_entry, int max_support,
                               long samples, std::uint64_t seed) {
    MeasureGrid grid;
    grid.max_mode = max_mode;
    grid.max_entry = max_entry;
    grid.max_support = max_support;
    grid.samples = samples;
    grid.seed = seed;
    double g[1] = {gamma};
    return measure_scan(std::span<const double>(g, 1), grid).front();
}

CompensationTerms compensation_terms(const SignedIndex& l, const MultiIndex& a, const MultiIndex& k,
                                     const MultiIndex& kp, double delta, double theta) {
    if (!(delta > 0.0)) throw std::invalid_argument("compensation_terms: delta must be > 0");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("compensation_terms: theta must lie in (0,1)");
    if (!(SignedIndex::difference(k, kp) == l))
        throw std::invalid_argument("compensation_terms: l must equal k - k'");
    Rearrangement star = starred_rearrangement(l);
    double log_prod = 0.0;
    for (const auto& [mode, v] : l.entries()) {
        if (star.size() >= 2 && (mode == star[0] || mode == star[1])) continue;
        log_prod += 4.0 * std::log1p(static_cast<double>(v) * v * std::pow(static_cast<double>(mode), 6));
    }
    CompensationTerms out;
    out.log_lhs = log_prod - delta * gap_exponent(a, k, kp, theta);
    out.delta_pow = std::pow(delta, -5.0 / theta);
    return out;
}

} // namespace kamnf
