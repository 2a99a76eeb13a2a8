// Sparse multi-indices over mode numbers and the decreasing-rearrangement
// combinatorics used by the Hamiltonian norms and divisor bounds.
#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace kamnf {

// Finitely supported map mode -> exponent, modes >= 1, exponents > 0.
// Entries are kept sorted by mode; zero exponents are never stored.
class MultiIndex {
public:
    using Entry = std::pair<int, int>;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<Entry> entries);

    static MultiIndex single(int mode, int exponent = 1);

    int get(int mode) const;
    void set(int mode, int exponent);   // exponent == 0 erases
    void bump(int mode, int delta);     // add delta, erase on zero

    const std::vector<Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    int degree() const;                 // sum of exponents
    int max_mode() const;               // 0 when empty
    int support_size() const { return static_cast<int>(entries_.size()); }

    MultiIndex plus(const MultiIndex& other) const;

    bool operator==(const MultiIndex& other) const { return entries_ == other.entries_; }
    bool operator<(const MultiIndex& other) const { return entries_ < other.entries_; }

private:
    std::vector<Entry> entries_;
};

// Finitely supported map mode -> nonzero signed integer (differences k - k').
class SignedIndex {
public:
    using Entry = std::pair<int, int>;

    SignedIndex() = default;
    explicit SignedIndex(std::vector<Entry> entries);

    static SignedIndex difference(const MultiIndex& k, const MultiIndex& kp);
    static SignedIndex single(int mode, int value);

    int get(int mode) const;
    void set(int mode, int value);

    const std::vector<Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    int abs_degree() const;             // sum |l_n|
    int max_mode() const;
    int support_size() const { return static_cast<int>(entries_.size()); }

    bool operator==(const SignedIndex& other) const { return entries_ == other.entries_; }
    bool operator<(const SignedIndex& other) const { return entries_ < other.entries_; }

private:
    std::vector<Entry> entries_;
};

// Nonincreasing listing of modes counted with multiplicity.
using Rearrangement = std::vector<int>;

// Mode n repeated 2a_n + k_n + k'_n times, sorted nonincreasing.
Rearrangement rearrangement(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp);

// Mode n repeated |k_n - k'_n| times, sorted nonincreasing.
Rearrangement starred_rearrangement(const MultiIndex& k, const MultiIndex& kp);
Rearrangement starred_rearrangement(const SignedIndex& l);

struct GapTerms {
    double lhs;   // sum (2a_n+k_n+k'_n) n^theta - 2 n_1^theta
    double rhs;   // (2 - 2^theta) * sum_{i>=3} n_i^theta
};

// Both sides of the gap inequality. n_1^theta is taken as 0 on the empty
// multiset. The inequality lhs >= rhs is guaranteed only for multisets
// admitting a signed zero sum; callers check that hypothesis themselves.
GapTerms gap_terms(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp, double theta);

// sum (2a_n+k_n+k'_n) n^theta - 2 n_1^theta, the exponent in every norm weight.
double gap_exponent(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp, double theta);

std::size_t hash_combine(std::size_t seed, std::size_t value);
std::size_t hash_value(const MultiIndex& m);

} // namespace kamnf
