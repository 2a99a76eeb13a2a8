#include "kamnf/multiindex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kamnf {

namespace {

template <typename Entries>
void validate_sorted(const Entries& entries, bool allow_negative) {
    int prev = 0;
    for (const auto& [mode, e] : entries) {
        if (mode < 1) throw std::invalid_argument("multiindex: modes must be >= 1");
        if (mode <= prev) throw std::invalid_argument("multiindex: entries must be strictly increasing in mode");
        if (e == 0) throw std::invalid_argument("multiindex: zero exponents must not be stored");
        if (!allow_negative && e < 0) throw std::invalid_argument("multiindex: negative exponent");
        prev = mode;
    }
}

template <typename Entries>
int lookup(const Entries& entries, int mode) {
    auto it = std::lower_bound(entries.begin(), entries.end(), mode,
                               [](const auto& entry, int m) { return entry.first < m; });
    return (it != entries.end() && it->first == mode) ? it->second : 0;
}

template <typename Entries>
void assign(Entries& entries, int mode, int value) {
    if (mode < 1) throw std::invalid_argument("multiindex: modes must be >= 1");
    auto it = std::lower_bound(entries.begin(), entries.end(), mode,
                               [](const auto& entry, int m) { return entry.first < m; });
    if (it != entries.end() && it->first == mode) {
        if (value == 0)
            entries.erase(it);
        else
            it->second = value;
    } else if (value != 0) {
        entries.insert(it, {mode, value});
    }
}

} // namespace

MultiIndex::MultiIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
    validate_sorted(entries_, false);
}

MultiIndex MultiIndex::single(int mode, int exponent) {
    MultiIndex m;
    m.set(mode, exponent);
    return m;
}

int MultiIndex::get(int mode) const { return lookup(entries_, mode); }

void MultiIndex::set(int mode, int exponent) {
    if (exponent < 0) throw std::invalid_argument("multiindex: negative exponent");
    assign(entries_, mode, exponent);
}

void MultiIndex::bump(int mode, int delta) {
    int e = get(mode) + delta;
    if (e < 0) throw std::invalid_argument("multiindex: exponent underflow");
    assign(entries_, mode, e);
}

int MultiIndex::degree() const {
    int d = 0;
    for (const auto& [mode, e] : entries_) d += e;
    return d;
}

int MultiIndex::max_mode() const { return entries_.empty() ? 0 : entries_.back().first; }

MultiIndex MultiIndex::plus(const MultiIndex& other) const {
    MultiIndex out;
    out.entries_.reserve(entries_.size() + other.entries_.size());
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
        if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
            out.entries_.push_back(*a++);
        } else if (a == entries_.end() || b->first < a->first) {
            out.entries_.push_back(*b++);
        } else {
            out.entries_.push_back({a->first, a->second + b->second});
            ++a;
            ++b;
        }
    }
    return out;
}

SignedIndex::SignedIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
    validate_sorted(entries_, true);
}

SignedIndex SignedIndex::difference(const MultiIndex& k, const MultiIndex& kp) {
    SignedIndex out;
    auto a = k.entries().begin();
    auto b = kp.entries().begin();
    while (a != k.entries().end() || b != kp.entries().end()) {
        if (b == kp.entries().end() || (a != k.entries().end() && a->first < b->first)) {
            out.entries_.push_back(*a++);
        } else if (a == k.entries().end() || b->first < a->first) {
            out.entries_.push_back({b->first, -b->second});
            ++b;
        } else {
            if (a->second != b->second) out.entries_.push_back({a->first, a->second - b->second});
            ++a;
            ++b;
        }
    }
    return out;
}

SignedIndex SignedIndex::single(int mode, int value) {
    SignedIndex l;
    l.set(mode, value);
    return l;
}

int SignedIndex::get(int mode) const { return lookup(entries_, mode); }

void SignedIndex::set(int mode, int value) { assign(entries_, mode, value); }

int SignedIndex::abs_degree() const {
    int d = 0;
    for (const auto& [mode, e] : entries_) d += std::abs(e);
    return d;
}

int SignedIndex::max_mode() const { return entries_.empty() ? 0 : entries_.back().first; }

Rearrangement rearrangement(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp) {
    Rearrangement seq;
    auto push = [&seq](const MultiIndex& m, int factor) {
        for (const auto& [mode, e] : m.entries())
            for (int i = 0; i < factor * e; ++i) seq.push_back(mode);
    };
    push(a, 2);
    push(k, 1);
    push(kp, 1);
    std::stable_sort(seq.begin(), seq.end(), std::greater<int>());
    return seq;
}

Rearrangement starred_rearrangement(const MultiIndex& k, const MultiIndex& kp) {
    return starred_rearrangement(SignedIndex::difference(k, kp));
}

Rearrangement starred_rearrangement(const SignedIndex& l) {
    Rearrangement seq;
    for (const auto& [mode, e] : l.entries())
        for (int i = 0; i < std::abs(e); ++i) seq.push_back(mode);
    std::stable_sort(seq.begin(), seq.end(), std::greater<int>());
    return seq;
}

GapTerms gap_terms(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("gap_terms: theta must lie in (0,1)");
    Rearrangement seq = rearrangement(a, k, kp);
    double sum = 0.0;
    for (int n : seq) sum += std::pow(n, theta);
    double n1 = seq.empty() ? 0.0 : std::pow(seq.front(), theta);
    double tail = 0.0;
    for (std::size_t i = 2; i < seq.size(); ++i) tail += std::pow(seq[i], theta);
    return {sum - 2.0 * n1, (2.0 - std::pow(2.0, theta)) * tail};
}

double gap_exponent(const MultiIndex& a, const MultiIndex& k, const MultiIndex& kp, double theta) {
    return gap_terms(a, k, kp, theta).lhs;
}

std::size_t hash_combine(std::size_t seed, std::size_t value) {
    return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::size_t hash_value(const MultiIndex& m) {
    std::size_t h = 0x243f6a8885a308d3ULL;
    for (const auto& [mode, e] : m.entries()) {
        h = hash_combine(h, static_cast<std::size_t>(mode));
        h = hash_combine(h, static_cast<std::size_t>(e));
    }
    return h;
}

} // namespace kamnf
