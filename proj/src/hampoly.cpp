#include "kamnf/hampoly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace kamnf {

namespace {

bool disjoint_support(const MultiIndex& x, const MultiIndex& y) {
    auto a = x.entries().begin();
    auto b = y.entries().begin();
    while (a != x.entries().end() && b != y.entries().end()) {
        if (a->first == b->first) return false;
        if (a->first < b->first)
            ++a;
        else
            ++b;
    }
    return true;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

} // namespace

int TermKey::max_mode() const {
    return std::max({a.max_mode(), b.max_mode(), k.max_mode(), kp.max_mode()});
}

bool TermKey::operator<(const TermKey& o) const {
    if (a < o.a) return true;
    if (o.a < a) return false;
    if (b < o.b) return true;
    if (o.b < b) return false;
    if (k < o.k) return true;
    if (o.k < k) return false;
    return kp < o.kp;
}

void HamiltonianPoly::check_key(const TermKey& key) const {
    if (basis_ == Basis::Plain) {
        if (!key.b.empty()) throw std::invalid_argument("hampoly: J factors in a plain-basis key");
    } else {
        if (key.j_class() > 2) throw std::invalid_argument("hampoly: adapted key with more than two J factors");
        if (key.j_class() <= 1 && !disjoint_support(key.k, key.kp))
            throw std::invalid_argument("hampoly: class-0/1 adapted key with overlapping l, l'");
    }
    if (key.max_mode() > trunc_.max_mode)
        throw std::invalid_argument("hampoly: key mode exceeds truncation maxMode");
    if (key.degree() > trunc_.max_degree)
        throw std::invalid_argument("hampoly: key degree exceeds truncation maxDegree");
}

void HamiltonianPoly::add_term(const TermKey& key, Complex coeff) {
    check_key(key);
    if (coeff == Complex{}) return;
    auto [it, inserted] = terms_.try_emplace(key, coeff);
    if (!inserted) it->second += coeff;
}

void HamiltonianPoly::add_term_or_drop(const TermKey& key, Complex coeff, OpStats* stats) {
    if (key.degree() > trunc_.max_degree || key.max_mode() > trunc_.max_mode) {
        if (stats) {
            stats->dropped_mass += std::abs(coeff);
            stats->dropped_count += 1;
        }
        return;
    }
    add_term(key, coeff);
}

Complex HamiltonianPoly::coeff(const TermKey& key) const {
    auto it = terms_.find(key);
    return it == terms_.end() ? Complex{} : it->second;
}

double HamiltonianPoly::prune(double floor) {
    double removed = 0.0;
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) <= floor) {
            removed += std::abs(it->second);
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
    return removed;
}

void HamiltonianPoly::scale(Complex factor) {
    for (auto& [key, c] : terms_) c *= factor;
}

HamiltonianPoly& HamiltonianPoly::operator+=(const HamiltonianPoly& o) {
    if (basis_ != o.basis_) throw std::invalid_argument("hampoly: basis mismatch in sum");
    for (const auto& [key, c] : o.terms_) add_term(key, c);
    return *this;
}

HamiltonianPoly& HamiltonianPoly::operator-=(const HamiltonianPoly& o) {
    if (basis_ != o.basis_) throw std::invalid_argument("hampoly: basis mismatch in difference");
    for (const auto& [key, c] : o.terms_) add_term(key, -c);
    return *this;
}

HamiltonianPoly operator+(HamiltonianPoly lhs, const HamiltonianPoly& rhs) {
    lhs += rhs;
    return lhs;
}

HamiltonianPoly operator-(HamiltonianPoly lhs, const HamiltonianPoly& rhs) {
    lhs -= rhs;
    return lhs;
}

double HamiltonianPoly::max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [key, c] : terms_) m = std::max(m, std::abs(c));
    return m;
}

bool HamiltonianPoly::is_real_symmetric(double tol) const {
    double scale = std::max(max_abs_coeff(), 1e-300);
    for (const auto& [key, c] : terms_) {
        Complex mirror = coeff(key.conjugate());
        if (std::abs(mirror - std::conj(c)) > tol * scale) return false;
    }
    return true;
}

HamiltonianPoly normal_form(std::span<const double> lambda, Truncation trunc) {
    HamiltonianPoly n(Basis::Plain, trunc);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        int mode = static_cast<int>(i) + 1;
        n.add_term({MultiIndex{}, MultiIndex{}, MultiIndex::single(mode), MultiIndex::single(mode)},
                   lambda[i]);
    }
    return n;
}

HamiltonianPoly to_adapted(const HamiltonianPoly& h) {
    if (h.basis() != Basis::Plain) throw std::invalid_argument("to_adapted: input must be plain basis");
    HamiltonianPoly out(Basis::Adapted, h.truncation());
    for (const auto& [key, c] : h.terms()) {
        MultiIndex pairs;   // c_n = k_n ^ k'_n
        for (const auto& [mode, e] : key.k.entries()) {
            int other = key.kp.get(mode);
            if (other > 0) pairs.set(mode, std::min(e, other));
        }
        MultiIndex l = key.k, lp = key.kp;
        for (const auto& [mode, e] : pairs.entries()) {
            l.bump(mode, -e);
            lp.bump(mode, -e);
        }
        if (pairs.empty()) {
            out.add_term({key.a, MultiIndex{}, l, lp}, c);
            continue;
        }
        const auto& cm = pairs.entries();

        // no J: every pair becomes I(0)
        out.add_term({key.a.plus(pairs), MultiIndex{}, l, lp}, c);

        // one J at mode m, all other pairs I(0)
        for (const auto& [m, e] : cm) {
            MultiIndex a = key.a.plus(pairs);
            a.bump(m, -1);
            out.add_term({a, MultiIndex::single(m), l, lp}, c * static_cast<double>(e));
        }

        // two J's: pairs before the second J become I(0), pairs after it stay
        // as z zbar. Within one mode m the J's sit at positions i < j of the
        // c_m factors, giving multiplicity j-1 and c_m - j trailing pairs.
        for (std::size_t bi = 0; bi < cm.size(); ++bi) {
            const auto [m2, e2] = cm[bi];
            // leading modes fully I(0), trailing modes fully paired
            MultiIndex lead, trail;
            for (std::size_t t = 0; t < cm.size(); ++t) {
                if (t < bi)
                    lead.set(cm[t].first, cm[t].second);
                else if (t > bi)
                    trail.set(cm[t].first, cm[t].second);
            }
            // both J's at m2
            for (int j = 2; j <= e2; ++j) {
                MultiIndex a = key.a.plus(lead);
                if (j > 2) a.bump(m2, j - 2);
                MultiIndex kk = l.plus(trail), kkp = lp.plus(trail);
                if (e2 - j > 0) {
                    kk.bump(m2, e2 - j);
                    kkp.bump(m2, e2 - j);
                }
                out.add_term({a, MultiIndex::single(m2, 2), kk, kkp}, c * static_cast<double>(j - 1));
            }
            // first J at an earlier mode m1, second at m2
            for (std::size_t ai = 0; ai < bi; ++ai) {
                const auto [m1, e1] = cm[ai];
                for (int j = 1; j <= e2; ++j) {
                    MultiIndex a = key.a.plus(lead);
                    a.bump(m1, -1);
                    if (j > 1) a.bump(m2, j - 1);
                    MultiIndex kk = l.plus(trail), kkp = lp.plus(trail);
                    if (e2 - j > 0) {
                        kk.bump(m2, e2 - j);
                        kkp.bump(m2, e2 - j);
                    }
                    MultiIndex b = MultiIndex::single(m1);
                    b.set(m2, 1);
                    out.add_term({a, b, kk, kkp}, c * static_cast<double>(e1));
                }
            }
        }
    }
    out.prune();
    return out;
}

HamiltonianPoly to_plain(const HamiltonianPoly& h) {
    if (h.basis() != Basis::Adapted) throw std::invalid_argument("to_plain: input must be adapted basis");
    HamiltonianPoly out(Basis::Plain, h.truncation());
    for (const auto& [key, c] : h.terms()) {
        // expand prod J_n^{b_n}, J = z zbar - I(0)
        struct Partial {
            MultiIndex a, k, kp;
            double factor;
        };
        std::vector<Partial> acc{{key.a, key.k, key.kp, 1.0}};
        for (const auto& [mode, e] : key.b.entries()) {
            std::vector<Partial> next;
            next.reserve(acc.size() * (e + 1));
            for (const auto& p : acc) {
                for (int t = 0; t <= e; ++t) {
                    Partial q = p;
                    q.factor *= binomial(e, t) * ((e - t) % 2 == 0 ? 1.0 : -1.0);
                    if (e - t > 0) q.a.bump(mode, e - t);
                    if (t > 0) {
                        q.k.bump(mode, t);
                        q.kp.bump(mode, t);
                    }
                    next.push_back(std::move(q));
                }
            }
            acc = std::move(next);
        }
        for (const auto& p : acc)
            out.add_term({p.a, MultiIndex{}, p.k, p.kp}, c * p.factor);
    }
    out.prune();
    return out;
}

HamiltonianPoly class_part(const HamiltonianPoly& h, int j_class) {
    if (h.basis() != Basis::Adapted) throw std::invalid_argument("class_part: input must be adapted basis");
    HamiltonianPoly out(Basis::Adapted, h.truncation());
    for (const auto& [key, c] : h.terms())
        if (key.j_class() == j_class) out.add_term(key, c);
    return out;
}

double norm_rho(const HamiltonianPoly& h, double rho, double theta) {
    if (h.basis() != Basis::Plain) throw std::invalid_argument("norm_rho: input must be plain basis");
    if (rho < 0.0) throw std::invalid_argument("norm_rho: rho must be >= 0");
    bool any = false;
    double best = 0.0;
    for (const auto& [key, c] : h.terms()) {
        double mag = std::abs(c);
        if (mag == 0.0) continue;
        double lw = std::log(mag) - rho * gap_exponent(key.a, key.k, key.kp, theta);
        for (const auto& [mode, e] : key.a.entries()) lw += e * std::log(static_cast<double>(mode));
        for (const auto& [mode, e] : key.k.entries()) lw += 0.5 * e * std::log(static_cast<double>(mode));
        for (const auto& [mode, e] : key.kp.entries()) lw += 0.5 * e * std::log(static_cast<double>(mode));
        best = any ? std::max(best, lw) : lw;
        any = true;
    }
    return any ? std::exp(best) : 0.0;
}

ClassNorms norm_plus(const HamiltonianPoly& h, double rho, double theta) {
    if (h.basis() != Basis::Adapted) throw std::invalid_argument("norm_plus: input must be adapted basis");
    if (rho < 0.0) throw std::invalid_argument("norm_plus: rho must be >= 0");
    double best[3];
    bool any[3] = {false, false, false};
    for (const auto& [key, c] : h.terms()) {
        int cls = key.j_class();
        if (cls > 2) throw std::invalid_argument("norm_plus: key with more than two J factors");
        double mag = std::abs(c);
        if (mag == 0.0) continue;
        double lw = std::log(mag) - rho * gap_exponent(key.a, key.k, key.kp, theta);
        for (const auto& [mode, e] : key.a.entries()) lw += e * std::log(static_cast<double>(mode));
        for (const auto& [mode, e] : key.k.entries()) lw += 0.5 * e * std::log(static_cast<double>(mode));
        for (const auto& [mode, e] : key.kp.entries()) lw += 0.5 * e * std::log(static_cast<double>(mode));
        for (const auto& [mode, e] : key.b.entries())
            lw += e * (std::log(static_cast<double>(mode)) - 2.0 * rho * std::pow(mode, theta));
        best[cls] = any[cls] ? std::max(best[cls], lw) : lw;
        any[cls] = true;
    }
    ClassNorms out;
    out.r0 = any[0] ? std::exp(best[0]) : 0.0;
    out.r1 = any[1] ? std::exp(best[1]) : 0.0;
    out.r2 = any[2] ? std::exp(best[2]) : 0.0;
    out.max = std::max({out.r0, out.r1, out.r2});
    return out;
}

namespace {

void check_state(const HamiltonianPoly& h, std::span<const Complex> z, std::span<const double> i0) {
    std::size_t need = static_cast<std::size_t>(h.truncation().max_mode);
    if (z.size() < need || i0.size() < need)
        throw std::invalid_argument("hampoly: state does not cover all modes up to maxMode");
}

} // namespace

Complex evaluate(const HamiltonianPoly& h, std::span<const Complex> z, std::span<const double> i0) {
    check_state(h, z, i0);
    Complex total = 0.0;
    for (const auto& [key, c] : h.terms()) {
        Complex v = c;
        for (const auto& [mode, e] : key.a.entries())
            for (int i = 0; i < e; ++i) v *= i0[mode - 1];
        for (const auto& [mode, e] : key.b.entries()) {
            Complex j = std::norm(z[mode - 1]) - i0[mode - 1];
            for (int i = 0; i < e; ++i) v *= j;
        }
        for (const auto& [mode, e] : key.k.entries())
            for (int i = 0; i < e; ++i) v *= z[mode - 1];
        for (const auto& [mode, e] : key.kp.entries())
            for (int i = 0; i < e; ++i) v *= std::conj(z[mode - 1]);
        total += v;
    }
    return total;
}

std::vector<Complex> vector_field(const HamiltonianPoly& h, std::span<const Complex> z,
                                  std::span<const double> i0) {
    const HamiltonianPoly* p = &h;
    HamiltonianPoly converted;
    if (h.basis() == Basis::Adapted) {
        converted = to_plain(h);
        p = &converted;
    }
    check_state(*p, z, i0);
    std::vector<Complex> field(p->truncation().max_mode, Complex{});
    const Complex minus_i{0.0, -1.0};
    for (const auto& [key, c] : p->terms()) {
        for (const auto& [m, em] : key.kp.entries()) {
            Complex v = c * static_cast<double>(em);
            for (const auto& [mode, e] : key.a.entries())
                for (int i = 0; i < e; ++i) v *= i0[mode - 1];
            for (const auto& [mode, e] : key.k.entries())
                for (int i = 0; i < e; ++i) v *= z[mode - 1];
            for (const auto& [mode, e] : key.kp.entries()) {
                int pow = (mode == m) ? e - 1 : e;
                for (int i = 0; i < pow; ++i) v *= std::conj(z[mode - 1]);
            }
            field[m - 1] += minus_i * v;
        }
    }
    return field;
}

HamiltonianPoly multiply(const HamiltonianPoly& h1, const HamiltonianPoly& h2, OpStats* stats) {
    if (h1.basis() != Basis::Plain || h2.basis() != Basis::Plain)
        throw std::invalid_argument("multiply: inputs must be plain basis");
    if (!(h1.truncation() == h2.truncation()))
        throw std::invalid_argument("multiply: truncation mismatch");
    HamiltonianPoly out(Basis::Plain, h1.truncation());
    for (const auto& [key1, c1] : h1.terms())
        for (const auto& [key2, c2] : h2.terms())
            out.add_term_or_drop({key1.a.plus(key2.a), MultiIndex{}, key1.k.plus(key2.k),
                                  key1.kp.plus(key2.kp)},
                                 c1 * c2, stats);
    out.prune();
    return out;
}

HamiltonianPoly derivative_z(const HamiltonianPoly& h, int mode) {
    if (h.basis() != Basis::Plain) throw std::invalid_argument("derivative_z: input must be plain basis");
    HamiltonianPoly out(Basis::Plain, h.truncation());
    for (const auto& [key, c] : h.terms()) {
        int e = key.k.get(mode);
        if (e == 0) continue;
        TermKey d = key;
        d.k.bump(mode, -1);
        out.add_term(d, c * static_cast<double>(e));
    }
    return out;
}

HamiltonianPoly derivative_zbar(const HamiltonianPoly& h, int mode) {
    if (h.basis() != Basis::Plain) throw std::invalid_argument("derivative_zbar: input must be plain basis");
    HamiltonianPoly out(Basis::Plain, h.truncation());
    for (const auto& [key, c] : h.terms()) {
        int e = key.kp.get(mode);
        if (e == 0) continue;
        TermKey d = key;
        d.kp.bump(mode, -1);
        out.add_term(d, c * static_cast<double>(e));
    }
    return out;
}

namespace {

nlohmann::ordered_json index_to_json(const MultiIndex& m) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& [mode, e] : m.entries()) obj[std::to_string(mode)] = e;
    return obj;
}

MultiIndex index_from_json(const nlohmann::json& obj) {
    std::vector<MultiIndex::Entry> entries;
    for (const auto& [name, value] : obj.items())
        entries.push_back({std::stoi(name), value.get<int>()});
    std::sort(entries.begin(), entries.end());
    return MultiIndex(std::move(entries));
}

} // namespace

std::string to_json_string(const HamiltonianPoly& h, int indent) {
    nlohmann::ordered_json doc;
    bool adapted = h.basis() == Basis::Adapted;
    doc["basis"] = adapted ? "adapted" : "plain";
    doc["maxMode"] = h.truncation().max_mode;
    doc["maxDegree"] = h.truncation().max_degree;
    auto terms = nlohmann::ordered_json::array();
    for (const auto& [key, c] : h.terms()) {
        nlohmann::ordered_json t;
        t["a"] = index_to_json(key.a);
        if (adapted) {
            t["b"] = index_to_json(key.b);
            t["l"] = index_to_json(key.k);
            t["l'"] = index_to_json(key.kp);
        } else {
            t["k"] = index_to_json(key.k);
            t["k'"] = index_to_json(key.kp);
        }
        t["re"] = c.real();
        t["im"] = c.imag();
        terms.push_back(std::move(t));
    }
    doc["terms"] = std::move(terms);
    return doc.dump(indent);
}

HamiltonianPoly poly_from_json_string(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    Basis basis = doc.at("basis").get<std::string>() == "adapted" ? Basis::Adapted : Basis::Plain;
    Truncation trunc{doc.at("maxMode").get<int>(), doc.at("maxDegree").get<int>()};
    HamiltonianPoly out(basis, trunc);
    for (const auto& t : doc.at("terms")) {
        TermKey key;
        key.a = index_from_json(t.at("a"));
        if (basis == Basis::Adapted) {
            key.b = index_from_json(t.at("b"));
            key.k = index_from_json(t.at("l"));
            key.kp = index_from_json(t.at("l'"));
        } else {
            key.k = index_from_json(t.at("k"));
            key.kp = index_from_json(t.at("k'"));
        }
        out.add_term(key, Complex(t.at("re").get<double>(), t.at("im").get<double>()));
    }
    return out;
}

} // namespace kamnf
