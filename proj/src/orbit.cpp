#include "kronrec/orbit.hpp"

#include "kronrec/errors.hpp"
#include "open_set_detail.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace kronrec {

// ---------------------------------------------------------------------------
// Window / ReturnSet

Window Window::make(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) {
        throw ShapeError("window [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is empty");
    }
    return Window{lo, hi};
}

ReturnSet::ReturnSet(Window window, boost::dynamic_bitset<> bits, std::string provenance)
    : window_(window), bits_(std::move(bits)), provenance_(std::move(provenance)) {
    if (bits_.size() != window_.size()) {
        throw ShapeError("bitmask length " + std::to_string(bits_.size()) + " does not match window length " +
                         std::to_string(window_.size()));
    }
}

ReturnSet ReturnSet::from_members(Window window, const std::vector<std::int64_t>& members, std::string provenance) {
    boost::dynamic_bitset<> bits(window.size());
    for (auto n : members) {
        if (!window.contains(n)) {
            throw ShapeError("member " + std::to_string(n) + " lies outside the window");
        }
        bits.set(static_cast<std::size_t>(n - window.lo));
    }
    return ReturnSet(window, std::move(bits), std::move(provenance));
}

bool ReturnSet::contains(std::int64_t n) const {
    return window_.contains(n) && bits_.test(static_cast<std::size_t>(n - window_.lo));
}

std::vector<std::int64_t> ReturnSet::members() const {
    std::vector<std::int64_t> out;
    out.reserve(bits_.count());
    for (auto i = bits_.find_first(); i != boost::dynamic_bitset<>::npos; i = bits_.find_next(i)) {
        out.push_back(window_.lo + static_cast<std::int64_t>(i));
    }
    return out;
}

ReturnSet ReturnSet::restricted(Window w) const {
    if (w.lo < window_.lo || w.hi > window_.hi) {
        throw ShapeError("restriction window is not contained in the set's window");
    }
    boost::dynamic_bitset<> bits(w.size());
    const auto offset = static_cast<std::size_t>(w.lo - window_.lo);
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bits_[offset + i];
    return ReturnSet(w, std::move(bits), provenance_);
}

// ---------------------------------------------------------------------------
// IntegerPolynomial

IntegerPolynomial::IntegerPolynomial(std::vector<BigInt> coefficients, bool theorem_mode)
    : coeffs_(std::move(coefficients)), theorem_mode_(theorem_mode) {
    while (coeffs_.size() > 1 && coeffs_.back() == 0) coeffs_.pop_back();
    if (coeffs_.empty()) coeffs_.emplace_back(0);
    if (theorem_mode_ && coeffs_[0] != 0) {
        throw ShapeError("theorem mode requires P(0) = 0, got constant term " + coeffs_[0].str());
    }
}

IntegerPolynomial IntegerPolynomial::parse(std::string_view text, bool theorem_mode) {
    std::string body;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) body.push_back(c);
    }
    if (body.empty()) throw std::invalid_argument("empty polynomial");
    std::vector<BigInt> coeffs{BigInt(0)};
    if (body.front() == '[') {
        if (body.back() != ']') throw std::invalid_argument("unterminated coefficient list '" + body + "'");
        const std::string inner = body.substr(1, body.size() - 2);
        if (!inner.empty()) {
            for (const auto& c : detail::split(inner, ',')) coeffs.emplace_back(c);
        }
        return IntegerPolynomial(std::move(coeffs), theorem_mode);
    }
    std::vector<std::string> terms;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == '+' || body[i] == '-') {
            terms.push_back(body.substr(start, i - start));
            start = i;
        }
    }
    for (std::string term : terms) {
        bool negative = false;
        if (term.front() == '+' || term.front() == '-') {
            negative = term.front() == '-';
            term.erase(0, 1);
        }
        if (term.empty()) throw std::invalid_argument("malformed polynomial '" + body + "'");
        const auto var = term.find_first_of("nx");
        std::size_t power = 0;
        std::string coeff_text = term;
        if (var != std::string::npos) {
            coeff_text = term.substr(0, var);
            if (!coeff_text.empty() && coeff_text.back() == '*') coeff_text.pop_back();
            const std::string rest = term.substr(var + 1);
            if (rest.empty()) {
                power = 1;
            } else if (rest.front() == '^' && rest.size() > 1 &&
                       std::all_of(rest.begin() + 1, rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                power = std::stoul(rest.substr(1));
            } else {
                throw std::invalid_argument("malformed term '" + term + "'");
            }
        }
        if (coeff_text.empty()) coeff_text = "1";
        if (!std::all_of(coeff_text.begin(), coeff_text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw std::invalid_argument("malformed coefficient '" + coeff_text + "'");
        }
        BigInt c(coeff_text);
        if (negative) c = -c;
        if (coeffs.size() <= power) coeffs.resize(power + 1, BigInt(0));
        coeffs[power] += c;
    }
    return IntegerPolynomial(std::move(coeffs), theorem_mode);
}

BigInt IntegerPolynomial::operator()(const BigInt& n) const {
    BigInt acc = 0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * n + *it;
    return acc;
}

std::string IntegerPolynomial::to_string() const {
    std::string out;
    for (int p = degree(); p >= 0; --p) {
        const BigInt& c = coeffs_[static_cast<std::size_t>(p)];
        if (c == 0) continue;
        const BigInt mag = c < 0 ? BigInt(-c) : c;
        if (out.empty()) {
            if (c < 0) out += "-";
        } else {
            out += c < 0 ? " - " : " + ";
        }
        if (p == 0 || mag != 1) {
            out += mag.str();
            if (p > 0) out += "*";
        }
        if (p >= 1) out += "n";
        if (p >= 2) out += "^" + std::to_string(p);
    }
    return out.empty() ? "0" : out;
}

// ---------------------------------------------------------------------------
// Skew product

namespace {

const GroupDescriptor kCircle = GroupDescriptor::make(1, {});

GroupPoint on_circle(const TorusCoord& c) {
    GroupPoint p;
    p.torus.push_back(c);
    return p;
}

void check_skew_point(const GroupPoint& p) {
    if (p.torus.size() != 2 || !p.torsion.empty()) {
        throw ShapeError("skew product points live on T^2");
    }
}

BigInt binomial2(std::int64_t n) {
    const BigInt b(n);
    return b * (b - 1) / 2;
}

}  // namespace

GroupPoint SkewSystem::step(const GroupPoint& p) const {
    check_skew_point(p);
    const auto x = add(kCircle, on_circle(p.torus[0]), on_circle(alpha));
    const auto y = add(kCircle, on_circle(p.torus[1]), on_circle(p.torus[0]));
    return GroupPoint{{x.torus[0], y.torus[0]}, {}};
}

GroupPoint SkewSystem::step_back(const GroupPoint& p) const {
    check_skew_point(p);
    const auto x = subtract(kCircle, on_circle(p.torus[0]), on_circle(alpha));
    const auto y = subtract(kCircle, on_circle(p.torus[1]), x);
    return GroupPoint{{x.torus[0], y.torus[0]}, {}};
}

GroupPoint SkewSystem::point_at(const GroupPoint& start, std::int64_t n) const {
    check_skew_point(start);
    const auto a = on_circle(alpha);
    const auto x0 = on_circle(start.torus[0]);
    const auto x = add(kCircle, x0, scalar_mul(kCircle, n, a));
    auto y = add(kCircle, on_circle(start.torus[1]), scalar_mul(kCircle, n, x0));
    y = add(kCircle, y, scalar_mul(kCircle, binomial2(n), a));
    return GroupPoint{{x.torus[0], y.torus[0]}, {}};
}

// ---------------------------------------------------------------------------
// Orbit evaluation

namespace {

/// Integer multiplier that stays in machine words when it can.
struct Mult {
    std::int64_t small = 0;
    BigInt big;
    bool is_big = false;

    void set(std::int64_t v) {
        small = v;
        is_big = false;
    }
    void set(const BigInt& v) {
        if (v > std::numeric_limits<std::int64_t>::min() / 2 && v < std::numeric_limits<std::int64_t>::max() / 2) {
            small = v.convert_to<std::int64_t>();
            is_big = false;
        } else {
            big = v;
            is_big = true;
        }
    }
    double magnitude() const { return is_big ? std::abs(big.convert_to<double>()) : std::abs(static_cast<double>(small)); }
    BigInt value() const { return is_big ? big : BigInt(small); }
    std::int64_t mod(std::int64_t m) const {
        if (is_big) {
            BigInt r = big % m;
            if (r < 0) r += m;
            return r.convert_to<std::int64_t>();
        }
        const std::int64_t r = small % m;
        return r < 0 ? r + m : r;
    }
};

/// A torus value gamma, split as hi + lo for double-double products.
struct Term {
    bool exact = false;
    QuadraticNumber q;
    double hi = 0.0;
    double lo = 0.0;

    static Term of(const TorusCoord& c) {
        Term t;
        if (c.is_exact()) {
            t.exact = true;
            t.q = c.exact_value()->frac();
            t.hi = t.q.to_double();
            t.lo = (t.q - QuadraticNumber::from_rational(Rational(t.hi))).to_double();
        } else {
            t.hi = c.value();
        }
        return t;
    }

    double frac_times(const Mult& m) const {
        double f = m.is_big ? frac_of_product(hi, m.big) : frac_of_product(hi, m.small);
        if (lo != 0.0) f += m.is_big ? frac_of_product(lo, m.big) : frac_of_product(lo, m.small);
        return f;
    }
};

/// Coordinate j of the orbit point at step n is sum_t mult_t(n) * terms[j][t];
/// torsion coordinate i is (sum_t mult_t(n) * residues[i][t]) mod m_i.
struct OrbitModel {
    std::vector<std::vector<Term>> torus;
    std::vector<std::vector<std::int64_t>> torsion;
    /// Fills the multipliers of every term for step n, one vector per coordinate.
    std::function<void(std::int64_t, std::vector<std::vector<Mult>>&, std::vector<std::vector<Mult>>&)> multipliers;
};

struct ChunkResult {
    boost::dynamic_bitset<> bits;
    GenerationStats stats;
};

ChunkResult run_chunk(const OrbitModel& model, const OpenSet& U, std::int64_t lo, std::int64_t hi, double guard) {
    const GroupDescriptor& K = U.group();
    const std::size_t r = model.torus.size();
    const std::size_t t = model.torsion.size();
    ChunkResult out;
    out.bits.resize(static_cast<std::size_t>(hi - lo + 1));

    bool all_exact = true;
    for (const auto& coord : model.torus) {
        for (const auto& term : coord) all_exact = all_exact && term.exact;
    }

    std::vector<std::vector<Mult>> tm(r);
    std::vector<std::vector<Mult>> sm(t);
    for (std::size_t j = 0; j < r; ++j) tm[j].resize(model.torus[j].size());
    for (std::size_t i = 0; i < t; ++i) sm[i].resize(model.torsion[i].size());
    std::vector<double> values(r);
    std::vector<std::int64_t> residues(t);
    std::vector<QuadraticNumber> exact_values(r);

    for (std::int64_t n = lo; n <= hi; ++n) {
        model.multipliers(n, tm, sm);
        double bound = 0.0;
        for (std::size_t j = 0; j < r; ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < model.torus[j].size(); ++k) {
                v += model.torus[j][k].frac_times(tm[j][k]);
                if (model.torus[j][k].exact) bound += tm[j][k].magnitude() * 0x1p-104 + 0x1p-49;
            }
            values[j] = wrap01(v);
        }
        for (std::size_t i = 0; i < t; ++i) {
            const std::int64_t m = K.torsion_orders[i];
            std::int64_t acc = 0;
            for (std::size_t k = 0; k < model.torsion[i].size(); ++k) {
                acc = (acc + sm[i][k].mod(m) * model.torsion[i][k]) % m;
            }
            residues[i] = acc;
        }

        std::optional<bool> in;
        if (all_exact) {
            in = detail::filtered_membership(U, values.data(), residues.data(), bound);
            if (!in) {
                try {
                    for (std::size_t j = 0; j < r; ++j) {
                        QuadraticNumber s;
                        for (std::size_t k = 0; k < model.torus[j].size(); ++k) {
                            s = s + (model.torus[j][k].q * tm[j][k].value()).frac();
                        }
                        exact_values[j] = s.frac();
                    }
                    in = detail::exact_membership(U, exact_values, residues.data());
                    ++out.stats.exact_fallbacks;
                } catch (const std::domain_error&) {
                    in = detail::filtered_membership(U, values.data(), residues.data(), guard);
                }
            }
        } else {
            in = detail::filtered_membership(U, values.data(), residues.data(), guard);
        }
        if (!in) {
            ++out.stats.boundary_ambiguous;
        } else if (*in) {
            out.bits.set(static_cast<std::size_t>(n - lo));
        }
    }
    return out;
}

GeneratedReturnSet run_model(const OrbitModel& model, const OpenSet& U, Window window, const OrbitOptions& options,
                             std::string provenance) {
    const unsigned threads = std::max(1U, options.threads);
    const auto total = static_cast<std::int64_t>(window.size());
    const std::int64_t chunks = std::min<std::int64_t>(threads, total);
    std::vector<ChunkResult> results(static_cast<std::size_t>(chunks));
    std::vector<std::int64_t> bounds;
    for (std::int64_t c = 0; c <= chunks; ++c) bounds.push_back(window.lo + total * c / chunks);

    if (chunks == 1) {
        results[0] = run_chunk(model, U, window.lo, window.hi, options.guard);
    } else {
        std::vector<std::thread> pool;
        for (std::int64_t c = 0; c < chunks; ++c) {
            pool.emplace_back([&, c] {
                results[static_cast<std::size_t>(c)] =
                    run_chunk(model, U, bounds[static_cast<std::size_t>(c)], bounds[static_cast<std::size_t>(c) + 1] - 1,
                              options.guard);
            });
        }
        for (auto& th : pool) th.join();
    }

    GeneratedReturnSet out;
    boost::dynamic_bitset<> bits(window.size());
    std::size_t offset = 0;
    for (const auto& res : results) {
        for (auto i = res.bits.find_first(); i != boost::dynamic_bitset<>::npos; i = res.bits.find_next(i)) {
            bits.set(offset + i);
        }
        offset += res.bits.size();
        out.stats.boundary_ambiguous += res.stats.boundary_ambiguous;
        out.stats.exact_fallbacks += res.stats.exact_fallbacks;
    }
    out.set = ReturnSet(window, std::move(bits), std::move(provenance));
    return out;
}

void check_same_group(const GroupDescriptor& K, const OpenSet& U) {
    if (!(K == U.group())) {
        throw ShapeError("open set lives on " + U.group().to_string() + ", orbit on " + K.to_string());
    }
}

}  // namespace

GeneratedReturnSet return_set_linear(const GroupDescriptor& K, const GroupPoint& alpha, const OpenSet& U, Window window,
                                     const OrbitOptions& options, const std::optional<GroupPoint>& start) {
    validate_point(K, alpha);
    check_same_group(K, U);
    const GroupPoint x0 = start.value_or(identity(K));
    validate_point(K, x0);

    OrbitModel model;
    for (std::size_t j = 0; j < alpha.torus.size(); ++j) {
        model.torus.push_back({Term::of(x0.torus[j]), Term::of(alpha.torus[j])});
    }
    for (std::size_t i = 0; i < alpha.torsion.size(); ++i) {
        model.torsion.push_back({x0.torsion[i], alpha.torsion[i]});
    }
    model.multipliers = [](std::int64_t n, auto& tm, auto& sm) {
        for (auto& c : tm) {
            c[0].set(std::int64_t{1});
            c[1].set(n);
        }
        for (auto& c : sm) {
            c[0].set(std::int64_t{1});
            c[1].set(n);
        }
    };
    std::string prov = "linear K=" + K.to_string() + " alpha=" + point_to_string(alpha);
    if (start) prov += " start=" + point_to_string(*start);
    prov += " U=" + U.to_string();
    return run_model(model, U, window, options, std::move(prov));
}

GeneratedReturnSet return_set_polynomial(const GroupDescriptor& K, const GroupPoint& alpha, const IntegerPolynomial& P,
                                         const OpenSet& U, Window window, const OrbitOptions& options) {
    validate_point(K, alpha);
    check_same_group(K, U);
    OrbitModel model;
    for (const auto& c : alpha.torus) model.torus.push_back({Term::of(c)});
    for (auto c : alpha.torsion) model.torsion.push_back({c});
    model.multipliers = [&P](std::int64_t n, auto& tm, auto& sm) {
        const BigInt v = P(n);
        for (auto& c : tm) c[0].set(v);
        for (auto& c : sm) c[0].set(v);
    };
    return run_model(model, U, window, options,
                     "polynomial K=" + K.to_string() + " alpha=" + point_to_string(alpha) + " P=" + P.to_string() +
                         " U=" + U.to_string());
}

GeneratedReturnSet return_set_skew(const SkewSystem& S, const GroupPoint& x0, const OpenSet& U, Window window,
                                   const OrbitOptions& options) {
    check_skew_point(x0);
    const GroupDescriptor T2 = GroupDescriptor::make(2, {});
    check_same_group(T2, U);
    OrbitModel model;
    const Term a = Term::of(S.alpha);
    const Term x = Term::of(x0.torus[0]);
    model.torus.push_back({x, a});
    model.torus.push_back({Term::of(x0.torus[1]), x, a});
    model.multipliers = [](std::int64_t n, auto& tm, auto&) {
        tm[0][0].set(std::int64_t{1});
        tm[0][1].set(n);
        tm[1][0].set(std::int64_t{1});
        tm[1][1].set(n);
        constexpr std::int64_t small_limit = std::int64_t{1} << 31;
        if (n > -small_limit && n < small_limit) {
            tm[1][2].set(n * (n - 1) / 2);
        } else {
            tm[1][2].set(binomial2(n));
        }
    };
    return run_model(model, U, window, options,
                     "skew alpha=" + S.alpha.to_string() + " x0=" + point_to_string(x0) + " U=" + U.to_string());
}

double weyl_discrepancy(const GroupDescriptor& K, const GroupPoint& alpha, const IntegerPolynomial& P,
                        const Character& chi, std::int64_t N) {
    validate_point(K, alpha);
    validate_character(K, chi);
    if (N <= 0) throw ShapeError("weyl_discrepancy needs N >= 1");
    if (chi.is_trivial()) return 1.0;

    std::vector<Term> terms;
    for (const auto& c : alpha.torus) terms.push_back(Term::of(c));
    double re = 0.0, im = 0.0, cre = 0.0, cim = 0.0;
    auto neumaier = [](double& sum, double& comp, double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    };
    Mult m;
    for (std::int64_t n = 1; n <= N; ++n) {
        m.set(P(n));
        double phase = 0.0;
        for (std::size_t j = 0; j < terms.size(); ++j) {
            phase = wrap01(phase + frac_of_product(terms[j].frac_times(m), chi.torus_freqs[j]));
        }
        for (std::size_t i = 0; i < alpha.torsion.size(); ++i) {
            const std::int64_t mi = K.torsion_orders[i];
            const std::int64_t c = (m.mod(mi) * alpha.torsion[i]) % mi;
            const std::int64_t a = ((chi.torsion_freqs[i] % mi) + mi) % mi;
            phase = wrap01(phase + static_cast<double>((a * c) % mi) / static_cast<double>(mi));
        }
        const auto z = unit_phasor(phase);
        neumaier(re, cre, z.real());
        neumaier(im, cim, z.imag());
    }
    return std::abs(std::complex<double>(re + cre, im + cim)) / static_cast<double>(N);
}

}  // namespace kronrec
