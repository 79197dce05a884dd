#include "kronrec/group.hpp"

#include "kronrec/errors.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>

namespace kronrec {

namespace {

std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

std::int64_t mod_floor(const BigInt& a, std::int64_t m) {
    BigInt r = a % m;
    if (r < 0) r += m;
    return r.convert_to<std::int64_t>();
}

}  // namespace

// ---------------------------------------------------------------------------
// GroupDescriptor

GroupDescriptor GroupDescriptor::make(int torus_rank, std::vector<std::int64_t> torsion_orders) {
    if (torus_rank < 0) {
        throw ShapeError("torus rank must be non-negative");
    }
    for (auto m : torsion_orders) {
        if (m < 2) {
            throw ShapeError("torsion order " + std::to_string(m) + " must be >= 2");
        }
    }
    std::sort(torsion_orders.begin(), torsion_orders.end());
    GroupDescriptor K;
    K.torus_rank = torus_rank;
    K.torsion_orders = std::move(torsion_orders);
    return K;
}

std::int64_t GroupDescriptor::torsion_size() const {
    std::int64_t n = 1;
    for (auto m : torsion_orders) n *= m;
    return n;
}

GroupDescriptor GroupDescriptor::invariant_factor_form() const {
    // Split every order into prime powers, then recombine the largest powers
    // of each prime into the last factor, the next largest into the one
    // before, and so on.
    std::map<std::int64_t, std::vector<std::int64_t>> powers;
    for (auto m : torsion_orders) {
        std::int64_t rest = m;
        for (std::int64_t p = 2; p * p <= rest; ++p) {
            std::int64_t pk = 1;
            while (rest % p == 0) {
                rest /= p;
                pk *= p;
            }
            if (pk > 1) powers[p].push_back(pk);
        }
        if (rest > 1) powers[rest].push_back(rest);
    }
    std::size_t len = 0;
    for (auto& [p, v] : powers) {
        std::sort(v.begin(), v.end(), std::greater<>());
        len = std::max(len, v.size());
    }
    std::vector<std::int64_t> factors(len, 1);
    for (auto& [p, v] : powers) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            factors[len - 1 - i] *= v[i];
        }
    }
    factors.erase(std::remove(factors.begin(), factors.end(), 1), factors.end());
    return make(torus_rank, std::move(factors));
}

bool GroupDescriptor::isomorphic_to(const GroupDescriptor& other) const {
    return invariant_factor_form() == other.invariant_factor_form();
}

std::string GroupDescriptor::to_string() const {
    std::vector<std::string> parts;
    if (torus_rank > 0) parts.push_back("T^" + std::to_string(torus_rank));
    for (auto m : torsion_orders) parts.push_back("Z/" + std::to_string(m));
    if (parts.empty()) return "1";
    std::string out = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) out += " x " + parts[i];
    return out;
}

GroupDescriptor parse_group(std::string_view text) {
    int rank = 0;
    std::vector<std::int64_t> torsion;
    for (const auto& raw : detail::split(text, 'x')) {
        const std::string tok = detail::trim(raw);
        if (tok.empty()) {
            throw ShapeError("empty factor in group literal '" + std::string(text) + "'");
        }
        if (tok == "1") {
            continue;
        }
        if (tok == "T") {
            rank += 1;
        } else if (tok.rfind("T^", 0) == 0) {
            rank += std::stoi(tok.substr(2));
        } else if (tok.rfind("Z/", 0) == 0) {
            torsion.push_back(std::stoll(tok.substr(2)));
        } else {
            throw ShapeError("unknown group factor '" + tok + "'");
        }
    }
    return GroupDescriptor::make(rank, std::move(torsion));
}

// ---------------------------------------------------------------------------
// Coordinates

double wrap01(double x) {
    double f = x - std::floor(x);
    if (!(f < 1.0)) f = 0.0;  // rounding up to 1.0, or NaN
    if (f <= 0.0) f = 0.0;    // also maps -0.0 to +0.0
    return f;
}

double frac_of_product(double x, std::int64_t n) {
    constexpr std::int64_t exact_limit = std::int64_t{1} << 53;
    if (n > -exact_limit && n < exact_limit) {
        const double dn = static_cast<double>(n);
        const double p = dn * x;
        const double e = std::fma(dn, x, -p);
        const double f = p - std::floor(p);
        return wrap01(f + e);
    }
    return frac_of_product(x, BigInt(n));
}

double frac_of_product(double x, const BigInt& n) {
    if (x == 0.0) return 0.0;
    int exp = 0;
    const double m = std::frexp(x, &exp);
    const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
    const int shift = 53 - exp;
    if (shift <= 0) {
        return 0.0;  // x is an integer
    }
    const BigInt modulus = BigInt(1) << shift;
    BigInt r = (n * mant) % modulus;
    if (r < 0) r += modulus;
    return wrap01(std::ldexp(r.convert_to<double>(), -shift));
}

double circle_distance(double x, double y) {
    const double f = wrap01(x - y);
    return std::min(f, 1.0 - f);
}

TorusCoord TorusCoord::approx(double v) {
    TorusCoord c;
    c.value_ = wrap01(v);
    c.exact_.reset();
    return c;
}

TorusCoord TorusCoord::exact(const QuadraticNumber& q) {
    TorusCoord c;
    c.exact_ = q.frac();
    c.value_ = wrap01(c.exact_->to_double());
    return c;
}

std::string TorusCoord::to_string() const {
    if (exact_) return exact_->to_string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "~%.17g", value_);
    return buf;
}

bool operator==(const TorusCoord& a, const TorusCoord& b) {
    if (a.exact_ && b.exact_) return *a.exact_ == *b.exact_;
    return a.value_ == b.value_ && a.exact_.has_value() == b.exact_.has_value();
}

bool GroupPoint::is_exact() const {
    return std::all_of(torus.begin(), torus.end(), [](const TorusCoord& c) { return c.is_exact(); });
}

bool Character::is_trivial() const {
    auto zero = [](std::int64_t v) { return v == 0; };
    return std::all_of(torus_freqs.begin(), torus_freqs.end(), zero) &&
           std::all_of(torsion_freqs.begin(), torsion_freqs.end(), zero);
}

std::int64_t Character::height() const {
    std::int64_t h = 0;
    for (auto k : torus_freqs) h = std::max(h, k < 0 ? -k : k);
    return h;
}

std::string Character::to_string() const {
    std::string out = "(";
    for (std::size_t i = 0; i < torus_freqs.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(torus_freqs[i]);
    }
    if (!torsion_freqs.empty()) {
        out += "; ";
        for (std::size_t i = 0; i < torsion_freqs.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(torsion_freqs[i]);
        }
    }
    return out + ")";
}

// ---------------------------------------------------------------------------
// Group law

void validate_point(const GroupDescriptor& K, const GroupPoint& a) {
    if (a.torus.size() != static_cast<std::size_t>(K.torus_rank) ||
        a.torsion.size() != K.torsion_orders.size()) {
        throw ShapeError("point has shape (" + std::to_string(a.torus.size()) + ", " +
                         std::to_string(a.torsion.size()) + "), group " + K.to_string() +
                         " needs (" + std::to_string(K.torus_rank) + ", " +
                         std::to_string(K.torsion_orders.size()) + ")");
    }
    for (std::size_t i = 0; i < a.torsion.size(); ++i) {
        if (a.torsion[i] < 0 || a.torsion[i] >= K.torsion_orders[i]) {
            throw ShapeError("torsion coordinate out of range");
        }
    }
}

void validate_character(const GroupDescriptor& K, const Character& chi) {
    if (chi.torus_freqs.size() != static_cast<std::size_t>(K.torus_rank) ||
        chi.torsion_freqs.size() != K.torsion_orders.size()) {
        throw ShapeError("character shape does not match group " + K.to_string());
    }
}

GroupPoint identity(const GroupDescriptor& K) {
    GroupPoint p;
    p.torus.assign(static_cast<std::size_t>(K.torus_rank), TorusCoord{});
    p.torsion.assign(K.torsion_orders.size(), 0);
    return p;
}

namespace {

TorusCoord add_coord(const TorusCoord& a, const TorusCoord& b) {
    if (a.is_exact() && b.is_exact() && a.exact_value()->compatible(*b.exact_value())) {
        return TorusCoord::exact(*a.exact_value() + *b.exact_value());
    }
    return TorusCoord::approx(a.value() + b.value());
}

}  // namespace

GroupPoint add(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b) {
    validate_point(K, a);
    validate_point(K, b);
    GroupPoint r;
    r.torus.reserve(a.torus.size());
    for (std::size_t i = 0; i < a.torus.size(); ++i) {
        r.torus.push_back(add_coord(a.torus[i], b.torus[i]));
    }
    for (std::size_t i = 0; i < a.torsion.size(); ++i) {
        r.torsion.push_back(mod_floor(a.torsion[i] + b.torsion[i], K.torsion_orders[i]));
    }
    return r;
}

GroupPoint negate(const GroupDescriptor& K, const GroupPoint& a) { return scalar_mul(K, std::int64_t{-1}, a); }

GroupPoint subtract(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b) {
    return add(K, a, negate(K, b));
}

GroupPoint scalar_mul(const GroupDescriptor& K, const BigInt& n, const GroupPoint& a) {
    validate_point(K, a);
    GroupPoint r;
    r.torus.reserve(a.torus.size());
    for (const auto& c : a.torus) {
        if (c.is_exact()) {
            r.torus.push_back(TorusCoord::exact(*c.exact_value() * n));
        } else {
            r.torus.push_back(TorusCoord::approx(frac_of_product(c.value(), n)));
        }
    }
    for (std::size_t i = 0; i < a.torsion.size(); ++i) {
        const std::int64_t m = K.torsion_orders[i];
        r.torsion.push_back(mod_floor(BigInt(mod_floor(n, m)) * a.torsion[i], m));
    }
    return r;
}

GroupPoint scalar_mul(const GroupDescriptor& K, std::int64_t n, const GroupPoint& a) {
    return scalar_mul(K, BigInt(n), a);
}

double char_phase(const GroupDescriptor& K, const Character& chi, const GroupPoint& a) {
    validate_point(K, a);
    validate_character(K, chi);
    double phase = 0.0;
    for (std::size_t i = 0; i < a.torus.size(); ++i) {
        phase = wrap01(phase + frac_of_product(a.torus[i].value(), chi.torus_freqs[i]));
    }
    for (std::size_t i = 0; i < a.torsion.size(); ++i) {
        const std::int64_t m = K.torsion_orders[i];
        const std::int64_t num = mod_floor(BigInt(chi.torsion_freqs[i]) * a.torsion[i], m);
        phase = wrap01(phase + static_cast<double>(num) / static_cast<double>(m));
    }
    return phase;
}

std::complex<double> unit_phasor(double turns) {
    double phase = wrap01(turns);
    const double quarters = phase * 4.0;
    if (quarters == std::floor(quarters)) {
        switch (static_cast<int>(quarters)) {
            case 0:
                return {1.0, 0.0};
            case 1:
                return {0.0, 1.0};
            case 2:
                return {-1.0, 0.0};
            default:
                return {0.0, -1.0};
        }
    }
    if (phase >= 0.5) phase -= 1.0;
    const double angle = 2.0 * std::numbers::pi * phase;
    return {std::cos(angle), std::sin(angle)};
}

std::complex<double> char_eval(const GroupDescriptor& K, const Character& chi, const GroupPoint& a) {
    return unit_phasor(char_phase(K, chi, a));
}

double invariant_metric(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b) {
    validate_point(K, a);
    validate_point(K, b);
    double d = 0.0;
    double weight = 0.5;
    for (std::size_t i = 0; i < a.torus.size(); ++i, weight *= 0.5) {
        d += weight * circle_distance(a.torus[i].value(), b.torus[i].value());
    }
    for (std::size_t i = 0; i < a.torsion.size(); ++i, weight *= 0.5) {
        const std::int64_t m = K.torsion_orders[i];
        const std::int64_t diff = mod_floor(a.torsion[i] - b.torsion[i], m);
        d += weight * static_cast<double>(std::min(diff, m - diff)) / static_cast<double>(m);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Generator test

std::string GeneratorCertificate::to_string() const {
    if (!generator) {
        return "not a generator: character " + (witness ? witness->to_string() : std::string("?")) +
               " is trivial on alpha";
    }
    if (height_bound > 0) {
        return std::string("generator up to height ") + std::to_string(height_bound) +
               (exact ? " (exact)" : " (floating-point)");
    }
    return "generator (exact)";
}

GeneratorCertificate is_generator(const GroupDescriptor& K, const GroupPoint& alpha, std::int64_t height_bound) {
    validate_point(K, alpha);
    const auto r = static_cast<std::size_t>(K.torus_rank);
    const std::size_t t = K.torsion_orders.size();
    const std::int64_t H = r > 0 ? std::max<std::int64_t>(height_bound, 0) : 0;

    GeneratorCertificate cert;
    cert.height_bound = r > 0 ? H : 0;
    cert.exact = alpha.is_exact();

    // Torus frequencies run through 0, 1, -1, 2, -2, ... so the first hit of
    // minimal height has a positive leading entry.
    auto torus_value = [](std::int64_t idx) { return idx % 2 == 1 ? (idx + 1) / 2 : -(idx / 2); };
    const std::int64_t torus_span = 2 * H + 1;

    std::vector<std::int64_t> torus_idx(r, 0);
    std::vector<std::int64_t> torsion_val(t, 0);

    auto trivial_on_alpha = [&](const Character& chi) {
        if (cert.exact) {
            Rational rat = 0;
            std::map<std::int64_t, Rational> irr;
            for (std::size_t i = 0; i < r; ++i) {
                const auto& q = *alpha.torus[i].exact_value();
                rat += q.rational_part() * chi.torus_freqs[i];
                if (q.radicand() != 0) irr[q.radicand()] += q.irrational_part() * chi.torus_freqs[i];
            }
            for (std::size_t i = 0; i < t; ++i) {
                rat += Rational(BigInt(chi.torsion_freqs[i]) * alpha.torsion[i], BigInt(K.torsion_orders[i]));
            }
            for (const auto& [d, c] : irr) {
                if (c != 0) return false;
            }
            return boost::multiprecision::denominator(rat) == 1;
        }
        const double phase = char_phase(K, chi, alpha);
        double tol = 1e-10;
        for (auto k : chi.torus_freqs) tol += 1e-12 * static_cast<double>(k < 0 ? -k : k);
        return std::min(phase, 1.0 - phase) < tol;
    };

    std::optional<Character> best;
    for (;;) {
        Character chi;
        chi.torus_freqs.resize(r);
        for (std::size_t i = 0; i < r; ++i) chi.torus_freqs[i] = torus_value(torus_idx[i]);
        chi.torsion_freqs = torsion_val;
        if (!chi.is_trivial() && (!best || chi.height() < best->height()) && trivial_on_alpha(chi)) {
            best = chi;
        }
        // odometer: torsion digits fastest, then torus digits
        std::size_t pos = 0;
        bool carried = true;
        while (carried && pos < t) {
            if (++torsion_val[pos] < K.torsion_orders[pos]) {
                carried = false;
            } else {
                torsion_val[pos] = 0;
                ++pos;
            }
        }
        pos = 0;
        while (carried && pos < r) {
            if (++torus_idx[pos] < torus_span) {
                carried = false;
            } else {
                torus_idx[pos] = 0;
                ++pos;
            }
        }
        if (carried) break;
    }
    cert.generator = !best.has_value();
    cert.witness = best;
    return cert;
}

// ---------------------------------------------------------------------------
// Literals

GroupPoint parse_point(const GroupDescriptor& K, std::string_view text) {
    std::string body = detail::trim(text);
    std::vector<std::string> items;
    if (K.dimension() == 1) {
        items.push_back(body);
    } else {
        if (body.size() < 2 || body.front() != '(' || body.back() != ')') {
            throw ShapeError("point literal '" + body + "' must be parenthesised for " + K.to_string());
        }
        items = detail::split_top_level(body.substr(1, body.size() - 2), ',');
    }
    if (items.size() != K.dimension()) {
        throw ShapeError("point literal '" + body + "' has " + std::to_string(items.size()) +
                         " coordinates, group " + K.to_string() + " has " + std::to_string(K.dimension()));
    }
    GroupPoint p;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string item = detail::trim(items[i]);
        if (i < static_cast<std::size_t>(K.torus_rank)) {
            if (!item.empty() && item[0] == '~') {
                p.torus.push_back(TorusCoord::approx(std::stod(item.substr(1))));
            } else {
                p.torus.push_back(TorusCoord::exact(parse_quadratic(item)));
            }
        } else {
            const std::int64_t m = K.torsion_orders[i - static_cast<std::size_t>(K.torus_rank)];
            p.torsion.push_back(mod_floor(std::stoll(item), m));
        }
    }
    return p;
}

std::string point_to_string(const GroupPoint& p) {
    std::vector<std::string> parts;
    for (const auto& c : p.torus) parts.push_back(c.to_string());
    for (auto c : p.torsion) parts.push_back(std::to_string(c));
    std::string out = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ", ";
        out += parts[i];
    }
    return out + ")";
}

Character parse_character(const GroupDescriptor& K, std::string_view text) {
    std::string body = detail::trim(text);
    if (!body.empty() && body.front() == '(' && body.back() == ')') {
        body = body.substr(1, body.size() - 2);
    }
    std::replace(body.begin(), body.end(), ';', ',');
    const auto items = detail::split(body, ',');
    if (items.size() != K.dimension()) {
        throw ShapeError("character literal has " + std::to_string(items.size()) +
                         " frequencies, group " + K.to_string() + " has " + std::to_string(K.dimension()));
    }
    Character chi;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::int64_t v = std::stoll(detail::trim(items[i]));
        if (i < static_cast<std::size_t>(K.torus_rank)) {
            chi.torus_freqs.push_back(v);
        } else {
            chi.torsion_freqs.push_back(mod_floor(v, K.torsion_orders[i - static_cast<std::size_t>(K.torus_rank)]));
        }
    }
    return chi;
}

}  // namespace kronrec
