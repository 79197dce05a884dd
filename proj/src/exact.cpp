#include "kronrec/exact.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace kronrec {

namespace mp = boost::multiprecision;

BigInt floor_div(const BigInt& num, const BigInt& den) {
    BigInt q = num / den;
    BigInt r = num - q * den;
    if (r != 0 && ((r < 0) != (den < 0))) {
        q -= 1;
    }
    return q;
}

QuadraticNumber::QuadraticNumber(Rational a, Rational b, std::int64_t radicand)
    : a_(std::move(a)), b_(std::move(b)), d_(radicand) {
    if (d_ < 0) {
        throw std::domain_error("negative radicand");
    }
    if (d_ != 0) {
        // Pull square factors out of the radicand.
        std::int64_t coef = 1;
        for (std::int64_t f = 2; f * f <= d_; ++f) {
            while (d_ % (f * f) == 0) {
                d_ /= f * f;
                coef *= f;
            }
        }
        b_ *= coef;
        if (d_ == 1) {
            a_ += b_;
            b_ = 0;
            d_ = 0;
        }
    }
    normalize();
}

void QuadraticNumber::normalize() {
    if (b_ == 0) {
        d_ = 0;
    }
    if (d_ == 0) {
        b_ = 0;
    }
}

QuadraticNumber QuadraticNumber::from_rational(Rational r) {
    QuadraticNumber q;
    q.a_ = std::move(r);
    return q;
}

QuadraticNumber QuadraticNumber::sqrt_of(std::int64_t n) {
    if (n < 0) {
        throw std::domain_error("sqrt of negative integer");
    }
    if (n == 0) {
        return {};
    }
    return QuadraticNumber(Rational(0), Rational(1), n);
}

int QuadraticNumber::sign() const {
    const int sa = a_.sign();
    const int sb = b_.sign();
    if (sb == 0) return sa;
    if (sa == 0 || sa == sb) return sb;
    // Opposite signs: compare a^2 with b^2 d (never equal for squarefree d >= 2).
    const Rational lhs = a_ * a_;
    const Rational rhs = b_ * b_ * d_;
    return lhs > rhs ? sa : sb;
}

BigInt QuadraticNumber::floor() const {
    const BigInt& pa = mp::numerator(a_);
    const BigInt& qa = mp::denominator(a_);
    if (d_ == 0) {
        return floor_div(pa, qa);
    }
    const BigInt& pb = mp::numerator(b_);
    const BigInt& qb = mp::denominator(b_);
    const BigInt den = qa * qb;
    const BigInt A = pa * qb;
    const BigInt B = pb * qa;
    const BigInt s = mp::sqrt(BigInt(B * B * d_));
    const BigInt fb = B >= 0 ? s : BigInt(-s - 1);
    return floor_div(A + fb, den);
}

QuadraticNumber QuadraticNumber::frac() const {
    QuadraticNumber r = *this;
    r.a_ -= Rational(floor());
    return r;
}

long double QuadraticNumber::to_long_double() const {
    const long double a = a_.convert_to<long double>();
    if (d_ == 0 || b_ == 0) return a;
    const long double s = b_.convert_to<long double>() * std::sqrt(static_cast<long double>(d_));
    if ((a_ < 0) == (b_ < 0) || a_ == 0) return a + s;
    // Opposite signs cancel; use (a^2 - d b^2) / (a - b sqrt d) with an exact numerator.
    const Rational num = a_ * a_ - Rational(d_) * b_ * b_;
    return num.convert_to<long double>() / (a - s);
}

double QuadraticNumber::to_double() const { return static_cast<double>(to_long_double()); }

std::string rational_to_string(const Rational& r) {
    if (mp::denominator(r) == 1) {
        return mp::numerator(r).str();
    }
    return mp::numerator(r).str() + "/" + mp::denominator(r).str();
}

double rational_to_double(const Rational& r) { return r.convert_to<double>(); }

std::string QuadraticNumber::to_string() const {
    if (d_ == 0) {
        return rational_to_string(a_);
    }
    std::string out;
    if (a_ != 0) {
        out = rational_to_string(a_);
        if (b_ > 0) out += "+";
    }
    out += rational_to_string(b_) + "*sqrt(" + std::to_string(d_) + ")";
    return out;
}

namespace {

std::int64_t common_radicand(const QuadraticNumber& x, const QuadraticNumber& y) {
    if (!x.compatible(y)) {
        throw std::domain_error("quadratic numbers with different radicands: sqrt(" +
                                std::to_string(x.radicand()) + ") vs sqrt(" +
                                std::to_string(y.radicand()) + ")");
    }
    return x.radicand() != 0 ? x.radicand() : y.radicand();
}

}  // namespace

QuadraticNumber QuadraticNumber::operator-() const {
    QuadraticNumber r = *this;
    r.a_ = -r.a_;
    r.b_ = -r.b_;
    return r;
}

QuadraticNumber operator+(const QuadraticNumber& x, const QuadraticNumber& y) {
    QuadraticNumber r;
    r.d_ = common_radicand(x, y);
    r.a_ = x.a_ + y.a_;
    r.b_ = x.b_ + y.b_;
    r.normalize();
    return r;
}

QuadraticNumber operator-(const QuadraticNumber& x, const QuadraticNumber& y) { return x + (-y); }

QuadraticNumber operator*(const QuadraticNumber& x, const BigInt& n) {
    QuadraticNumber r = x;
    r.a_ *= n;
    r.b_ *= n;
    r.normalize();
    return r;
}

QuadraticNumber operator*(const QuadraticNumber& x, const Rational& q) {
    QuadraticNumber r = x;
    r.a_ *= q;
    r.b_ *= q;
    r.normalize();
    return r;
}

QuadraticNumber operator*(const QuadraticNumber& x, const QuadraticNumber& y) {
    QuadraticNumber r;
    r.d_ = common_radicand(x, y);
    r.a_ = x.a_ * y.a_ + x.b_ * y.b_ * r.d_;
    r.b_ = x.a_ * y.b_ + x.b_ * y.a_;
    r.normalize();
    return r;
}

QuadraticNumber operator/(const QuadraticNumber& x, const QuadraticNumber& y) {
    if (y.is_zero()) {
        throw std::domain_error("division by zero");
    }
    // 1/(a + b sqrt d) = (a - b sqrt d) / (a^2 - b^2 d)
    const Rational norm = y.a_ * y.a_ - y.b_ * y.b_ * y.d_;
    QuadraticNumber conj = y;
    conj.b_ = -conj.b_;
    return (x * conj) * Rational(1 / norm);
}

bool operator==(const QuadraticNumber& x, const QuadraticNumber& y) {
    return x.a_ == y.a_ && x.b_ == y.b_ && (x.d_ == y.d_ || x.b_ == 0);
}

std::strong_ordering operator<=>(const QuadraticNumber& x, const QuadraticNumber& y) {
    const int s = (x - y).sign();
    if (s < 0) return std::strong_ordering::less;
    if (s > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

// ---------------------------------------------------------------------------
// Literal parsing

Rational parse_rational(std::string_view text) {
    std::string s;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    }
    if (s.empty()) {
        throw std::invalid_argument("empty numeric literal");
    }
    const auto slash = s.find('/');
    auto parse_decimal = [](const std::string& t) -> Rational {
        std::size_t i = 0;
        bool neg = false;
        if (i < t.size() && (t[i] == '+' || t[i] == '-')) {
            neg = t[i] == '-';
            ++i;
        }
        BigInt num = 0;
        BigInt den = 1;
        bool seen_digit = false;
        bool seen_dot = false;
        for (; i < t.size(); ++i) {
            const char c = t[i];
            if (c == '.' && !seen_dot) {
                seen_dot = true;
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                num = num * 10 + (c - '0');
                if (seen_dot) den *= 10;
                seen_digit = true;
            } else {
                throw std::invalid_argument("bad numeric literal '" + t + "'");
            }
        }
        if (!seen_digit) {
            throw std::invalid_argument("bad numeric literal '" + t + "'");
        }
        Rational r(num, den);
        return neg ? Rational(-r) : r;
    };
    if (slash == std::string::npos) {
        return parse_decimal(s);
    }
    const Rational den = parse_decimal(s.substr(slash + 1));
    if (den == 0) {
        throw std::invalid_argument("zero denominator in '" + s + "'");
    }
    return parse_decimal(s.substr(0, slash)) / den;
}

namespace {

class QuadraticParser {
public:
    explicit QuadraticParser(std::string_view text) : text_(text) {}

    QuadraticNumber parse() {
        QuadraticNumber v = expr();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("unexpected character");
        }
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("cannot parse number '" + std::string(text_) + "': " + what +
                                    " at offset " + std::to_string(pos_));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    QuadraticNumber expr() {
        QuadraticNumber v;
        bool negate = false;
        if (accept('-')) {
            negate = true;
        } else {
            accept('+');
        }
        v = term();
        if (negate) v = -v;
        for (;;) {
            if (accept('+')) {
                v = v + term();
            } else if (accept('-')) {
                v = v - term();
            } else {
                return v;
            }
        }
    }

    QuadraticNumber term() {
        QuadraticNumber v = factor();
        for (;;) {
            if (accept('*')) {
                v = v * factor();
            } else if (accept('/')) {
                v = v / factor();
            } else {
                return v;
            }
        }
    }

    QuadraticNumber factor() {
        skip_ws();
        if (accept('(')) {
            QuadraticNumber v = expr();
            if (!accept(')')) fail("missing ')'");
            return v;
        }
        if (text_.substr(pos_, 4) == "sqrt") {
            pos_ += 4;
            const bool paren = accept('(');
            skip_ws();
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (start == pos_) fail("expected radicand");
            const std::int64_t n = std::stoll(std::string(text_.substr(start, pos_ - start)));
            if (paren && !accept(')')) fail("missing ')'");
            return QuadraticNumber::sqrt_of(n);
        }
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (start == pos_) fail("expected number");
        return QuadraticNumber::from_rational(parse_rational(text_.substr(start, pos_ - start)));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

QuadraticNumber parse_quadratic(std::string_view text) { return QuadraticParser(text).parse(); }

}  // namespace kronrec
