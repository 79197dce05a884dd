#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace kronrec {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Floor division for arbitrary-precision integers (denominator > 0).
BigInt floor_div(const BigInt& num, const BigInt& den);

/// Exact number of the form a + b*sqrt(d) with a, b rational and d a squarefree
/// integer >= 2. Rationals are stored with d == 0 and b == 0.
///
/// Only numbers sharing a radicand (or rationals) can be combined; mixing
/// radicands throws std::domain_error because the result leaves the field.
class QuadraticNumber {
public:
    QuadraticNumber() = default;
    QuadraticNumber(Rational a, Rational b, std::int64_t radicand);

    static QuadraticNumber from_rational(Rational r);
    static QuadraticNumber from_integer(std::int64_t n) { return from_rational(Rational(n)); }
    /// sqrt(n) for n >= 0; perfect squares collapse to rationals and square
    /// factors are pulled out (sqrt(8) -> 2*sqrt(2)).
    static QuadraticNumber sqrt_of(std::int64_t n);

    const Rational& rational_part() const { return a_; }
    const Rational& irrational_part() const { return b_; }
    std::int64_t radicand() const { return d_; }
    bool is_rational() const { return d_ == 0; }
    bool is_zero() const { return d_ == 0 && a_ == 0; }
    bool compatible(const QuadraticNumber& o) const {
        return d_ == 0 || o.d_ == 0 || d_ == o.d_;
    }

    int sign() const;
    BigInt floor() const;
    /// this - floor(this), in [0, 1).
    QuadraticNumber frac() const;
    bool is_integer() const { return d_ == 0 && boost::multiprecision::denominator(a_) == 1; }

    double to_double() const;
    long double to_long_double() const;

    /// Canonical text such as "-1+1*sqrt(2)" or "3/10"; parseable by parse_quadratic.
    std::string to_string() const;

    QuadraticNumber operator-() const;
    friend QuadraticNumber operator+(const QuadraticNumber& x, const QuadraticNumber& y);
    friend QuadraticNumber operator-(const QuadraticNumber& x, const QuadraticNumber& y);
    friend QuadraticNumber operator*(const QuadraticNumber& x, const BigInt& n);
    friend QuadraticNumber operator*(const QuadraticNumber& x, const Rational& q);
    friend QuadraticNumber operator*(const QuadraticNumber& x, const QuadraticNumber& y);
    /// Throws std::domain_error on division by zero.
    friend QuadraticNumber operator/(const QuadraticNumber& x, const QuadraticNumber& y);
    friend bool operator==(const QuadraticNumber& x, const QuadraticNumber& y);
    friend std::strong_ordering operator<=>(const QuadraticNumber& x, const QuadraticNumber& y);

private:
    void normalize();

    Rational a_{0};
    Rational b_{0};
    std::int64_t d_ = 0;
};

/// Parses sums of terms like "sqrt2-1", "3/10", "0.25", "-2*sqrt(3)+1/5",
/// "sqrt(2)/2". Decimal literals are exact (0.3 == 3/10).
/// Throws std::invalid_argument on malformed input.
QuadraticNumber parse_quadratic(std::string_view text);

/// Exact decimal/fraction literal ("0.37", "-1/3", "2").
Rational parse_rational(std::string_view text);

std::string rational_to_string(const Rational& r);
double rational_to_double(const Rational& r);

}  // namespace kronrec
