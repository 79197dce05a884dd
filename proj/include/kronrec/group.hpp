#pragma once

// Finite-dimensional compact abelian groups K = T^r x Z/m_1 x ... x Z/m_k,
// their points and characters.

#include "kronrec/exact.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kronrec {

struct GroupDescriptor {
    int torus_rank = 0;
    /// Sorted ascending, every entry >= 2.
    std::vector<std::int64_t> torsion_orders;

    /// Validates and sorts the torsion orders.
    static GroupDescriptor make(int torus_rank, std::vector<std::int64_t> torsion_orders);

    std::size_t dimension() const { return static_cast<std::size_t>(torus_rank) + torsion_orders.size(); }
    bool is_finite() const { return torus_rank == 0; }
    bool is_trivial() const { return torus_rank == 0 && torsion_orders.empty(); }
    /// Order of the torsion part (1 for pure tori).
    std::int64_t torsion_size() const;

    /// Invariant-factor form d_1 | d_2 | ...; two descriptors describe
    /// isomorphic groups iff their invariant-factor forms are equal.
    GroupDescriptor invariant_factor_form() const;
    bool isomorphic_to(const GroupDescriptor& other) const;

    /// "T^1 x Z/2", "Z/4", "T^2", "1" for the trivial group.
    std::string to_string() const;

    friend bool operator==(const GroupDescriptor&, const GroupDescriptor&) = default;
};

/// Parses "T^1 x Z/2", "T^2", "Z/4 x Z/6", "T", "1". Torsion factors are
/// sorted into canonical order; point literals use that order.
GroupDescriptor parse_group(std::string_view text);

/// One circle coordinate in [0,1). Carries an optional exact value (rational or
/// quadratic irrational); the double is always the nearest representation of it.
class TorusCoord {
public:
    TorusCoord() = default;
    static TorusCoord approx(double v);
    static TorusCoord exact(const QuadraticNumber& q);

    double value() const { return value_; }
    bool is_exact() const { return exact_.has_value(); }
    const std::optional<QuadraticNumber>& exact_value() const { return exact_; }

    std::string to_string() const;

    friend bool operator==(const TorusCoord& a, const TorusCoord& b);

private:
    double value_ = 0.0;
    std::optional<QuadraticNumber> exact_ = QuadraticNumber{};
};

struct GroupPoint {
    std::vector<TorusCoord> torus;
    std::vector<std::int64_t> torsion;

    bool is_exact() const;
    friend bool operator==(const GroupPoint&, const GroupPoint&) = default;
};

struct Character {
    std::vector<std::int64_t> torus_freqs;
    std::vector<std::int64_t> torsion_freqs;

    bool is_trivial() const;
    /// Largest |k_i| over the torus frequencies.
    std::int64_t height() const;
    std::string to_string() const;
    friend bool operator==(const Character&, const Character&) = default;
};

/// Reduced frac(x) in [0,1) of a double, robust against -0.0 and 1.0 rounding.
double wrap01(double x);
/// frac(n * x) computed exactly for the double x (no rounding of the product).
double frac_of_product(double x, std::int64_t n);
double frac_of_product(double x, const BigInt& n);
/// exp(2 pi i turns); exact at multiples of a quarter turn.
std::complex<double> unit_phasor(double turns);
/// Circle distance ||x - y|| in [0, 1/2].
double circle_distance(double x, double y);

void validate_point(const GroupDescriptor& K, const GroupPoint& a);
void validate_character(const GroupDescriptor& K, const Character& chi);

GroupPoint identity(const GroupDescriptor& K);
GroupPoint add(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b);
GroupPoint negate(const GroupDescriptor& K, const GroupPoint& a);
GroupPoint subtract(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b);
GroupPoint scalar_mul(const GroupDescriptor& K, const BigInt& n, const GroupPoint& a);
GroupPoint scalar_mul(const GroupDescriptor& K, std::int64_t n, const GroupPoint& a);

/// Phase of chi(a) as a fraction of a full turn, in [0,1).
double char_phase(const GroupDescriptor& K, const Character& chi, const GroupPoint& a);
/// exp(2 pi i (k.x + sum a_i c_i / m_i)).
std::complex<double> char_eval(const GroupDescriptor& K, const Character& chi, const GroupPoint& a);

/// d(a,b) = sum_i 2^-(i+1) ||a_i - b_i||; torsion coordinates follow the torus
/// ones and use the cyclic distance divided by the order.
double invariant_metric(const GroupDescriptor& K, const GroupPoint& a, const GroupPoint& b);

struct GeneratorCertificate {
    bool generator = false;
    /// A nontrivial character with chi(alpha) = 1 when generator is false.
    std::optional<Character> witness;
    /// Height up to which torus characters were searched.
    std::int64_t height_bound = 0;
    /// True when every check ran in exact arithmetic.
    bool exact = false;
    std::string to_string() const;
};

/// Searches all characters with torus height <= height_bound (and every torsion
/// frequency) for one that is trivial on alpha. "generator" therefore means
/// "generator up to height H" whenever the torus rank is positive.
GeneratorCertificate is_generator(const GroupDescriptor& K, const GroupPoint& alpha, std::int64_t height_bound);

/// "(sqrt2-1, 1)" or a bare coordinate for one-dimensional groups.
GroupPoint parse_point(const GroupDescriptor& K, std::string_view text);
std::string point_to_string(const GroupPoint& p);
/// "(k_1, ..., k_r; a_1, ...)" or a bare integer for one-dimensional groups.
Character parse_character(const GroupDescriptor& K, std::string_view text);

}  // namespace kronrec
