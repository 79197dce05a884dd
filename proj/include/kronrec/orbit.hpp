#pragma once

// Return-time sets R = {n : T^n x0 in U} for rotations, polynomial orbits and
// the skew product (x, y) -> (x + alpha, y + x) on T^2.

#include "kronrec/group.hpp"
#include "kronrec/open_set.hpp"

#include <boost/dynamic_bitset.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kronrec {

/// Closed integer interval [lo, hi].
struct Window {
    std::int64_t lo = 1;
    std::int64_t hi = 1;

    static Window make(std::int64_t lo, std::int64_t hi);
    /// [1, n]
    static Window first(std::int64_t n) { return make(1, n); }

    std::size_t size() const { return static_cast<std::size_t>(hi - lo + 1); }
    bool contains(std::int64_t n) const { return n >= lo && n <= hi; }
    friend bool operator==(const Window&, const Window&) = default;
};

class ReturnSet {
public:
    ReturnSet() = default;
    ReturnSet(Window window, boost::dynamic_bitset<> bits, std::string provenance = {});
    /// Builds a set from explicit members; members outside the window are an error.
    static ReturnSet from_members(Window window, const std::vector<std::int64_t>& members, std::string provenance = {});

    const Window& window() const { return window_; }
    const boost::dynamic_bitset<>& bits() const { return bits_; }
    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }

    /// False for n outside the window.
    bool contains(std::int64_t n) const;
    std::size_t count() const { return bits_.count(); }
    std::vector<std::int64_t> members() const;
    /// Restriction to a sub-window.
    ReturnSet restricted(Window w) const;

    /// Equality of window and membership; provenance is ignored.
    friend bool operator==(const ReturnSet& a, const ReturnSet& b) {
        return a.window_ == b.window_ && a.bits_ == b.bits_;
    }

private:
    Window window_;
    boost::dynamic_bitset<> bits_ = boost::dynamic_bitset<>(1);
    std::string provenance_;
};

struct GenerationStats {
    /// Points that could not be decided; their bits are left clear.
    std::size_t boundary_ambiguous = 0;
    /// Points decided by the exact fallback after the filtered test was inconclusive.
    std::size_t exact_fallbacks = 0;
};

struct GeneratedReturnSet {
    ReturnSet set;
    GenerationStats stats;
};

/// Integer polynomial with arbitrary-precision coefficients.
class IntegerPolynomial {
public:
    IntegerPolynomial() = default;
    /// coefficients[i] multiplies n^i. Theorem mode requires coefficients[0] == 0.
    explicit IntegerPolynomial(std::vector<BigInt> coefficients, bool theorem_mode = true);

    /// "[c1, c2, ...]" (no constant term) or an expression such as "n^5 - n", "2n", "3*n^2 + n + 1".
    static IntegerPolynomial parse(std::string_view text, bool theorem_mode = true);
    static IntegerPolynomial identity() { return IntegerPolynomial({BigInt(0), BigInt(1)}); }

    const std::vector<BigInt>& coefficients() const { return coeffs_; }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    bool theorem_mode() const { return theorem_mode_; }
    BigInt operator()(const BigInt& n) const;
    BigInt operator()(std::int64_t n) const { return (*this)(BigInt(n)); }
    /// Canonical text, e.g. "n^5 - n".
    std::string to_string() const;

    friend bool operator==(const IntegerPolynomial&, const IntegerPolynomial&) = default;

private:
    std::vector<BigInt> coeffs_{BigInt(0)};
    bool theorem_mode_ = true;
};

/// (x, y) -> (x + alpha, y + x) on T^2.
struct SkewSystem {
    TorusCoord alpha;

    GroupPoint step(const GroupPoint& p) const;
    GroupPoint step_back(const GroupPoint& p) const;
    /// Closed form T^n(x0, y0) = (x0 + n alpha, y0 + n x0 + C(n,2) alpha), any integer n.
    GroupPoint point_at(const GroupPoint& start, std::int64_t n) const;
};

struct OrbitOptions {
    double guard = kMembershipGuard;
    unsigned threads = 1;
};

/// Bit n set iff start + n alpha is in U. start defaults to the identity.
GeneratedReturnSet return_set_linear(const GroupDescriptor& K, const GroupPoint& alpha, const OpenSet& U, Window window,
                                     const OrbitOptions& options = {},
                                     const std::optional<GroupPoint>& start = std::nullopt);

/// Bit n set iff P(n) alpha is in U, with P(n) evaluated exactly.
GeneratedReturnSet return_set_polynomial(const GroupDescriptor& K, const GroupPoint& alpha, const IntegerPolynomial& P,
                                         const OpenSet& U, Window window, const OrbitOptions& options = {});

/// Return times of the skew product to U (an open set on T^2) starting from x0.
GeneratedReturnSet return_set_skew(const SkewSystem& S, const GroupPoint& x0, const OpenSet& U, Window window,
                                   const OrbitOptions& options = {});

/// (1/N) |sum_{n=1}^N chi(P(n) alpha)|.
double weyl_discrepancy(const GroupDescriptor& K, const GroupPoint& alpha, const IntegerPolynomial& P,
                        const Character& chi, std::int64_t N);

}  // namespace kronrec
