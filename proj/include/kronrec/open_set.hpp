#pragma once

#include "kronrec/group.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kronrec {

/// Guard band used by floating-point membership tests.
inline constexpr double kMembershipGuard = 1e-9;

/// Open arc (lo, lo + width) on the circle. width == 1 denotes the whole circle.
class Arc {
public:
    /// (lo, hi) with 0 < hi - lo <= 1; lo may be negative or exceed 1 (wraps).
    static Arc make(const QuadraticNumber& lo, const QuadraticNumber& hi);
    static Arc whole();

    const QuadraticNumber& lo() const { return lo_; }
    const QuadraticNumber& width() const { return width_; }
    QuadraticNumber hi() const { return lo_ + width_; }
    bool is_full() const { return full_; }
    double lo_value() const { return lo_d_; }
    double width_value() const { return width_d_; }

    /// Exact containment of the open arc. Throws std::domain_error when the
    /// point and the arc use different radicands.
    bool contains(const QuadraticNumber& x) const;
    /// Exact test for x being an endpoint.
    bool on_boundary(const QuadraticNumber& x) const;

    std::string to_string() const;

private:
    QuadraticNumber lo_;
    QuadraticNumber width_ = QuadraticNumber::from_integer(1);
    double lo_d_ = 0.0;
    double width_d_ = 1.0;
    bool full_ = true;
};

/// Product of one arc per torus coordinate and one residue subset per torsion
/// coordinate.
struct Box {
    std::vector<Arc> arcs;
    /// Sorted, duplicate-free residues per torsion coordinate.
    std::vector<std::vector<std::int64_t>> residues;
};

enum class Membership { In, Out, BoundaryAmbiguous };
const char* to_string(Membership m);

/// Finite union of open boxes in K. Closures, Haar measure and translation
/// stabilizers of such sets are computable exactly.
class OpenSet {
public:
    OpenSet(GroupDescriptor group, std::vector<Box> boxes);
    static OpenSet whole(const GroupDescriptor& group);

    const GroupDescriptor& group() const { return group_; }
    const std::vector<Box>& boxes() const { return boxes_; }
    bool empty() const { return boxes_.empty(); }

    /// U + shift. Torus coordinates of the shift must be exact.
    OpenSet translated(const GroupPoint& shift) const;

    /// Canonical literal, e.g. "(1/4,11/20) | (0,37/100) x T".
    std::string to_string() const;

private:
    GroupDescriptor group_;
    std::vector<Box> boxes_;
};

/// Parses "(0.25,0.55)", "(-0.1,0.1) | (0.4,0.6)", "(0,0.37) x T",
/// "(0,0.4) x {0}", "T x *", "empty". Factors follow the group's coordinate
/// order (torus first). Arc endpoints accept the exact number syntax.
OpenSet parse_open_set(const GroupDescriptor& K, std::string_view text);

/// Exact for exact points (radicands permitting); the floating path reports
/// points within `guard` of a face as BoundaryAmbiguous.
Membership membership(const OpenSet& U, const GroupPoint& x, double guard = kMembershipGuard);

struct StabilizerReport {
    /// Finite part of Stab(closure U), sorted; always contains the identity.
    std::vector<GroupPoint> shifts;
    /// Torus coordinates along which closure(U) is a full cylinder, so the
    /// whole circle in that coordinate lies in the stabilizer.
    std::vector<bool> full_torus_directions;
    bool is_trivial = true;

    std::string to_string() const;
};

/// Stabilizer {k : closure(U) + k = closure(U)}. Throws kronrec::Error for empty U.
StabilizerReport closure_stabilizer(const OpenSet& U);

/// Haar measure of U (equal to that of its closure).
double jordan_measure(const OpenSet& U);

}  // namespace kronrec
