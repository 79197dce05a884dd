#pragma once

#include "kronrec/open_set.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace kronrec::detail {

/// Decides membership from double coordinates when every face is farther than
/// `bound`; nullopt otherwise.
std::optional<bool> filtered_membership(const OpenSet& U, const double* torus, const std::int64_t* torsion,
                                        double bound);

/// Exact membership; throws std::domain_error on mixed radicands.
bool exact_membership(const OpenSet& U, const std::vector<QuadraticNumber>& torus, const std::int64_t* torsion);

}  // namespace kronrec::detail
