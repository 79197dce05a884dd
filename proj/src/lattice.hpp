#pragma once

// Integer linear algebra used by relation detection and group reconstruction.

#include "kronrec/exact.hpp"

#include <vector>

namespace kronrec::detail {

using IntVector = std::vector<BigInt>;
using IntMatrix = std::vector<IntVector>;

/// Row-style Hermite normal form of the lattice spanned by `rows`; zero rows dropped.
IntMatrix hnf_rows(IntMatrix rows);

/// Basis (as rows) of {x in Z^cols : A x = 0}.
IntMatrix integer_kernel(const IntMatrix& A, std::size_t cols);

struct SmithForm {
    /// Nonzero invariant factors d_1 | d_2 | ..., one per rank.
    std::vector<BigInt> diag;
    /// Unimodular Q (cols x cols) with P A Q = diag(d); Qinv its inverse.
    IntMatrix Q;
    IntMatrix Qinv;
};

/// Smith normal form of the rows x cols matrix A.
SmithForm smith_form(IntMatrix A, std::size_t cols);

/// LLL-reduced basis (rows), Lovasz parameter delta.
IntMatrix lll_reduce(IntMatrix basis, double delta = 0.99);

}  // namespace kronrec::detail
