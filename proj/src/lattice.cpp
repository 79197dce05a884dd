#include "lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kronrec::detail {

namespace {

BigInt abs_big(const BigInt& x) { return x < 0 ? BigInt(-x) : x; }

void axpy(IntVector& y, const BigInt& q, const IntVector& x) {
    if (q == 0) return;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= q * x[i];
}

bool is_zero(const IntVector& v, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) {
        if (v[i] != 0) return false;
    }
    return true;
}

/// Echelonizes rows on columns [0, ncols) by unimodular row operations and
/// returns the rank. Row entries past ncols are carried along.
std::size_t echelonize(IntMatrix& rows, std::size_t ncols, bool reduce_above) {
    std::size_t p = 0;
    for (std::size_t c = 0; c < ncols && p < rows.size(); ++c) {
        for (;;) {
            std::size_t best = rows.size();
            for (std::size_t i = p; i < rows.size(); ++i) {
                if (rows[i][c] != 0 && (best == rows.size() || abs_big(rows[i][c]) < abs_big(rows[best][c]))) best = i;
            }
            if (best == rows.size()) break;
            std::swap(rows[p], rows[best]);
            bool clean = true;
            for (std::size_t i = p + 1; i < rows.size(); ++i) {
                if (rows[i][c] == 0) continue;
                axpy(rows[i], floor_div(rows[i][c], rows[p][c]), rows[p]);
                if (rows[i][c] != 0) clean = false;
            }
            if (clean) break;
        }
        if (p >= rows.size() || rows[p][c] == 0) continue;
        if (rows[p][c] < 0) {
            for (auto& v : rows[p]) v = -v;
        }
        if (reduce_above) {
            for (std::size_t i = 0; i < p; ++i) axpy(rows[i], floor_div(rows[i][c], rows[p][c]), rows[p]);
        }
        ++p;
    }
    return p;
}

}  // namespace

IntMatrix hnf_rows(IntMatrix rows) {
    if (rows.empty()) return rows;
    const std::size_t n = rows[0].size();
    const std::size_t rank = echelonize(rows, n, true);
    rows.resize(rank);
    return rows;
}

IntMatrix integer_kernel(const IntMatrix& A, std::size_t cols) {
    const std::size_t r = A.size();
    IntMatrix aug(cols, IntVector(r + cols, BigInt(0)));
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t k = 0; k < r; ++k) aug[i][k] = A[k][i];
        aug[i][r + i] = 1;
    }
    echelonize(aug, r, false);
    IntMatrix kernel;
    for (const auto& row : aug) {
        if (is_zero(row, 0, r)) kernel.emplace_back(row.begin() + static_cast<std::ptrdiff_t>(r), row.end());
    }
    return hnf_rows(std::move(kernel));
}

SmithForm smith_form(IntMatrix A, std::size_t cols) {
    const std::size_t rows = A.size();
    SmithForm out;
    out.Q.assign(cols, IntVector(cols, BigInt(0)));
    out.Qinv = out.Q;
    for (std::size_t i = 0; i < cols; ++i) out.Q[i][i] = out.Qinv[i][i] = 1;

    auto swap_cols = [&](std::size_t a, std::size_t b) {
        if (a == b) return;
        for (auto& row : A) std::swap(row[a], row[b]);
        for (auto& row : out.Q) std::swap(row[a], row[b]);
        std::swap(out.Qinv[a], out.Qinv[b]);
    };
    // col_j -= q col_t
    auto col_sub = [&](std::size_t j, std::size_t t, const BigInt& q) {
        if (q == 0) return;
        for (auto& row : A) row[j] -= q * row[t];
        for (auto& row : out.Q) row[j] -= q * row[t];
        for (std::size_t k = 0; k < cols; ++k) out.Qinv[t][k] += q * out.Qinv[j][k];
    };

    std::size_t t = 0;
    for (; t < std::min(rows, cols); ++t) {
        // Global pivot: smallest nonzero entry of the trailing block.
        std::size_t bi = rows, bj = cols;
        for (std::size_t i = t; i < rows; ++i) {
            for (std::size_t j = t; j < cols; ++j) {
                if (A[i][j] != 0 && (bi == rows || abs_big(A[i][j]) < abs_big(A[bi][bj]))) {
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == rows) break;
        std::swap(A[t], A[bi]);
        swap_cols(t, bj);

        for (;;) {
            bool clean = true;
            for (std::size_t i = t + 1; i < rows; ++i) {
                if (A[i][t] == 0) continue;
                axpy(A[i], floor_div(A[i][t], A[t][t]), A[t]);
                if (A[i][t] != 0) clean = false;
            }
            for (std::size_t j = t + 1; j < cols; ++j) {
                if (A[t][j] == 0) continue;
                col_sub(j, t, floor_div(A[t][j], A[t][t]));
                if (A[t][j] != 0) clean = false;
            }
            if (!clean) {
                std::size_t bi2 = t, bj2 = t;
                for (std::size_t i = t; i < rows; ++i) {
                    if (A[i][t] != 0 && abs_big(A[i][t]) < abs_big(A[bi2][bj2])) {
                        bi2 = i;
                        bj2 = t;
                    }
                }
                for (std::size_t j = t; j < cols; ++j) {
                    if (A[t][j] != 0 && abs_big(A[t][j]) < abs_big(A[bi2][bj2])) {
                        bi2 = t;
                        bj2 = j;
                    }
                }
                std::swap(A[t], A[bi2]);
                swap_cols(t, bj2);
                continue;
            }
            // Divisibility: every trailing entry must be a multiple of the pivot.
            bool divisible = true;
            for (std::size_t i = t + 1; i < rows && divisible; ++i) {
                for (std::size_t j = t + 1; j < cols; ++j) {
                    if (A[i][j] % A[t][t] != 0) {
                        for (std::size_t k = 0; k < cols; ++k) A[t][k] += A[i][k];
                        divisible = false;
                        break;
                    }
                }
            }
            if (divisible) break;
        }
        if (A[t][t] < 0) {
            for (auto& v : A[t]) v = -v;
        }
        out.diag.push_back(A[t][t]);
    }
    return out;
}

IntMatrix lll_reduce(IntMatrix b, double delta) {
    const std::size_t n = b.size();
    if (n == 0) return b;
    const std::size_t dim = b[0].size();
    using LD = long double;
    std::vector<std::vector<LD>> bstar(n, std::vector<LD>(dim));
    std::vector<std::vector<LD>> mu(n, std::vector<LD>(n, 0));
    std::vector<LD> norm(n);

    auto gram_schmidt = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < dim; ++k) bstar[i][k] = b[i][k].convert_to<LD>();
            for (std::size_t j = 0; j < i; ++j) {
                LD dot = 0;
                for (std::size_t k = 0; k < dim; ++k) dot += b[i][k].convert_to<LD>() * bstar[j][k];
                mu[i][j] = norm[j] > 0 ? dot / norm[j] : 0;
                for (std::size_t k = 0; k < dim; ++k) bstar[i][k] -= mu[i][j] * bstar[j][k];
            }
            norm[i] = 0;
            for (std::size_t k = 0; k < dim; ++k) norm[i] += bstar[i][k] * bstar[i][k];
        }
    };

    gram_schmidt();
    std::size_t k = 1;
    std::size_t guard = 0;
    while (k < n) {
        if (++guard > 100000) throw std::runtime_error("LLL did not terminate");
        for (std::size_t jj = k; jj-- > 0;) {
            const LD m = mu[k][jj];
            if (std::fabs(m) > 0.5L) {
                const BigInt q(std::llround(m));
                axpy(b[k], q, b[jj]);
                gram_schmidt();
            }
        }
        if (norm[k] >= (static_cast<LD>(delta) - mu[k][k - 1] * mu[k][k - 1]) * norm[k - 1]) {
            ++k;
        } else {
            std::swap(b[k], b[k - 1]);
            gram_schmidt();
            k = std::max<std::size_t>(k - 1, 1);
        }
    }
    return b;
}

}  // namespace kronrec::detail
