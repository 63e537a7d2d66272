#pragma once

#include <vector>

#include "jsvd/tensor.hpp"

namespace jsvd {

// Thin SVD a = left * diag(singulars) * right_t with k = min(rows, cols).
// left is rows x k with orthonormal columns, right_t is k x cols with
// orthonormal rows, singulars are nonnegative and descending.
struct SvdResult {
    Matrix left;
    std::vector<double> singulars;
    Matrix right_t;
};

// Rank-r factorization a ~ u * v where u absorbs the singular values
// (u = left * diag(singulars), first r columns) and v is the first r rows
// of right_t.
struct TruncatedPair {
    Matrix u;
    Matrix v;
    int rank = 0;
};

// Deterministic thin SVD. Identical input bytes produce identical output
// bytes; the sign of each singular pair is fixed by making the entry of
// largest magnitude in the left vector (lowest index on ties) nonnegative.
// Throws convergence_error if the kernel fails internally.
SvdResult svd(const Matrix& a);

// Best rank-r approximation in the Frobenius norm. Requires
// 1 <= rank <= min(rows, cols).
TruncatedPair svd_truncated(const Matrix& a, int rank);

// Sum of the squared singular values discarded by a rank-r truncation,
// which equals |a - u*v|_F^2 for the pair produced by svd_truncated.
// rank may range from 0 (keep nothing) to k (keep everything).
double truncation_residual_sq(const SvdResult& s, int rank);

// Solution x of min |a*x - b|_F. a must be tall or square with
// full column rank within tolerance (smallest singular value greater than
// 1e-12 times the largest); otherwise throws rank_deficiency_error naming
// the condition number.
Matrix solve_least_squares(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);

namespace detail {

// Slice a precomputed SVD into a rank-r pair without re-decomposing.
// Lenient about rank 0 (returns empty factors); used by the joint solvers.
TruncatedPair truncate_svd(const SvdResult& s, int rank);

} // namespace detail

} // namespace jsvd
