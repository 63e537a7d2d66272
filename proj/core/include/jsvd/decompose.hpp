#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jsvd/linalg.hpp"
#include "jsvd/tensor.hpp"

namespace jsvd {

struct GroupMember {
    std::string name;
    Tensor4 tensor;
};

// An ordered set of weight tensors factorized together. Member order is part
// of the contract: factor blocks are returned in the same order.
struct LayerGroup {
    int group_id = 0;
    std::vector<GroupMember> members;
};

// Joint factorization with one shared right factor: member n is approximated
// by member_us[n] * shared_v. shared_v is rank x (F2*O), member_us[n] is
// (F1n*In) x rank. residual_sq is the sum of squared singular values
// discarded by the final sub-decomposition, i.e. the total squared error of
// the stacked system, not divided by the member count.
struct RightSharedFactorization {
    Matrix shared_v;
    std::vector<Matrix> member_us;
    int rank = 0;
    double residual_sq = 0.0;
};

// Mirror image with one shared left factor: member n is approximated by
// shared_u * member_vs[n].
struct LeftSharedFactorization {
    Matrix shared_u;
    std::vector<Matrix> member_vs;
    int rank = 0;
    double residual_sq = 0.0;
};

// Two-sided factorization: member n is approximated by
// right.member_us[n] * right.shared_v + left.shared_u * left.member_vs[n].
// objective_trace holds the total squared error after initialization and
// after each full alternating iteration (iterations + 1 entries); it is
// non-increasing up to floating-point slack.
struct DualFactorization {
    RightSharedFactorization right;
    LeftSharedFactorization left;
    int iterations = 0;
    std::vector<double> objective_trace;
};

// True when every member unfolds to the same column count (row counts may
// differ, so layers with reduced input depth can join).
bool rjsvd_compatible(const LayerGroup& group);

// True when every member unfolds to the same row count.
bool ljsvd_compatible(const LayerGroup& group);

// True when every member unfolds to the same row and column counts.
bool bijsvd_compatible(const LayerGroup& group);

// Truncated SVD of the vertically stacked unfolded members. The optimal
// shared right factor and per-member left factors for the given rank.
// Requires 1 <= rank <= min(total rows, columns).
RightSharedFactorization rjsvd(const LayerGroup& group, int rank);

// Truncated SVD of the horizontally stacked unfolded members; transpose
// dual of rjsvd.
LeftSharedFactorization ljsvd(const LayerGroup& group, int rank);

// Alternating two-sided scheme. Starting from a zero left part, each
// iteration refits the right-shared part against what the left part leaves
// unexplained, then the left-shared part against the right remainder. Runs
// exactly `iterations` full iterations with no early stopping. rank_right or
// rank_left may be zero (the scheme then reduces to rjsvd or ljsvd exactly);
// their sum must be positive.
DualFactorization bijsvd(const LayerGroup& group, int rank_right,
                         int rank_left, int iterations);

// Alternating least-squares estimate of the rjsvd factorization from a
// seeded random start. The shared factor update averages the per-member
// least-squares solutions; with more than one distinct member that average
// is a heuristic rather than the exact joint minimizer, so the objective is
// not guaranteed to decrease monotonically. Kept as a cross-check for the
// direct solver. Requires members of identical unfolded shape.
RightSharedFactorization rjsvd_als(const LayerGroup& group, int rank,
                                   int iterations, std::uint64_t seed);

// Fold an (F1*I) x r factor into the (F1, 1, I, r) kernel of the vertical
// conv pass, or an r x (F2*O) factor into the (1, F2, r, O) kernel of the
// horizontal pass, for a member of the given shape.
Tensor4 fold_vertical_factor(const Matrix& u, const Shape4& member_shape,
                             Dtype dtype = Dtype::f64);
Tensor4 fold_horizontal_factor(const Matrix& v, const Shape4& member_shape,
                               Dtype dtype = Dtype::f64);

// Rebuild one member's weight tensor from its factors.
Tensor4 reconstruct_member(const RightSharedFactorization& f, std::size_t n,
                           const Shape4& shape);
Tensor4 reconstruct_member(const LeftSharedFactorization& f, std::size_t n,
                           const Shape4& shape);
Tensor4 reconstruct_member(const DualFactorization& f, std::size_t n,
                           const Shape4& shape);

} // namespace jsvd
