#include "jsvd/decompose.hpp"

#include <random>
#include <string>

#include "jsvd/random.hpp"

namespace jsvd {
namespace {

void require_members(const LayerGroup& group) {
    if (group.members.empty()) {
        throw incompatibility_error("group " + std::to_string(group.group_id) +
                                    " has no members");
    }
}

// Column compatibility for right-shared stacking. Names both tensors in the
// error so a bad manifest is easy to fix.
void require_rjsvd_compatible(const LayerGroup& group) {
    require_members(group);
    const std::size_t cols = group.members[0].tensor.shape().unfolded_cols();
    for (const GroupMember& m : group.members) {
        const std::size_t c = m.tensor.shape().unfolded_cols();
        if (c != cols) {
            throw incompatibility_error(
                "group " + std::to_string(group.group_id) +
                ": members \"" + group.members[0].name + "\" (F2*O = " +
                std::to_string(cols) + ") and \"" + m.name + "\" (F2*O = " +
                std::to_string(c) + ") cannot share a right factor");
        }
    }
}

void require_ljsvd_compatible(const LayerGroup& group) {
    require_members(group);
    const std::size_t rows = group.members[0].tensor.shape().unfolded_rows();
    for (const GroupMember& m : group.members) {
        const std::size_t r = m.tensor.shape().unfolded_rows();
        if (r != rows) {
            throw incompatibility_error(
                "group " + std::to_string(group.group_id) +
                ": members \"" + group.members[0].name + "\" (F1*I = " +
                std::to_string(rows) + ") and \"" + m.name + "\" (F1*I = " +
                std::to_string(r) + ") cannot share a left factor");
        }
    }
}

void require_rank_in(int rank, std::size_t hi, const char* what) {
    if (rank < 1 || static_cast<std::size_t>(rank) > hi) {
        throw rank_error(std::string(what) + " rank " + std::to_string(rank) +
                         " outside [1, " + std::to_string(hi) + "]");
    }
}

std::vector<Matrix> unfold_members(const LayerGroup& group) {
    std::vector<Matrix> out;
    out.reserve(group.members.size());
    for (const GroupMember& m : group.members) out.push_back(unfold(m.tensor));
    return out;
}

// a*b, or an all-zero matrix of the stated extent when the factors are
// rank 0 (empty inner dimension).
Matrix product_or_zero(const Matrix& a, const Matrix& b,
                       std::size_t rows, std::size_t cols) {
    if (a.cols() == 0) return Matrix(rows, cols);
    return matmul(a, b);
}

double sq_norm_of_difference(const Matrix& a, const Matrix& b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.data()[k] - b.data()[k];
        sum += d * d;
    }
    return sum;
}

} // namespace

bool rjsvd_compatible(const LayerGroup& group) {
    try {
        require_rjsvd_compatible(group);
        return true;
    } catch (const incompatibility_error&) {
        return false;
    }
}

bool ljsvd_compatible(const LayerGroup& group) {
    try {
        require_ljsvd_compatible(group);
        return true;
    } catch (const incompatibility_error&) {
        return false;
    }
}

bool bijsvd_compatible(const LayerGroup& group) {
    return rjsvd_compatible(group) && ljsvd_compatible(group);
}

RightSharedFactorization rjsvd(const LayerGroup& group, int rank) {
    require_rjsvd_compatible(group);
    std::vector<Matrix> ws = unfold_members(group);
    std::size_t total_rows = 0;
    for (const Matrix& w : ws) total_rows += w.rows();
    require_rank_in(rank, std::min(total_rows, ws[0].cols()), "rjsvd");

    SvdResult s = svd(stack_vertical(ws));
    TruncatedPair t = detail::truncate_svd(s, rank);

    RightSharedFactorization out;
    out.rank = rank;
    out.residual_sq = truncation_residual_sq(s, rank);
    out.shared_v = std::move(t.v);
    std::size_t row0 = 0;
    for (const Matrix& w : ws) {
        Matrix u(w.rows(), static_cast<std::size_t>(rank));
        for (std::size_t r = 0; r < w.rows(); ++r)
            for (std::size_t c = 0; c < u.cols(); ++c)
                u.at(r, c) = t.u.at(row0 + r, c);
        out.member_us.push_back(std::move(u));
        row0 += w.rows();
    }
    return out;
}

LeftSharedFactorization ljsvd(const LayerGroup& group, int rank) {
    require_ljsvd_compatible(group);
    std::vector<Matrix> ws = unfold_members(group);
    std::size_t total_cols = 0;
    for (const Matrix& w : ws) total_cols += w.cols();
    require_rank_in(rank, std::min(ws[0].rows(), total_cols), "ljsvd");

    SvdResult s = svd(stack_horizontal(ws));
    TruncatedPair t = detail::truncate_svd(s, rank);

    LeftSharedFactorization out;
    out.rank = rank;
    out.residual_sq = truncation_residual_sq(s, rank);
    out.shared_u = std::move(t.u);
    std::size_t col0 = 0;
    for (const Matrix& w : ws) {
        Matrix v(static_cast<std::size_t>(rank), w.cols());
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < w.cols(); ++c)
                v.at(r, c) = t.v.at(r, col0 + c);
        out.member_vs.push_back(std::move(v));
        col0 += w.cols();
    }
    return out;
}

DualFactorization bijsvd(const LayerGroup& group, int rank_right,
                         int rank_left, int iterations) {
    require_rjsvd_compatible(group);
    require_ljsvd_compatible(group);
    if (rank_right < 0 || rank_left < 0 || rank_right + rank_left < 1) {
        throw rank_error("bijsvd needs nonnegative ranks with a positive sum, "
                         "got right " + std::to_string(rank_right) +
                         ", left " + std::to_string(rank_left));
    }
    if (iterations < 1) {
        throw rank_error("bijsvd needs at least one iteration, got " +
                         std::to_string(iterations));
    }

    const std::vector<Matrix> ws = unfold_members(group);
    const std::size_t n = ws.size();
    const std::size_t rows = ws[0].rows();
    const std::size_t cols = ws[0].cols();
    if (rank_right > 0)
        require_rank_in(rank_right, std::min(n * rows, cols), "bijsvd right");
    if (rank_left > 0)
        require_rank_in(rank_left, std::min(rows, n * cols), "bijsvd left");

    // Both halves start empty so the first right pass sees the raw weights.
    Matrix shared_u(rows, static_cast<std::size_t>(rank_left));
    Matrix shared_v(static_cast<std::size_t>(rank_right), cols);
    std::vector<Matrix> member_us(n, Matrix(rows, static_cast<std::size_t>(rank_right)));
    std::vector<Matrix> member_vs(n, Matrix(static_cast<std::size_t>(rank_left), cols));
    double residual_right = 0.0;
    double residual_left = 0.0;

    DualFactorization out;
    out.iterations = iterations;
    out.objective_trace.reserve(static_cast<std::size_t>(iterations) + 1);

    auto objective = [&]() {
        double sum = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            Matrix approx = product_or_zero(member_us[m], shared_v, rows, cols);
            Matrix lpart = product_or_zero(shared_u, member_vs[m], rows, cols);
            for (std::size_t k = 0; k < approx.size(); ++k)
                approx.data()[k] += lpart.data()[k];
            sum += sq_norm_of_difference(ws[m], approx);
        }
        return sum;
    };
    out.objective_trace.push_back(objective());

    for (int it = 0; it < iterations; ++it) {
        if (rank_right > 0) {
            // Refit the right-shared half against what the left half leaves.
            std::vector<Matrix> resid;
            resid.reserve(n);
            for (std::size_t m = 0; m < n; ++m) {
                Matrix r = ws[m];
                Matrix lpart = product_or_zero(shared_u, member_vs[m], rows, cols);
                for (std::size_t k = 0; k < r.size(); ++k)
                    r.data()[k] -= lpart.data()[k];
                resid.push_back(std::move(r));
            }
            SvdResult s = svd(stack_vertical(resid));
            residual_right = truncation_residual_sq(s, rank_right);
            TruncatedPair t = detail::truncate_svd(s, rank_right);
            shared_v = std::move(t.v);
            std::size_t row0 = 0;
            for (std::size_t m = 0; m < n; ++m) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < member_us[m].cols(); ++c)
                        member_us[m].at(r, c) = t.u.at(row0 + r, c);
                row0 += rows;
            }
        }
        if (rank_left > 0) {
            // Refit the left-shared half against the right remainder.
            std::vector<Matrix> resid;
            resid.reserve(n);
            for (std::size_t m = 0; m < n; ++m) {
                Matrix r = ws[m];
                Matrix rpart = product_or_zero(member_us[m], shared_v, rows, cols);
                for (std::size_t k = 0; k < r.size(); ++k)
                    r.data()[k] -= rpart.data()[k];
                resid.push_back(std::move(r));
            }
            SvdResult s = svd(stack_horizontal(resid));
            residual_left = truncation_residual_sq(s, rank_left);
            TruncatedPair t = detail::truncate_svd(s, rank_left);
            shared_u = std::move(t.u);
            std::size_t col0 = 0;
            for (std::size_t m = 0; m < n; ++m) {
                for (std::size_t r = 0; r < member_vs[m].rows(); ++r)
                    for (std::size_t c = 0; c < cols; ++c)
                        member_vs[m].at(r, c) = t.v.at(r, col0 + c);
                col0 += cols;
            }
        }
        out.objective_trace.push_back(objective());
    }

    out.right.shared_v = std::move(shared_v);
    out.right.member_us = std::move(member_us);
    out.right.rank = rank_right;
    out.right.residual_sq =
        rank_right > 0 ? residual_right : out.objective_trace.back();
    out.left.shared_u = std::move(shared_u);
    out.left.member_vs = std::move(member_vs);
    out.left.rank = rank_left;
    out.left.residual_sq =
        rank_left > 0 ? residual_left : out.objective_trace.back();
    return out;
}

RightSharedFactorization rjsvd_als(const LayerGroup& group, int rank,
                                   int iterations, std::uint64_t seed) {
    require_rjsvd_compatible(group);
    require_ljsvd_compatible(group);
    if (iterations < 1) {
        throw rank_error("als needs at least one iteration, got " +
                         std::to_string(iterations));
    }
    const std::vector<Matrix> ws = unfold_members(group);
    const std::size_t n = ws.size();
    const std::size_t rows = ws[0].rows();
    const std::size_t cols = ws[0].cols();
    require_rank_in(rank, std::min(rows, cols), "als");

    std::vector<Matrix> wts;
    wts.reserve(n);
    for (const Matrix& w : ws) wts.push_back(transpose(w));

    std::mt19937_64 rng(seed);
    std::vector<Matrix> us;
    us.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        Matrix u(rows, static_cast<std::size_t>(rank));
        fill_uniform(u.data(), rng);
        us.push_back(std::move(u));
    }

    Matrix v;
    for (int it = 0; it < iterations; ++it) {
        // Shared factor: average of the members' individual least-squares
        // fits, then refit each member's left factor against it.
        v = Matrix(static_cast<std::size_t>(rank), cols);
        for (std::size_t m = 0; m < n; ++m) {
            Matrix vm = solve_least_squares(us[m], ws[m]);
            for (std::size_t k = 0; k < v.size(); ++k)
                v.data()[k] += vm.data()[k] / static_cast<double>(n);
        }
        Matrix vt = transpose(v);
        for (std::size_t m = 0; m < n; ++m)
            us[m] = transpose(solve_least_squares(vt, wts[m]));
    }

    RightSharedFactorization out;
    out.rank = rank;
    out.shared_v = std::move(v);
    out.member_us = std::move(us);
    out.residual_sq = 0.0;
    for (std::size_t m = 0; m < n; ++m)
        out.residual_sq += sq_norm_of_difference(
            ws[m], matmul(out.member_us[m], out.shared_v));
    return out;
}

Tensor4 fold_vertical_factor(const Matrix& u, const Shape4& member_shape,
                             Dtype dtype) {
    if (u.rows() != member_shape.unfolded_rows() || u.cols() < 1) {
        throw dimension_error("vertical factor is " + std::to_string(u.rows()) +
                              "x" + std::to_string(u.cols()) +
                              ", member shape " + shape_to_string(member_shape) +
                              " needs " +
                              std::to_string(member_shape.unfolded_rows()) +
                              " rows and a positive rank");
    }
    const Shape4 s{member_shape.f1, 1, member_shape.i,
                   static_cast<int>(u.cols())};
    return fold(u, s, dtype);
}

Tensor4 fold_horizontal_factor(const Matrix& v, const Shape4& member_shape,
                               Dtype dtype) {
    if (v.cols() != member_shape.unfolded_cols() || v.rows() < 1) {
        throw dimension_error("horizontal factor is " + std::to_string(v.rows()) +
                              "x" + std::to_string(v.cols()) +
                              ", member shape " + shape_to_string(member_shape) +
                              " needs " +
                              std::to_string(member_shape.unfolded_cols()) +
                              " columns and a positive rank");
    }
    const Shape4 s{1, member_shape.f2, static_cast<int>(v.rows()),
                   member_shape.o};
    return fold(v, s, dtype);
}

Tensor4 reconstruct_member(const RightSharedFactorization& f, std::size_t n,
                           const Shape4& shape) {
    if (n >= f.member_us.size()) {
        throw dimension_error("member index " + std::to_string(n) +
                              " outside group of " +
                              std::to_string(f.member_us.size()));
    }
    return fold(matmul(f.member_us[n], f.shared_v), shape);
}

Tensor4 reconstruct_member(const LeftSharedFactorization& f, std::size_t n,
                           const Shape4& shape) {
    if (n >= f.member_vs.size()) {
        throw dimension_error("member index " + std::to_string(n) +
                              " outside group of " +
                              std::to_string(f.member_vs.size()));
    }
    return fold(matmul(f.shared_u, f.member_vs[n]), shape);
}

Tensor4 reconstruct_member(const DualFactorization& f, std::size_t n,
                           const Shape4& shape) {
    if (n >= f.right.member_us.size()) {
        throw dimension_error("member index " + std::to_string(n) +
                              " outside group of " +
                              std::to_string(f.right.member_us.size()));
    }
    const std::size_t rows = shape.unfolded_rows();
    const std::size_t cols = shape.unfolded_cols();
    Matrix sum = product_or_zero(f.right.member_us[n], f.right.shared_v,
                                 rows, cols);
    Matrix lpart = product_or_zero(f.left.shared_u, f.left.member_vs[n],
                                   rows, cols);
    for (std::size_t k = 0; k < sum.size(); ++k)
        sum.data()[k] += lpart.data()[k];
    return fold(sum, shape);
}

} // namespace jsvd
