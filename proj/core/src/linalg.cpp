#include "jsvd/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace jsvd {
namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd to_eigen(const Matrix& m) {
    return Eigen::Map<const EigenRowMajor>(
        m.data().data(), static_cast<Eigen::Index>(m.rows()),
        static_cast<Eigen::Index>(m.cols()));
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
    Matrix out(static_cast<std::size_t>(m.rows()),
               static_cast<std::size_t>(m.cols()));
    Eigen::Map<EigenRowMajor>(out.data().data(), m.rows(), m.cols()) = m;
    return out;
}

void require_nonempty(const Matrix& a, const char* what) {
    if (a.rows() == 0 || a.cols() == 0) {
        throw dimension_error(std::string(what) + " requires a nonempty matrix");
    }
}

} // namespace

SvdResult svd(const Matrix& a) {
    require_nonempty(a, "svd");
    Eigen::BDCSVD<Eigen::MatrixXd> dec(to_eigen(a),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
        throw convergence_error("svd kernel did not converge for a " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " matrix");
    }
    Eigen::MatrixXd u = dec.matrixU();
    Eigen::MatrixXd v = dec.matrixV();
    const Eigen::Index k = dec.singularValues().size();

    // Fix signs: the largest-magnitude entry of each left vector (lowest row
    // index on ties) is made nonnegative and the right vector compensates.
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index pivot = 0;
        double best = std::abs(u(0, j));
        for (Eigen::Index r = 1; r < u.rows(); ++r) {
            if (std::abs(u(r, j)) > best) {
                best = std::abs(u(r, j));
                pivot = r;
            }
        }
        if (u(pivot, j) < 0.0) {
            u.col(j) = -u.col(j);
            v.col(j) = -v.col(j);
        }
    }

    SvdResult out;
    out.left = from_eigen(u);
    out.singulars.assign(dec.singularValues().data(),
                         dec.singularValues().data() + k);
    out.right_t = from_eigen(v.transpose());
    return out;
}

TruncatedPair svd_truncated(const Matrix& a, int rank) {
    const std::size_t k = std::min(a.rows(), a.cols());
    if (rank < 1 || static_cast<std::size_t>(rank) > k) {
        throw rank_error("rank " + std::to_string(rank) + " outside [1, " +
                         std::to_string(k) + "] for a " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " matrix");
    }
    return detail::truncate_svd(svd(a), rank);
}

double truncation_residual_sq(const SvdResult& s, int rank) {
    if (rank < 0 || static_cast<std::size_t>(rank) > s.singulars.size()) {
        throw rank_error("rank " + std::to_string(rank) +
                         " outside [0, " + std::to_string(s.singulars.size()) +
                         "] for truncation residual");
    }
    double sum = 0.0;
    for (std::size_t i = rank; i < s.singulars.size(); ++i)
        sum += s.singulars[i] * s.singulars[i];
    return sum;
}

Matrix solve_least_squares(const Matrix& a, const Matrix& b) {
    require_nonempty(a, "solve_least_squares");
    if (a.rows() != b.rows()) {
        throw dimension_error("least squares row mismatch: a has " +
                              std::to_string(a.rows()) + " rows, b has " +
                              std::to_string(b.rows()));
    }
    if (a.rows() < a.cols()) {
        throw rank_deficiency_error(
            "least squares matrix is wider than tall (" +
            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
            "), cannot have full column rank");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> dec(to_eigen(a),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
        throw convergence_error("svd kernel did not converge in least squares");
    }
    const auto& sv = dec.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (!(smin > 1e-12 * smax)) {
        const double cond = smin > 0.0 ? smax / smin
                                       : std::numeric_limits<double>::infinity();
        throw rank_deficiency_error(
            "least squares matrix is rank deficient, condition number " +
            std::to_string(cond) + " exceeds 1e12");
    }
    Eigen::MatrixXd x = dec.matrixV() *
                        sv.cwiseInverse().asDiagonal() *
                        (dec.matrixU().transpose() * to_eigen(b));
    return from_eigen(x);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul inner dimension mismatch: " +
                              std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " times " +
                              std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
    }
    return from_eigen(to_eigen(a) * to_eigen(b));
}

namespace detail {

TruncatedPair truncate_svd(const SvdResult& s, int rank) {
    const std::size_t r = static_cast<std::size_t>(rank);
    TruncatedPair out;
    out.rank = rank;
    out.u = Matrix(s.left.rows(), r);
    for (std::size_t i = 0; i < s.left.rows(); ++i)
        for (std::size_t j = 0; j < r; ++j)
            out.u.at(i, j) = s.left.at(i, j) * s.singulars[j];
    out.v = Matrix(r, s.right_t.cols());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s.right_t.cols(); ++j)
            out.v.at(i, j) = s.right_t.at(i, j);
    return out;
}

} // namespace detail

} // namespace jsvd
