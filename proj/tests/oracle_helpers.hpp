#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is written from the mathematical definition with the
// dumbest possible code: explicit index arithmetic, materialized padding,
// Jacobi rotations, Gauss-Jordan elimination. None of it calls back into
// the routines under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "jsvd/conv.hpp"
#include "jsvd/random.hpp"
#include "jsvd/tensor.hpp"

namespace oracle {

using jsvd::FeatureMap;
using jsvd::Matrix;
using jsvd::Shape4;
using jsvd::Tensor4;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Matrix rand_matrix(std::size_t rows, std::size_t cols,
                          std::mt19937_64& g) {
    Matrix m(rows, cols);
    jsvd::fill_uniform(m.data(), g);
    return m;
}

inline Tensor4 rand_tensor(const Shape4& s, std::mt19937_64& g) {
    Tensor4 t(s);
    jsvd::fill_uniform(t.data(), g);
    return t;
}

inline FeatureMap rand_feature_map(int h, int w, int c, std::mt19937_64& g) {
    FeatureMap x(h, w, c);
    jsvd::fill_uniform(x.data, g);
    return x;
}

// Element (f1, f2, i, o) goes to row f1*I + i, column f2*O + o. Walks the
// flat payload in storage order and scatters.
inline Matrix remap_unfold(const Tensor4& t) {
    const Shape4& s = t.shape();
    Matrix m(s.unfolded_rows(), s.unfolded_cols());
    std::size_t flat = 0;
    for (int f1 = 0; f1 < s.f1; ++f1)
        for (int f2 = 0; f2 < s.f2; ++f2)
            for (int i = 0; i < s.i; ++i)
                for (int o = 0; o < s.o; ++o)
                    m.at(static_cast<std::size_t>(f1) * s.i + i,
                         static_cast<std::size_t>(f2) * s.o + o) =
                        t.data()[flat++];
    return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::logic_error("oracle matmul shapes");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

inline Matrix naive_transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t.at(c, r) = m.at(r, c);
    return t;
}

inline double frob_sq_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::logic_error("oracle frob_sq_diff shapes");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.data()[k] - b.data()[k];
        s += d * d;
    }
    return s;
}

inline double frob_sq_diff(const Tensor4& a, const Tensor4& b) {
    if (!(a.shape() == b.shape()))
        throw std::logic_error("oracle frob_sq_diff shapes");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a.data()[k] - b.data()[k];
        s += d * d;
    }
    return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw std::logic_error("oracle jacobi needs square");
    double scale = 0.0;
    for (double x : a.data()) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return std::vector<double>(n, 0.0);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += a.at(p, q) * a.at(p, q);
        if (off <= 1e-30 * scale * scale) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) <= 1e-18 * scale) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) /
                    (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t k = 0; k < n; ++k) eig[k] = a.at(k, k);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

// Singular values of a general matrix through the smaller Gram matrix.
inline std::vector<double> singular_values_via_gram(const Matrix& a) {
    const Matrix at = naive_transpose(a);
    const Matrix gram = a.rows() >= a.cols() ? naive_matmul(at, a)
                                             : naive_matmul(a, at);
    std::vector<double> eig = jacobi_eigenvalues(gram);
    for (double& x : eig) x = std::sqrt(std::max(x, 0.0));
    return eig;
}

// Columns of an m x k matrix made orthonormal by twice-applied modified
// Gram-Schmidt on random data. Requires k <= m.
inline Matrix random_orthonormal(std::size_t m, std::size_t k,
                                 std::mt19937_64& g) {
    if (k > m) throw std::logic_error("oracle orthonormal needs k <= m");
    Matrix q = rand_matrix(m, k, g);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t prev = 0; prev < j; ++prev) {
                double dot = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                    dot += q.at(r, j) * q.at(r, prev);
                for (std::size_t r = 0; r < m; ++r)
                    q.at(r, j) -= dot * q.at(r, prev);
            }
            double norm = 0.0;
            for (std::size_t r = 0; r < m; ++r)
                norm += q.at(r, j) * q.at(r, j);
            norm = std::sqrt(norm);
            if (norm < 1e-8) {
                // Degenerate draw; replace the column and redo it.
                for (std::size_t r = 0; r < m; ++r)
                    q.at(r, j) = jsvd::uniform(g, -1.0, 1.0);
                --j;
                continue;
            }
            for (std::size_t r = 0; r < m; ++r) q.at(r, j) /= norm;
        }
    }
    return q;
}

// m x n matrix with exactly the given singular values (plus orthonormal
// factor rounding, about 1e-14 relative).
inline Matrix shaped_matrix(std::size_t m, std::size_t n,
                            const std::vector<double>& sigmas,
                            std::mt19937_64& g) {
    const std::size_t k = sigmas.size();
    if (k > std::min(m, n)) throw std::logic_error("oracle shaped rank");
    const Matrix u = random_orthonormal(m, k, g);
    const Matrix v = random_orthonormal(n, k, g);
    Matrix us(m, k);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) us.at(r, c) = u.at(r, c) * sigmas[c];
    return naive_matmul(us, naive_transpose(v));
}

// min |a*x - b| by explicitly forming the normal equations and running
// Gauss-Jordan with partial pivoting. Fine as a reference for
// well-conditioned systems.
inline Matrix solve_normal_equations(const Matrix& a, const Matrix& b) {
    const Matrix at = naive_transpose(a);
    Matrix g = naive_matmul(at, a);
    Matrix rhs = naive_matmul(at, b);
    const std::size_t n = g.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(g.at(r, col)) > std::abs(g.at(piv, col))) piv = r;
        if (std::abs(g.at(piv, col)) < 1e-12)
            throw std::logic_error("oracle normal equations singular");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(g.at(piv, c), g.at(col, c));
            for (std::size_t c = 0; c < rhs.cols(); ++c)
                std::swap(rhs.at(piv, c), rhs.at(col, c));
        }
        const double d = g.at(col, col);
        for (std::size_t c = 0; c < n; ++c) g.at(col, c) /= d;
        for (std::size_t c = 0; c < rhs.cols(); ++c) rhs.at(col, c) /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = g.at(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c)
                g.at(r, c) -= f * g.at(col, c);
            for (std::size_t c = 0; c < rhs.cols(); ++c)
                rhs.at(r, c) -= f * rhs.at(col, c);
        }
    }
    return rhs;
}

// SAME-padded convolution with the zero border materialized, so every
// output element is a plain quadruple loop over a dense buffer.
inline FeatureMap conv_naive(const FeatureMap& x, const Tensor4& w,
                             int stride_h, int stride_w) {
    const Shape4& s = w.shape();
    const int out_h = (x.h + stride_h - 1) / stride_h;
    const int out_w = (x.w + stride_w - 1) / stride_w;
    const int pad_h = std::max((out_h - 1) * stride_h + s.f1 - x.h, 0);
    const int pad_w = std::max((out_w - 1) * stride_w + s.f2 - x.w, 0);
    const int top = pad_h / 2;
    const int left = pad_w / 2;

    FeatureMap padded(x.h + pad_h, x.w + pad_w, x.c);
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int ch = 0; ch < x.c; ++ch)
                padded.at(y + top, xx + left, ch) = x.at(y, xx, ch);

    FeatureMap out(out_h, out_w, s.o);
    for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox)
            for (int o = 0; o < s.o; ++o) {
                double acc = 0.0;
                for (int f1 = 0; f1 < s.f1; ++f1)
                    for (int f2 = 0; f2 < s.f2; ++f2)
                        for (int i = 0; i < s.i; ++i)
                            acc += w.at(f1, f2, i, o) *
                                   padded.at(oy * stride_h + f1,
                                             ox * stride_w + f2, i);
                out.at(oy, ox, o) = acc;
            }
    return out;
}

// Orthogonal projector onto the row space of a matrix with orthonormal
// rows. Basis independent, so two factorizations of the same subspace give
// the same projector no matter how their rows are rotated or signed.
inline Matrix row_space_projector(const Matrix& v) {
    return naive_matmul(naive_transpose(v), v);
}

inline double round_through_float(double x) {
    return static_cast<double>(static_cast<float>(x));
}

inline Tensor4 rounded_through_float(const Tensor4& t) {
    Tensor4 out = t;
    for (double& x : out.data()) x = round_through_float(x);
    return out;
}

} // namespace oracle
