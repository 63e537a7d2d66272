#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "jsvd/errors.hpp"

namespace jsvd {

// Storage precision of a tensor payload on disk. In memory everything is kept
// as double; the tag only controls (de)serialization width.
enum class Dtype { f32, f64 };

std::size_t dtype_size(Dtype dtype);
const char* dtype_name(Dtype dtype);
Dtype dtype_from_name(std::string_view name);

// Convolution weight extent: F1 x F2 spatial kernel, I input channels,
// O output channels.
struct Shape4 {
    int f1 = 0;
    int f2 = 0;
    int i = 0;
    int o = 0;

    std::size_t volume() const {
        return static_cast<std::size_t>(f1) * f2 * i * o;
    }
    // Dimensions of the unfolded matrix, see unfold() below.
    std::size_t unfolded_rows() const { return static_cast<std::size_t>(f1) * i; }
    std::size_t unfolded_cols() const { return static_cast<std::size_t>(f2) * o; }

    bool operator==(const Shape4&) const = default;
};

std::string shape_to_string(const Shape4& s);

// Dense 4-way weight tensor, row-major over (f1, f2, i, o).
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, Dtype dtype = Dtype::f64);
    Tensor4(Shape4 shape, std::vector<double> data, Dtype dtype = Dtype::f64);

    const Shape4& shape() const { return shape_; }
    Dtype dtype() const { return dtype_; }
    std::size_t size() const { return data_.size(); }

    double& at(int f1, int f2, int i, int o) {
        return data_[index(f1, f2, i, o)];
    }
    double at(int f1, int f2, int i, int o) const {
        return data_[index(f1, f2, i, o)];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double frobenius_norm_sq() const;

private:
    std::size_t index(int f1, int f2, int i, int o) const {
        return ((static_cast<std::size_t>(f1) * shape_.f2 + f2) * shape_.i + i)
                   * shape_.o + o;
    }

    Shape4 shape_{};
    Dtype dtype_ = Dtype::f64;
    std::vector<double> data_;
};

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double frobenius_norm_sq() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// General unfolding of a weight tensor into an (F1*I) x (F2*O) matrix with
// row index f1*I + i and column index f2*O + o. This is the permutation
// (F1,F2,I,O) -> (F1,I,F2,O) followed by a row-major reshape; it preserves
// the Frobenius norm and fold() inverts it exactly.
Matrix unfold(const Tensor4& w);

// Exact inverse of unfold. The matrix must measure (F1*I) x (F2*O) for the
// requested shape; round trips are bit identical.
Tensor4 fold(const Matrix& m, const Shape4& shape, Dtype dtype = Dtype::f64);

// Concatenate matrices top to bottom; all members must share the column
// count. Member n occupies rows [sum of prior row counts, +rows_n).
Matrix stack_vertical(std::span<const Matrix> members);

// Concatenate matrices left to right; all members must share the row count.
Matrix stack_horizontal(std::span<const Matrix> members);

Matrix transpose(const Matrix& m);

} // namespace jsvd
