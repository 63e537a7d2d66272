#include "jsvd/tensor.hpp"

#include <cmath>
#include <string>

namespace jsvd {
namespace {

void require_finite(std::span<const double> data, const char* what) {
    for (double x : data) {
        if (!std::isfinite(x)) {
            throw dimension_error(std::string(what) +
                                  " contains a non-finite entry");
        }
    }
}

void require_positive_shape(const Shape4& s) {
    if (s.f1 < 1 || s.f2 < 1 || s.i < 1 || s.o < 1) {
        throw dimension_error("tensor shape " + shape_to_string(s) +
                              " has a dimension < 1");
    }
}

} // namespace

std::size_t dtype_size(Dtype dtype) {
    return dtype == Dtype::f32 ? 4 : 8;
}

const char* dtype_name(Dtype dtype) {
    return dtype == Dtype::f32 ? "f32" : "f64";
}

Dtype dtype_from_name(std::string_view name) {
    if (name == "f32") return Dtype::f32;
    if (name == "f64") return Dtype::f64;
    throw parse_error("unknown dtype \"" + std::string(name) +
                      "\", expected f32 or f64");
}

std::string shape_to_string(const Shape4& s) {
    return "(" + std::to_string(s.f1) + "," + std::to_string(s.f2) + "," +
           std::to_string(s.i) + "," + std::to_string(s.o) + ")";
}

Tensor4::Tensor4(Shape4 shape, Dtype dtype)
    : shape_(shape), dtype_(dtype), data_(shape.volume(), 0.0) {
    require_positive_shape(shape);
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data, Dtype dtype)
    : shape_(shape), dtype_(dtype), data_(std::move(data)) {
    require_positive_shape(shape);
    if (data_.size() != shape.volume()) {
        throw dimension_error("tensor data size " + std::to_string(data_.size()) +
                              " does not match shape " + shape_to_string(shape) +
                              " volume " + std::to_string(shape.volume()));
    }
    require_finite(data_, "tensor");
}

double Tensor4::frobenius_norm_sq() const {
    double sum = 0.0;
    for (double x : data_) sum += x * x;
    return sum;
}

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw dimension_error("matrix data size " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    require_finite(data_, "matrix");
}

double Matrix::frobenius_norm_sq() const {
    double sum = 0.0;
    for (double x : data_) sum += x * x;
    return sum;
}

Matrix unfold(const Tensor4& w) {
    const Shape4& s = w.shape();
    Matrix m(s.unfolded_rows(), s.unfolded_cols());
    for (int f1 = 0; f1 < s.f1; ++f1)
        for (int f2 = 0; f2 < s.f2; ++f2)
            for (int i = 0; i < s.i; ++i)
                for (int o = 0; o < s.o; ++o)
                    m.at(static_cast<std::size_t>(f1) * s.i + i,
                         static_cast<std::size_t>(f2) * s.o + o) =
                        w.at(f1, f2, i, o);
    return m;
}

Tensor4 fold(const Matrix& m, const Shape4& shape, Dtype dtype) {
    require_positive_shape(shape);
    if (m.rows() != shape.unfolded_rows() || m.cols() != shape.unfolded_cols()) {
        throw dimension_error(
            "cannot fold " + std::to_string(m.rows()) + "x" +
            std::to_string(m.cols()) + " matrix into shape " +
            shape_to_string(shape) + ", expected " +
            std::to_string(shape.unfolded_rows()) + "x" +
            std::to_string(shape.unfolded_cols()));
    }
    Tensor4 w(shape, dtype);
    for (int f1 = 0; f1 < shape.f1; ++f1)
        for (int f2 = 0; f2 < shape.f2; ++f2)
            for (int i = 0; i < shape.i; ++i)
                for (int o = 0; o < shape.o; ++o)
                    w.at(f1, f2, i, o) =
                        m.at(static_cast<std::size_t>(f1) * shape.i + i,
                             static_cast<std::size_t>(f2) * shape.o + o);
    return w;
}

Matrix stack_vertical(std::span<const Matrix> members) {
    if (members.empty()) throw dimension_error("cannot stack zero matrices");
    const std::size_t cols = members[0].cols();
    std::size_t rows = 0;
    for (std::size_t n = 0; n < members.size(); ++n) {
        if (members[n].cols() != cols) {
            throw dimension_error(
                "vertical stack needs a common column count, member 0 has " +
                std::to_string(cols) + " columns but member " +
                std::to_string(n) + " has " + std::to_string(members[n].cols()));
        }
        rows += members[n].rows();
    }
    Matrix out(rows, cols);
    std::size_t row0 = 0;
    for (const Matrix& m : members) {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c)
                out.at(row0 + r, c) = m.at(r, c);
        row0 += m.rows();
    }
    return out;
}

Matrix stack_horizontal(std::span<const Matrix> members) {
    if (members.empty()) throw dimension_error("cannot stack zero matrices");
    const std::size_t rows = members[0].rows();
    std::size_t cols = 0;
    for (std::size_t n = 0; n < members.size(); ++n) {
        if (members[n].rows() != rows) {
            throw dimension_error(
                "horizontal stack needs a common row count, member 0 has " +
                std::to_string(rows) + " rows but member " + std::to_string(n) +
                " has " + std::to_string(members[n].rows()));
        }
        cols += members[n].cols();
    }
    Matrix out(rows, cols);
    std::size_t col0 = 0;
    for (const Matrix& m : members) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                out.at(r, col0 + c) = m.at(r, c);
        col0 += m.cols();
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out.at(c, r) = m.at(r, c);
    return out;
}

} // namespace jsvd
