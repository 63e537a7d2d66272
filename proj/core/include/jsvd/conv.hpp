#pragma once

#include <vector>

#include "jsvd/tensor.hpp"

namespace jsvd {

// Dense activation block, row-major over (h, w, c).
struct FeatureMap {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int h, int w, int c);

    double& at(int y, int x, int ch) {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch) const {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
};

// Direct 2-D convolution (cross correlation, no kernel flip) with SAME
// padding. Output is ceil(h/stride_h) x ceil(w/stride_w); the total padding
// per axis is max((out-1)*stride + kernel - in, 0) with the smaller half
// before. Accumulation is in 64-bit regardless of storage precision.
FeatureMap conv2d(const FeatureMap& x, const Tensor4& w,
                  int stride_h, int stride_w);

// Factorized layer: vertical kernel u of shape (F1, 1, I, r) applied with
// strides (stride, 1), then horizontal kernel v of shape (1, F2, r, O) with
// strides (1, stride). For a full-rank pair folded from unfold(w) this is
// numerically equivalent to conv2d(x, w, stride, stride).
FeatureMap forward_split(const FeatureMap& x, const Tensor4& u,
                         const Tensor4& v, int stride);

// Sum of two split paths sharing the same input and stride, used for layers
// factorized into a right-shared plus a left-shared part. Both paths must
// produce the same output extent.
FeatureMap forward_dual(const FeatureMap& x, const Tensor4& right_u,
                        const Tensor4& right_v, const Tensor4& left_u,
                        const Tensor4& left_v, int stride);

double max_abs_diff(const FeatureMap& a, const FeatureMap& b);

} // namespace jsvd
