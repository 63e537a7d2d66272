#include "jsvd/conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jsvd {
namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// SAME padding before the first element of one axis.
int pad_before(int in, int kernel, int stride) {
    const int out = ceil_div(in, stride);
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return total / 2;
}

} // namespace

FeatureMap::FeatureMap(int h_, int w_, int c_) : h(h_), w(w_), c(c_) {
    if (h < 1 || w < 1 || c < 1) {
        throw dimension_error("feature map " + std::to_string(h_) + "x" +
                              std::to_string(w_) + "x" + std::to_string(c_) +
                              " has a dimension < 1");
    }
    data.assign(static_cast<std::size_t>(h) * w * c, 0.0);
}

FeatureMap conv2d(const FeatureMap& x, const Tensor4& w,
                  int stride_h, int stride_w) {
    const Shape4& s = w.shape();
    if (x.c != s.i) {
        throw dimension_error("conv2d channel mismatch: input has " +
                              std::to_string(x.c) + " channels, kernel " +
                              shape_to_string(s) + " expects " +
                              std::to_string(s.i));
    }
    if (stride_h < 1 || stride_w < 1) {
        throw dimension_error("conv2d stride must be >= 1");
    }

    const int out_h = ceil_div(x.h, stride_h);
    const int out_w = ceil_div(x.w, stride_w);
    const int ph = pad_before(x.h, s.f1, stride_h);
    const int pw = pad_before(x.w, s.f2, stride_w);

    FeatureMap y(out_h, out_w, s.o);
    std::vector<double> acc(static_cast<std::size_t>(s.o));
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int f1 = 0; f1 < s.f1; ++f1) {
                const int sy = oy * stride_h + f1 - ph;
                if (sy < 0 || sy >= x.h) continue; // zero padded row
                for (int f2 = 0; f2 < s.f2; ++f2) {
                    const int sx = ox * stride_w + f2 - pw;
                    if (sx < 0 || sx >= x.w) continue; // zero padded column
                    for (int i = 0; i < s.i; ++i) {
                        const double xv = x.at(sy, sx, i);
                        for (int o = 0; o < s.o; ++o)
                            acc[o] += w.at(f1, f2, i, o) * xv;
                    }
                }
            }
            for (int o = 0; o < s.o; ++o) y.at(oy, ox, o) = acc[o];
        }
    }
    return y;
}

FeatureMap forward_split(const FeatureMap& x, const Tensor4& u,
                         const Tensor4& v, int stride) {
    if (u.shape().f2 != 1) {
        throw dimension_error("vertical kernel must have F2 = 1, got " +
                              shape_to_string(u.shape()));
    }
    if (v.shape().f1 != 1) {
        throw dimension_error("horizontal kernel must have F1 = 1, got " +
                              shape_to_string(v.shape()));
    }
    if (u.shape().o != v.shape().i) {
        throw dimension_error("split rank mismatch: vertical kernel emits " +
                              std::to_string(u.shape().o) +
                              " channels, horizontal kernel expects " +
                              std::to_string(v.shape().i));
    }
    FeatureMap mid = conv2d(x, u, stride, 1);
    return conv2d(mid, v, 1, stride);
}

FeatureMap forward_dual(const FeatureMap& x, const Tensor4& right_u,
                        const Tensor4& right_v, const Tensor4& left_u,
                        const Tensor4& left_v, int stride) {
    FeatureMap a = forward_split(x, right_u, right_v, stride);
    FeatureMap b = forward_split(x, left_u, left_v, stride);
    if (a.h != b.h || a.w != b.w || a.c != b.c) {
        throw dimension_error("dual paths disagree on output extent: " +
                              std::to_string(a.h) + "x" + std::to_string(a.w) +
                              "x" + std::to_string(a.c) + " vs " +
                              std::to_string(b.h) + "x" + std::to_string(b.w) +
                              "x" + std::to_string(b.c));
    }
    for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] += b.data[k];
    return a;
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c) {
        throw dimension_error("max_abs_diff needs equal extents, got " +
                              std::to_string(a.h) + "x" + std::to_string(a.w) +
                              "x" + std::to_string(a.c) + " vs " +
                              std::to_string(b.h) + "x" + std::to_string(b.w) +
                              "x" + std::to_string(b.c));
    }
    double best = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        const double d = std::abs(a.data[k] - b.data[k]);
        if (d > best) best = d;
    }
    return best;
}

} // namespace jsvd
