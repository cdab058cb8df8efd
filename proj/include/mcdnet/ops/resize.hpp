#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

/// Two-tap interpolation weights along one axis, half-pixel centers
/// (align_corners = false): src = (dst + 0.5)·in/out − 0.5, clamped at 0.
struct AxisTaps {
    std::vector<std::size_t> lo, hi;
    std::vector<double> frac;  // weight of `hi`
};

inline AxisTaps half_pixel_taps(std::size_t in, std::size_t out) {
    AxisTaps t;
    t.lo.resize(out);
    t.hi.resize(out);
    t.frac.resize(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
        const double src = std::max(0.0, (static_cast<double>(d) + 0.5) * ratio - 0.5);
        const auto i0 = std::min(static_cast<std::size_t>(src), in - 1);
        t.lo[d] = i0;
        t.hi[d] = std::min(i0 + 1, in - 1);
        t.frac[d] = t.hi[d] == i0 ? 0.0 : src - static_cast<double>(i0);
    }
    return t;
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    if (x.rank() != 4) throw ShapeError("upsample_bilinear: expected [N,C,H,W], got " + to_string(x.shape()));
    if (out_h == 0 || out_w == 0) throw ShapeError("upsample_bilinear: target size must be positive");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    if (out_h < h || out_w < w) throw ShapeError("upsample_bilinear: target smaller than input");
    const AxisTaps ty = half_pixel_taps(h, out_h);
    const AxisTaps tx = half_pixel_taps(w, out_w);
    std::vector<T> y(planes * out_h * out_w);
    const auto v = x.data();
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = v.data() + p * h * w;
        T* dst = y.data() + p * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const T fy = static_cast<T>(ty.frac[oy]);
            const T* r0 = src + ty.lo[oy] * w;
            const T* r1 = src + ty.hi[oy] * w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const T fx = static_cast<T>(tx.frac[ox]);
                const T top = r0[tx.lo[ox]] * (T{1} - fx) + r0[tx.hi[ox]] * fx;
                const T bot = r1[tx.lo[ox]] * (T{1} - fx) + r1[tx.hi[ox]] * fx;
                dst[oy * out_w + ox] = top * (T{1} - fy) + bot * fy;
            }
        }
    }
    Shape out{x.dim(0), x.dim(1), out_h, out_w};
    return detail::make_result<T>(out, std::move(y), "upsample_bilinear", {x}, [=](Node<T>& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (std::size_t p = 0; p < planes; ++p) {
            T* d = dx.data() + p * h * w;
            const T* g = self.grad.data() + p * out_h * out_w;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const T fy = static_cast<T>(ty.frac[oy]);
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const T fx = static_cast<T>(tx.frac[ox]);
                    const T gv = g[oy * out_w + ox];
                    d[ty.lo[oy] * w + tx.lo[ox]] += gv * (T{1} - fy) * (T{1} - fx);
                    d[ty.lo[oy] * w + tx.hi[ox]] += gv * (T{1} - fy) * fx;
                    d[ty.hi[oy] * w + tx.lo[ox]] += gv * fy * (T{1} - fx);
                    d[ty.hi[oy] * w + tx.hi[ox]] += gv * fy * fx;
                }
            }
        }
    });
}

}  // namespace mcdnet
