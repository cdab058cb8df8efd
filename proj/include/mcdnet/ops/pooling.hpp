#pragma once

#include <cstddef>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

namespace detail {

inline void require_nchw(const Shape& s, const char* op) {
    if (s.size() != 4) throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + to_string(s));
    if (s[2] == 0 || s[3] == 0) throw ShapeError(std::string(op) + ": empty spatial extent");
}

// Reduces groups of `count` elements spaced `step` apart. Max ties go to the
// lowest index.
template <typename T>
Tensor<T> strided_reduce(const Tensor<T>& x, Shape out, std::size_t outer, std::size_t inner_stride_outer,
                         std::size_t count, std::size_t step, std::size_t lanes, bool take_max, const char* name) {
    // element (o, l, k) lives at o*inner_stride_outer + l + k*step; output (o, l) at o*lanes + l
    std::vector<T> y(outer * lanes);
    std::vector<std::size_t> arg(take_max ? y.size() : 0);
    const auto v = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < lanes; ++l) {
            const std::size_t base = o * inner_stride_outer + l;
            if (take_max) {
                std::size_t best = base;
                for (std::size_t k = 1; k < count; ++k)
                    if (v[base + k * step] > v[best]) best = base + k * step;
                y[o * lanes + l] = v[best];
                arg[o * lanes + l] = best;
            } else {
                T s{0};
                for (std::size_t k = 0; k < count; ++k) s += v[base + k * step];
                y[o * lanes + l] = s / static_cast<T>(count);
            }
        }
    return make_result<T>(std::move(out), std::move(y), name, {x},
                          [=, arg = std::move(arg)](Node<T>& self) {
                              auto& dx = self.inputs[0]->ensure_grad();
                              const T inv = T{1} / static_cast<T>(count);
                              for (std::size_t o = 0; o < outer; ++o)
                                  for (std::size_t l = 0; l < lanes; ++l) {
                                      const T g = self.grad[o * lanes + l];
                                      if (take_max) {
                                          dx[arg[o * lanes + l]] += g;
                                      } else {
                                          const std::size_t base = o * inner_stride_outer + l;
                                          for (std::size_t k = 0; k < count; ++k) dx[base + k * step] += g * inv;
                                      }
                                  }
                          });
}

}  // namespace detail

/// Mean over H×W per channel: [N,C,H,W] -> [N,C,1,1].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "global_avg_pool");
    const std::size_t hw = x.dim(2) * x.dim(3);
    return detail::strided_reduce(x, {x.dim(0), x.dim(1), 1, 1}, x.dim(0) * x.dim(1), hw, hw, 1, 1, false,
                                  "global_avg_pool");
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "global_max_pool");
    const std::size_t hw = x.dim(2) * x.dim(3);
    return detail::strided_reduce(x, {x.dim(0), x.dim(1), 1, 1}, x.dim(0) * x.dim(1), hw, hw, 1, 1, true,
                                  "global_max_pool");
}

/// Mean over channels per location: [N,C,H,W] -> [N,1,H,W].
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "channel_mean");
    const std::size_t hw = x.dim(2) * x.dim(3);
    return detail::strided_reduce(x, {x.dim(0), 1, x.dim(2), x.dim(3)}, x.dim(0), x.dim(1) * hw, x.dim(1), hw, hw,
                                  false, "channel_mean");
}

template <typename T>
Tensor<T> channel_max(const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "channel_max");
    const std::size_t hw = x.dim(2) * x.dim(3);
    return detail::strided_reduce(x, {x.dim(0), 1, x.dim(2), x.dim(3)}, x.dim(0), x.dim(1) * hw, x.dim(1), hw, hw,
                                  true, "channel_max");
}

namespace detail {

template <typename T>
Tensor<T> window_pool(const Tensor<T>& x, std::size_t window, std::size_t stride, bool take_max, const char* name) {
    require_nchw(x.shape(), name);
    if (window == 0 || stride == 0) throw ShapeError(std::string(name) + ": window and stride must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (window > h || window > w) throw ShapeError(std::string(name) + ": window larger than input");
    const std::size_t ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
    std::vector<T> y(n * c * ho * wo);
    std::vector<std::size_t> arg(take_max ? y.size() : 0);
    const auto v = x.data();
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const std::size_t o = (p * ho + oy) * wo + ox;
                std::size_t best = (p * h + oy * stride) * w + ox * stride;
                T s{0};
                for (std::size_t i = 0; i < window; ++i)
                    for (std::size_t j = 0; j < window; ++j) {
                        const std::size_t at = (p * h + oy * stride + i) * w + ox * stride + j;
                        s += v[at];
                        if (v[at] > v[best]) best = at;
                    }
                if (take_max) {
                    y[o] = v[best];
                    arg[o] = best;
                } else {
                    y[o] = s / static_cast<T>(window * window);
                }
            }
    return make_result<T>({n, c, ho, wo}, std::move(y), name, {x}, [=, arg = std::move(arg)](Node<T>& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        const T inv = T{1} / static_cast<T>(window * window);
        for (std::size_t p = 0; p < n * c; ++p)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::size_t o = (p * ho + oy) * wo + ox;
                    if (take_max) {
                        dx[arg[o]] += self.grad[o];
                        continue;
                    }
                    for (std::size_t i = 0; i < window; ++i)
                        for (std::size_t j = 0; j < window; ++j)
                            dx[(p * h + oy * stride + i) * w + ox * stride + j] += self.grad[o] * inv;
                }
    });
}

}  // namespace detail

/// Windowed pooling without padding.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
    return detail::window_pool(x, window, stride, false, "avg_pool2d");
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
    return detail::window_pool(x, window, stride, true, "max_pool2d");
}

}  // namespace mcdnet
