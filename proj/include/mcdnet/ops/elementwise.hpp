#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mcdnet/profiler.hpp"
#include "mcdnet/tensor.hpp"

namespace mcdnet {

namespace detail {

inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t s = 1;
    for (std::size_t d = in.size(); d-- > 0;) {
        strides[d] = in[d] == 1 && out[d] != 1 ? 0 : s;
        s *= in[d];
    }
    return strides;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    if (a.size() != b.size())
        throw ShapeError(std::string(op) + ": rank mismatch " + to_string(a) + " vs " + to_string(b));
    Shape out(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) {
        if (a[d] == b[d] || b[d] == 1) out[d] = a[d];
        else if (a[d] == 1) out[d] = b[d];
        else throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    return out;
}

/// Calls fn(out_index, a_offset, b_offset) for every output element.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Fn&& fn) {
    const std::size_t rank = out.size();
    const std::size_t total = numel(out);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t i = 0; i < total; ++i) {
        fn(i, oa, ob);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < out[d]) {
                oa += sa[d];
                ob += sb[d];
                break;
            }
            oa -= sa[d] * (out[d] - 1);
            ob -= sb[d] * (out[d] - 1);
            idx[d] = 0;
        }
    }
}

enum class BinaryOp { add, sub, mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryOp kind, const char* name) {
    const Shape out = broadcast_shape(a.shape(), b.shape(), name);
    const auto sa = broadcast_strides(a.shape(), out);
    const auto sb = broadcast_strides(b.shape(), out);
    std::vector<T> y(numel(out));
    const auto av = a.data();
    const auto bv = b.data();
    for_each_broadcast(out, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        switch (kind) {
            case BinaryOp::add: y[i] = av[ia] + bv[ib]; break;
            case BinaryOp::sub: y[i] = av[ia] - bv[ib]; break;
            case BinaryOp::mul: y[i] = av[ia] * bv[ib]; break;
        }
    });
    return make_result<T>(out, std::move(y), name, {a, b}, [out, sa, sb, kind](Node<T>& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const bool ga = A.requires_grad, gb = B.requires_grad;
        T* da = ga ? A.ensure_grad().data() : nullptr;
        T* db = gb ? B.ensure_grad().data() : nullptr;
        const auto& g = self.grad;
        for_each_broadcast(out, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
            switch (kind) {
                case BinaryOp::add:
                    if (ga) da[ia] += g[i];
                    if (gb) db[ib] += g[i];
                    break;
                case BinaryOp::sub:
                    if (ga) da[ia] += g[i];
                    if (gb) db[ib] -= g[i];
                    break;
                case BinaryOp::mul:
                    if (ga) da[ia] += g[i] * B.data[ib];
                    if (gb) db[ib] += g[i] * A.data[ia];
                    break;
            }
        });
    });
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* name, Fwd fwd, Deriv deriv) {
    std::vector<T> y(x.numel());
    const auto xv = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
    // deriv(x, y) gives dy/dx
    return make_result<T>(x.shape(), std::move(y), name, {x}, [deriv](Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& dx = X.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * deriv(X.data[i], self.data[i]);
    });
}

}  // namespace detail

/// Elementwise arithmetic with size-1 broadcasting on equal-rank operands.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryOp::add, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryOp::sub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(a, b, detail::BinaryOp::mul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    return detail::unary(
        x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary(
        x, "relu", [](T v) { return v > T{0} ? v : T{0}; }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

/// min(max(x, 0), 6); the derivative is 1 strictly inside (0, 6).
template <typename T>
Tensor<T> relu6(const Tensor<T>& x) {
    return detail::unary(
        x, "relu6", [](T v) { return std::clamp(v, T{0}, T{6}); },
        [](T v, T) { return v > T{0} && v < T{6} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary(
        x, "sigmoid",
        [](T v) {
            if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
            const T e = std::exp(v);
            return e / (T{1} + e);
        },
        [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s{0};
    for (const T v : x.data()) s += v;
    return detail::make_result<T>({1}, {s}, "sum", {x}, [](Node<T>& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (auto& d : dx) d += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw ShapeError("reshape " + to_string(x.shape()) + " to " + to_string(shape));
    std::vector<T> y(x.data().begin(), x.data().end());
    return detail::make_result<T>(std::move(shape), std::move(y), "reshape", {x}, [](Node<T>& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
    });
}

/// Concatenation of [N,Ci,H,W] tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const auto& s0 = parts[0].shape();
    if (s0.size() != 4) throw ShapeError("concat_channels expects rank-4 tensors");
    std::size_t channels = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
            throw ShapeError("concat_channels: incompatible " + to_string(s) + " vs " + to_string(s0));
        channels += s[1];
    }
    const std::size_t n = s0[0], plane = s0[2] * s0[3];
    std::vector<T> y(n * channels * plane);
    std::vector<std::size_t> offsets;
    std::size_t c0 = 0;
    for (const auto& p : parts) {
        offsets.push_back(c0);
        const std::size_t c = p.dim(1);
        const auto v = p.data();
        for (std::size_t b = 0; b < n; ++b)
            std::copy_n(v.begin() + b * c * plane, c * plane, y.begin() + (b * channels + c0) * plane);
        c0 += c;
    }
    Shape out{n, channels, s0[2], s0[3]};
    return detail::make_result<T>(out, std::move(y), "concat", parts, [offsets, n, channels, plane](Node<T>& self) {
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            auto& in = *self.inputs[k];
            if (!in.requires_grad) continue;
            const std::size_t c = in.shape[1];
            auto& dx = in.ensure_grad();
            for (std::size_t b = 0; b < n; ++b) {
                const T* g = self.grad.data() + (b * channels + offsets[k]) * plane;
                T* d = dx.data() + b * c * plane;
                for (std::size_t i = 0; i < c * plane; ++i) d[i] += g[i];
            }
        }
    });
}

/// Channels [first, first+count) of an [N,C,H,W] tensor.
template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, std::size_t first, std::size_t count) {
    if (x.rank() != 4 || count == 0 || first + count > x.dim(1))
        throw ShapeError("channel_slice out of range for " + to_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    std::vector<T> y(n * count * plane);
    const auto v = x.data();
    for (std::size_t b = 0; b < n; ++b)
        std::copy_n(v.begin() + (b * c + first) * plane, count * plane, y.begin() + b * count * plane);
    Shape out{n, count, x.dim(2), x.dim(3)};
    return detail::make_result<T>(out, std::move(y), "channel_slice", {x}, [=](Node<T>& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < count * plane; ++i)
                dx[(b * c + first) * plane + i] += self.grad[b * count * plane + i];
    });
}

/// Affine map over the last dimension: y = x·wᵀ + b with w of shape [Dout, Din].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b = nullptr) {
    if (w.rank() != 2) throw ShapeError("linear: weight must be [Dout, Din]");
    const std::size_t din = w.dim(1), dout = w.dim(0);
    if (x.rank() < 1 || x.shape().back() != din)
        throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(w.shape()));
    if (b && (b->rank() != 1 || b->dim(0) != dout)) throw ShapeError("linear: bias must be [Dout]");
    const std::size_t rows = x.numel() / din;
    Shape out = x.shape();
    out.back() = dout;
    std::vector<T> y(rows * dout);
    const auto xv = x.data();
    const auto wv = w.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < dout; ++o) {
            T s = b ? b->data()[o] : T{0};
            for (std::size_t i = 0; i < din; ++i) s += xv[r * din + i] * wv[o * din + i];
            y[r * dout + o] = s;
        }
    detail::record_op("linear", CostKind::linear, out, static_cast<std::uint64_t>(rows) * dout * din);
    std::vector<Tensor<T>> inputs{x, w};
    if (b) inputs.push_back(*b);
    return detail::make_result<T>(out, std::move(y), "linear", std::move(inputs), [rows, din, dout](Node<T>& self) {
        auto& X = *self.inputs[0];
        auto& W = *self.inputs[1];
        const auto& g = self.grad;
        if (X.requires_grad) {
            auto& dx = X.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t o = 0; o < dout; ++o)
                    for (std::size_t i = 0; i < din; ++i) dx[r * din + i] += g[r * dout + o] * W.data[o * din + i];
        }
        if (W.requires_grad) {
            auto& dw = W.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t o = 0; o < dout; ++o)
                    for (std::size_t i = 0; i < din; ++i) dw[o * din + i] += g[r * dout + o] * X.data[r * din + i];
        }
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
            auto& db = self.inputs[2]->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t o = 0; o < dout; ++o) db[o] += g[r * dout + o];
        }
    });
}

}  // namespace mcdnet
