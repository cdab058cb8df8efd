#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

/// Running statistics owned by a batch-norm layer; not learnable. The running
/// variance tracks the biased batch variance, the same estimator training
/// normalizes with.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    explicit BatchNormState(std::size_t channels = 1)
        : running_mean(Tensor<T>::zeros({channels})), running_var(Tensor<T>::full({channels}, T{1})) {}
};

enum class NormMode { training, inference };

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                     NormMode mode) {
    if (x.rank() != 4) throw ShapeError("batch_norm: expected [N,C,H,W], got " + to_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (gamma.numel() != c || beta.numel() != c || state.running_mean.numel() != c)
        throw ShapeError("batch_norm: parameter size does not match " + std::to_string(c) + " channels");
    const std::size_t count = n * hw;
    if (mode == NormMode::training && count == 0) throw ShapeError("batch_norm: empty batch in training mode");

    const auto xv = x.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    std::vector<T> inv_std(c), xhat(x.numel()), y(x.numel());
    for (std::size_t ch = 0; ch < c; ++ch) {
        T mu, var;
        if (mode == NormMode::training) {
            T s{0};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < hw; ++i) s += xv[(b * c + ch) * hw + i];
            mu = s / static_cast<T>(count);
            T ss{0};
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < hw; ++i) {
                    const T d = xv[(b * c + ch) * hw + i] - mu;
                    ss += d * d;
                }
            var = ss / static_cast<T>(count);
            auto rm = state.running_mean.mutable_data();
            auto rv = state.running_var.mutable_data();
            rm[ch] = (T{1} - state.momentum) * rm[ch] + state.momentum * mu;
            rv[ch] = (T{1} - state.momentum) * rv[ch] + state.momentum * var;
        } else {
            mu = state.running_mean[ch];
            var = state.running_var[ch];
        }
        inv_std[ch] = T{1} / std::sqrt(var + state.eps);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < hw; ++i) {
                const std::size_t at = (b * c + ch) * hw + i;
                xhat[at] = (xv[at] - mu) * inv_std[ch];
                y[at] = gv[ch] * xhat[at] + bv[ch];
            }
    }
    const bool batch_stats = mode == NormMode::training;
    return detail::make_result<T>(
        x.shape(), std::move(y), "batch_norm", {x, gamma, beta},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
            auto& X = *self.inputs[0];
            auto& G = *self.inputs[1];
            auto& B = *self.inputs[2];
            const auto& g = self.grad;
            for (std::size_t ch = 0; ch < c; ++ch) {
                T sg{0}, sgx{0};
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t i = 0; i < hw; ++i) {
                        const std::size_t at = (b * c + ch) * hw + i;
                        sg += g[at];
                        sgx += g[at] * xhat[at];
                    }
                if (G.requires_grad) G.ensure_grad()[ch] += sgx;
                if (B.requires_grad) B.ensure_grad()[ch] += sg;
                if (!X.requires_grad) continue;
                auto& dx = X.ensure_grad();
                const T k = G.data[ch] * inv_std[ch];
                const T m = static_cast<T>(count);
                for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t i = 0; i < hw; ++i) {
                        const std::size_t at = (b * c + ch) * hw + i;
                        dx[at] += batch_stats ? k * (g[at] - sg / m - xhat[at] * sgx / m) : k * g[at];
                    }
            }
        });
}

}  // namespace mcdnet
