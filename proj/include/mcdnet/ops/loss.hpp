#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

inline constexpr double kLogProbFloor = -30.0;

/// Class-weighted softmax cross-entropy averaged over all N·H·W pixels:
/// mean of −w[t]·log softmax(logits)[t]. `target` holds N·H·W labels.
template <typename T>
Tensor<T> softmax_ce(const Tensor<T>& logits, std::span<const std::uint8_t> target, std::span<const double> class_weights) {
    if (logits.rank() != 4) throw ShapeError("softmax_ce: logits must be [N,C,H,W]");
    const std::size_t n = logits.dim(0), c = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
    if (target.size() != n * hw)
        throw ShapeError("softmax_ce: target has " + std::to_string(target.size()) + " labels, expected " +
                         std::to_string(n * hw));
    if (class_weights.size() != c) throw ShapeError("softmax_ce: need one weight per class");
    for (const double w : class_weights)
        if (!(w >= 0.0)) throw std::invalid_argument("softmax_ce: class weights must be non-negative");
    for (const auto t : target)
        if (t >= c) throw std::out_of_range("softmax_ce: target label " + std::to_string(t) + " out of range");

    const auto v = logits.data();
    std::vector<T> prob(logits.numel());
    std::vector<std::uint8_t> clamped(n * hw, 0);
    T total{0};
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t px = b * hw + i;
            T mx = v[b * c * hw + i];
            for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, v[(b * c + k) * hw + i]);
            T z{0};
            for (std::size_t k = 0; k < c; ++k) {
                const std::size_t at = (b * c + k) * hw + i;
                prob[at] = std::exp(v[at] - mx);
                z += prob[at];
            }
            for (std::size_t k = 0; k < c; ++k) prob[(b * c + k) * hw + i] /= z;
            const std::size_t t = target[px];
            T logp = v[(b * c + t) * hw + i] - mx - std::log(z);
            if (logp < T(kLogProbFloor)) {
                logp = T(kLogProbFloor);
                clamped[px] = 1;
            }
            total -= static_cast<T>(class_weights[t]) * logp;
        }
    const T inv = T{1} / static_cast<T>(n * hw);
    std::vector<std::uint8_t> labels(target.begin(), target.end());
    std::vector<double> weights(class_weights.begin(), class_weights.end());
    return detail::make_result<T>(
        {1}, {total * inv}, "softmax_ce", {logits},
        [=, prob = std::move(prob), clamped = std::move(clamped), labels = std::move(labels),
         weights = std::move(weights)](Node<T>& self) {
            auto& dx = self.inputs[0]->ensure_grad();
            const T g0 = self.grad[0] * inv;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < hw; ++i) {
                    const std::size_t px = b * hw + i;
                    if (clamped[px]) continue;
                    const std::size_t t = labels[px];
                    const T wg = g0 * static_cast<T>(weights[t]);
                    for (std::size_t k = 0; k < c; ++k) {
                        const std::size_t at = (b * c + k) * hw + i;
                        dx[at] += wg * (prob[at] - (k == t ? T{1} : T{0}));
                    }
                }
        });
}

}  // namespace mcdnet
