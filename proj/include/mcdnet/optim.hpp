#pragma once

// AdamW with decoupled weight decay, and the cosine learning-rate schedule.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcdnet/nn/layers.hpp"

namespace mcdnet {

inline double cosine_lr(double epoch, double total, double lr0, double lr_min = 0.0) {
    if (!(total > 0)) throw std::invalid_argument("cosine_lr: schedule length must be positive");
    if (epoch < 0 || epoch > total) throw std::out_of_range("cosine_lr: epoch outside [0, T]");
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * epoch / total));
}

struct AdamWConfig {
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamWState {
    std::vector<std::vector<T>> m, v;
    std::uint64_t t = 0;
};

/// One AdamW step over `params`. Missing gradients are treated as zero.
template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, AdamWState<T>& state, double lr, const AdamWConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].numel(), T{0});
            state.v[i].assign(params[i].numel(), T{0});
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adamw: optimizer state tracks a different parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].mutable_data();
        auto g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != theta.size() || (!g.empty() && g.size() != theta.size()))
            throw ShapeError("adamw: shape mismatch for parameter " + std::to_string(i));
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
            const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1 - cfg.beta1) * gj;
            const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1 - cfg.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / bc1, vhat = vj / bc2;
            const double th = static_cast<double>(theta[j]);
            theta[j] = static_cast<T>(th - lr * mhat / (std::sqrt(vhat) + cfg.eps) - lr * cfg.weight_decay * th);
        }
    }
}

template <typename T>
std::vector<Tensor<T>> param_tensors(const ParamRegistry<T>& reg) {
    std::vector<Tensor<T>> out;
    for (const auto& p : reg.params()) out.push_back(p.tensor);
    return out;
}

}  // namespace mcdnet
