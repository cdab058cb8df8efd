#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

struct GradCheckOptions {
    double eps = 1e-6;
    double abs_floor = 1e-8;
    // 0 checks every coordinate; otherwise a seeded sample of this many per
    // input (first and last coordinates always included).
    std::size_t max_coords_per_input = 0;
    std::uint64_t seed = 0;
    // A coordinate that misses is re-measured with each of these steps and the
    // closest estimate kept. A smaller step avoids straddling ReLU/max kinks;
    // a larger one shrinks round-off (∝ 1/ε) on gradients that are exactly zero.
    // A wrong gradient rule disagrees at every step.
    std::vector<double> retry_eps;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coords_checked = 0;
};

/// Compares autodiff gradients of scalar `f` w.r.t. `inputs` against central
/// differences (f(x+ε) − f(x−ε)) / 2ε.
template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> inputs,
                                  const GradCheckOptions& opt = {}) {
    if (!(opt.eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
    for (const double step : opt.retry_eps)
        if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: retry steps must be positive");
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    Tensor<T> loss = f();
    if (loss.numel() != 1) throw GraphError("finite_diff_check: f must be scalar-valued");
    loss.backward();

    std::vector<std::vector<T>> analytic;
    for (auto& in : inputs) {
        if (in.has_grad()) analytic.emplace_back(in.grad().begin(), in.grad().end());
        else analytic.emplace_back(in.numel(), T{0});
    }

    GradCheckResult result;
    std::mt19937_64 rng(opt.seed);
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto values = inputs[k].mutable_data();
        std::vector<std::size_t> coords;
        if (opt.max_coords_per_input == 0 || values.size() <= opt.max_coords_per_input) {
            coords.resize(values.size());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            coords = {0, values.size() - 1};
            std::uniform_int_distribution<std::size_t> pick(1, values.size() - 2);
            while (coords.size() < opt.max_coords_per_input) coords.push_back(pick(rng));
        }
        for (const std::size_t i : coords) {
            const T original = values[i];
            const auto central = [&](double eps) {
                values[i] = original + static_cast<T>(eps);
                const double up = static_cast<double>(f().item());
                values[i] = original - static_cast<T>(eps);
                const double down = static_cast<double>(f().item());
                values[i] = original;
                return (up - down) / (2.0 * eps);
            };
            const double a = static_cast<double>(analytic[k][i]);
            const auto rel_of = [&](double n) {
                return std::abs(a - n) / std::max({std::abs(a), std::abs(n), opt.abs_floor});
            };
            double numeric = central(opt.eps);
            double rel = rel_of(numeric);
            for (const double step : opt.retry_eps) {
                if (rel <= 1e-6) break;
                const double again = central(step);
                if (rel_of(again) < rel) numeric = again, rel = rel_of(again);
            }
            ++result.coords_checked;
            if (rel > result.max_rel_error) result = {rel, k, i, a, numeric, result.coords_checked};
        }
    }
    return result;
}

}  // namespace mcdnet
