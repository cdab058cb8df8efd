#pragma once

// Parameter registry and the conv / batch-norm building blocks the network is
// assembled from. Every block can also "trace" a shape through itself and
// report its learnable parameters and multiply-accumulates.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mcdnet/ops/conv.hpp"
#include "mcdnet/ops/elementwise.hpp"
#include "mcdnet/ops/norm.hpp"
#include "mcdnet/profiler.hpp"
#include "mcdnet/tensor.hpp"

namespace mcdnet {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

/// Ordered, uniquely named parameters (learnable) and buffers (running stats).
template <typename T>
class ParamRegistry {
public:
    Tensor<T> add_param(std::string name, Tensor<T> t) {
        check_unique(name);
        t.set_requires_grad(true);
        params_.push_back({std::move(name), t});
        return t;
    }

    void add_buffer(std::string name, Tensor<T> t) {
        check_unique(name);
        buffers_.push_back({std::move(name), std::move(t)});
    }

    const std::vector<NamedTensor<T>>& params() const { return params_; }
    const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

    std::uint64_t param_count() const {
        std::uint64_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

private:
    void check_unique(const std::string& name) const {
        for (const auto& p : params_)
            if (p.name == name) throw std::logic_error("duplicate parameter name " + name);
        for (const auto& b : buffers_)
            if (b.name == name) throw std::logic_error("duplicate buffer name " + name);
    }

    std::vector<NamedTensor<T>> params_;
    std::vector<NamedTensor<T>> buffers_;
};

/// Per-tensor generator: the stream depends only on (seed, name), so shared
/// parameters initialize identically whatever else the model contains.
inline std::mt19937_64 param_rng(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return std::mt19937_64(seed ^ h);
}

template <typename T>
Tensor<T> kaiming_fan_out(Shape shape, std::size_t fan_out, std::uint64_t seed, std::string_view name) {
    auto rng = param_rng(seed, name);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_out)));
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>::from(std::move(shape), std::move(v));
}

enum class Activation { none, relu, relu6 };

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation a) {
    switch (a) {
        case Activation::relu: return relu(x);
        case Activation::relu6: return relu6(x);
        case Activation::none: break;
    }
    return x;
}

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamRegistry<T>& reg, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
           Conv2dOptions opt, bool with_bias, std::uint64_t seed)
        : name_(name), in_(in), out_(out), kernel_(kernel), opt_(opt) {
        weight_ = reg.add_param(name + ".weight",
                                kaiming_fan_out<T>({out, in / opt.groups, kernel, kernel}, out * kernel * kernel,
                                                   seed, name + ".weight"));
        if (with_bias) bias_ = reg.add_param(name + ".bias", Tensor<T>::zeros({out}));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        return bias_ ? conv2d(x, weight_, *bias_, opt_) : conv2d(x, weight_, opt_);
    }

    Shape trace(const Shape& in, CostRecorder& rec, bool spatial = true) const {
        if (in.size() != 4 || in[1] != in_) throw ShapeError(name_ + ": unexpected input " + to_string(in));
        Shape out{in[0], out_, conv_output_extent(in[2], kernel_, opt_), conv_output_extent(in[3], kernel_, opt_)};
        const std::uint64_t params = weight_.numel() + (bias_ ? bias_->numel() : 0);
        const std::uint64_t macs = static_cast<std::uint64_t>(out[0]) * out[2] * out[3] * out_ *
                                   (in_ / opt_.groups) * kernel_ * kernel_;
        rec.add({name_, spatial ? CostKind::conv : CostKind::pooled_conv, out, params, macs, spatial});
        return out;
    }

    const Tensor<T>& weight() const { return weight_; }
    const std::optional<Tensor<T>>& bias() const { return bias_; }
    const Conv2dOptions& options() const { return opt_; }

private:
    std::string name_;
    std::size_t in_ = 0, out_ = 0, kernel_ = 1;
    Conv2dOptions opt_;
    Tensor<T> weight_;
    std::optional<Tensor<T>> bias_;
};

template <typename T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(ParamRegistry<T>& reg, const std::string& name, std::size_t channels)
        : name_(name), state_(channels) {
        gamma_ = reg.add_param(name + ".gamma", Tensor<T>::full({channels}, T{1}));
        beta_ = reg.add_param(name + ".beta", Tensor<T>::zeros({channels}));
        reg.add_buffer(name + ".running_mean", state_.running_mean);
        reg.add_buffer(name + ".running_var", state_.running_var);
    }

    // Running statistics move only in training mode.
    Tensor<T> forward(const Tensor<T>& x, NormMode mode) const { return batch_norm(x, gamma_, beta_, state_, mode); }

    void trace(const Shape& in, CostRecorder& rec) const {
        rec.add({name_, CostKind::norm, in, gamma_.numel() + beta_.numel(), 0, true});
    }

private:
    std::string name_;
    Tensor<T> gamma_, beta_;
    mutable BatchNormState<T> state_;
};

/// conv (no bias) → batch norm → activation.
template <typename T>
class ConvBnAct {
public:
    ConvBnAct() = default;
    ConvBnAct(ParamRegistry<T>& reg, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
              Conv2dOptions opt, Activation act, std::uint64_t seed)
        : conv_(reg, name + ".conv", in, out, kernel, opt, false, seed), bn_(reg, name + ".bn", out), act_(act) {}

    Tensor<T> forward(const Tensor<T>& x, NormMode mode) const {
        return activate(bn_.forward(conv_.forward(x), mode), act_);
    }

    Shape trace(const Shape& in, CostRecorder& rec, bool spatial = true) const {
        Shape out = conv_.trace(in, rec, spatial);
        bn_.trace(out, rec);
        return out;
    }

    const Conv2d<T>& conv() const { return conv_; }

private:
    Conv2d<T> conv_;
    BatchNorm2d<T> bn_;
    Activation act_ = Activation::none;
};

}  // namespace mcdnet
