#pragma once

// Convolutional Block Attention Module.
//
//   M_c(F) = σ(MLP(avgpool(F)) + MLP(maxpool(F)))            [N,C,1,1]
//   M_s(F) = σ(conv7x7([mean_c(F); max_c(F)]))                [N,1,H,W]
//   F'     = M_c(F) ⊙ F
//   F_att  = M_s(F') ⊙ F'
//
// The MLP is C → C/r (no bias) → ReLU → C (bias), shared between the two
// pooled descriptors. The spatial conv has a single output channel, padding
// k/2 and a bias.

#include <cstddef>
#include <stdexcept>
#include <string>

#include "mcdnet/nn/layers.hpp"
#include "mcdnet/ops/elementwise.hpp"
#include "mcdnet/ops/pooling.hpp"

namespace mcdnet {

struct CbamConfig {
    std::size_t channels = 0;
    std::size_t reduction = 16;
    std::size_t spatial_kernel = 7;

    std::size_t hidden() const { return channels / reduction; }

    void validate() const {
        if (reduction == 0 || channels / reduction < 1)
            throw std::invalid_argument("cbam: channels / reduction must be at least 1");
        if (spatial_kernel % 2 == 0) throw std::invalid_argument("cbam: spatial kernel must be odd");
    }
};

template <typename T>
struct AttentionMaps {
    Tensor<T> channel;  // M_c
    Tensor<T> spatial;  // M_s
};

template <typename T>
class Cbam {
public:
    Cbam() = default;
    Cbam(ParamRegistry<T>& reg, const std::string& name, CbamConfig cfg, std::uint64_t seed)
        : name_(name), cfg_(cfg) {
        cfg_.validate();
        const std::size_t c = cfg_.channels, h = cfg_.hidden(), k = cfg_.spatial_kernel;
        fc1_ = reg.add_param(name + ".mlp.fc1.weight", kaiming_fan_out<T>({h, c}, h, seed, name + ".mlp.fc1.weight"));
        fc2_ = reg.add_param(name + ".mlp.fc2.weight", kaiming_fan_out<T>({c, h}, c, seed, name + ".mlp.fc2.weight"));
        fc2_bias_ = reg.add_param(name + ".mlp.fc2.bias", Tensor<T>::zeros({c}));
        spatial_ = Conv2d<T>(reg, name + ".spatial", 2, 1, k, {1, k / 2, 1, 1}, true, seed);
    }

    const CbamConfig& config() const { return cfg_; }

    Tensor<T> channel_attention(const Tensor<T>& f) const {
        check_input(f);
        const std::size_t n = f.dim(0), c = f.dim(1);
        detail::record_op("cbam.channel.pool", CostKind::attention, {n, c, 1, 1}, 2 * n * c);
        const auto avg = reshape(global_avg_pool(f), {n, c});
        const auto mx = reshape(global_max_pool(f), {n, c});
        const auto logits = add(mlp(avg), mlp(mx));
        return sigmoid(reshape(logits, {n, c, 1, 1}));
    }

    Tensor<T> spatial_attention(const Tensor<T>& f) const {
        if (f.rank() != 4) throw ShapeError("cbam: expected [N,C,H,W], got " + to_string(f.shape()));
        const std::size_t n = f.dim(0), h = f.dim(2), w = f.dim(3);
        detail::record_op("cbam.spatial.pool", CostKind::attention, {n, 1, h, w}, 2 * n * h * w);
        const auto pooled = concat_channels<T>({channel_mean(f), channel_max(f)});
        return sigmoid(spatial_.forward(pooled));
    }

    Tensor<T> refine(const Tensor<T>& f, AttentionMaps<T>* maps = nullptr) const {
        const auto mc = channel_attention(f);
        detail::record_op("cbam.channel.gate", CostKind::attention, f.shape(), f.numel());
        const auto refined = mul(f, mc);
        const auto ms = spatial_attention(refined);
        detail::record_op("cbam.spatial.gate", CostKind::attention, f.shape(), f.numel());
        if (maps) *maps = {mc, ms};
        return mul(refined, ms);
    }

    Shape trace(const Shape& in, CostRecorder& rec) const {
        if (in.size() != 4 || in[1] != cfg_.channels) throw ShapeError(name_ + ": unexpected input " + to_string(in));
        const std::size_t n = in[0], c = in[1], h = cfg_.hidden(), hw = in[2] * in[3];
        rec.add({name_ + ".channel.pool", CostKind::attention, {n, c, 1, 1}, 0, 2 * n * c, false});
        // two descriptors through the shared MLP
        rec.add({name_ + ".mlp.fc1", CostKind::linear, {n, h}, fc1_.numel(), 2 * n * h * c, false});
        rec.add({name_ + ".mlp.fc2", CostKind::linear, {n, c}, fc2_.numel() + fc2_bias_.numel(), 2 * n * c * h, false});
        rec.add({name_ + ".channel.gate", CostKind::attention, in, 0, n * c * hw, true});
        rec.add({name_ + ".spatial.pool", CostKind::attention, {n, 1, in[2], in[3]}, 0, 2 * n * hw, true});
        spatial_.trace({n, 2, in[2], in[3]}, rec);
        rec.add({name_ + ".spatial.gate", CostKind::attention, in, 0, n * c * hw, true});
        return in;
    }

    Tensor<T>& fc1() { return fc1_; }
    Tensor<T>& fc2() { return fc2_; }
    Tensor<T>& fc2_bias() { return fc2_bias_; }
    const Conv2d<T>& spatial_conv() const { return spatial_; }

private:
    void check_input(const Tensor<T>& f) const {
        if (f.rank() != 4 || f.dim(1) != cfg_.channels)
            throw ShapeError("cbam: expected " + std::to_string(cfg_.channels) + " channels, got " +
                             to_string(f.shape()));
    }

    Tensor<T> mlp(const Tensor<T>& v) const { return linear(relu(linear(v, fc1_)), fc2_, &fc2_bias_); }

    std::string name_;
    CbamConfig cfg_;
    Tensor<T> fc1_, fc2_, fc2_bias_;
    Conv2d<T> spatial_;
};

}  // namespace mcdnet
