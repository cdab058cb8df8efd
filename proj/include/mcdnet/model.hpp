#pragma once

// MobileNetV2 encoder → optional CBAM → ASPP → DeepLabV3+ decoder.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcdnet/cbam.hpp"
#include "mcdnet/nn/layers.hpp"
#include "mcdnet/ops/elementwise.hpp"
#include "mcdnet/ops/pooling.hpp"
#include "mcdnet/ops/resize.hpp"

namespace mcdnet {

struct ModelConfig {
    std::string backbone = "mobilenetv2";
    double width = 1.0;
    bool use_cbam = true;
    int num_classes = 2;
    int output_stride = 16;
    std::array<int, 3> aspp_rates{6, 12, 18};
    int aspp_channels = 256;
    int decoder_lowlevel_channels = 48;
    double channel_scale = 1.0;
    int cbam_reduction = 16;
    int cbam_kernel = 7;
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
        if (backbone != "mobilenetv2") fail("unsupported backbone '" + backbone + "'");
        if (!(width > 0.0)) fail("width must be positive");
        if (!(channel_scale > 0.0)) fail("channel_scale must be positive");
        if (num_classes < 2) fail("num_classes must be at least 2");
        if (output_stride != 8 && output_stride != 16) fail("output_stride must be 8 or 16");
        if (aspp_rates[0] <= 0 || aspp_rates[0] >= aspp_rates[1] || aspp_rates[1] >= aspp_rates[2])
            fail("aspp_rates must be positive and strictly increasing");
        if (aspp_channels <= 0 || decoder_lowlevel_channels <= 0) fail("channel counts must be positive");
        if (cbam_reduction <= 0) fail("cbam_reduction must be positive");
        if (cbam_kernel <= 0 || cbam_kernel % 2 == 0) fail("cbam_kernel must be odd");
    }

    /// Channel count after the desk-scale shrink factor.
    std::size_t scaled(double channels) const {
        return static_cast<std::size_t>(std::max(1L, std::lround(channels * channel_scale)));
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"backbone", c.backbone},
                       {"width", c.width},
                       {"use_cbam", c.use_cbam},
                       {"num_classes", c.num_classes},
                       {"output_stride", c.output_stride},
                       {"aspp_rates", c.aspp_rates},
                       {"aspp_channels", c.aspp_channels},
                       {"decoder_lowlevel_channels", c.decoder_lowlevel_channels},
                       {"channel_scale", c.channel_scale},
                       {"cbam_reduction", c.cbam_reduction},
                       {"cbam_kernel", c.cbam_kernel},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("backbone").get_to(c.backbone);
    j.at("width").get_to(c.width);
    j.at("use_cbam").get_to(c.use_cbam);
    j.at("num_classes").get_to(c.num_classes);
    j.at("output_stride").get_to(c.output_stride);
    j.at("aspp_rates").get_to(c.aspp_rates);
    j.at("aspp_channels").get_to(c.aspp_channels);
    j.at("decoder_lowlevel_channels").get_to(c.decoder_lowlevel_channels);
    j.at("channel_scale").get_to(c.channel_scale);
    j.at("cbam_reduction").get_to(c.cbam_reduction);
    j.at("cbam_kernel").get_to(c.cbam_kernel);
    j.at("seed").get_to(c.seed);
}

/// MobileNetV2 rounding of width-multiplied channel counts.
inline int make_divisible(double v, int divisor = 8) {
    int r = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
    if (r < 0.9 * v) r += divisor;
    return r;
}

struct StageSpec {
    int expansion, channels, repeats, stride;
};

// (t, c, n, s) rows of the MobileNetV2 feature extractor.
inline constexpr std::array<StageSpec, 7> kMobileNetV2Stages{{
    {1, 16, 1, 1},
    {6, 24, 2, 2},
    {6, 32, 3, 2},
    {6, 64, 4, 2},
    {6, 96, 3, 1},
    {6, 160, 3, 2},
    {6, 320, 1, 1},
}};
inline constexpr std::size_t kLowLevelStage = 1;

template <typename T>
struct ForwardTrace {
    Tensor<T> f_low;
    Tensor<T> f_base;
    Tensor<T> f_att;  // equals f_base when attention is absent or bypassed
    Tensor<T> f_aspp;
    Tensor<T> logits;
    std::optional<AttentionMaps<T>> attention;
};

template <typename T>
class InvertedResidual {
public:
    InvertedResidual(ParamRegistry<T>& reg, const std::string& name, std::size_t in, std::size_t out,
                     std::size_t stride, std::size_t dilation, int expansion, std::uint64_t seed)
        : residual_(stride == 1 && in == out) {
        const std::size_t hidden = in * static_cast<std::size_t>(expansion);
        if (expansion != 1) expand_.emplace(reg, name + ".expand", in, hidden, 1, Conv2dOptions{}, Activation::relu6, seed);
        depthwise_ = ConvBnAct<T>(reg, name + ".depthwise", hidden, hidden, 3, {stride, dilation, dilation, hidden},
                                  Activation::relu6, seed);
        project_ = ConvBnAct<T>(reg, name + ".project", hidden, out, 1, Conv2dOptions{}, Activation::none, seed);
    }

    Tensor<T> forward(const Tensor<T>& x, NormMode mode) const {
        Tensor<T> h = expand_ ? expand_->forward(x, mode) : x;
        h = project_.forward(depthwise_.forward(h, mode), mode);
        return residual_ ? add(x, h) : h;
    }

    Shape trace(const Shape& in, CostRecorder& rec) const {
        Shape s = expand_ ? expand_->trace(in, rec) : in;
        return project_.trace(depthwise_.trace(s, rec), rec);
    }

private:
    std::optional<ConvBnAct<T>> expand_;
    ConvBnAct<T> depthwise_, project_;
    bool residual_;
};

template <typename T>
class McdNet {
public:
    explicit McdNet(ModelConfig config) : config_(std::move(config)) {
        config_.validate();
        build_backbone();
        if (config_.use_cbam) {
            CbamConfig cc{high_channels_, static_cast<std::size_t>(config_.cbam_reduction),
                          static_cast<std::size_t>(config_.cbam_kernel)};
            if (cc.hidden() < 1) cc.reduction = cc.channels;
            cbam_.emplace(registry_, "cbam", cc, config_.seed);
        }
        build_aspp();
        build_decoder();
    }

    McdNet(const McdNet&) = delete;
    McdNet& operator=(const McdNet&) = delete;
    McdNet(McdNet&&) noexcept = default;
    McdNet& operator=(McdNet&&) noexcept = default;

    const ModelConfig& config() const { return config_; }
    ParamRegistry<T>& registry() { return registry_; }
    const ParamRegistry<T>& registry() const { return registry_; }
    const std::optional<Cbam<T>>& cbam() const { return cbam_; }
    std::size_t high_channels() const { return high_channels_; }
    std::size_t low_channels() const { return low_channels_; }

    void set_mode(NormMode mode) { mode_ = mode; }
    NormMode mode() const { return mode_; }

    /// F_base (stride = output_stride) and F_low (stride 4).
    std::pair<Tensor<T>, Tensor<T>> backbone_forward(const Tensor<T>& image) const {
        check_image(image);
        Tensor<T> h = stem_.forward(image, mode_);
        Tensor<T> low;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            h = blocks_[i].forward(h, mode_);
            if (i + 1 == low_tap_) low = h;
        }
        return {h, low};
    }

    Tensor<T> aspp_forward(const Tensor<T>& f) const {
        if (f.rank() != 4 || f.dim(2) < 1 || f.dim(3) < 1) throw ShapeError("aspp: invalid input " + to_string(f.shape()));
        std::vector<Tensor<T>> branches;
        branches.push_back(aspp_branches_[0].forward(f, mode_));
        for (std::size_t i = 1; i < aspp_branches_.size(); ++i) branches.push_back(aspp_branches_[i].forward(f, mode_));
        const auto pooled = aspp_pool_.forward(global_avg_pool(f), mode_);
        branches.push_back(upsample_bilinear(pooled, f.dim(2), f.dim(3)));
        return aspp_project_.forward(concat_channels(branches), mode_);
    }

    Tensor<T> decoder_forward(const Tensor<T>& f_aspp, const Tensor<T>& f_low, std::size_t out_h,
                              std::size_t out_w) const {
        const std::size_t factor = static_cast<std::size_t>(config_.output_stride) / 4;
        if (f_aspp.rank() != 4 || f_low.rank() != 4 || f_aspp.dim(2) * factor != f_low.dim(2) ||
            f_aspp.dim(3) * factor != f_low.dim(3))
            throw ShapeError("decoder: stride mismatch between " + to_string(f_aspp.shape()) + " and low-level " +
                             to_string(f_low.shape()));
        const auto up = upsample_bilinear(f_aspp, f_low.dim(2), f_low.dim(3));
        const auto low = low_proj_.forward(f_low, mode_);
        auto h = refine2_.forward(refine1_.forward(concat_channels<T>({up, low}), mode_), mode_);
        return upsample_bilinear(classifier_.forward(h), out_h, out_w);
    }

    ForwardTrace<T> forward_trace(const Tensor<T>& image, bool bypass_attention = false) const {
        ForwardTrace<T> t;
        std::tie(t.f_base, t.f_low) = backbone_forward(image);
        if (cbam_ && !bypass_attention) {
            AttentionMaps<T> maps;
            t.f_att = cbam_->refine(t.f_base, &maps);
            t.attention = maps;
        } else {
            t.f_att = t.f_base;
        }
        t.f_aspp = aspp_forward(t.f_att);
        t.logits = decoder_forward(t.f_aspp, t.f_low, image.dim(2), image.dim(3));
        return t;
    }

    Tensor<T> forward(const Tensor<T>& image) const { return forward_trace(image).logits; }

    /// Analytic per-layer parameter / MAC walk for an N×3×H×W input.
    CostRecorder trace_costs(std::size_t h, std::size_t w, std::size_t n = 1) const {
        check_extent(h, w);
        CostRecorder rec;
        Shape s = stem_.trace({n, 3, h, w}, rec);
        Shape low;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            s = blocks_[i].trace(s, rec);
            if (i + 1 == low_tap_) low = s;
        }
        if (cbam_) s = cbam_->trace(s, rec);
        Shape a;
        for (const auto& b : aspp_branches_) a = b.trace(s, rec);
        aspp_pool_.trace({n, s[1], 1, 1}, rec, false);
        a = aspp_project_.trace({n, a[1] * (aspp_branches_.size() + 1), s[2], s[3]}, rec);
        Shape l = low_proj_.trace(low, rec);
        Shape r = refine1_.trace({n, a[1] + l[1], l[2], l[3]}, rec);
        r = refine2_.trace(r, rec);
        classifier_.trace(r, rec);
        return rec;
    }

private:
    void check_extent(std::size_t h, std::size_t w) const {
        const auto os = static_cast<std::size_t>(config_.output_stride);
        if (h == 0 || w == 0 || h % os != 0 || w % os != 0)
            throw ShapeError("input spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                             " must be divisible by output stride " + std::to_string(os));
    }

    void check_image(const Tensor<T>& image) const {
        if (image.rank() != 4 || image.dim(1) != 3)
            throw ShapeError("expected image batch [N,3,H,W], got " + to_string(image.shape()));
        check_extent(image.dim(2), image.dim(3));
    }

    void build_backbone() {
        const auto seed = config_.seed;
        const auto ch = [&](int c) { return config_.scaled(make_divisible(c * config_.width)); };
        std::size_t in = ch(32);
        stem_ = ConvBnAct<T>(registry_, "backbone.stem", 3, in, 3, {2, 1, 1, 1}, Activation::relu6, seed);
        std::size_t stride_so_far = 2, dilation = 1;
        int index = 0;
        for (std::size_t s = 0; s < kMobileNetV2Stages.size(); ++s) {
            const auto& st = kMobileNetV2Stages[s];
            std::size_t stride = static_cast<std::size_t>(st.stride);
            if (stride_so_far * stride > static_cast<std::size_t>(config_.output_stride)) {
                dilation *= stride;
                stride = 1;
            }
            stride_so_far *= stride;
            const std::size_t out = ch(st.channels);
            for (int r = 0; r < st.repeats; ++r) {
                blocks_.emplace_back(registry_, "backbone.block" + std::to_string(index++), in, out,
                                     r == 0 ? stride : 1, dilation, st.expansion, seed);
                in = out;
            }
            if (s == kLowLevelStage) {
                low_tap_ = blocks_.size();
                low_channels_ = out;
            }
        }
        high_channels_ = in;
    }

    void build_aspp() {
        const auto seed = config_.seed;
        const std::size_t a = config_.scaled(config_.aspp_channels);
        aspp_branches_.emplace_back(registry_, "aspp.branch0", high_channels_, a, 1, Conv2dOptions{}, Activation::relu, seed);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto r = static_cast<std::size_t>(config_.aspp_rates[i]);
            aspp_branches_.emplace_back(registry_, "aspp.atrous" + std::to_string(i + 1), high_channels_, a, 3,
                                        Conv2dOptions{1, r, r, 1}, Activation::relu, seed);
        }
        aspp_pool_ = ConvBnAct<T>(registry_, "aspp.pool", high_channels_, a, 1, Conv2dOptions{}, Activation::relu, seed);
        aspp_project_ = ConvBnAct<T>(registry_, "aspp.project", a * 5, a, 1, Conv2dOptions{}, Activation::relu, seed);
    }

    void build_decoder() {
        const auto seed = config_.seed;
        const std::size_t a = config_.scaled(config_.aspp_channels);
        const std::size_t l = config_.scaled(config_.decoder_lowlevel_channels);
        low_proj_ = ConvBnAct<T>(registry_, "decoder.low_proj", low_channels_, l, 1, Conv2dOptions{}, Activation::relu, seed);
        refine1_ = ConvBnAct<T>(registry_, "decoder.refine1", a + l, a, 3, {1, 1, 1, 1}, Activation::relu, seed);
        refine2_ = ConvBnAct<T>(registry_, "decoder.refine2", a, a, 3, {1, 1, 1, 1}, Activation::relu, seed);
        classifier_ = Conv2d<T>(registry_, "decoder.classifier", a, static_cast<std::size_t>(config_.num_classes), 1,
                                Conv2dOptions{}, true, seed);
    }

    ModelConfig config_;
    ParamRegistry<T> registry_;
    NormMode mode_ = NormMode::training;

    ConvBnAct<T> stem_;
    std::vector<InvertedResidual<T>> blocks_;
    std::size_t low_tap_ = 0;
    std::size_t low_channels_ = 0, high_channels_ = 0;
    std::optional<Cbam<T>> cbam_;
    std::vector<ConvBnAct<T>> aspp_branches_;
    ConvBnAct<T> aspp_pool_, aspp_project_;
    ConvBnAct<T> low_proj_, refine1_, refine2_;
    Conv2d<T> classifier_;
};

/// Per-pixel argmax over the class axis; ties resolve to the lower class.
template <typename T>
std::vector<std::uint8_t> predict(const Tensor<T>& logits) {
    if (logits.rank() != 4) throw ShapeError("predict: logits must be [N,C,H,W]");
    const std::size_t n = logits.dim(0), c = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
    std::vector<std::uint8_t> mask(n * hw);
    const auto v = logits.data();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < c; ++k)
                if (v[(b * c + k) * hw + i] > v[(b * c + best) * hw + i]) best = k;
            mask[b * hw + i] = static_cast<std::uint8_t>(best);
        }
    return mask;
}

}  // namespace mcdnet
