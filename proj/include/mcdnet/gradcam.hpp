#pragma once

// Grad-CAM over a named intermediate feature map.

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcdnet/evaluate.hpp"
#include "mcdnet/model.hpp"
#include "mcdnet/ops/elementwise.hpp"
#include "mcdnet/ops/resize.hpp"

namespace mcdnet {

struct CamHeatmap {
    std::size_t height = 0, width = 0;
    std::vector<double> values;  // row-major, in [0,1]
    int target_class = 1;
    std::string layer;
};

/// Core rule: `features` is a [1,K,h,w] leaf, `score_of` maps it to a scalar.
/// Weights are spatial means of d score / d features; the map is
/// ReLU(Σ_k w_k A_k), bilinearly resized to out_h×out_w and max-normalized.
template <typename T>
CamHeatmap grad_cam_from(const Tensor<T>& features, const std::function<Tensor<T>(const Tensor<T>&)>& score_of,
                         std::size_t out_h, std::size_t out_w) {
    if (features.rank() != 4 || features.dim(0) != 1)
        throw ShapeError("grad_cam: expected a single [1,K,h,w] feature map, got " + to_string(features.shape()));
    Tensor<T> leaf = features.detach();
    leaf.set_requires_grad(true);
    Tensor<T> score = score_of(leaf);
    if (score.numel() != 1) throw ShapeError("grad_cam: score must be scalar");
    const std::size_t k = leaf.dim(1), hw = leaf.dim(2) * leaf.dim(3);
    std::vector<double> cam(hw, 0.0);
    if (score.requires_grad()) {
        score.backward();
        const auto g = leaf.grad();
        const auto a = leaf.data();
        for (std::size_t c = 0; c < k; ++c) {
            double w = 0;
            if (!g.empty())
                for (std::size_t i = 0; i < hw; ++i) w += static_cast<double>(g[c * hw + i]);
            w /= static_cast<double>(hw);
            for (std::size_t i = 0; i < hw; ++i) cam[i] += w * static_cast<double>(a[c * hw + i]);
        }
    }
    for (auto& v : cam) v = std::max(0.0, v);

    CamHeatmap out;
    out.height = out_h;
    out.width = out_w;
    {
        NoGradGuard no_grad;
        const auto small = Tensor<double>::from({1, 1, leaf.dim(2), leaf.dim(3)}, cam);
        const auto big = upsample_bilinear(small, out_h, out_w);
        out.values.assign(big.data().begin(), big.data().end());
    }
    const double peak = *std::max_element(out.values.begin(), out.values.end());
    for (auto& v : out.values) v = peak > 0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
    return out;
}

inline const std::vector<std::string>& cam_layers() {
    static const std::vector<std::string> names{"f_low", "f_base", "f_att", "f_aspp"};
    return names;
}

/// Grad-CAM for a single [1,3,H,W] image. The score is the spatial sum of the
/// target-class logits. Default layer: f_att with attention, else f_base.
template <typename T>
CamHeatmap grad_cam(McdNet<T>& model, const Tensor<T>& image, int target_class, std::string layer = "") {
    if (image.rank() != 4 || image.dim(0) != 1) throw ShapeError("grad_cam: expected one [1,3,H,W] image");
    if (target_class < 0 || target_class >= model.config().num_classes)
        throw std::out_of_range("grad_cam: class " + std::to_string(target_class) + " out of range");
    if (layer.empty()) layer = model.cbam() ? "f_att" : "f_base";
    if (std::find(cam_layers().begin(), cam_layers().end(), layer) == cam_layers().end())
        throw std::invalid_argument("grad_cam: unknown layer '" + layer + "' (expected f_low, f_base, f_att or f_aspp)");

    ModeGuard<T> guard(model, NormMode::inference);
    ForwardTrace<T> t;
    {
        NoGradGuard no_grad;
        t = model.forward_trace(image);
    }
    const std::size_t h = image.dim(2), w = image.dim(3);
    const auto cls = static_cast<std::size_t>(target_class);
    auto class_score = [&](const Tensor<T>& logits) { return sum(channel_slice(logits, cls, 1)); };

    std::function<Tensor<T>(const Tensor<T>&)> score_of;
    if (layer == "f_low") {
        score_of = [&](const Tensor<T>& f) { return class_score(model.decoder_forward(t.f_aspp, f, h, w)); };
    } else if (layer == "f_base") {
        score_of = [&](const Tensor<T>& f) {
            const auto att = model.cbam() ? model.cbam()->refine(f) : f;
            return class_score(model.decoder_forward(model.aspp_forward(att), t.f_low, h, w));
        };
    } else if (layer == "f_att") {
        score_of = [&](const Tensor<T>& f) {
            return class_score(model.decoder_forward(model.aspp_forward(f), t.f_low, h, w));
        };
    } else {
        score_of = [&](const Tensor<T>& f) { return class_score(model.decoder_forward(f, t.f_low, h, w)); };
    }
    const Tensor<T>& features = layer == "f_low" ? t.f_low : layer == "f_base" ? t.f_base : layer == "f_att" ? t.f_att : t.f_aspp;
    CamHeatmap cam = grad_cam_from<T>(features, score_of, h, w);
    model.registry().zero_grad();
    cam.target_class = target_class;
    cam.layer = layer;
    return cam;
}

}  // namespace mcdnet
