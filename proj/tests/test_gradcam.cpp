#include <gtest/gtest.h>

#include <random>

#include "mcdnet/mcdnet.hpp"
#include "oracles.hpp"

using namespace mcdnet;
using TD = Tensor<double>;

namespace {

McdNet<float> tiny_model(bool cbam = true) {
    ModelConfig c;
    c.channel_scale = 0.25;
    c.use_cbam = cbam;
    return McdNet<float>(c);
}

Tensor<float> image_of(const Sample& s) {
    return Tensor<float>::from({1, 3, s.image.height, s.image.width}, s.image.data);
}

Sample one_sample() {
    SyntheticOptions o;
    o.n = 1;
    o.size = 64;
    return generate_synthetic(o)[0];
}

}  // namespace

TEST(GradCam, AnalyticLinearScore) {
    // score = Σ a_c · A_c ⊙ W_c with per-channel constant W: weights are exactly W_c
    const auto f = TD::from({1, 2, 2, 2}, {1, 2, 3, 4, 4, 1, 0, 2});
    const auto w = TD::from({1, 2, 2, 2}, {0.5, 0.5, 0.5, 0.5, -0.25, -0.25, -0.25, -0.25});
    const auto cam = grad_cam_from<double>(f, [&](const TD& x) { return sum(mul(x, w)); }, 2, 2);
    // raw: 0.5·A0 − 0.25·A1 = {-0.5, 0.75, 1.5, 1.5} → ReLU → /1.5
    const std::vector<double> expect{0.0, 0.5, 1.0, 1.0};
    ASSERT_EQ(cam.values.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cam.values[i], expect[i], 1e-12);
}

TEST(GradCam, SpatialMeanOfGradients) {
    // non-uniform gradient: the channel weight is its spatial average
    const auto f = TD::from({1, 1, 1, 2}, {2.0, 3.0});
    const auto probe = TD::from({1, 1, 1, 2}, {1.0, 3.0});
    const auto cam = grad_cam_from<double>(f, [&](const TD& x) { return sum(mul(x, probe)); }, 1, 2);
    // w = 2, raw = {4, 6} → {2/3, 1}
    EXPECT_NEAR(cam.values[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(cam.values[1], 1.0, 1e-12);
}

TEST(GradCam, NegativeEvidenceGivesZeroMap) {
    const auto f = TD::from({1, 1, 2, 2}, {1, 2, 3, 4});
    const auto cam = grad_cam_from<double>(f, [](const TD& x) { return scale(sum(x), -1.0); }, 4, 4);
    for (const double v : cam.values) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, UpsampledToImageSize) {
    const auto f = TD::from({1, 1, 2, 2}, {0, 1, 1, 0});
    const auto cam = grad_cam_from<double>(f, [](const TD& x) { return sum(x); }, 4, 4);
    EXPECT_EQ(cam.values.size(), 16u);
    // half-pixel centers: output column x samples source (x + ½)/2 − ½ = {0*, ¼, ¾, 1*}
    // (* clamped), so row 0 reads {0, ¼, ¾, 1} and the corners already peak at 1
    EXPECT_NEAR(cam.values[1], 0.25, 1e-12);
    EXPECT_NEAR(cam.values[3], 1.0, 1e-12);
    EXPECT_NEAR(*std::max_element(cam.values.begin(), cam.values.end()), 1.0, 1e-12);
}

TEST(GradCam, ModelHeatmapShapeAndRange) {
    auto m = tiny_model();
    const auto s = one_sample();
    for (const auto& layer : cam_layers()) {
        const auto cam = grad_cam(m, image_of(s), 1, layer);
        EXPECT_EQ(cam.height, 64u);
        EXPECT_EQ(cam.width, 64u);
        EXPECT_EQ(cam.layer, layer);
        ASSERT_EQ(cam.values.size(), 64u * 64u);
        for (const double v : cam.values) ASSERT_TRUE(v >= 0.0 && v <= 1.0) << layer;
    }
    EXPECT_EQ(grad_cam(m, image_of(s), 0).layer, "f_att");
    auto plain = tiny_model(false);
    EXPECT_EQ(grad_cam(plain, image_of(s), 1).layer, "f_base");
}

TEST(GradCam, LeavesModelUntouched) {
    auto m = tiny_model();
    m.set_mode(NormMode::training);
    const auto before = capture(m).tensors;
    grad_cam(m, image_of(one_sample()), 1);
    EXPECT_EQ(m.mode(), NormMode::training);
    EXPECT_EQ(capture(m).tensors, before);
    for (const auto& p : m.registry().params()) EXPECT_FALSE(p.tensor.has_grad()) << p.name;
}

TEST(GradCam, BadArgumentsRejected) {
    auto m = tiny_model();
    const auto img = image_of(one_sample());
    EXPECT_THROW(grad_cam(m, img, 1, "f_nope"), std::invalid_argument);
    EXPECT_THROW(grad_cam(m, img, 2), std::out_of_range);
    EXPECT_THROW(grad_cam(m, Tensor<float>::zeros({2, 3, 32, 32}), 1), ShapeError);
}
