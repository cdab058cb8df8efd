#include <gtest/gtest.h>

#include "mcdnet/mcdnet.hpp"

using namespace mcdnet;

// End to end: a narrow model must memorize eight synthetic tiles, and its
// moraine heatmap must sit on the moraine.
TEST(Overfit, EightTilesReachHighIou) {
    SyntheticOptions so;
    so.n = 8;
    so.size = 64;
    so.seed = 1;
    const auto data = generate_synthetic(so);

    ModelConfig mc;
    mc.channel_scale = 0.25;
    McdNet<float> model(mc);

    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 300;
    tc.patience = 300;
    tc.val_fraction = 0;
    tc.augment = false;
    const auto r = train_loop(model, data, tc);

    ASSERT_GE(r.history.epochs.size(), 100u);
    // one step per epoch with a single full batch
    EXPECT_LE(r.history.epochs[99].loss, 0.5 * r.history.epochs[0].loss);
    EXPECT_GE(r.best.best_val_miou, 0.95);
    const auto report = evaluate(model, data);
    EXPECT_GE(report.miou, 0.95);
    EXPECT_DOUBLE_EQ(report.miou, r.best.best_val_miou);

    double inside = 0, outside = 0;
    std::size_t n_in = 0, n_out = 0;
    for (const auto& s : data) {
        const auto cam = grad_cam(model, Tensor<float>::from({1, 3, 64, 64}, s.image.data), 1);
        for (std::size_t i = 0; i < cam.values.size(); ++i) {
            if (s.mask.data[i]) inside += cam.values[i], ++n_in;
            else outside += cam.values[i], ++n_out;
        }
    }
    EXPECT_GT(inside / static_cast<double>(n_in), outside / static_cast<double>(n_out));
}
