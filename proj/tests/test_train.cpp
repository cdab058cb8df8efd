#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mcdnet/mcdnet.hpp"
#include "oracles.hpp"

using namespace mcdnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = fs::temp_directory_path() / "mcdnet_tests" / (std::string(info->test_suite_name()) + "." + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ModelConfig tiny(bool cbam = true) {
    ModelConfig c;
    c.channel_scale = 0.25;
    c.use_cbam = cbam;
    return c;
}

std::vector<Sample> synth(std::size_t n, std::size_t size = 32) {
    SyntheticOptions o;
    o.n = n;
    o.size = size;
    return generate_synthetic(o);
}

TrainConfig quick() {
    TrainConfig c;
    c.batch_size = 4;
    c.max_epochs = 3;
    c.patience = 3;
    c.val_fraction = 0;
    c.lr0 = 1e-3;
    return c;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

// ------------------------------------------------------------- schedule

TEST(Schedule, CosineValues) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 200, 1e-4), 1e-4);
    EXPECT_NEAR(cosine_lr(100, 200, 1e-4), 5e-5, 1e-18);
    EXPECT_NEAR(cosine_lr(200, 200, 1e-4), 0.0, 1e-18);
    EXPECT_NEAR(cosine_lr(50, 200, 1e-4), 1e-4 * 0.5 * (1 + std::sqrt(0.5)), 1e-18);
    EXPECT_NEAR(cosine_lr(200, 200, 1e-4, 1e-6), 1e-6, 1e-18);
    EXPECT_THROW(cosine_lr(201, 200, 1e-4), std::out_of_range);
    EXPECT_THROW(cosine_lr(0, 0, 1e-4), std::invalid_argument);
}

TEST(Schedule, TrainingLogsPerEpochRate) {
    McdNet<float> m(tiny());
    auto cfg = quick();
    cfg.max_epochs = 4;
    cfg.patience = 4;
    cfg.augment = false;
    TrainHooks hooks;
    hooks.validator = [](std::size_t e) { return 0.1 * static_cast<double>(e); };
    const auto r = train_loop(m, synth(4, 16), cfg, hooks);
    ASSERT_EQ(r.history.epochs.size(), 4u);
    for (std::size_t e = 0; e < 4; ++e) EXPECT_DOUBLE_EQ(r.history.epochs[e].lr, cosine_lr(e, 4, 1e-3));
    EXPECT_EQ(r.steps, 4u);
}

// ---------------------------------------------------------------- AdamW

TEST(AdamW, MatchesScalarOracleOverTenSteps) {
    std::mt19937_64 rng(3);
    auto theta = Tensor<double>::from({7}, oracle::random_vec(7, rng), true);
    std::vector<Tensor<double>> params{theta};
    AdamWState<double> st;
    const AdamWConfig cfg{0.01, 0.9, 0.999, 1e-8};
    std::vector<oracle::AdamScalar> ref(7);
    std::vector<double> expect(theta.data().begin(), theta.data().end());
    for (int step = 0; step < 10; ++step) {
        const auto g = oracle::random_vec(7, rng, -2, 2);
        theta.zero_grad();
        std::copy(g.begin(), g.end(), theta.mutable_grad().begin());
        const double lr = 1e-2 * (step + 1);
        adamw_step(params, st, lr, cfg);
        for (std::size_t i = 0; i < 7; ++i) expect[i] = ref[i].step(expect[i], g[i], lr, 0.01);
        for (std::size_t i = 0; i < 7; ++i) ASSERT_LE(oracle::rel_err(theta[i], expect[i]), 1e-12) << "step " << step;
    }
    EXPECT_EQ(st.t, 10u);
}

TEST(AdamW, ZeroGradientIsPureDecay) {
    auto theta = Tensor<double>::from({3}, {1.0, -2.0, 0.5}, true);
    std::vector<Tensor<double>> params{theta};
    AdamWState<double> st;
    adamw_step(params, st, 0.1, {0.5, 0.9, 0.999, 1e-8});
    // m̂ = 0, so θ ← θ(1 − lr·wd)
    EXPECT_DOUBLE_EQ(theta[0], 0.95);
    EXPECT_DOUBLE_EQ(theta[1], -1.9);
    EXPECT_DOUBLE_EQ(theta[2], 0.475);
}

TEST(AdamW, NoDecayNoGradientNoChange) {
    auto theta = Tensor<double>::from({2}, {3.0, -4.0}, true);
    std::vector<Tensor<double>> params{theta};
    AdamWState<double> st;
    for (int i = 0; i < 5; ++i) adamw_step(params, st, 0.1, {0.0, 0.9, 0.999, 1e-8});
    EXPECT_EQ(theta[0], 3.0);
    EXPECT_EQ(theta[1], -4.0);
}

TEST(AdamW, StateTiedToParameterList) {
    auto a = Tensor<double>::zeros({2}, true), b = Tensor<double>::zeros({3}, true);
    std::vector<Tensor<double>> one{a}, two{a, b};
    AdamWState<double> st;
    adamw_step(one, st, 0.1, {});
    EXPECT_THROW(adamw_step(two, st, 0.1, {}), ShapeError);
}

// ----------------------------------------------------------------- loss

TEST(Loss, EqualWeightsHalveUnweightedMean) {
    std::mt19937_64 rng(4);
    const auto z = Tensor<double>::from({2, 2, 3, 3}, oracle::random_vec(36, rng, -3, 3));
    std::vector<std::uint8_t> mask(18);
    for (auto& v : mask) v = rng() & 1;
    const double half = segmentation_loss(z, mask, {0.5, 0.5}).item();
    const double one = segmentation_loss(z, mask, {1.0, 1.0}).item();
    EXPECT_NEAR(half, 0.5 * one, 1e-12);
    EXPECT_NEAR(half, oracle::weighted_ce(std::vector<double>(z.data().begin(), z.data().end()), {2, 2, 3, 3}, mask, {0.5, 0.5}),
                1e-12);
}

// -------------------------------------------------------- training loop

TEST(Train, EarlyStopReturnsFirstEpoch) {
    McdNet<float> m(tiny());
    auto cfg = quick();
    cfg.max_epochs = 10;
    cfg.patience = 2;
    TrainHooks hooks;
    // a validation score that never improves after the first epoch
    const std::vector<double> scores{0.6, 0.5, 0.55, 0.9, 0.9};
    hooks.validator = [&](std::size_t e) { return scores.at(e - 1); };
    Checkpoint epoch1;
    hooks.on_epoch = [&](const EpochRecord& r) {
        if (r.epoch == 1) epoch1 = capture(m, 1, r.val_miou);
    };
    const auto r = train_loop(m, synth(4, 16), cfg, hooks);
    EXPECT_EQ(r.history.epochs.size(), 3u);
    EXPECT_EQ(r.best.epoch, 1u);
    EXPECT_DOUBLE_EQ(r.best.best_val_miou, 0.6);
    EXPECT_EQ(r.best.tensors, epoch1.tensors);
    // and the model itself now carries the epoch-1 weights
    EXPECT_EQ(capture(m).tensors, epoch1.tensors);
    EXPECT_EQ(m.mode(), NormMode::inference);
}

TEST(Train, TinyImprovementDoesNotResetPatience) {
    McdNet<float> m(tiny());
    auto cfg = quick();
    cfg.max_epochs = 10;
    cfg.patience = 2;
    TrainHooks hooks;
    const std::vector<double> scores{0.5, 0.5 + 1e-7, 0.5 + 2e-7, 0.9};
    hooks.validator = [&](std::size_t e) { return scores.at(e - 1); };
    const auto r = train_loop(m, synth(4, 16), cfg, hooks);
    EXPECT_EQ(r.history.epochs.size(), 3u);
    EXPECT_EQ(r.best.epoch, 1u);
}

TEST(Train, SeededRunsAreIdentical) {
    const auto data = synth(6, 16);
    auto cfg = quick();
    cfg.max_epochs = 2;
    cfg.patience = 2;
    cfg.val_fraction = 0.34;
    McdNet<float> a(tiny()), b(tiny());
    const auto ra = train_loop(a, data, cfg), rb = train_loop(b, data, cfg);
    EXPECT_EQ(ra.history.to_csv(), rb.history.to_csv());
    EXPECT_EQ(ra.best.tensors, rb.best.tensors);
    cfg.seed = 9;
    McdNet<float> c(tiny());
    EXPECT_NE(train_loop(c, data, cfg).history.to_csv(), ra.history.to_csv());
}

TEST(Train, StepCapStopsEarly) {
    McdNet<float> m(tiny());
    auto cfg = quick();
    cfg.max_epochs = 5;
    cfg.patience = 5;
    TrainHooks hooks;
    hooks.max_steps = 3;
    const auto r = train_loop(m, synth(8, 16), cfg, hooks);
    EXPECT_EQ(r.steps, 3u);
    EXPECT_EQ(r.history.epochs.size(), 2u);
}

TEST(Train, ValidationCarveOut) {
    const auto data = synth(20, 16);
    const auto [train, val] = carve_validation(data, 0.1, 0);
    EXPECT_EQ(val.size(), 2u);
    EXPECT_EQ(train.size(), 18u);
    const auto [all, same] = carve_validation(data, 0.0, 0);
    EXPECT_EQ(all.size(), 20u);
    EXPECT_EQ(same.size(), 20u);
    EXPECT_THROW(carve_validation(synth(1, 16), 0.5, 0), DataError);
}

TEST(Train, InvalidConfigRejected) {
    McdNet<float> m(tiny());
    auto cfg = quick();
    cfg.patience = 0;
    EXPECT_THROW(train_loop(m, synth(2, 16), cfg), std::invalid_argument);
    cfg = quick();
    cfg.class_weights = {0, 0};
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = quick();
    cfg.lr_min = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_THROW(train_loop(m, {}, quick()), DataError);
}

TEST(Train, HistoryCsvFormat) {
    TrainHistory h;
    h.epochs.push_back({1, 0.5, 0.25, 1e-4});
    EXPECT_EQ(h.to_csv(), "epoch,loss,val_miou,lr\n1,0.5,0.25,0.0001\n");
}

// ----------------------------------------------------------- checkpoints

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const auto dir = scratch_dir();
    McdNet<float> m(tiny());
    const auto ck = capture(m, 7, 0.42);
    save_checkpoint(ck, dir / "a.mcdn");
    const auto back = load_checkpoint(dir / "a.mcdn");
    EXPECT_EQ(back.epoch, 7u);
    EXPECT_DOUBLE_EQ(back.best_val_miou, 0.42);
    EXPECT_EQ(back.tensors, ck.tensors);
    save_checkpoint(back, dir / "b.mcdn");
    EXPECT_EQ(read_bytes(dir / "a.mcdn"), read_bytes(dir / "b.mcdn"));
}

TEST(Checkpoint, RestoredModelPredictsIdentically) {
    const auto dir = scratch_dir();
    auto cfg = tiny();
    cfg.seed = 3;
    McdNet<float> m(cfg);
    save_checkpoint(capture(m), dir / "m.mcdn");
    auto copy = model_from_checkpoint<float>(load_checkpoint(dir / "m.mcdn"));
    EXPECT_EQ(copy.config().seed, 3u);
    m.set_mode(NormMode::inference);
    copy.set_mode(NormMode::inference);
    const auto x = Tensor<float>::full({1, 3, 32, 32}, 0.3f);
    const auto a = m.forward(x), b = copy.forward(x);
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end()));
}

TEST(Checkpoint, CorruptFilesRejected) {
    const auto dir = scratch_dir();
    McdNet<float> m(tiny());
    save_checkpoint(capture(m), dir / "ok.mcdn");
    auto bytes = read_bytes(dir / "ok.mcdn");

    std::ofstream(dir / "cut.mcdn", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
    try {
        load_checkpoint(dir / "cut.mcdn");
        FAIL() << "truncated file accepted";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
    }

    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "magic.mcdn", std::ios::binary) << bad;
    EXPECT_THROW(load_checkpoint(dir / "magic.mcdn"), CheckpointError);
    EXPECT_THROW(load_checkpoint(dir / "absent.mcdn"), std::runtime_error);
}

TEST(Checkpoint, AttentionToggleListsNameDifferences) {
    McdNet<float> with(tiny(true)), without(tiny(false));
    try {
        restore(without, capture(with));
        FAIL() << "mismatched checkpoint accepted";
    } catch (const CheckpointError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("unexpected (5)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("cbam."), std::string::npos);
    }
    try {
        restore(with, capture(without));
        FAIL() << "mismatched checkpoint accepted";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("missing (5)"), std::string::npos) << e.what();
    }
}

TEST(Checkpoint, ShapeMismatchReported) {
    McdNet<float> small(tiny());
    ModelConfig half;
    half.channel_scale = 0.5;
    McdNet<float> wide(half);
    try {
        restore(wide, capture(small));
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
    }
}
