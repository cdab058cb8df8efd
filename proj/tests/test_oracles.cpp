#include <gtest/gtest.h>

#include <random>

#include "mcdnet/mcdnet.hpp"
#include "oracles.hpp"

using namespace mcdnet;
using TD = Tensor<double>;

namespace {

constexpr int kTrials = 24;
constexpr double kTol = 1e-5;
constexpr double kFloor = 1e-9;

std::vector<double> values(const TD& t) { return {t.data().begin(), t.data().end()}; }

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

TEST(Oracle, Conv2dRandomShapes) {
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t groups = std::array<std::size_t, 3>{1, 2, 3}[pick(rng, 0, 2)];
        const std::size_t cin = groups * pick(rng, 1, 3), cout = groups * pick(rng, 1, 3);
        const std::size_t k = std::array<std::size_t, 3>{1, 3, 5}[pick(rng, 0, 2)];
        const std::size_t stride = pick(rng, 1, 2), dil = pick(rng, 1, 3), pad = pick(rng, 0, 3);
        const std::size_t h = dil * (k - 1) + 1 + pick(rng, 0, 6), w = dil * (k - 1) + 1 + pick(rng, 0, 6);
        const oracle::Dims d{pick(rng, 1, 3), cin, h, w};
        const auto x = oracle::random_vec(d.size(), rng);
        const auto wt = oracle::random_vec(cout * (cin / groups) * k * k, rng);
        const auto b = oracle::random_vec(cout, rng);
        const bool with_bias = trial % 2 == 0;
        std::size_t ho, wo;
        const auto ref = oracle::conv2d(x, d, wt, cout, k, k, with_bias ? &b : nullptr, stride, pad, dil, groups, ho, wo);
        const auto X = TD::from({d.n, d.c, h, w}, x), W = TD::from({cout, cin / groups, k, k}, wt), B = TD::from({cout}, b);
        const auto y = conv2d(X, W, with_bias ? &B : nullptr, {stride, pad, dil, groups});
        ASSERT_EQ(y.shape(), (Shape{d.n, cout, ho, wo}));
        EXPECT_LE(oracle::max_rel_err(values(y), ref, kFloor), kTol) << "trial " << trial;
    }
}

TEST(Oracle, WindowPoolingRandomShapes) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t k = pick(rng, 1, 3), s = pick(rng, 1, 3);
        const oracle::Dims d{pick(rng, 1, 2), pick(rng, 1, 4), k + pick(rng, 0, 7), k + pick(rng, 0, 7)};
        const auto x = oracle::random_vec(d.size(), rng);
        const auto X = TD::from({d.n, d.c, d.h, d.w}, x);
        std::size_t ho, wo;
        EXPECT_LE(oracle::max_rel_err(values(max_pool2d(X, k, s)), oracle::window_pool(x, d, k, s, true, ho, wo), kFloor), kTol);
        EXPECT_LE(oracle::max_rel_err(values(avg_pool2d(X, k, s)), oracle::window_pool(x, d, k, s, false, ho, wo), kFloor),
                  kTol);
    }
}

TEST(Oracle, GlobalAndChannelPoolingRandomShapes) {
    std::mt19937_64 rng(102);
    for (int trial = 0; trial < kTrials; ++trial) {
        const oracle::Dims d{pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 6), pick(rng, 1, 6)};
        const auto x = oracle::random_vec(d.size(), rng);
        const auto X = TD::from({d.n, d.c, d.h, d.w}, x);
        std::vector<double> gavg(d.n * d.c, 0.0), gmax(d.n * d.c, -INFINITY), cmean(d.n * d.h * d.w, 0.0), cmax(d.n * d.h * d.w, -INFINITY);
        for (std::size_t b = 0; b < d.n; ++b)
            for (std::size_t c = 0; c < d.c; ++c)
                for (std::size_t i = 0; i < d.h * d.w; ++i) {
                    const double v = x[(b * d.c + c) * d.h * d.w + i];
                    gavg[b * d.c + c] += v / static_cast<double>(d.h * d.w);
                    gmax[b * d.c + c] = std::max(gmax[b * d.c + c], v);
                    cmean[b * d.h * d.w + i] += v / static_cast<double>(d.c);
                    cmax[b * d.h * d.w + i] = std::max(cmax[b * d.h * d.w + i], v);
                }
        EXPECT_LE(oracle::max_rel_err(values(global_avg_pool(X)), gavg, kFloor), kTol);
        EXPECT_LE(oracle::max_rel_err(values(global_max_pool(X)), gmax, kFloor), kTol);
        EXPECT_LE(oracle::max_rel_err(values(channel_mean(X)), cmean, kFloor), kTol);
        EXPECT_LE(oracle::max_rel_err(values(channel_max(X)), cmax, kFloor), kTol);
    }
}

TEST(Oracle, MaxPoolTieRoutesToFirst) {
    auto x = TD::from({1, 1, 2, 2}, {1, 1, 1, 1}, true);
    sum(max_pool2d(x, 2, 2)).backward();
    EXPECT_EQ(values(TD::from({4}, {x.grad().begin(), x.grad().end()})), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Oracle, LinearRandomShapes) {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t n = pick(rng, 1, 5), din = pick(rng, 1, 9), dout = pick(rng, 1, 9);
        const auto x = oracle::random_vec(n * din, rng), w = oracle::random_vec(dout * din, rng),
                   b = oracle::random_vec(dout, rng);
        const auto B = TD::from({dout}, b);
        const auto y = linear(TD::from({n, din}, x), TD::from({dout, din}, w), trial % 2 ? &B : nullptr);
        EXPECT_LE(oracle::max_rel_err(values(y), oracle::linear(x, n, din, w, dout, trial % 2 ? &b : nullptr), kFloor), kTol);
    }
}

TEST(Oracle, SoftmaxCrossEntropyRandomShapes) {
    std::mt19937_64 rng(104);
    for (int trial = 0; trial < kTrials; ++trial) {
        const oracle::Dims d{pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 1, 5), pick(rng, 1, 5)};
        const auto z = oracle::random_vec(d.size(), rng, -5, 5);
        std::vector<std::uint8_t> t(d.n * d.h * d.w);
        for (auto& v : t) v = static_cast<std::uint8_t>(pick(rng, 0, d.c - 1));
        const auto w = oracle::random_vec(d.c, rng, 0.1, 1.0);
        const double got =
            softmax_ce(TD::from({d.n, d.c, d.h, d.w}, z), std::span<const std::uint8_t>(t), std::span<const double>(w)).item();
        EXPECT_LE(oracle::rel_err(got, oracle::weighted_ce(z, d, t, w)), 1e-6) << "trial " << trial;
    }
}

TEST(Oracle, CbamRandomShapes) {
    std::mt19937_64 rng(105);
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t r = std::array<std::size_t, 3>{1, 2, 4}[pick(rng, 0, 2)];
        const std::size_t c = r * pick(rng, 1, 4), k = std::array<std::size_t, 3>{1, 3, 7}[pick(rng, 0, 2)];
        const oracle::Dims d{pick(rng, 1, 2), c, pick(rng, 1, 8), pick(rng, 1, 8)};
        ParamRegistry<double> reg;
        Cbam<double> cbam(reg, "cbam", {c, r, k}, static_cast<std::uint64_t>(trial));
        // randomize every parameter, including the zero-initialized biases
        for (auto& p : reg.params()) {
            auto t = p.tensor;
            auto v = oracle::random_vec(t.numel(), rng, -0.8, 0.8);
            std::copy(v.begin(), v.end(), t.mutable_data().begin());
        }
        const auto& P = reg.params();
        oracle::CbamParams op{c, c / r, k, values(P[0].tensor), values(P[1].tensor), values(P[2].tensor),
                              values(P[3].tensor), P[4].tensor[0]};
        const auto f = oracle::random_vec(d.size(), rng, -2, 2);
        const auto ref = oracle::cbam(f, d, op);
        AttentionMaps<double> maps;
        const auto out = cbam.refine(TD::from({d.n, d.c, d.h, d.w}, f), &maps);
        EXPECT_LE(oracle::max_rel_err(values(maps.channel), ref.mc, kFloor), kTol) << "trial " << trial;
        EXPECT_LE(oracle::max_rel_err(values(maps.spatial), ref.ms, kFloor), kTol) << "trial " << trial;
        EXPECT_LE(oracle::max_rel_err(values(out), ref.out, kFloor), kTol) << "trial " << trial;
    }
}

TEST(Oracle, ConfusionMatchesPixelLoop) {
    std::mt19937_64 rng(106);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint8_t> p(256), g(256);
        for (auto& v : p) v = rng() & 1;
        for (auto& v : g) v = rng() & 1;
        ConfusionCounts c;
        accumulate_confusion(p, g, c);
        EXPECT_EQ(c.matrix, oracle::confusion(p, g));
    }
}
