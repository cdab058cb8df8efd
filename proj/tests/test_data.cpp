#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mcdnet/mcdnet.hpp"

using namespace mcdnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = fs::temp_directory_path() / "mcdnet_tests" / (std::string(info->test_suite_name()) + "." + info->name()) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<Sample> synth(std::size_t n, std::size_t size = 32, std::uint64_t seed = 0) {
    SyntheticOptions o;
    o.n = n;
    o.size = size;
    o.seed = seed;
    return generate_synthetic(o);
}

Sample with_center(const std::string& id, double lon, double lat) {
    Sample s{id, Image(3, 4, 4), Mask(4, 4), GeoBox{lon - 0.01, lon + 0.01, lat - 0.01, lat + 0.01}};
    return s;
}

std::set<std::string> ids(const std::vector<Sample>& v) {
    std::set<std::string> out;
    for (const auto& s : v) out.insert(s.id);
    return out;
}

bool binary(const Mask& m) {
    return std::all_of(m.data.begin(), m.data.end(), [](auto v) { return v <= 1; });
}

}  // namespace

// ---------------------------------------------------------------- manifest

TEST(Manifest, RoundTripIsBitwiseEqual) {
    auto samples = synth(6);
    samples[2].geo.reset();
    const auto dir = scratch_dir("ds");
    const auto manifest = write_dataset(samples, dir);
    const auto back = load_dataset(manifest);
    ASSERT_EQ(back.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_TRUE(back[i] == samples[i]) << samples[i].id;
}

TEST(Manifest, ThreeColumnRowsHaveNoGeo) {
    const auto dir = scratch_dir("ds");
    auto s = synth(1)[0];
    write_dataset({s}, dir);
    std::ofstream(dir / "short.csv") << kManifestHeader << "\n" << s.id << ",images/" << s.id << ".png,masks/" << s.id << ".png\n";
    const auto back = load_dataset(dir / "short.csv");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_FALSE(back[0].geo.has_value());
    EXPECT_EQ(back[0].mask, s.mask);
}

TEST(Manifest, MalformedInputsRejected) {
    const auto dir = scratch_dir("ds");
    write_dataset(synth(1), dir);
    EXPECT_THROW(load_dataset(dir / "nope.csv"), IoError);
    std::ofstream(dir / "header.csv") << "id,img,mask\n";
    EXPECT_THROW(load_dataset(dir / "header.csv"), DataError);
    std::ofstream(dir / "fields.csv") << kManifestHeader << "\na,b\n";
    EXPECT_THROW(load_dataset(dir / "fields.csv"), DataError);
    std::ofstream(dir / "missing.csv") << kManifestHeader << "\na,images/zzz.png,masks/zzz.png\n";
    EXPECT_THROW(load_dataset(dir / "missing.csv"), IoError);
    std::ofstream(dir / "number.csv") << kManifestHeader << "\nsynth_0000,images/synth_0000.png,masks/synth_0000.png,1x,2,3,4\n";
    EXPECT_THROW(load_dataset(dir / "number.csv"), DataError);
}

TEST(Manifest, MaskDimensionMismatchRejected) {
    const auto dir = scratch_dir("ds");
    auto s = synth(1)[0];
    write_dataset({s}, dir);
    save_mask(dir / "masks" / (s.id + ".png"), Mask(16, 16));
    EXPECT_THROW(load_dataset(dir / "manifest.csv"), DataError);
}

TEST(Manifest, ValidateSampleChecksRanges) {
    Sample s{"x", Image(3, 2, 2, 0.5f), Mask(2, 2), std::nullopt};
    EXPECT_NO_THROW(validate_sample(s));
    s.image.data[0] = 1.5f;
    EXPECT_THROW(validate_sample(s), DataError);
    s.image.data[0] = 0.5f;
    s.mask.data[0] = 2;
    EXPECT_THROW(validate_sample(s), DataError);
    Sample g{"g", Image(1, 2, 2), Mask(2, 2), std::nullopt};
    EXPECT_THROW(validate_sample(g), DataError);
}

// ------------------------------------------------------------ augmentation

TEST(Augment, IdentityConfigReturnsInput) {
    for (const auto& s : synth(3)) EXPECT_TRUE(augment(s, AugmentConfig::identity(), 42) == s);
}

TEST(Augment, DefaultChainKeepsInvariants) {
    const auto samples = synth(4);
    const AugmentConfig cfg;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto& in = samples[seed % samples.size()];
        const auto out = augment(in, cfg, seed);
        ASSERT_EQ(out.image.height, in.image.height);
        ASSERT_EQ(out.image.width, in.image.width);
        ASSERT_EQ(out.mask.height, in.mask.height);
        EXPECT_TRUE(binary(out.mask));
        EXPECT_NO_THROW(validate_sample(out));
        EXPECT_EQ(out.id, in.id);
    }
}

TEST(Augment, SameSeedSameResult) {
    const auto s = synth(1)[0];
    EXPECT_TRUE(augment(s, AugmentConfig{}, 7) == augment(s, AugmentConfig{}, 7));
    EXPECT_FALSE(augment(s, AugmentConfig{}, 7) == augment(s, AugmentConfig{}, 8));
}

TEST(Augment, FixedOutputSize) {
    AugmentConfig cfg;
    cfg.out_h = 48;
    cfg.out_w = 16;
    const auto out = augment(synth(1)[0], cfg, 3);
    EXPECT_EQ(out.image.height, 48u);
    EXPECT_EQ(out.image.width, 16u);
    EXPECT_EQ(out.mask.width, 16u);
}

TEST(Augment, ForcedFlipsMatchManualFlips) {
    const auto s = synth(1)[0];
    auto cfg = AugmentConfig::identity();
    cfg.hflip_p = 1.0;
    const auto h = augment(s, cfg, 0);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            ASSERT_EQ(h.mask.at(y, x), s.mask.at(y, 31 - x));
            ASSERT_EQ(h.image.at(1, y, x), s.image.at(1, y, 31 - x));
        }
    cfg.hflip_p = 0.0;
    cfg.vflip_p = 1.0;
    const auto v = augment(s, cfg, 0);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) ASSERT_EQ(v.mask.at(y, x), s.mask.at(31 - y, x));
    auto twice = v;
    flip_vertical(twice);
    EXPECT_TRUE(twice == s);
}

TEST(Augment, FourQuarterTurnsRestoreMask) {
    const auto s = synth(1, 32, 5)[0];
    auto r = s;
    for (int i = 0; i < 4; ++i) rotate(r, 90.0);
    EXPECT_EQ(r.mask, s.mask);
    for (std::size_t i = 0; i < s.image.data.size(); ++i) ASSERT_NEAR(r.image.data[i], s.image.data[i], 1e-5);
}

TEST(Augment, QuarterTurnMovesCorner) {
    Sample s{"c", Image(3, 4, 4), Mask(4, 4), std::nullopt};
    s.mask.at(0, 0) = 1;
    rotate(s, 90.0);
    EXPECT_EQ(std::count(s.mask.data.begin(), s.mask.data.end(), 1), 1);
    EXPECT_EQ(s.mask.at(0, 0), 0);
}

TEST(Augment, BlurPreservesConstantImage) {
    Image im(3, 9, 7, 0.4f);
    gaussian_blur(im, 1.7);
    for (const float v : im.data) EXPECT_NEAR(v, 0.4f, 1e-6);
}

TEST(Augment, ResizeHelpers) {
    Image im(1, 2, 2);
    im.data = {0.0f, 1.0f, 1.0f, 0.0f};
    const auto up = resize_bilinear(im, 4, 4);
    // half-pixel centers: the 4×4 grid interpolates between source centers
    EXPECT_FLOAT_EQ(up.at(0, 0, 0), 0.0f);
    EXPECT_FLOAT_EQ(up.at(0, 0, 1), 0.25f);
    EXPECT_FLOAT_EQ(up.at(0, 1, 1), 0.375f);
    Mask m(2, 2);
    m.data = {1, 0, 0, 1};
    const auto mu = resize_nearest(m, 4, 4);
    EXPECT_EQ(mu.at(0, 0), 1);
    EXPECT_EQ(mu.at(1, 1), 1);
    EXPECT_EQ(mu.at(0, 3), 0);
    EXPECT_EQ(mu.at(3, 3), 1);
}

TEST(Augment, CropAndPadAreCentered) {
    Sample s{"p", Image(3, 2, 2, 1.0f), Mask(2, 2, 1), std::nullopt};
    const auto padded = crop_or_pad(s, 4, 4);
    EXPECT_EQ(padded.mask.at(0, 0), 0);
    EXPECT_EQ(padded.mask.at(1, 1), 1);
    EXPECT_EQ(padded.mask.at(2, 2), 1);
    EXPECT_EQ(padded.mask.at(3, 3), 0);
    const auto back = crop_or_pad(padded, 2, 2);
    EXPECT_TRUE(back == s);
}

TEST(Augment, InvalidConfigRejected) {
    AugmentConfig c;
    c.hflip_p = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = AugmentConfig{};
    c.scale_range = {2.0, 1.0};
    EXPECT_THROW(augment(synth(1)[0], c, 0), std::invalid_argument);
    c = AugmentConfig{};
    c.blur_sigma_range = {0.0, 1.0};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

// ------------------------------------------------------------------ splits

TEST(Split, NinetyTenFloor) {
    const auto ten = synth(10, 16);
    const auto [train, test] = random_split(ten, 1);
    EXPECT_EQ(train.size(), 9u);
    EXPECT_EQ(test.size(), 1u);
    const auto many = synth(25, 16);
    const auto [a, b] = random_split(many, 1);
    EXPECT_EQ(a.size(), 22u);  // ⌊22.5⌋
    EXPECT_EQ(b.size(), 3u);
    const auto two = synth(2, 16);
    EXPECT_EQ(random_split(two, 0).first.size(), 1u);
    EXPECT_THROW(random_split(synth(1, 16), 0), DataError);
}

TEST(Split, DisjointCoverAndSeeded) {
    const auto samples = synth(20, 16);
    const auto [train, test] = random_split(samples, 5);
    auto all = ids(train);
    for (const auto& id : ids(test)) EXPECT_TRUE(all.insert(id).second) << id;
    EXPECT_EQ(all, ids(samples));
    const auto again = random_split(samples, 5);
    EXPECT_EQ(ids(again.second), ids(test));
    bool differs = false;
    for (std::uint64_t s = 6; s < 12 && !differs; ++s) differs = ids(random_split(samples, s).second) != ids(test);
    EXPECT_TRUE(differs);
}

TEST(Split, RegionsByBoxCenter) {
    std::vector<Sample> s{with_center("a", 99.5, 29.0), with_center("b", 102.0, 31.0), with_center("c", 100.9, 29.0),
                          with_center("d", 99.0, 30.5)};
    s.push_back(Sample{"e", Image(3, 4, 4), Mask(4, 4), std::nullopt});
    const auto part = region_split(s, default_regions());
    EXPECT_EQ(ids(part.by_region.at("region1")), (std::set<std::string>{"a", "d"}));
    EXPECT_EQ(ids(part.by_region.at("region2")), (std::set<std::string>{"b"}));
    EXPECT_EQ(ids(part.unassigned), (std::set<std::string>{"c", "e"}));
}

TEST(Split, OverlappingRegionsRejected) {
    std::vector<RegionBox> r{{"x", 0, 2, 0, 2}, {"y", 1, 3, 1, 3}};
    EXPECT_THROW(region_split({}, r), std::invalid_argument);
    std::vector<RegionBox> empty{{"z", 1, 1, 0, 2}};
    EXPECT_THROW(region_split({}, empty), std::invalid_argument);
}

TEST(Split, SyntheticSamplesAlternateRegions) {
    const auto part = region_split(synth(10, 16), default_regions());
    EXPECT_EQ(part.by_region.at("region1").size(), 5u);
    EXPECT_EQ(part.by_region.at("region2").size(), 5u);
    EXPECT_TRUE(part.unassigned.empty());
}

// -------------------------------------------------------------- statistics

TEST(Stats, ExactTenPercentSet) {
    SyntheticOptions o;
    o.n = 6;
    o.size = 80;
    o.fraction_lo = o.fraction_hi = 0.1;
    const auto st = compute_stats(generate_synthetic(o));
    EXPECT_EQ(st.class_pixels[1], 6u * 640);
    EXPECT_EQ(st.class_pixels[0], 6u * 5760);
    EXPECT_DOUBLE_EQ(st.proportions[0], 0.9);
    EXPECT_DOUBLE_EQ(st.proportions[1], 0.1);
    for (const double c : st.coverage) EXPECT_DOUBLE_EQ(c, 0.1);
    EXPECT_EQ(st.histogram[2], 6u);
}

TEST(Stats, HandCountedMasks) {
    Sample a{"a", Image(3, 2, 2), Mask(2, 2), std::nullopt}, b{"b", Image(3, 2, 2), Mask(2, 2, 1), std::nullopt};
    a.mask.data = {1, 0, 0, 0};
    const auto st = compute_stats({a, b}, 4);
    EXPECT_EQ(st.class_pixels[1], 5u);
    EXPECT_EQ(st.class_pixels[0], 3u);
    EXPECT_EQ(st.histogram, (std::vector<std::size_t>{0, 1, 0, 1}));  // 0.25 → bin 1, 1.0 → last bin
    EXPECT_THROW(compute_stats({}), DataError);
}

// --------------------------------------------------------------- synthetic

TEST(Synthetic, Deterministic) {
    const auto a = synth(5, 32, 11), b = synth(5, 32, 11), c = synth(5, 32, 12);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i] == b[i]);
    EXPECT_FALSE(a[0] == c[0]);
    // one sample does not depend on how many were generated
    EXPECT_TRUE(synth(2, 32, 11)[1] == a[1]);
}

TEST(Synthetic, CoverageWithinRequestedRange) {
    SyntheticOptions o;
    o.n = 12;
    o.size = 64;
    o.fraction_lo = 0.05;
    o.fraction_hi = 0.2;
    for (const auto& s : generate_synthetic(o)) {
        const double cov = static_cast<double>(std::count(s.mask.data.begin(), s.mask.data.end(), 1)) / (64.0 * 64.0);
        EXPECT_GE(cov, 0.05);
        EXPECT_LE(cov, 0.2);
        EXPECT_NO_THROW(validate_sample(s));
    }
}

TEST(Synthetic, MoraineBrighterThanBackground) {
    for (const auto& s : synth(6, 64)) {
        double on = 0, off = 0;
        std::size_t n_on = 0;
        for (std::size_t i = 0; i < s.mask.data.size(); ++i) {
            const double v = s.image.data[i];
            if (s.mask.data[i]) on += v, ++n_on;
            else off += v;
        }
        EXPECT_GT(on / static_cast<double>(n_on), off / static_cast<double>(s.mask.data.size() - n_on) + 0.2);
    }
}

TEST(Synthetic, RegionTwoBrightnessShift) {
    SyntheticOptions o;
    o.n = 4;
    o.size = 32;
    const auto plain = generate_synthetic(o);
    o.region2_brightness = 0.1;
    const auto shifted = generate_synthetic(o);
    EXPECT_TRUE(shifted[0] == plain[0]);
    double diff = 0;
    for (std::size_t i = 0; i < plain[1].image.data.size(); ++i) diff += shifted[1].image.data[i] - plain[1].image.data[i];
    EXPECT_NEAR(diff / static_cast<double>(plain[1].image.data.size()), 0.1, 0.01);
    EXPECT_EQ(shifted[1].mask, plain[1].mask);
}

TEST(Synthetic, InvalidOptionsRejected) {
    SyntheticOptions o;
    o.size = 40;
    EXPECT_THROW(generate_synthetic(o), std::invalid_argument);
    o.size = 32;
    o.fraction_lo = 0.3;
    o.fraction_hi = 0.2;
    EXPECT_THROW(generate_synthetic(o), std::invalid_argument);
    o.fraction_lo = 0.1;
    o.n = 0;
    EXPECT_THROW(generate_synthetic(o), std::invalid_argument);
}

TEST(Batch, StacksImagesAndLabels) {
    const auto s = synth(2, 16);
    const auto [x, y] = make_batch<float>({&s[0], &s[1]});
    EXPECT_EQ(x.shape(), (Shape{2, 3, 16, 16}));
    ASSERT_EQ(y.size(), 2u * 256);
    EXPECT_EQ(x[3 * 256 + 5], s[1].image.data[5]);
    EXPECT_EQ(y[256 + 17], s[1].mask.data[17]);
    const auto big = synth(1, 32);
    EXPECT_THROW(make_batch<float>({&s[0], &big[0]}), DataError);
    EXPECT_THROW(make_batch<float>({}), DataError);
}
