#pragma once

// Samples, CSV manifests, augmentation, dataset splits, pixel statistics and
// the synthetic moraine generator used for desk-scale runs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcdnet/image.hpp"
#include "mcdnet/ops/resize.hpp"
#include "mcdnet/tensor.hpp"

namespace mcdnet {

struct GeoBox {
    double lon_min = 0, lon_max = 0, lat_min = 0, lat_max = 0;

    double center_lon() const { return 0.5 * (lon_min + lon_max); }
    double center_lat() const { return 0.5 * (lat_min + lat_max); }
    bool operator==(const GeoBox&) const = default;
};

struct Sample {
    std::string id;
    Image image;
    Mask mask;
    std::optional<GeoBox> geo;

    bool operator==(const Sample&) const = default;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Throws unless the image is 3×H×W in [0,1] and the mask is H×W binary.
inline void validate_sample(const Sample& s) {
    if (s.image.channels != 3) throw DataError(s.id + ": image must have 3 channels");
    if (s.image.height != s.mask.height || s.image.width != s.mask.width)
        throw DataError(s.id + ": image/mask dimension mismatch");
    if (s.image.data.size() != 3 * s.image.height * s.image.width || s.mask.data.size() != s.mask.height * s.mask.width)
        throw DataError(s.id + ": buffer size mismatch");
    for (const float v : s.image.data)
        if (!(v >= 0.0f && v <= 1.0f)) throw DataError(s.id + ": image value outside [0,1]");
    for (const auto v : s.mask.data)
        if (v > 1) throw DataError(s.id + ": mask value outside {0,1}");
}

// ---------------------------------------------------------------- manifest

inline constexpr const char* kManifestHeader = "id,image,mask,lon_min,lon_max,lat_min,lat_max";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("malformed number '" + s + "' in " + what);
    }
}

}  // namespace detail

/// Reads a manifest; image and mask paths are relative to its directory.
inline std::vector<Sample> load_dataset(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open manifest " + manifest.string());
    const auto root = manifest.parent_path();
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest " + manifest.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) throw DataError("manifest header must be '" + std::string(kManifestHeader) + "'");
    std::vector<Sample> samples;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        const std::string where = manifest.string() + " row " + std::to_string(row);
        if (f.size() != 3 && f.size() != 7) throw DataError("expected 3 or 7 fields at " + where);
        Sample s;
        s.id = f[0];
        const auto image_path = root / f[1];
        const auto mask_path = root / f[2];
        if (!std::filesystem::exists(image_path)) throw IoError("missing image " + image_path.string());
        if (!std::filesystem::exists(mask_path)) throw IoError("missing mask " + mask_path.string());
        s.image = load_image(image_path);
        s.mask = load_mask(mask_path);
        if (f.size() == 7 && !(f[3].empty() && f[4].empty() && f[5].empty() && f[6].empty())) {
            s.geo = GeoBox{detail::parse_double(f[3], where), detail::parse_double(f[4], where),
                           detail::parse_double(f[5], where), detail::parse_double(f[6], where)};
        }
        validate_sample(s);
        samples.push_back(std::move(s));
    }
    return samples;
}

/// Writes images/<id>.png, masks/<id>.png and manifest.csv under `dir`.
inline std::filesystem::path write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    const auto manifest = dir / "manifest.csv";
    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw IoError("cannot write " + manifest.string());
    out << kManifestHeader << '\n';
    for (const auto& s : samples) {
        const std::string image = "images/" + s.id + ".png", mask = "masks/" + s.id + ".png";
        save_image(dir / image, s.image);
        save_mask(dir / mask, s.mask);
        out << s.id << ',' << image << ',' << mask;
        if (s.geo) {
            char buf[128];
            std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f", s.geo->lon_min, s.geo->lon_max, s.geo->lat_min,
                          s.geo->lat_max);
            out << buf;
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + manifest.string());
    return manifest;
}

// ------------------------------------------------------------ augmentation

struct AugmentConfig {
    std::pair<double, double> scale_range{0.5, 2.0};
    double hflip_p = 0.5;
    double vflip_p = 0.5;
    double rotation_deg = 30.0;
    std::pair<double, double> blur_sigma_range{0.1, 2.0};
    double blur_p = 0.25;
    std::size_t out_h = 0;  // 0 keeps the input size
    std::size_t out_w = 0;

    void validate() const {
        if (!(scale_range.first > 0.0) || scale_range.second < scale_range.first)
            throw std::invalid_argument("augment: scale_range must be positive and ordered");
        if (rotation_deg < 0.0) throw std::invalid_argument("augment: rotation bound must be non-negative");
        for (double p : {hflip_p, vflip_p, blur_p})
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("augment: probabilities must lie in [0,1]");
        if (!(blur_sigma_range.first > 0.0) || blur_sigma_range.second < blur_sigma_range.first)
            throw std::invalid_argument("augment: blur sigma range must be positive and ordered");
    }

    /// All stochastic operations disabled.
    static AugmentConfig identity() {
        AugmentConfig c;
        c.scale_range = {1.0, 1.0};
        c.hflip_p = c.vflip_p = c.blur_p = 0.0;
        c.rotation_deg = 0.0;
        return c;
    }
};

inline Image resize_bilinear(const Image& im, std::size_t h, std::size_t w) {
    const AxisTaps ty = half_pixel_taps(im.height, h), tx = half_pixel_taps(im.width, w);
    Image out(im.channels, h, w);
    for (std::size_t c = 0; c < im.channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double fy = ty.frac[y], fx = tx.frac[x];
                const double top = im.at(c, ty.lo[y], tx.lo[x]) * (1 - fx) + im.at(c, ty.lo[y], tx.hi[x]) * fx;
                const double bot = im.at(c, ty.hi[y], tx.lo[x]) * (1 - fx) + im.at(c, ty.hi[y], tx.hi[x]) * fx;
                out.at(c, y, x) = static_cast<float>(top * (1 - fy) + bot * fy);
            }
    return out;
}

inline Mask resize_nearest(const Mask& m, std::size_t h, std::size_t w) {
    Mask out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        const auto sy = std::min(m.height - 1, static_cast<std::size_t>((y + 0.5) * m.height / h));
        for (std::size_t x = 0; x < w; ++x) {
            const auto sx = std::min(m.width - 1, static_cast<std::size_t>((x + 0.5) * m.width / w));
            out.at(y, x) = m.at(sy, sx);
        }
    }
    return out;
}

/// Centered crop or zero pad to h×w.
inline Sample crop_or_pad(const Sample& s, std::size_t h, std::size_t w) {
    Sample out{s.id, Image(s.image.channels, h, w), Mask(h, w), s.geo};
    const auto offset = [](std::size_t have, std::size_t want) {
        return static_cast<std::ptrdiff_t>(have) / 2 - static_cast<std::ptrdiff_t>(want) / 2;
    };
    const std::ptrdiff_t oy = offset(s.image.height, h), ox = offset(s.image.width, w);
    for (std::size_t y = 0; y < h; ++y) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + oy;
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(s.image.height)) continue;
        for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + ox;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(s.image.width)) continue;
            for (std::size_t c = 0; c < s.image.channels; ++c)
                out.image.at(c, y, x) = s.image.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            out.mask.at(y, x) = s.mask.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
    }
    return out;
}

inline void flip_horizontal(Sample& s) {
    for (std::size_t y = 0; y < s.mask.height; ++y) {
        for (std::size_t c = 0; c < s.image.channels; ++c) {
            float* row = &s.image.at(c, y, 0);
            std::reverse(row, row + s.image.width);
        }
        std::uint8_t* row = &s.mask.at(y, 0);
        std::reverse(row, row + s.mask.width);
    }
}

inline void flip_vertical(Sample& s) {
    const std::size_t h = s.mask.height, w = s.mask.width;
    for (std::size_t y = 0; y < h / 2; ++y) {
        for (std::size_t c = 0; c < s.image.channels; ++c)
            std::swap_ranges(&s.image.at(c, y, 0), &s.image.at(c, y, 0) + w, &s.image.at(c, h - 1 - y, 0));
        std::swap_ranges(&s.mask.at(y, 0), &s.mask.at(y, 0) + w, &s.mask.at(h - 1 - y, 0));
    }
}

/// Rotation about the image center; bilinear image, nearest mask, zero fill.
inline void rotate(Sample& s, double degrees) {
    const std::size_t h = s.mask.height, w = s.mask.width;
    const double a = degrees * std::numbers::pi / 180.0, ca = std::cos(a), sa = std::sin(a);
    const double cy = (static_cast<double>(h) - 1) / 2, cx = (static_cast<double>(w) - 1) / 2;
    Image img(s.image.channels, h, w);
    Mask mask(h, w);
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            const double sx = ca * dx + sa * dy + cx, sy = -sa * dx + ca * dy + cy;
            const auto ny = static_cast<std::ptrdiff_t>(std::lround(sy)), nx = static_cast<std::ptrdiff_t>(std::lround(sx));
            if (ny >= 0 && ny < H && nx >= 0 && nx < W)
                mask.at(y, x) = s.mask.at(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx));
            const auto y0 = static_cast<std::ptrdiff_t>(std::floor(sy)), x0 = static_cast<std::ptrdiff_t>(std::floor(sx));
            const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < s.image.channels; ++c) {
                auto tap = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
                    if (yy < 0 || yy >= H || xx < 0 || xx >= W) return 0.0;
                    return s.image.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                };
                const double v = (tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx) * (1 - fy) +
                                 (tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx) * fy;
                img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    s.image = std::move(img);
    s.mask = std::move(mask);
}

/// Separable Gaussian blur with replicated borders; image only.
inline void gaussian_blur(Image& im, double sigma) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i)
        total += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    for (auto& v : k) v /= total;
    const auto H = static_cast<std::ptrdiff_t>(im.height), W = static_cast<std::ptrdiff_t>(im.width);
    std::vector<double> tmp(im.height * im.width);
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::ptrdiff_t y = 0; y < H; ++y)
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                double s = 0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] *
                         im.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(std::clamp(x + i, std::ptrdiff_t{0}, W - 1)));
                tmp[static_cast<std::size_t>(y * W + x)] = s;
            }
        for (std::ptrdiff_t y = 0; y < H; ++y)
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                double s = 0;
                for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                    s += k[static_cast<std::size_t>(i + radius)] *
                         tmp[static_cast<std::size_t>(std::clamp(y + i, std::ptrdiff_t{0}, H - 1) * W + x)];
                im.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<float>(std::clamp(s, 0.0, 1.0));
            }
    }
}

/// Fixed-order augmentation chain: scale → crop/pad → hflip → vflip →
/// rotation → blur. Every random draw happens regardless of outcome so the
/// stream is stable under config changes.
inline Sample augment(const Sample& in, const AugmentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double scale = cfg.scale_range.first + (cfg.scale_range.second - cfg.scale_range.first) * unit(rng);
    const bool hflip = unit(rng) < cfg.hflip_p;
    const bool vflip = unit(rng) < cfg.vflip_p;
    const double angle = cfg.rotation_deg * (2.0 * unit(rng) - 1.0);
    const bool blur = unit(rng) < cfg.blur_p;
    const double sigma =
        cfg.blur_sigma_range.first + (cfg.blur_sigma_range.second - cfg.blur_sigma_range.first) * unit(rng);

    const std::size_t out_h = cfg.out_h ? cfg.out_h : in.image.height;
    const std::size_t out_w = cfg.out_w ? cfg.out_w : in.image.width;
    Sample s = in;
    if (scale != 1.0) {
        const auto h = static_cast<std::size_t>(std::max(1L, std::lround(static_cast<double>(in.image.height) * scale)));
        const auto w = static_cast<std::size_t>(std::max(1L, std::lround(static_cast<double>(in.image.width) * scale)));
        s.image = resize_bilinear(in.image, h, w);
        s.mask = resize_nearest(in.mask, h, w);
    }
    if (s.image.height != out_h || s.image.width != out_w) s = crop_or_pad(s, out_h, out_w);
    if (hflip) flip_horizontal(s);
    if (vflip) flip_vertical(s);
    if (angle != 0.0) rotate(s, angle);
    if (blur) gaussian_blur(s.image, sigma);
    return s;
}

// ------------------------------------------------------------------ splits

/// Seeded shuffle, then floor(train_parts/(train_parts+test_parts)·n) to train.
inline std::pair<std::vector<Sample>, std::vector<Sample>> random_split(const std::vector<Sample>& samples,
                                                                        std::uint64_t seed, std::size_t train_parts = 9,
                                                                        std::size_t test_parts = 1) {
    if (samples.size() < 2) throw DataError("random_split needs at least 2 samples");
    if (train_parts == 0 || test_parts == 0) throw std::invalid_argument("random_split: parts must be positive");
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train =
        std::clamp<std::size_t>(samples.size() * train_parts / (train_parts + test_parts), 1, samples.size() - 1);
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
    return out;
}

struct RegionBox {
    std::string name;
    double lon_min = 0, lon_max = 0, lat_min = 0, lat_max = 0;

    bool contains(double lon, double lat) const {
        return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
    }
    void validate() const {
        if (!(lon_min < lon_max) || !(lat_min < lat_max)) throw std::invalid_argument("region " + name + ": empty box");
    }
};

/// The two Sichuan evaluation regions.
inline std::vector<RegionBox> default_regions() {
    return {{"region1", 98.937, 100.730, 28.491, 30.565}, {"region2", 101.015, 102.907, 28.336, 33.079}};
}

struct RegionPartition {
    std::map<std::string, std::vector<Sample>> by_region;
    std::vector<Sample> unassigned;
};

/// Assigns each sample whose geo-box center falls inside a region.
inline RegionPartition region_split(const std::vector<Sample>& samples, const std::vector<RegionBox>& regions) {
    for (const auto& r : regions) r.validate();
    for (std::size_t i = 0; i < regions.size(); ++i)
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
            const auto &a = regions[i], &b = regions[j];
            if (a.lon_min < b.lon_max && b.lon_min < a.lon_max && a.lat_min < b.lat_max && b.lat_min < a.lat_max)
                throw std::invalid_argument("regions " + a.name + " and " + b.name + " overlap");
        }
    RegionPartition out;
    for (const auto& r : regions) out.by_region[r.name];
    for (const auto& s : samples) {
        const RegionBox* hit = nullptr;
        if (s.geo)
            for (const auto& r : regions)
                if (r.contains(s.geo->center_lon(), s.geo->center_lat())) hit = &r;
        if (hit) out.by_region[hit->name].push_back(s);
        else out.unassigned.push_back(s);
    }
    return out;
}

// -------------------------------------------------------------- statistics

struct DatasetStats {
    std::array<std::uint64_t, 2> class_pixels{};
    std::array<double, 2> proportions{};
    std::vector<double> coverage;  // moraine fraction per sample
    std::vector<std::size_t> histogram;
};

inline DatasetStats compute_stats(const std::vector<Sample>& samples, std::size_t bins = 20) {
    if (samples.empty()) throw DataError("compute_stats needs at least one sample");
    if (bins == 0) throw std::invalid_argument("compute_stats: bins must be positive");
    DatasetStats st;
    st.histogram.assign(bins, 0);
    for (const auto& s : samples) {
        std::uint64_t fg = 0;
        for (const auto v : s.mask.data) fg += v;
        st.class_pixels[1] += fg;
        st.class_pixels[0] += s.mask.data.size() - fg;
        const double cov = s.mask.data.empty() ? 0.0 : static_cast<double>(fg) / static_cast<double>(s.mask.data.size());
        st.coverage.push_back(cov);
        st.histogram[std::min(bins - 1, static_cast<std::size_t>(cov * static_cast<double>(bins)))]++;
    }
    const double total = static_cast<double>(st.class_pixels[0] + st.class_pixels[1]);
    st.proportions = {static_cast<double>(st.class_pixels[0]) / total, static_cast<double>(st.class_pixels[1]) / total};
    return st;
}

// --------------------------------------------------------------- synthetic

struct SyntheticOptions {
    std::size_t n = 8;
    std::size_t size = 64;
    double fraction_lo = 0.05;
    double fraction_hi = 0.15;
    std::uint64_t seed = 0;
    // Added to every pixel of samples placed in the second region.
    double region2_brightness = 0.0;
};

namespace detail {

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline GeoBox synthetic_geo(const RegionBox& r, std::mt19937_64& rng) {
    constexpr double half = 0.01;
    std::uniform_real_distribution<double> lon(r.lon_min + 0.05, r.lon_max - 0.05), lat(r.lat_min + 0.05, r.lat_max - 0.05);
    const double cx = round6(lon(rng)), cy = round6(lat(rng));
    return {round6(cx - half), round6(cx + half), round6(cy - half), round6(cy + half)};
}

// Smooth pseudo-random field: a few random plane waves.
struct WaveField {
    std::array<double, 4> fy{}, fx{}, phase{}, amp{};
    explicit WaveField(std::mt19937_64& rng, double max_freq) {
        std::uniform_real_distribution<double> f(-max_freq, max_freq), p(0.0, 2 * std::numbers::pi), a(0.5, 1.0);
        for (std::size_t i = 0; i < 4; ++i) {
            fy[i] = f(rng);
            fx[i] = f(rng);
            phase[i] = p(rng);
            amp[i] = a(rng);
        }
    }
    double operator()(double y, double x) const {
        double s = 0;
        for (std::size_t i = 0; i < 4; ++i) s += amp[i] * std::sin(fy[i] * y + fx[i] * x + phase[i]);
        return s / 4.0;
    }
};

}  // namespace detail

/// Renders one elliptical or arcuate bright textured deposit on darker
/// terrain. The mask holds exactly the k lowest-scoring pixels of a smooth
/// shape field, so its area is known exactly.
inline Sample render_synthetic(std::size_t index, const SyntheticOptions& o) {
    const std::size_t n = o.size, total = n * n;
    std::mt19937_64 rng(o.seed * 0x9E3779B97F4A7C15ULL + index + 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto k_min = static_cast<std::size_t>(std::ceil(o.fraction_lo * static_cast<double>(total) - 1e-9));
    const auto k_max = static_cast<std::size_t>(std::floor(o.fraction_hi * static_cast<double>(total) + 1e-9));
    const double f = o.fraction_lo + (o.fraction_hi - o.fraction_lo) * unit(rng);
    auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(total)));
    // a range narrower than one pixel keeps the rounded target
    if (k_min <= k_max) k = std::clamp(k, k_min, k_max);

    const double size = static_cast<double>(n);
    const double cy = size * (0.35 + 0.3 * unit(rng)), cx = size * (0.35 + 0.3 * unit(rng));
    const double radius = std::sqrt(static_cast<double>(std::max<std::size_t>(k, 1)) / std::numbers::pi);
    const double aspect = 0.6 + 0.8 * unit(rng);
    const double tilt = std::numbers::pi * unit(rng);
    const bool arcuate = unit(rng) < 0.5;
    const double arc_center = 2 * std::numbers::pi * unit(rng);
    const double wobble_phase = 2 * std::numbers::pi * unit(rng);
    detail::WaveField shape_noise(rng, 0.3);

    std::vector<std::pair<double, std::size_t>> score(total);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double u = std::cos(tilt) * dx + std::sin(tilt) * dy;
            const double v = -std::sin(tilt) * dx + std::cos(tilt) * dy;
            const double r = std::sqrt(u * u / aspect + v * v * aspect) / radius;
            const double theta = std::atan2(v, u);
            double s;
            if (arcuate) {
                double d = std::abs(std::remainder(theta - arc_center, 2 * std::numbers::pi));
                s = std::abs(r - 1.6) + 0.9 * std::max(0.0, d - 1.7);
            } else {
                s = r + 0.12 * std::sin(3 * theta + wobble_phase);
            }
            s += 0.15 * shape_noise(static_cast<double>(y), static_cast<double>(x));
            score[y * n + x] = {s, y * n + x};
        }
    std::sort(score.begin(), score.end());

    Sample smp;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", index);
    smp.id = id;
    smp.mask = Mask(n, n);
    for (std::size_t i = 0; i < k; ++i) smp.mask.data[score[i].second] = 1;

    const auto regions = default_regions();
    const bool second_region = index % 2 == 1;
    smp.geo = detail::synthetic_geo(regions[second_region ? 1 : 0], rng);
    const double shift = second_region ? o.region2_brightness : 0.0;

    detail::WaveField terrain(rng, 0.25);
    const double stripe_angle = std::numbers::pi * unit(rng);
    const double stripe_freq = 0.9 + 0.6 * unit(rng);
    std::normal_distribution<double> grain(0.0, 1.0);
    const std::array<double, 3> bg{0.30, 0.28, 0.24}, fg{0.64, 0.62, 0.58};
    smp.image = Image(3, n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const bool on = smp.mask.at(y, x) != 0;
            const double t = terrain(static_cast<double>(y), static_cast<double>(x));
            const double stripe = std::sin(stripe_freq * (std::cos(stripe_angle) * static_cast<double>(x) +
                                                          std::sin(stripe_angle) * static_cast<double>(y)));
            const double g = grain(rng);
            for (std::size_t c = 0; c < 3; ++c) {
                double v = on ? fg[c] + 0.05 * stripe + 0.03 * g : bg[c] + 0.08 * t + 0.025 * g;
                v += shift;
                // quantize so a PNG round trip is exact
                smp.image.at(c, y, x) = static_cast<float>(to_byte(static_cast<float>(v))) / 255.0f;
            }
        }
    return smp;
}

inline std::vector<Sample> generate_synthetic(const SyntheticOptions& o) {
    if (o.n == 0) throw std::invalid_argument("generate_synthetic: n must be positive");
    if (o.size == 0 || o.size % 16 != 0) throw std::invalid_argument("generate_synthetic: size must be a multiple of 16");
    if (!(o.fraction_lo >= 0.0) || !(o.fraction_hi <= 1.0) || o.fraction_lo > o.fraction_hi)
        throw std::invalid_argument("generate_synthetic: moraine fraction range must be ordered within [0,1]");
    std::vector<Sample> out;
    out.reserve(o.n);
    for (std::size_t i = 0; i < o.n; ++i) out.push_back(render_synthetic(i, o));
    return out;
}

// ---------------------------------------------------------------- batching

/// Stacks images into an [N,3,H,W] tensor and masks into N·H·W labels.
template <typename T>
std::pair<Tensor<T>, std::vector<std::uint8_t>> make_batch(const std::vector<const Sample*>& batch) {
    if (batch.empty()) throw DataError("make_batch: empty batch");
    const std::size_t h = batch[0]->image.height, w = batch[0]->image.width;
    std::vector<T> pixels;
    std::vector<std::uint8_t> labels;
    pixels.reserve(batch.size() * 3 * h * w);
    labels.reserve(batch.size() * h * w);
    for (const Sample* s : batch) {
        if (s->image.height != h || s->image.width != w) throw DataError("make_batch: samples differ in size");
        pixels.insert(pixels.end(), s->image.data.begin(), s->image.data.end());
        labels.insert(labels.end(), s->mask.data.begin(), s->mask.data.end());
    }
    return {Tensor<T>::from({batch.size(), 3, h, w}, std::move(pixels)), std::move(labels)};
}

}  // namespace mcdnet
