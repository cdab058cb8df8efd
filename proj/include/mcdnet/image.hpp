#pragma once

// Channel-first float images, binary masks and 8-bit PNG I/O.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdnet {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// C×H×W float image, row-major per channel.
struct Image {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<float> data;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

    bool operator==(const Image&) const = default;
};

/// H×W label grid; values 0 (background) or 1 (moraine).
struct Mask {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), data(h * w, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }

    bool operator==(const Mask&) const = default;
};

/// Raw interleaved 8-bit pixels as stored in PNG.
struct RawPixels {
    std::size_t height = 0, width = 0, channels = 0;
    std::vector<std::uint8_t> bytes;
};

inline RawPixels read_png(const std::filesystem::path& path, std::size_t channels) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
        throw IoError("cannot read PNG " + path.string() + ": " + img.message);
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    RawPixels out;
    out.height = img.height;
    out.width = img.width;
    out.channels = channels;
    out.bytes.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.bytes.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    return out;
}

inline void write_png(const std::filesystem::path& path, const RawPixels& px) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(px.width);
    img.height = static_cast<png_uint_32>(px.height);
    img.format = px.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (px.bytes.size() != px.width * px.height * px.channels) throw IoError("write_png: pixel buffer size mismatch");
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, px.bytes.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + img.message);
}

inline std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

/// RGB PNG → 3×H×W image scaled by 1/255.
inline Image load_image(const std::filesystem::path& path) {
    const RawPixels px = read_png(path, 3);
    Image im(3, px.height, px.width);
    for (std::size_t y = 0; y < px.height; ++y)
        for (std::size_t x = 0; x < px.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                im.at(c, y, x) = static_cast<float>(px.bytes[(y * px.width + x) * 3 + c]) / 255.0f;
    return im;
}

inline void save_image(const std::filesystem::path& path, const Image& im) {
    if (im.channels != 3 && im.channels != 1) throw IoError("save_image: need 1 or 3 channels");
    RawPixels px{im.height, im.width, im.channels, std::vector<std::uint8_t>(im.data.size())};
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
            for (std::size_t c = 0; c < im.channels; ++c)
                px.bytes[(y * im.width + x) * im.channels + c] = to_byte(im.at(c, y, x));
    write_png(path, px);
}

/// Grayscale PNG → mask; any nonzero byte is foreground.
inline Mask load_mask(const std::filesystem::path& path) {
    const RawPixels px = read_png(path, 1);
    Mask m(px.height, px.width);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = px.bytes[i] ? 1 : 0;
    return m;
}

/// Mask → grayscale PNG with values {0, 255}.
inline void save_mask(const std::filesystem::path& path, const Mask& m) {
    RawPixels px{m.height, m.width, 1, std::vector<std::uint8_t>(m.data.size())};
    for (std::size_t i = 0; i < m.data.size(); ++i) px.bytes[i] = m.data[i] ? 255 : 0;
    write_png(path, px);
}

}  // namespace mcdnet
