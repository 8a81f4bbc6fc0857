#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scriptboard {

struct Rgba {
    std::uint8_t r = 0, g = 0, b = 0, a = 255;
    bool operator==(const Rgba&) const = default;
};

/// 8-bit RGBA raster, row-major, top-left origin.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgba fill = {0, 0, 0, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgba at(int x, int y) const;
    void set(int x, int y, Rgba c);
    std::span<const std::uint8_t> bytes() const { return pixels_; }
    std::span<std::uint8_t> bytes() { return pixels_; }

    void fill_rect(int x0, int y0, int x1, int y1, Rgba c);

    /// FNV-1a over dimensions and pixels.
    std::uint64_t content_hash() const;

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Single-channel double field used by the quality metrics.
struct GrayField {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    GrayField() = default;
    GrayField(int w, int h, double fill = 0.0) : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Luma 0.2989 R + 0.5870 G + 0.1140 B on the 0..255 scale, alpha ignored.
GrayField to_gray(const Image& image);
Image from_gray(const GrayField& gray);

Image crop(const Image& image, int x, int y, int w, int h);
Image flip_horizontal(const Image& image);

/// Resamples to the requested size. Downscaling averages source area
/// (premultiplied alpha); upscaling is bilinear.
Image resize(const Image& image, int width, int height);

/// Alpha-over composite of `top` onto `base` at integer offset.
void paste_over(Image& base, const Image& top, int x, int y);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);
Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

struct TextStyle {
    double scale = 0.6;
    int thickness = 1;
    Rgba color{255, 255, 255, 255};
};

/// Width in pixels and baseline height of ASCII text in the built-in stroke font.
std::array<int, 2> measure_text(const std::string& text, const TextStyle& style);
void draw_text(Image& image, const std::string& text, int x, int baseline_y, const TextStyle& style);

} // namespace scriptboard
