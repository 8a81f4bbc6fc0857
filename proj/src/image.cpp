#include "scriptboard/image.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace scriptboard {

Image::Image(int width, int height, Rgba fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error(Errc::InvalidInput, "negative image size");
    pixels_.resize(static_cast<std::size_t>(width) * height * 4);
    for (std::size_t i = 0; i < pixels_.size(); i += 4) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
        pixels_[i + 3] = fill.a;
    }
}

Rgba Image::at(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 4;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2], pixels_[i + 3]};
}

void Image::set(int x, int y, Rgba c) {
    std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 4;
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
    pixels_[i + 3] = c.a;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgba c) {
    x0 = std::clamp(x0, 0, width_);
    x1 = std::clamp(x1, 0, width_);
    y0 = std::clamp(y0, 0, height_);
    y1 = std::clamp(y1, 0, height_);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) set(x, y, c);
}

std::uint64_t Image::content_hash() const {
    std::uint64_t h = fnv1a64(std::to_string(width_) + "x" + std::to_string(height_));
    return fnv1a64(std::span<const std::uint8_t>(pixels_), h);
}

GrayField to_gray(const Image& image) {
    GrayField g(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            Rgba p = image.at(x, y);
            g.at(x, y) = 0.2989 * p.r + 0.5870 * p.g + 0.1140 * p.b;
        }
    }
    return g;
}

Image from_gray(const GrayField& gray) {
    Image out(gray.width, gray.height);
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            auto v = static_cast<std::uint8_t>(std::clamp(std::lround(gray.at(x, y)), 0L, 255L));
            out.set(x, y, {v, v, v, 255});
        }
    }
    return out;
}

Image crop(const Image& image, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > image.width() || y + h > image.height())
        throw Error(Errc::InvalidInput, "crop rectangle outside image");
    Image out(w, h);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) out.set(xx, yy, image.at(x + xx, y + yy));
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) out.set(image.width() - 1 - x, y, image.at(x, y));
    return out;
}

namespace {

struct Premul {
    double r = 0, g = 0, b = 0, a = 0;
};

Premul premul(Rgba p) {
    double a = p.a / 255.0;
    return {p.r * a, p.g * a, p.b * a, a};
}

Rgba unpremul(const Premul& p) {
    if (p.a <= 0.0) return {0, 0, 0, 0};
    auto ch = [&](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v / p.a), 0L, 255L));
    };
    return {ch(p.r), ch(p.g), ch(p.b), static_cast<std::uint8_t>(std::clamp(std::lround(p.a * 255.0), 0L, 255L))};
}

// Weights of source pixels [floor(lo), ceil(hi)) covering the interval [lo, hi).
void area_weights(double lo, double hi, int limit, std::vector<std::pair<int, double>>& out) {
    out.clear();
    int first = static_cast<int>(std::floor(lo));
    int last = static_cast<int>(std::ceil(hi));
    for (int i = first; i < last; ++i) {
        double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        if (w > 1e-12) out.emplace_back(std::clamp(i, 0, limit - 1), w);
    }
}

} // namespace

Image resize(const Image& image, int width, int height) {
    if (width <= 0 || height <= 0) throw Error(Errc::InvalidInput, "resize to empty size");
    if (image.empty()) throw Error(Errc::InvalidInput, "resize of empty image");
    if (width == image.width() && height == image.height()) return image;
    const double sx = static_cast<double>(image.width()) / width;
    const double sy = static_cast<double>(image.height()) / height;
    Image out(width, height);
    std::vector<std::pair<int, double>> wx, wy;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Premul acc;
            double total = 0.0;
            auto accumulate = [&](int px, int py, double w) {
                Premul p = premul(image.at(px, py));
                acc.r += p.r * w;
                acc.g += p.g * w;
                acc.b += p.b * w;
                acc.a += p.a * w;
                total += w;
            };
            if (sx > 1.0 || sy > 1.0) {
                area_weights(x * sx, (x + 1) * sx, image.width(), wx);
                area_weights(y * sy, (y + 1) * sy, image.height(), wy);
                for (auto [py, wyv] : wy)
                    for (auto [px, wxv] : wx) accumulate(px, py, wxv * wyv);
            } else {
                double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
                double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
                int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
                int x1 = std::min(x0 + 1, image.width() - 1), y1 = std::min(y0 + 1, image.height() - 1);
                double ax = fx - x0, ay = fy - y0;
                accumulate(x0, y0, (1 - ax) * (1 - ay));
                accumulate(x1, y0, ax * (1 - ay));
                accumulate(x0, y1, (1 - ax) * ay);
                accumulate(x1, y1, ax * ay);
            }
            acc.r /= total;
            acc.g /= total;
            acc.b /= total;
            acc.a /= total;
            out.set(x, y, unpremul(acc));
        }
    }
    return out;
}

void paste_over(Image& base, const Image& top, int ox, int oy) {
    for (int y = 0; y < top.height(); ++y) {
        int by = oy + y;
        if (by < 0 || by >= base.height()) continue;
        for (int x = 0; x < top.width(); ++x) {
            int bx = ox + x;
            if (bx < 0 || bx >= base.width()) continue;
            Rgba s = top.at(x, y);
            if (s.a == 0) continue;
            if (s.a == 255) {
                base.set(bx, by, s);
                continue;
            }
            Rgba d = base.at(bx, by);
            double sa = s.a / 255.0, da = d.a / 255.0;
            double oa = sa + da * (1 - sa);
            auto mix = [&](std::uint8_t sc, std::uint8_t dc) {
                double v = (sc * sa + dc * da * (1 - sa)) / oa;
                return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            };
            base.set(bx, by, {mix(s.r, d.r), mix(s.g, d.g), mix(s.b, d.b),
                              static_cast<std::uint8_t>(std::clamp(std::lround(oa * 255), 0L, 255L))});
        }
    }
}

namespace {

cv::Mat to_bgra_mat(const Image& image) {
    cv::Mat mat(image.height(), image.width(), CV_8UC4);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<cv::Vec4b>(y);
        for (int x = 0; x < image.width(); ++x) {
            Rgba p = image.at(x, y);
            row[x] = cv::Vec4b(p.b, p.g, p.r, p.a);
        }
    }
    return mat;
}

Image from_mat(const cv::Mat& mat) {
    cv::Mat bgra;
    switch (mat.channels()) {
    case 1: cv::cvtColor(mat, bgra, cv::COLOR_GRAY2BGRA); break;
    case 3: cv::cvtColor(mat, bgra, cv::COLOR_BGR2BGRA); break;
    case 4: bgra = mat; break;
    default: throw Error(Errc::DecodeError, "unsupported channel count");
    }
    if (bgra.depth() != CV_8U) bgra.convertTo(bgra, CV_8U, 1.0 / 257.0);
    Image out(bgra.cols, bgra.rows);
    for (int y = 0; y < bgra.rows; ++y) {
        const auto* row = bgra.ptr<cv::Vec4b>(y);
        for (int x = 0; x < bgra.cols; ++x) out.set(x, y, {row[x][2], row[x][1], row[x][0], row[x][3]});
    }
    return out;
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::vector<std::uint8_t> buffer;
    std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", to_bgra_mat(image), buffer, params))
        throw Error(Errc::IoError, "PNG encoding failed");
    return buffer;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) throw Error(Errc::DecodeError, "PNG data too short");
    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw Error(Errc::DecodeError, "cannot decode PNG data");
    return from_mat(mat);
}

Image load_png(const std::filesystem::path& path) {
    auto bytes = read_binary_file(path);
    try {
        return decode_png(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void save_png(const Image& image, const std::filesystem::path& path) {
    auto bytes = encode_png(image);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::array<int, 2> measure_text(const std::string& text, const TextStyle& style) {
    int baseline = 0;
    cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, style.scale, style.thickness, &baseline);
    return {size.width, size.height};
}

void draw_text(Image& image, const std::string& text, int x, int baseline_y, const TextStyle& style) {
    cv::Mat mat = to_bgra_mat(image);
    cv::putText(mat, text, cv::Point(x, baseline_y), cv::FONT_HERSHEY_SIMPLEX, style.scale,
                cv::Scalar(style.color.b, style.color.g, style.color.r, style.color.a), style.thickness,
                cv::LINE_8);
    image = from_mat(mat);
}

} // namespace scriptboard
