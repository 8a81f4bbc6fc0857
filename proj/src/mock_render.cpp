#include "scriptboard/mock_render.hpp"

#include "scriptboard/hashing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace scriptboard::mock_render {

namespace {

Rgba hsv(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    double c = v * s;
    double x = c * (1 - std::fabs(std::fmod(h / 60.0, 2.0) - 1));
    double m = v - c;
    double r = 0, g = 0, b = 0;
    if (h < 60) { r = c; g = x; }
    else if (h < 120) { r = x; g = c; }
    else if (h < 180) { g = c; b = x; }
    else if (h < 240) { g = x; b = c; }
    else if (h < 300) { r = x; b = c; }
    else { r = c; b = x; }
    auto u = [&](double t) { return static_cast<std::uint8_t>(std::clamp(std::lround((t + m) * 255), 0L, 255L)); };
    return {u(r), u(g), u(b), 255};
}

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

Rgba jitter(Rgba c, std::uint64_t key, int x, int y, int amplitude) {
    std::uint64_t h = splitmix64(key ^ (static_cast<std::uint64_t>(x) << 32) ^ static_cast<std::uint64_t>(y));
    int d = static_cast<int>(h % static_cast<std::uint64_t>(2 * amplitude + 1)) - amplitude;
    auto ch = [&](std::uint8_t v) { return static_cast<std::uint8_t>(std::clamp(v + d, 0, 255)); };
    return {ch(c.r), ch(c.g), ch(c.b), 255};
}

// Exact trig for multiples of 45 degrees keeps opposite views pixel-mirrored.
std::array<double, 2> cos_sin(double deg) {
    double k = deg / 45.0;
    if (std::fabs(k - std::round(k)) < 1e-12) {
        static constexpr double r = std::numbers::sqrt2 / 2;
        static constexpr std::array<std::array<double, 2>, 8> table = {{
            {1, 0}, {r, r}, {0, 1}, {-r, r}, {-1, 0}, {-r, -r}, {0, -1}, {r, -r}}};
        long i = ((std::lround(k) % 8) + 8) % 8;
        return table[static_cast<std::size_t>(i)];
    }
    double a = deg * std::numbers::pi / 180.0;
    return {std::cos(a), std::sin(a)};
}

struct Part {
    enum Kind { box, sphere } kind;
    double bx, bz;         // body-frame center: right, forward
    double half_x, half_z; // footprint half-extents (box) or radius in half_x (sphere)
    double y0, y1;         // vertical span in figure units (sphere: center y in y0)
    Rgba color;
};

} // namespace

int marker_cell_px(int width, int height) { return std::max(4, std::min(width, height) / 42); }

Image render_character(std::uint64_t key, double azimuth_deg, int width, int height, const marker::Bytes& stamp) {
    Image image(width, height, {255, 255, 255, 255});
    const std::uint64_t h1 = splitmix64(key), h2 = splitmix64(h1), h3 = splitmix64(h2), h4 = splitmix64(h3);
    const Rgba skin = hsv(20 + 20 * unit(h1), 0.35 + 0.3 * unit(h2), 0.45 + 0.35 * unit(h3));
    const Rgba hair = hsv(360 * unit(h4), 0.5, 0.25 + 0.3 * unit(h1 ^ h4));
    const Rgba top = hsv(360 * unit(h2 ^ h3), 0.75, 0.7);
    const Rgba bottom = hsv(360 * unit(h3 ^ h1), 0.55, 0.4);
    const Rgba bag = hsv(360 * unit(h4 ^ h2), 0.8, 0.5);

    const std::vector<Part> parts = {
        {Part::box, -0.10, 0.0, 0.06, 0.06, 0.00, 0.46, bottom},
        {Part::box, 0.10, 0.0, 0.06, 0.06, 0.00, 0.46, bottom},
        {Part::box, 0.0, 0.0, 0.18, 0.10, 0.44, 0.78, top},
        {Part::box, -0.23, 0.0, 0.045, 0.05, 0.48, 0.77, top},
        {Part::box, 0.23, 0.0, 0.045, 0.05, 0.48, 0.77, top},
        {Part::box, 0.0, 0.0, 0.04, 0.04, 0.76, 0.81, skin},
        {Part::box, 0.30, 0.0, 0.05, 0.08, 0.45, 0.57, bag},
        {Part::sphere, 0.0, -0.015, 0.095, 0.0, 0.875, 0.0, hair},
        {Part::sphere, 0.0, 0.01, 0.085, 0.0, 0.865, 0.0, skin},
        {Part::sphere, 0.0, 0.088, 0.022, 0.0, 0.865, 0.0, skin},
    };

    auto [c, s] = cos_sin(azimuth_deg);
    const double scale = 0.86 * height;
    const double ground = height - 0.04 * height;
    struct Placed {
        const Part* part;
        double cx, half_w, depth;
    };
    std::vector<Placed> placed;
    for (const auto& p : parts) {
        double cx = -p.bx * c + p.bz * s;
        double depth = p.bx * s + p.bz * c;
        double half_w = p.kind == Part::box ? std::fabs(c) * p.half_x + std::fabs(s) * p.half_z : p.half_x;
        placed.push_back({&p, cx, half_w, depth});
    }
    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) { return a.depth < b.depth; });

    for (int py = 0; py < height; ++py) {
        double fy = (ground - (py + 0.5)) / scale;
        for (int px = 0; px < width; ++px) {
            double fx = ((px + 0.5) - width / 2.0) / scale;
            const Part* hit = nullptr;
            for (const auto& pl : placed) {
                const Part& p = *pl.part;
                bool inside = false;
                if (p.kind == Part::box)
                    inside = fy >= p.y0 && fy <= p.y1 && std::fabs(fx - pl.cx) <= pl.half_w;
                else
                    inside = (fx - pl.cx) * (fx - pl.cx) + (fy - p.y0) * (fy - p.y0) <= p.half_x * p.half_x;
                if (inside) hit = &p;
            }
            if (hit) image.set(px, py, jitter(hit->color, key, px, py, 6));
        }
    }
    marker::stamp(image, 0, 0, marker_cell_px(width, height), stamp);
    return image;
}

Image render_spot(std::uint64_t key, std::uint64_t layout_key, int width, int height, const marker::Bytes& stamp) {
    Image image(width, height);
    const std::uint64_t h1 = splitmix64(key), h2 = splitmix64(h1), h3 = splitmix64(h2);
    const double hue = 360 * unit(h1);
    const Rgba sky_top = hsv(hue, 0.45, 0.55 + 0.2 * unit(h2));
    const Rgba sky_low = hsv(hue + 30, 0.3, 0.8);
    const Rgba ground = hsv(hue + 150 + 60 * unit(h3), 0.4, 0.35);
    const int horizon = static_cast<int>(height * (0.55 + 0.1 * unit(h2 ^ h3)));
    for (int y = 0; y < height; ++y) {
        double t = static_cast<double>(y) / std::max(1, horizon);
        for (int x = 0; x < width; ++x) {
            Rgba base;
            if (y < horizon) {
                auto lerp = [&](std::uint8_t a, std::uint8_t b) {
                    return static_cast<std::uint8_t>(std::lround(a + (b - a) * std::min(1.0, t)));
                };
                base = {lerp(sky_top.r, sky_low.r), lerp(sky_top.g, sky_low.g), lerp(sky_top.b, sky_low.b), 255};
            } else {
                base = ground;
            }
            image.set(x, y, jitter(base, key ^ 0x5bd1e995ULL, x, y, 10));
        }
    }
    // Blocks standing on the horizon: buildings outdoors, furniture indoors alike.
    std::uint64_t h = splitmix64(layout_key);
    int count = 3 + static_cast<int>(h % 4);
    for (int i = 0; i < count; ++i) {
        h = splitmix64(h);
        int bw = static_cast<int>(width * (0.06 + 0.12 * unit(h)));
        h = splitmix64(h);
        int bh = static_cast<int>(height * (0.15 + 0.35 * unit(h)));
        h = splitmix64(h);
        int bx = static_cast<int>((width - bw) * unit(h));
        Rgba color = hsv(hue + 180 + 90 * unit(splitmix64(h)), 0.35, 0.3 + 0.4 * unit(splitmix64(h + 1)));
        for (int y = std::max(0, horizon - bh); y < horizon + bh / 6 && y < height; ++y)
            for (int x = bx; x < bx + bw && x < width; ++x) image.set(x, y, jitter(color, h, x, y, 8));
        // windows
        Rgba window = hsv(50, 0.4, 0.85);
        for (int wy = horizon - bh + 8; wy + 10 < horizon; wy += 22)
            for (int wx = bx + 6; wx + 8 < bx + bw; wx += 18)
                image.fill_rect(wx, std::max(0, wy), wx + 8, std::max(0, wy + 10), window);
    }
    marker::stamp(image, 0, 0, marker_cell_px(width, height), stamp);
    return image;
}

std::vector<bool> silhouette(const Image& image) {
    const int skip = marker::kGridCells * marker_cell_px(image.width(), image.height());
    std::vector<bool> mask(static_cast<std::size_t>(image.width()) * image.height(), false);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if ((x < skip && y < skip) || (x >= image.width() - skip && y < skip)) continue;
            Rgba p = image.at(x, y);
            mask[static_cast<std::size_t>(y) * image.width() + x] = !(p.r == 255 && p.g == 255 && p.b == 255);
        }
    }
    return mask;
}

} // namespace scriptboard::mock_render
