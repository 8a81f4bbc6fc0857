#include "scriptboard/marker.hpp"

#include "scriptboard/hashing.hpp"

#include <algorithm>
#include <cmath>

namespace scriptboard::marker {

namespace {

std::uint8_t checksum(const Bytes& b) {
    unsigned sum = 0;
    for (std::size_t i = 0; i < 15; ++i) sum += b[i];
    return static_cast<std::uint8_t>(sum & 0xFF);
}

Bytes seal(Bytes b) {
    b[0] = kMagic;
    b[15] = checksum(b);
    return b;
}

bool valid(const Bytes& b) { return b[0] == kMagic && b[15] == checksum(b); }

} // namespace

Bytes encode(const AssetStamp& s) {
    Bytes b{};
    b[1] = static_cast<std::uint8_t>(s.role);
    b[2] = s.view_index ? static_cast<std::uint8_t>(*s.view_index) : 0xFF;
    for (int i = 0; i < 8; ++i) b[3 + i] = static_cast<std::uint8_t>(s.owner_hash >> (8 * i));
    for (int i = 0; i < 4; ++i) b[11 + i] = static_cast<std::uint8_t>(s.prompt_hash >> (8 * i));
    return seal(b);
}

Bytes encode(const PanelStamp& s) {
    Bytes b{};
    b[1] = static_cast<std::uint8_t>(Role::panel);
    std::size_t n = std::min<std::size_t>(s.token_hashes.size(), 6);
    b[2] = static_cast<std::uint8_t>(n);
    for (std::size_t i = 0; i < n; ++i) {
        b[3 + 2 * i] = static_cast<std::uint8_t>(s.token_hashes[i] & 0xFF);
        b[4 + 2 * i] = static_cast<std::uint8_t>(s.token_hashes[i] >> 8);
    }
    return seal(b);
}

std::optional<AssetStamp> decode_asset(const Bytes& b) {
    if (!valid(b) || b[1] < 1 || b[1] > 3) return std::nullopt;
    AssetStamp s;
    s.role = static_cast<Role>(b[1]);
    if (b[2] != 0xFF) s.view_index = b[2];
    for (int i = 0; i < 8; ++i) s.owner_hash |= static_cast<std::uint64_t>(b[3 + i]) << (8 * i);
    for (int i = 0; i < 4; ++i) s.prompt_hash |= static_cast<std::uint32_t>(b[11 + i]) << (8 * i);
    return s;
}

std::optional<PanelStamp> decode_panel(const Bytes& b) {
    if (!valid(b) || b[1] != static_cast<std::uint8_t>(Role::panel) || b[2] > 6) return std::nullopt;
    PanelStamp s;
    for (int i = 0; i < b[2]; ++i)
        s.token_hashes.push_back(static_cast<std::uint16_t>(b[3 + 2 * i] | (b[4 + 2 * i] << 8)));
    return s;
}

void stamp(Image& image, int x, int y, int cell_px, const Bytes& bytes) {
    const int size = kGridCells * cell_px;
    image.fill_rect(x, y, x + size, y + size, {0, 0, 0, 255});
    for (int i = 0; i < 16; ++i) {
        int cx = x + (1 + i % 4) * cell_px;
        int cy = y + (1 + i / 4) * cell_px;
        std::uint8_t v = bytes[static_cast<std::size_t>(i)];
        image.fill_rect(cx, cy, cx + cell_px, cy + cell_px, {v, static_cast<std::uint8_t>(255 - v), 0, 255});
    }
}

std::optional<Bytes> read(const Image& image, double x, double y, double w, double h) {
    Bytes out{};
    const double cw = w / kGridCells, ch = h / kGridCells;
    for (int i = 0; i < 16; ++i) {
        double fx = x + (1 + i % 4 + 0.5) * cw;
        double fy = y + (1 + i / 4 + 0.5) * ch;
        int px = static_cast<int>(std::floor(fx));
        int py = static_cast<int>(std::floor(fy));
        if (px < 0 || py < 0 || px >= image.width() || py >= image.height()) return std::nullopt;
        Rgba p = image.at(px, py);
        long v = std::lround((p.r + (255 - p.g)) / 2.0);
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
    return out;
}

std::uint16_t token_hash16(std::string_view token) {
    std::uint64_t h = fnv1a64(token);
    return static_cast<std::uint16_t>((h ^ (h >> 16) ^ (h >> 32) ^ (h >> 48)) & 0xFFFF);
}

} // namespace scriptboard::marker
