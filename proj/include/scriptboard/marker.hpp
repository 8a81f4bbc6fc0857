#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "scriptboard/image.hpp"

namespace scriptboard {

/// Machine-readable corner block: 16 payload bytes laid out as a 4x4 grid of
/// cells inside a one-cell black frame (6x6 cells overall). Each cell color is
/// (b, 255 - b, 0), which is fully saturated and never removed by white keying.
namespace marker {

inline constexpr int kGridCells = 6;
inline constexpr std::uint8_t kMagic = 0xB5;

enum class Role : std::uint8_t {
    character_ref = 1,
    spot_ref = 2,
    character_view = 3,
    panel = 4,
};

using Bytes = std::array<std::uint8_t, 16>;

struct AssetStamp {
    Role role = Role::character_ref;
    std::optional<int> view_index;
    std::uint64_t owner_hash = 0;
    std::uint32_t prompt_hash = 0;

    bool operator==(const AssetStamp&) const = default;
};

/// Up to six 16-bit token hashes describing what a panel shows.
struct PanelStamp {
    std::vector<std::uint16_t> token_hashes;
    bool operator==(const PanelStamp&) const = default;
};

Bytes encode(const AssetStamp& stamp);
Bytes encode(const PanelStamp& stamp);
std::optional<AssetStamp> decode_asset(const Bytes& bytes);
std::optional<PanelStamp> decode_panel(const Bytes& bytes);

/// Draws the block with its top-left corner at (x, y).
void stamp(Image& image, int x, int y, int cell_px, const Bytes& bytes);

/// Reads the block occupying the rectangle (x, y, w, h) in `image`, sampling
/// each cell at its center; works on scaled copies of a stamped block.
std::optional<Bytes> read(const Image& image, double x, double y, double w, double h);

/// 16-bit token hash shared by panel stamps and the mock embedder.
std::uint16_t token_hash16(std::string_view token);

} // namespace marker
} // namespace scriptboard
