#pragma once

#include <cstdint>

#include "scriptboard/image.hpp"
#include "scriptboard/marker.hpp"

namespace scriptboard::mock_render {

/// Fraction of asset height at which the rendered head is centered; the
/// layout engine uses the same value for close-up framing.
inline constexpr double kHeadCenterFraction = 0.212;
inline constexpr int kCharacterWidth = 512;
inline constexpr int kCharacterHeight = 768;

/// Marker cell size for an asset of the given dimensions.
int marker_cell_px(int width, int height);

/// Full-body humanoid on a pure white background, seen from `azimuth_deg`
/// (0 = frontal, clockwise viewed from above). Palette derives from
/// `palette_key`; `stamp` is drawn in the top-left corner.
Image render_character(std::uint64_t palette_key, double azimuth_deg, int width, int height,
                       const marker::Bytes& stamp);

/// Textured location backdrop.
Image render_spot(std::uint64_t palette_key, std::uint64_t layout_key, int width, int height,
                  const marker::Bytes& stamp);

/// Non-white mask of a character render, excluding the marker corner.
std::vector<bool> silhouette(const Image& image);

} // namespace scriptboard::mock_render
