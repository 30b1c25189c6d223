#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "logokit/core/config.hpp"
#include "logokit/core/image.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/core/rng.hpp"
#include "logokit/core/types.hpp"

namespace logokit::synth {

/// One composited training sample. The mask marks pixels where the transformed
/// logo's alpha exceeds 0.5.
struct CompositeSample {
    Image8 image;  // RGB
    Image8 mask;   // single channel, 255 inside the logo
    Placement placement;
    std::string background_kind;  // "solid" | "natural"
    std::string prompt;
    std::string logo_id;
};

/// Resamples the logo for placement: bilinear for color, nearest for alpha.
/// scale is the ratio of the logo's longest side to the background's shortest
/// side. A transform that changes nothing (rotation 0, same pixel size)
/// returns the raster unchanged.
Image8 transform_logo(const Image8& rgba, int bg_w, int bg_h, double scale, double rotation_deg);

/// Feasible top-left range for a (tw x th) raster inside (bg_w x bg_h) with
/// the margin rule. Empty ranges are reported via feasible = false.
struct PlacementBounds {
    int x_min = 0, x_max = -1;
    int y_min = 0, y_max = -1;
    bool feasible = false;
};
PlacementBounds placement_bounds(int bg_w, int bg_h, int tw, int th, double margin_frac);

/// Source-over compositing of the transformed logo onto an RGB background.
/// Fully opaque logo pixels are copied byte for byte. Throws ScaleError when
/// the transformed logo is under min_logo_px on a side, PlacementError when
/// the margin rule is violated, ValidationError when the resulting mask is
/// empty. background_kind and prompt are left for the caller to fill.
CompositeSample composite(const LogoAsset& logo, const Image8& background,
                          const Placement& placement, const SynthesisConfig& cfg = {});

/// Rejection-samples an 8-bit sRGB color whose relative luminance differs from
/// the logo's mean color by at least threshold (measured in linear light).
/// Throws ContrastError after max_proposals rejected draws.
std::array<std::uint8_t, 3> pick_solid_background(const LogoAsset& logo, double threshold,
                                                  int max_proposals, Rng& rng);

/// Mean linear-RGB color of an 8-bit RGB region (clamped to image bounds).
std::array<double, 3> patch_mean_color(const Image8& rgb, int x0, int y0, int x1, int y1);

/// Bilinear resize of an RGB raster. A no-op when sizes already match.
Image8 resize_rgb(const Image8& rgb, int w, int h);

}  // namespace logokit::synth
