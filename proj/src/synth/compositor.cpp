#include "logokit/synth/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "logokit/core/errors.hpp"

namespace logokit::synth {

namespace {

std::uint8_t sample_bilinear(const Image8& src, double sx, double sy, int c) {
    // sx, sy in continuous raster coordinates (pixel centers at k + 0.5)
    double u = sx - 0.5, v = sy - 0.5;
    int x0 = static_cast<int>(std::floor(u));
    int y0 = static_cast<int>(std::floor(v));
    double fx = u - x0, fy = v - y0;
    auto tap = [&](int x, int y) {
        x = std::clamp(x, 0, src.width - 1);
        y = std::clamp(y, 0, src.height - 1);
        return static_cast<double>(src.at(x, y, c));
    };
    double top = tap(x0, y0) * (1.0 - fx) + tap(x0 + 1, y0) * fx;
    double bot = tap(x0, y0 + 1) * (1.0 - fx) + tap(x0 + 1, y0 + 1) * fx;
    double val = top * (1.0 - fy) + bot * fy;
    return static_cast<std::uint8_t>(std::clamp(std::lround(val), 0l, 255l));
}

}  // namespace

Image8 transform_logo(const Image8& rgba, int bg_w, int bg_h, double scale, double rotation_deg) {
    if (rgba.channels != 4 || rgba.empty()) throw ValidationError("transform_logo: RGBA raster required");
    if (!(scale > 0.0 && scale <= 1.0)) throw ScaleError("transform_logo: scale must be in (0,1]");
    const int bg_short = std::min(bg_w, bg_h);
    const int logo_long = std::max(rgba.width, rgba.height);
    const double f = scale * bg_short / logo_long;
    const int sw = std::max(1, static_cast<int>(std::lround(rgba.width * f)));
    const int sh = std::max(1, static_cast<int>(std::lround(rgba.height * f)));

    const double theta = rotation_deg * std::numbers::pi / 180.0;
    if (rotation_deg == 0.0 && sw == rgba.width && sh == rgba.height) return rgba;

    const double c = std::cos(theta), s = std::sin(theta);
    const int ow = std::max(1, static_cast<int>(std::lround(sw * std::abs(c) + sh * std::abs(s))));
    const int oh = std::max(1, static_cast<int>(std::lround(sw * std::abs(s) + sh * std::abs(c))));

    Image8 out(ow, oh, 4, 0);
    const double ocx = ow / 2.0, ocy = oh / 2.0;
    const double scx = sw / 2.0, scy = sh / 2.0;
    const double inv_f = 1.0 / f;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            // rotate back about centers, then undo the scale
            double dx = (x + 0.5) - ocx, dy = (y + 0.5) - ocy;
            double rx = c * dx + s * dy + scx;
            double ry = -s * dx + c * dy + scy;
            double sx = rx * inv_f, sy = ry * inv_f;
            int nx = static_cast<int>(std::floor(sx));
            int ny = static_cast<int>(std::floor(sy));
            if (nx < 0 || nx >= rgba.width || ny < 0 || ny >= rgba.height) continue;
            out.at(x, y, 3) = rgba.at(nx, ny, 3);
            for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = sample_bilinear(rgba, sx, sy, ch);
        }
    }
    return out;
}

PlacementBounds placement_bounds(int bg_w, int bg_h, int tw, int th, double margin_frac) {
    const int margin = static_cast<int>(std::ceil(margin_frac * std::min(bg_w, bg_h)));
    PlacementBounds b;
    b.x_min = margin;
    b.y_min = margin;
    b.x_max = bg_w - margin - tw;
    b.y_max = bg_h - margin - th;
    b.feasible = b.x_max >= b.x_min && b.y_max >= b.y_min;
    return b;
}

CompositeSample composite(const LogoAsset& logo, const Image8& background,
                          const Placement& placement, const SynthesisConfig& cfg) {
    if (background.channels != 3 || background.empty()) {
        throw ValidationError("composite: RGB background required");
    }
    Image8 sticker = transform_logo(logo.image, background.width, background.height,
                                    placement.scale, placement.rotation_deg);
    if (std::min(sticker.width, sticker.height) < cfg.min_logo_px) {
        throw ScaleError("composite: transformed logo is " + std::to_string(sticker.width) + "x" +
                         std::to_string(sticker.height) + ", below the " +
                         std::to_string(cfg.min_logo_px) + "px minimum");
    }
    auto bounds = placement_bounds(background.width, background.height, sticker.width,
                                   sticker.height, cfg.margin_frac);
    if (!bounds.feasible || placement.x < bounds.x_min || placement.x > bounds.x_max ||
        placement.y < bounds.y_min || placement.y > bounds.y_max) {
        throw PlacementError("composite: placement (" + std::to_string(placement.x) + "," +
                             std::to_string(placement.y) + ") violates the margin rule for a " +
                             std::to_string(sticker.width) + "x" + std::to_string(sticker.height) +
                             " logo on a " + std::to_string(background.width) + "x" +
                             std::to_string(background.height) + " background");
    }

    CompositeSample sample;
    sample.image = background;
    sample.mask = Image8(background.width, background.height, 1, 0);
    sample.placement = placement;
    sample.logo_id = logo.id;
    long mask_area = 0;
    for (int j = 0; j < sticker.height; ++j) {
        for (int i = 0; i < sticker.width; ++i) {
            const std::uint8_t a = sticker.at(i, j, 3);
            if (a == 0) continue;
            const int ox = placement.x + i, oy = placement.y + j;
            if (a == 255) {
                for (int ch = 0; ch < 3; ++ch) sample.image.at(ox, oy, ch) = sticker.at(i, j, ch);
            } else {
                for (int ch = 0; ch < 3; ++ch) {
                    const double blended = (a * static_cast<double>(sticker.at(i, j, ch)) +
                                            (255 - a) * static_cast<double>(sample.image.at(ox, oy, ch))) /
                                           255.0;
                    sample.image.at(ox, oy, ch) =
                        static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0l, 255l));
                }
            }
            if (a > 127) {
                sample.mask.at(ox, oy, 0) = 255;
                ++mask_area;
            }
        }
    }
    if (mask_area == 0) {
        throw ValidationError("composite: mask area is zero (logo fully transparent after transform)");
    }
    return sample;
}

std::array<std::uint8_t, 3> pick_solid_background(const LogoAsset& logo, double threshold,
                                                  int max_proposals, Rng& rng) {
    const double logo_lum = relative_luminance(logo.mean_color);
    for (int i = 0; i < max_proposals; ++i) {
        std::array<std::uint8_t, 3> c = {static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                         static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                         static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
        const double lum = relative_luminance(srgb_to_linear(c[0] / 255.0),
                                              srgb_to_linear(c[1] / 255.0),
                                              srgb_to_linear(c[2] / 255.0));
        if (std::abs(lum - logo_lum) >= threshold) return c;
    }
    throw ContrastError("no background color reached contrast " + std::to_string(threshold) +
                        " against the logo after " + std::to_string(max_proposals) +
                        " proposals; relax the threshold");
}

Image8 resize_rgb(const Image8& rgb, int w, int h) {
    if (rgb.channels != 3) throw ValidationError("resize_rgb: RGB raster required");
    if (w < 1 || h < 1) throw DomainError("resize_rgb: target size must be positive");
    if (rgb.width == w && rgb.height == h) return rgb;
    Image8 out(w, h, 3);
    const double fx = static_cast<double>(rgb.width) / w;
    const double fy = static_cast<double>(rgb.height) / h;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sx = (x + 0.5) * fx, sy = (y + 0.5) * fy;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = sample_bilinear(rgb, sx, sy, c);
        }
    }
    return out;
}

std::array<double, 3> patch_mean_color(const Image8& rgb, int x0, int y0, int x1, int y1) {
    if (rgb.channels != 3) throw ValidationError("patch_mean_color: RGB raster required");
    x0 = std::clamp(x0, 0, rgb.width);
    x1 = std::clamp(x1, 0, rgb.width);
    y0 = std::clamp(y0, 0, rgb.height);
    y1 = std::clamp(y1, 0, rgb.height);
    if (x1 <= x0 || y1 <= y0) throw DomainError("patch_mean_color: empty region");
    std::array<double, 3> mean = {0.0, 0.0, 0.0};
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) mean[c] += srgb_to_linear(rgb.at(x, y, c) / 255.0);
        }
    }
    const double n = static_cast<double>(x1 - x0) * (y1 - y0);
    for (auto& v : mean) v /= n;
    return mean;
}

}  // namespace logokit::synth
