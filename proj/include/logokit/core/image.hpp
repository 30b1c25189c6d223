#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace logokit {

/// 8-bit raster, sRGB-encoded color channels, straight (non-premultiplied) alpha.
/// channels: 1 = gray, 3 = RGB, 4 = RGBA. Row-major, interleaved.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return width <= 0 || height <= 0; }
    std::size_t idx(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    std::uint8_t& at(int x, int y, int c) { return data[idx(x, y, c)]; }
    std::uint8_t at(int x, int y, int c) const { return data[idx(x, y, c)]; }

    bool operator==(const Image8&) const = default;
};

/// Floating-point raster in linear light, values nominally in [0, 1].
struct ImageF {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    ImageF() = default;
    ImageF(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return width <= 0 || height <= 0; }
    std::size_t idx(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c) { return data[idx(x, y, c)]; }
    double at(int x, int y, int c) const { return data[idx(x, y, c)]; }
};

double srgb_to_linear(double v);
double linear_to_srgb(double v);

/// sRGB 8-bit -> linear double. Color channels are gamma-decoded; an alpha
/// channel, when present, is scaled linearly to [0,1].
ImageF to_linear(const Image8& img);
/// Linear double -> sRGB 8-bit with clamping and round-to-nearest.
Image8 to_srgb8(const ImageF& img);

/// Relative luminance of a linear-light RGB triple (Rec. 709 weights).
double relative_luminance(double r, double g, double b);
double relative_luminance(const std::array<double, 3>& rgb);

/// Gray replicated, alpha dropped; RGB input returned unchanged.
Image8 flatten_rgb(const Image8& img);

}  // namespace logokit
