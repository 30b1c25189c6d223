#include "logokit/core/image.hpp"

#include <algorithm>
#include <cmath>

namespace logokit {

double srgb_to_linear(double v) {
    if (v <= 0.04045) return v / 12.92;
    return std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    if (v <= 0.0031308) return v * 12.92;
    return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

ImageF to_linear(const Image8& img) {
    ImageF out(img.width, img.height, img.channels);
    const int color_channels = (img.channels == 2 || img.channels == 4) ? img.channels - 1 : img.channels;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        int c = static_cast<int>(i % img.channels);
        double v = img.data[i] / 255.0;
        out.data[i] = (c < color_channels) ? srgb_to_linear(v) : v;
    }
    return out;
}

Image8 to_srgb8(const ImageF& img) {
    Image8 out(img.width, img.height, img.channels);
    const int color_channels = (img.channels == 2 || img.channels == 4) ? img.channels - 1 : img.channels;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        int c = static_cast<int>(i % img.channels);
        double v = std::clamp(img.data[i], 0.0, 1.0);
        if (c < color_channels) v = linear_to_srgb(v);
        out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

double relative_luminance(double r, double g, double b) {
    return 0.2126 * r + 0.7152 * g + 0.0722 * b;
}

double relative_luminance(const std::array<double, 3>& rgb) {
    return relative_luminance(rgb[0], rgb[1], rgb[2]);
}

Image8 flatten_rgb(const Image8& img) {
    if (img.channels == 3) return img;
    Image8 out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = img.channels < 3 ? img.at(x, y, 0) : img.at(x, y, c);
            }
        }
    }
    return out;
}

}  // namespace logokit
