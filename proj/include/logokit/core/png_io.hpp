#pragma once

#include <filesystem>

#include "logokit/core/image.hpp"

namespace logokit {

/// Reads an 8-bit PNG. Palette and 16-bit files are expanded/stripped to 8-bit;
/// the channel count of the result is 1 (gray), 3 (RGB) or 4 (RGBA).
Image8 read_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG (1, 3 or 4 channels). Encoding settings are fixed so
/// identical images produce byte-identical files.
void write_png(const Image8& img, const std::filesystem::path& path);

/// Cheap readability probe: file exists, is openable, and starts with the PNG
/// signature.
bool is_readable_png(const std::filesystem::path& path);

}  // namespace logokit
