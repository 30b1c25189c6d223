#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "logokit/core/config.hpp"
#include "logokit/core/image.hpp"
#include "logokit/core/types.hpp"

namespace lktest {

using namespace logokit;

/// Unique scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

/// Two-tone dark square logo (RGBA) with uniform alpha.
LogoAsset make_logo(int size = 12, std::uint8_t alpha = 255);

/// High-contrast logo with a coarse shape, suited to tiny render sizes.
LogoAsset make_bold_logo(int size = 12);

Image8 solid_rgb(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Config with small backend dimensions for fast training tests.
RunConfig small_config();

/// Repository root (compile-time constant from the build system).
std::filesystem::path source_dir();

}  // namespace lktest
