#include "logokit/core/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "logokit/core/errors.hpp"

namespace logokit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    (void)png;
    throw LoadError(std::string("png: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp) {}

}  // namespace

Image8 read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw LoadError("cannot open " + path.string());

    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw LoadError("not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw LoadError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw LoadError("png_create_info_struct failed");
    }

    Image8 img;
    try {
        png_init_io(png, fp.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        png_set_expand(png);            // palette -> RGB, gray<8 -> 8, tRNS -> alpha
        png_set_strip_16(png);
        png_read_update_info(png, info);

        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = static_cast<int>(png_get_channels(png, info));
        if (img.channels == 2) {
            // gray+alpha: promote to RGBA for a uniform channel set
            png_set_gray_to_rgb(png);
            png_read_update_info(png, info);
            img.channels = static_cast<int>(png_get_channels(png, info));
        }
        img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);

        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y) {
            rows[y] = img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const Image8& img, const std::filesystem::path& path) {
    if (img.empty()) throw DomainError("write_png: empty image");
    if (img.channels != 1 && img.channels != 3 && img.channels != 4) {
        throw DomainError("write_png: unsupported channel count " + std::to_string(img.channels));
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw LoadError("cannot open for write: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
    if (!png) throw LoadError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw LoadError("png_create_info_struct failed");
    }

    try {
        png_init_io(png, fp.get());
        // Fixed settings keep output byte-stable for identical pixel data.
        png_set_compression_level(png, 6);
        png_set_filter(png, 0, PNG_FILTER_NONE);
        int color_type = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                             : PNG_COLOR_TYPE_RGBA;
        png_set_IHDR(png, info, img.width, img.height, 8, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y) {
            rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels);
        }
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

bool is_readable_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) return false;
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8) return false;
    return png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace logokit
