#include "support.hpp"

#include <atomic>
#include <random>

namespace lktest {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    const unsigned n = counter.fetch_add(1);
    path = fs::temp_directory_path() /
           ("logokit_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(n));
    fs::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
}

LogoAsset make_logo(int size, std::uint8_t alpha) {
    Image8 img(size, size, 4);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const bool left = x < size / 2;
            img.at(x, y, 0) = left ? 160 : 30;
            img.at(x, y, 1) = 30;
            img.at(x, y, 2) = left ? 30 : 160;
            img.at(x, y, 3) = alpha;
        }
    }
    return LogoAsset::from_image(img, "twotone");
}

LogoAsset make_bold_logo(int size) {
    Image8 img(size, size, 4);
    const double c = (size - 1) / 2.0;
    const double r2 = (size * 0.32) * (size * 0.32);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double d2 = (x - c) * (x - c) + (y - c) * (y - c);
            const bool inner = d2 <= r2;
            img.at(x, y, 0) = inner ? 245 : 10;
            img.at(x, y, 1) = inner ? 225 : 10;
            img.at(x, y, 2) = inner ? 40 : 10;
            img.at(x, y, 3) = 255;
        }
    }
    return LogoAsset::from_image(img, "bold");
}

Image8 solid_rgb(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image8 img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    }
    return img;
}

RunConfig small_config() {
    RunConfig cfg;
    cfg.backend.image_size = 16;
    cfg.backend.latent_channels = 4;
    cfg.backend.feature_channels = 8;
    cfg.backend.embed_dim = 12;
    cfg.backend.cond_dim = 10;
    cfg.backend.attn_dim = 6;
    cfg.backend.train_steps = 50;
    cfg.backend.sample_steps = 8;
    cfg.synthesis.out_size = 16;
    cfg.synthesis.min_logo_px = 3;
    return cfg;
}

fs::path source_dir() { return fs::path(LOGOKIT_SOURCE_DIR); }

}  // namespace lktest
