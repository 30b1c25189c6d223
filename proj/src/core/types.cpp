#include "logokit/core/types.hpp"

#include "logokit/core/errors.hpp"
#include "logokit/core/png_io.hpp"

namespace logokit {

std::array<double, 3> alpha_weighted_mean_color(const Image8& rgba) {
    if (rgba.channels != 4) throw ValidationError("logo raster must be RGBA");
    if (rgba.empty()) throw ValidationError("logo raster has zero area");
    double wsum = 0.0;
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for (int y = 0; y < rgba.height; ++y) {
        for (int x = 0; x < rgba.width; ++x) {
            std::uint8_t a = rgba.at(x, y, 3);
            if (a == 0) continue;
            double w = a / 255.0;
            for (int c = 0; c < 3; ++c) {
                acc[c] += w * srgb_to_linear(rgba.at(x, y, c) / 255.0);
            }
            wsum += w;
        }
    }
    if (wsum <= 0.0) throw ValidationError("logo has no pixel with alpha > 0");
    for (auto& v : acc) v /= wsum;
    return acc;
}

LogoAsset LogoAsset::from_image(Image8 image, std::string id, std::string provenance) {
    LogoAsset asset;
    asset.mean_color = alpha_weighted_mean_color(image);
    asset.image = std::move(image);
    asset.id = std::move(id);
    asset.provenance = std::move(provenance);
    return asset;
}

LogoAsset LogoAsset::load(const std::filesystem::path& path, std::string id) {
    Image8 img = read_png(path);
    if (img.channels == 3) throw ValidationError("logo PNG lacks an alpha channel: " + path.string());
    if (id.empty()) id = path.stem().string();
    return from_image(std::move(img), std::move(id), path.string());
}

void ObjectClass::validate() const {
    if (name.empty()) throw ValidationError("object class has empty name");
    if (exemplar_images.size() < 3 || exemplar_images.size() > 4) {
        throw ValidationError("object class '" + name + "' has " +
                              std::to_string(exemplar_images.size()) +
                              " exemplar images, expected 3 to 4");
    }
}

const char* token_role_name(TokenRole role) {
    return role == TokenRole::relation ? "relation" : "identity";
}

TokenRole token_role_from_name(const std::string& name) {
    if (name == "relation") return TokenRole::relation;
    if (name == "identity") return TokenRole::identity;
    throw ValidationError("unknown token role: " + name);
}

}  // namespace logokit
