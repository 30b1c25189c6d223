#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "logokit/core/image.hpp"

namespace logokit {

/// A user-provided logo: RGBA raster (straight alpha; premultiplied alpha is
/// not accepted) plus its alpha-weighted mean color in linear RGB.
struct LogoAsset {
    std::string id;
    Image8 image;                      // RGBA
    std::array<double, 3> mean_color;  // linear RGB, each in [0,1]
    std::string provenance;            // source file path

    /// Loads an RGBA PNG and derives mean_color. Throws ValidationError if the
    /// raster has no alpha channel, zero area, or no pixel with alpha > 0.
    static LogoAsset load(const std::filesystem::path& path, std::string id = "");
    /// Builds the asset from an in-memory raster (same validation).
    static LogoAsset from_image(Image8 image, std::string id, std::string provenance = "");
};

/// Alpha-weighted mean of linear RGB over pixels with alpha > 0.
std::array<double, 3> alpha_weighted_mean_color(const Image8& rgba);

/// One "object2" surface class of the relation dataset.
struct ObjectClass {
    std::string name;
    std::vector<std::string> exemplar_images;   // 3..4 per curation rule
    std::vector<std::string> prompt_templates;

    void validate() const;  // throws ValidationError on curation-rule breach
};

enum class TokenRole { relation, identity };

struct SpecialToken {
    std::string literal;     // e.g. "<painted>", "<V>"
    int embedding_dim = 0;
    TokenRole role = TokenRole::identity;
};

const char* token_role_name(TokenRole role);
TokenRole token_role_from_name(const std::string& name);

}  // namespace logokit
