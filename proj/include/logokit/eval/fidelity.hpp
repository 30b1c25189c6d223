#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "logokit/backend/backend.hpp"
#include "logokit/core/types.hpp"
#include "logokit/embed/embedder.hpp"

namespace logokit::eval {

/// Evaluation protocol: every logo in every context under every seed.
struct EvalGrid {
    std::vector<std::string> logos;     // logo ids
    std::vector<std::string> contexts;  // templates containing "<V>" exactly once
    std::vector<std::uint64_t> seeds;

    std::size_t cell_count() const { return logos.size() * contexts.size() * seeds.size(); }
    void validate() const;  // TemplateError / ValidationError
};

/// One grid cell. Failed cells carry NaN scores and are excluded from the
/// aggregates.
struct CellScore {
    std::string logo;
    int context_index = 0;
    std::uint64_t seed = 0;
    double clip_t = 0.0;
    double clip_i = 0.0;
    double dino = 0.0;
};

struct FidelityReport {
    std::vector<CellScore> cells;
    double mean_clip_t = 0.0;
    double mean_clip_i = 0.0;
    double mean_dino = 0.0;
    int warning_count = 0;  // failed cells excluded from the means
    std::string checkpoint;
    std::string joint_embedder_version;
    std::string image_embedder_version;

    std::string to_json_text() const;
    static FidelityReport from_json_text(const std::string& text);
    /// Equality with NaN cells compared as equal.
    bool equals(const FidelityReport& other) const;
};

/// Substitutes the identity token with the word "logo" for prompt-fidelity
/// scoring. The template must contain "<V>" exactly once (TemplateError).
std::string prompt_for_scoring(const std::string& context_template);

/// Cosine similarity between the image and prompt embeddings.
double clip_t(const Image8& image, const std::string& scoring_prompt,
              const embed::JointEmbedder& embedder);

/// Mean cosine similarity between the image embedding and each reference
/// embedding. DomainError on an empty reference list.
double clip_i(const Image8& image, std::span<const Image8> references,
              const embed::ImageEmbedder& embedder);

/// The logo raster composited centered onto a white background, used as the
/// identity-fidelity reference.
Image8 reference_image(const LogoAsset& logo, int size);

/// Generates and scores every cell. Cell failures become NaN scores plus a
/// warning count; aggregates are means over the finite cells.
FidelityReport run_grid(const diffusion::DiffusionBackend& backend, const EvalGrid& grid,
                        const std::map<std::string, LogoAsset>& logo_assets,
                        const embed::JointEmbedder& joint, const embed::ImageEmbedder& image_embedder,
                        int sample_steps, const std::string& checkpoint_label = "");

}  // namespace logokit::eval
