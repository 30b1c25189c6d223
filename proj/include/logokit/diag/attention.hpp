#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logokit/backend/backend.hpp"
#include "logokit/core/image.hpp"
#include "logokit/core/rng.hpp"

namespace logokit::diag {

/// Cross-attention rasters for one token over one image: one map per
/// (layer, timestep), each normalized to unit mass over spatial positions.
struct AttentionStack {
    std::vector<diffusion::Tensor> maps;
    std::string token;
    std::string source;  // informational image reference
};

/// Resolves the token to its contiguous id-subsequence in the prompt
/// tokenization. The span must occur exactly once; otherwise
/// TokenizationError. Returns [begin, end) token positions.
std::pair<int, int> token_span(const diffusion::DiffusionBackend& backend,
                               const std::string& prompt, const std::string& token);

/// Noises the encoded image to each requested timestep (fractions of the
/// schedule, with one shared noise draw), runs a denoiser pass, and collects
/// every attention layer's map for the token span. Multi-position spans are
/// averaged over positions.
AttentionStack token_attention(const diffusion::DiffusionBackend& backend, const ImageF& image,
                               const std::string& prompt, const std::string& token,
                               std::span<const double> timestep_fracs, Rng& rng);

inline constexpr double kDefaultTimestepFracs[] = {0.2, 0.5, 0.8};

/// Unweighted mean over all maps in the stack. DomainError when empty.
diffusion::Tensor average_map(const AttentionStack& stack);

/// Fraction of the map's mass that falls inside the mask. The binary mask is
/// downsampled to map resolution by exact area weighting. DomainError on an
/// empty mask.
double localization_score(const diffusion::Tensor& avg_map, const Image8& mask);

}  // namespace logokit::diag
