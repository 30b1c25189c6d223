#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "logokit/core/config.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/core/types.hpp"
#include "logokit/synth/compositor.hpp"

namespace logokit::synth {

inline constexpr const char* kBindingPrompt = "a <V> on a plain background";
inline constexpr const char* kIdentityPrompt = "a <V> in a scene";

/// Logo on independently drawn contrasting solid backgrounds. Sample i draws
/// from the stream (seed, "binding:i"), so generation order never matters.
std::vector<CompositeSample> build_binding_set(const LogoAsset& logo, const SynthesisConfig& cfg,
                                               std::uint64_t seed);

/// Logo pasted onto natural scenes at placements whose local patch (the
/// placement box dilated by 10%) contrasts with the logo's mean color. Scenes
/// are resized to cfg.out_size. Throws ContrastError naming the scenes when no
/// placement is feasible anywhere.
std::vector<CompositeSample> build_identity_set(const LogoAsset& logo,
                                                const std::vector<std::filesystem::path>& scene_paths,
                                                const SynthesisConfig& cfg, std::uint64_t seed);

/// Writes sample PNGs plus masks under out_dir ("<split>_NNN.png",
/// "<split>_NNN_mask.png") and returns manifest records with relative paths.
Manifest write_samples(const std::vector<CompositeSample>& samples, const std::string& split,
                       const std::filesystem::path& out_dir);

/// Procedural stand-in for relation training data: each class gets `exemplars`
/// images of a class-specific surface rendered in slightly varied poses.
/// Writes PNGs under out_dir and returns relation-tagged records.
Manifest write_relation_set(const std::vector<std::string>& class_names, int exemplars,
                            int out_size, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace logokit::synth
