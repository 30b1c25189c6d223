#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "logokit/backend/backend.hpp"

namespace logokit::diffusion {

/// Sidecar header of a checkpoint file. trained_tokens accumulates the special
/// tokens optimized so far, which is how later phases verify their
/// prerequisites.
struct CheckpointMeta {
    std::string phase;
    int iteration = 0;
    std::vector<std::string> trained_tokens;

    bool operator==(const CheckpointMeta&) const = default;
};

/// Serializes all parameter groups with per-group tensor manifests and
/// bit-level checksums.
void save_checkpoint(const DiffusionBackend& backend, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

/// Restores parameters in place. Special tokens listed in the header that the
/// backend lacks are registered first; shape or checksum mismatches raise
/// IntegrityError.
CheckpointMeta load_checkpoint(DiffusionBackend& backend, const std::filesystem::path& path);

/// Reads only the header.
CheckpointMeta peek_checkpoint(const std::filesystem::path& path);

}  // namespace logokit::diffusion
