#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "logokit/core/types.hpp"

namespace logokit {

struct Placement {
    int x = 0;
    int y = 0;
    double scale = 1.0;
    double rotation_deg = 0.0;

    bool operator==(const Placement&) const = default;
};

/// One line of a dataset manifest. prompt and image are required; the rest are
/// tags carried by specific sample kinds.
struct ManifestRecord {
    std::string prompt;
    std::string image;
    std::string object_class;
    std::string split;
    std::string mask;
    std::string logo_id;
    std::string background_kind;   // "solid" | "natural" | ""
    std::optional<Placement> placement;

    bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
    std::vector<ManifestRecord> records;

    bool operator==(const Manifest&) const = default;
    std::size_t size() const { return records.size(); }
};

/// Loads a line-delimited manifest (one JSON record per line, order preserved).
/// Throws LoadError (missing file), ValidationError (schema violations, listed
/// per line/field) or IntegrityError (referenced image/mask unreadable).
Manifest load_manifest(const std::filesystem::path& path);

/// Parses without touching the filesystem for referenced images.
Manifest parse_manifest_text(const std::string& text);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string manifest_to_text(const Manifest& manifest);

/// Groups relation-manifest records into ObjectClass entries keyed by the
/// object_class tag (stable first-appearance order). Enforces the 3-4
/// exemplars-per-class curation rule.
std::vector<ObjectClass> group_relation_classes(const Manifest& manifest);

/// Resolves a manifest-relative file reference against the manifest directory.
std::filesystem::path resolve_manifest_ref(const std::filesystem::path& manifest_dir,
                                           const std::string& ref);

}  // namespace logokit
