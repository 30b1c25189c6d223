#include "logokit/synth/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "logokit/core/errors.hpp"
#include "logokit/core/png_io.hpp"

namespace logokit::synth {

namespace {

constexpr int kPlacementProposals = 100;

Image8 solid_rgb(int size, const std::array<std::uint8_t, 3>& color) {
    Image8 img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
        }
    }
    return img;
}

struct Proposal {
    Placement placement;
    int tw = 0, th = 0;
};

/// Draws scale/rotation/top-left for one placement; rejects infeasible draws.
bool propose_placement(const Image8& logo_rgba, int bg_size, double rot_range,
                       const SynthesisConfig& cfg, Rng& rng, Proposal& out) {
    const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
    const double rot = rot_range > 0.0 ? rng.uniform(-rot_range, rot_range) : 0.0;
    Image8 sticker = transform_logo(logo_rgba, bg_size, bg_size, scale, rot);
    if (std::min(sticker.width, sticker.height) < cfg.min_logo_px) return false;
    auto bounds = placement_bounds(bg_size, bg_size, sticker.width, sticker.height, cfg.margin_frac);
    if (!bounds.feasible) return false;
    out.placement.x = static_cast<int>(rng.uniform_int(bounds.x_min, bounds.x_max));
    out.placement.y = static_cast<int>(rng.uniform_int(bounds.y_min, bounds.y_max));
    out.placement.scale = scale;
    out.placement.rotation_deg = rot;
    out.tw = sticker.width;
    out.th = sticker.height;
    return true;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

}  // namespace

std::vector<CompositeSample> build_binding_set(const LogoAsset& logo, const SynthesisConfig& cfg,
                                               std::uint64_t seed) {
    if (cfg.binding_count < 1) throw DomainError("build_binding_set: count must be >= 1");
    std::vector<CompositeSample> samples;
    samples.reserve(cfg.binding_count);
    for (int i = 0; i < cfg.binding_count; ++i) {
        Rng rng(seed, "binding:" + std::to_string(i));
        auto color = pick_solid_background(logo, cfg.contrast_threshold, cfg.max_contrast_proposals, rng);
        Image8 bg = solid_rgb(cfg.out_size, color);
        Proposal prop;
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementProposals && !placed; ++attempt) {
            placed = propose_placement(logo.image, cfg.out_size, cfg.binding_rotation_deg, cfg, rng, prop);
        }
        if (!placed) {
            throw PlacementError("build_binding_set: no feasible placement for logo '" + logo.id +
                                 "' on a " + std::to_string(cfg.out_size) + "px background");
        }
        CompositeSample sample = composite(logo, bg, prop.placement, cfg);
        sample.background_kind = "solid";
        sample.prompt = kBindingPrompt;
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<CompositeSample> build_identity_set(const LogoAsset& logo,
                                                const std::vector<std::filesystem::path>& scene_paths,
                                                const SynthesisConfig& cfg, std::uint64_t seed) {
    if (cfg.identity_count < 1) throw DomainError("build_identity_set: count must be >= 1");
    if (scene_paths.empty()) throw DomainError("build_identity_set: at least one scene required");
    std::vector<Image8> scenes;
    scenes.reserve(scene_paths.size());
    for (const auto& p : scene_paths) {
        scenes.push_back(resize_rgb(flatten_rgb(read_png(p)), cfg.out_size, cfg.out_size));
    }
    const double logo_lum = relative_luminance(logo.mean_color);

    std::vector<CompositeSample> samples;
    samples.reserve(cfg.identity_count);
    for (int i = 0; i < cfg.identity_count; ++i) {
        Rng rng(seed, "identity:" + std::to_string(i));
        const int first = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(scenes.size()) - 1));
        bool placed = false;
        for (std::size_t s = 0; s < scenes.size() && !placed; ++s) {
            const int scene_idx = (first + static_cast<int>(s)) % static_cast<int>(scenes.size());
            const Image8& scene = scenes[scene_idx];
            for (int attempt = 0; attempt < cfg.max_contrast_proposals && !placed; ++attempt) {
                Proposal prop;
                if (!propose_placement(logo.image, cfg.out_size, cfg.identity_rotation_deg, cfg, rng, prop)) {
                    continue;
                }
                const int dx = static_cast<int>(std::ceil(0.1 * prop.tw));
                const int dy = static_cast<int>(std::ceil(0.1 * prop.th));
                auto mean = patch_mean_color(scene, prop.placement.x - dx, prop.placement.y - dy,
                                             prop.placement.x + prop.tw + dx,
                                             prop.placement.y + prop.th + dy);
                if (std::abs(relative_luminance(mean) - logo_lum) < cfg.contrast_threshold) continue;
                CompositeSample sample = composite(logo, scene, prop.placement, cfg);
                sample.background_kind = "natural";
                sample.prompt = kIdentityPrompt;
                samples.push_back(std::move(sample));
                placed = true;
            }
        }
        if (!placed) {
            std::string names;
            for (const auto& p : scene_paths) names += (names.empty() ? "" : ", ") + p.string();
            throw ContrastError("build_identity_set: no placement with contrast >= " +
                                std::to_string(cfg.contrast_threshold) + " found on any scene (" +
                                names + "); relax the threshold or supply brighter/darker scenes");
        }
    }
    return samples;
}

Manifest write_samples(const std::vector<CompositeSample>& samples, const std::string& split,
                       const std::filesystem::path& out_dir) {
    Manifest manifest;
    char buf[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        std::snprintf(buf, sizeof(buf), "%s_%03zu", split.c_str(), i);
        const std::string image_name = std::string(buf) + ".png";
        const std::string mask_name = std::string(buf) + "_mask.png";
        write_png(s.image, out_dir / image_name);
        write_png(s.mask, out_dir / mask_name);
        ManifestRecord r;
        r.prompt = s.prompt;
        r.image = image_name;
        r.mask = mask_name;
        r.split = split;
        r.logo_id = s.logo_id;
        r.background_kind = s.background_kind;
        r.placement = s.placement;
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

Manifest write_relation_set(const std::vector<std::string>& class_names, int exemplars,
                            int out_size, std::uint64_t seed, const std::filesystem::path& out_dir) {
    if (class_names.empty()) throw DomainError("write_relation_set: class list is empty");
    if (exemplars < 3 || exemplars > 4) {
        throw ValidationError("write_relation_set: exemplars per class must be 3 or 4");
    }
    Manifest manifest;
    for (const auto& name : class_names) {
        Rng rng(seed, "relation:" + name);
        std::array<std::uint8_t, 3> bg = {static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                          static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                                          static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
        std::array<std::uint8_t, 3> fg = {static_cast<std::uint8_t>(255 - bg[0]),
                                          static_cast<std::uint8_t>(255 - bg[1]),
                                          static_cast<std::uint8_t>(255 - bg[2])};
        for (int e = 0; e < exemplars; ++e) {
            Image8 img = solid_rgb(out_size, bg);
            // the "object": a filled disc whose position/size drifts per pose
            const int jitter = out_size / 10;
            const double cx = out_size / 2.0 + rng.uniform_int(-jitter, jitter);
            const double cy = out_size / 2.0 + rng.uniform_int(-jitter, jitter);
            const double radius = out_size * (0.25 + 0.05 * static_cast<double>(rng.uniform_int(0, 2)));
            for (int y = 0; y < out_size; ++y) {
                for (int x = 0; x < out_size; ++x) {
                    const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                    if (d <= radius) {
                        for (int c = 0; c < 3; ++c) img.at(x, y, c) = fg[c];
                    }
                }
            }
            const std::string image_name =
                "relation_" + sanitize(name) + "_" + std::to_string(e) + ".png";
            write_png(img, out_dir / image_name);
            ManifestRecord r;
            r.prompt = "a photo of " + name;
            r.image = image_name;
            r.object_class = name;
            r.split = "relation";
            manifest.records.push_back(std::move(r));
        }
    }
    return manifest;
}

}  // namespace logokit::synth
