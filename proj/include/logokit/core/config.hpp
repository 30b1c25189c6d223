#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace logokit {

struct PhaseHyper {
    int steps = 100;
    double learning_rate = 1e-2;
    int batch_size = 4;
};

struct SynthesisConfig {
    int out_size = 48;  // composite side length in pixels
    int binding_count = 16;
    int identity_count = 32;
    double contrast_threshold = 0.35;
    double scale_min = 0.25;
    double scale_max = 0.6;
    double binding_rotation_deg = 0.0;     // +/- range for binding placements
    double identity_rotation_deg = 15.0;   // +/- range for identity placements
    double margin_frac = 0.02;             // of background shortest side
    int min_logo_px = 8;
    int max_contrast_proposals = 1000;
};

struct BackendConfig {
    std::string kind = "toy";
    std::uint64_t init_seed = 7;
    int image_size = 48;
    int latent_channels = 4;
    int feature_channels = 24;
    int embed_dim = 16;
    int cond_dim = 16;
    int attn_dim = 8;
    int train_steps = 1000;   // forward-process length
    int sample_steps = 50;    // deterministic sampler steps for generation
    double guidance_scale = 1.0;
};

/// Run-wide configuration. The adaptive-sampling constants (lambda, f, A) have
/// no published values; the defaults here are desk-scale choices.
struct RunConfig {
    std::uint64_t seed = 42;
    double lambda = 2.0;
    int recalib_freq_f = 100;
    int total_iters_A = 200;
    int num_objects_N = 20;
    int gens_per_eval = 4;
    std::vector<std::string> object1_pool = {
        "a dog", "an apple", "a star", "a heart", "a smiley face"};

    PhaseHyper phase1{200, 5e-3, 4};  // steps unused here: total_iters_A drives phase 1
    PhaseHyper phase2a{100, 2e-2, 4};
    PhaseHyper phase2b{200, 5e-3, 4};
    bool phase2b_train_token = false;

    SynthesisConfig synthesis;
    BackendConfig backend;

    std::string workdir = "runs";

    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string to_json_text() const;
    static RunConfig from_json_text(const std::string& text);

    /// Throws ValidationError listing every offending field.
    void validate() const;
};

}  // namespace logokit
