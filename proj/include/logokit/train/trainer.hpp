#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "logokit/backend/backend.hpp"
#include "logokit/backend/checkpoint.hpp"
#include "logokit/core/config.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/embed/embedder.hpp"
#include "logokit/sched/scheduler.hpp"

namespace logokit::train {

inline constexpr const char* kRelationLiteral = "<painted>";
inline constexpr const char* kIdentityLiteral = "<V>";

enum class SamplerKind { uniform, actor_critic };

/// One training phase against a backend.
struct TrainPhaseConfig {
    std::string name;
    diffusion::TrainableSet trainable;
    std::vector<SpecialToken> prompts_use_tokens;
    int steps = 1;
    double learning_rate = 1e-2;
    int batch_size = 1;
    SamplerKind sampler = SamplerKind::uniform;

    void validate(const diffusion::DiffusionBackend& backend) const;
};

struct TrainState {
    int iteration = 0;
    std::vector<double> loss_history;
    std::optional<sched::SchedulerState> scheduler_state;
    std::vector<std::string> checkpoints;  // files written, in order
};

/// Adam over one parameter-group span. Zero gradients leave both the moments
/// and the parameters bit-identical, which keeps freeze contracts intact for
/// masked rows.
class Adam {
public:
    Adam(double learning_rate, std::size_t size);
    void step(std::span<double> params, std::span<const double> grads);

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    int t_ = 0;
    std::vector<double> m_, v_;
};

/// Denoising objective for one sample: encode, noise to t, predict, mean
/// squared error over elements.
double ldm_loss(const diffusion::DiffusionBackend& backend, const ImageF& image,
                const std::string& prompt, int t, const diffusion::Tensor& eps);

/// Phase 1: actor-critic relation pre-training. Trains the relation token row
/// and the text encoder; the denoiser stays frozen. Writes a checkpoint, a
/// loss log and a scheduler history under out_dir (skipped when out_dir is
/// empty). A critic failure saves an abort checkpoint and rethrows.
TrainState run_phase1_relation(diffusion::DiffusionBackend& backend, const Manifest& relation_manifest,
                               const std::filesystem::path& manifest_dir, const RunConfig& config,
                               const embed::JointEmbedder& critic,
                               const std::filesystem::path& out_dir);

/// Phase 2a: optimizes only the identity-token embedding on the binding set.
TrainState run_phase2a_binding(diffusion::DiffusionBackend& backend, const Manifest& binding_manifest,
                               const std::filesystem::path& manifest_dir, const RunConfig& config,
                               const std::filesystem::path& out_dir,
                               const std::vector<std::string>& prior_trained_tokens = {});

/// Phase 2b: fine-tunes the denoiser on the identity set. Refuses to start
/// unless provenance shows a trained identity token (PhaseOrderingError).
TrainState run_phase2b_identity(diffusion::DiffusionBackend& backend, const Manifest& identity_manifest,
                                const std::filesystem::path& manifest_dir, const RunConfig& config,
                                const diffusion::CheckpointMeta& provenance,
                                const std::filesystem::path& out_dir);

}  // namespace logokit::train
