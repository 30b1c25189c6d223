#include "logokit/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "logokit/core/errors.hpp"
#include "logokit/core/png_io.hpp"

namespace logokit::train {

using diffusion::DiffusionBackend;
using diffusion::ParamGroup;
using diffusion::Tensor;
using diffusion::TrainableSet;
using diffusion::TrainItem;
using nlohmann::json;

void TrainPhaseConfig::validate(const DiffusionBackend& backend) const {
    if (!trainable.any()) throw ValidationError("phase '" + name + "': no trainable groups");
    if (steps < 1) throw ValidationError("phase '" + name + "': steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("phase '" + name + "': learning rate must be > 0");
    if (batch_size < 1) throw ValidationError("phase '" + name + "': batch size must be >= 1");
    for (const auto& tok : prompts_use_tokens) {
        if (!backend.has_token(tok.literal)) {
            throw ValidationError("phase '" + name + "': token " + tok.literal +
                                  " must be registered before the phase starts");
        }
    }
}

Adam::Adam(double learning_rate, std::size_t size)
    : lr_(learning_rate), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("Adam: parameter span size changed since construction");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        const double update = lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        if (update != 0.0) params[i] -= update;
    }
}

double ldm_loss(const DiffusionBackend& backend, const ImageF& image, const std::string& prompt,
                int t, const Tensor& eps) {
    Tensor z = backend.encode_image(image);
    Tensor z_t = diffusion::noise_latent(z, t, eps, backend.schedule());
    Tensor eps_hat = backend.denoise(z_t, t, prompt);
    double acc = 0.0;
    for (std::size_t i = 0; i < eps_hat.numel(); ++i) {
        const double d = eps_hat[i] - eps[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps_hat.numel());
}

namespace {

ImageF load_training_image(const std::filesystem::path& path, int image_size) {
    Image8 img = flatten_rgb(read_png(path));
    if (img.width != image_size || img.height != image_size) {
        throw ValidationError("training image " + path.string() + " is " +
                              std::to_string(img.width) + "x" + std::to_string(img.height) +
                              ", backend expects " + std::to_string(image_size));
    }
    return to_linear(img);
}

Tensor draw_noise(const std::array<int, 3>& shape, Rng& rng) {
    Tensor eps({shape[0], shape[1], shape[2]});
    for (auto& v : eps.data) v = rng.normal();
    return eps;
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path) {
        if (path.empty()) return;
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        os_.open(path, std::ios::binary);
        if (!os_) throw LoadError("cannot open for write: " + path.string());
    }
    void write(const json& j) {
        if (os_.is_open()) os_ << j.dump() << '\n';
    }

private:
    std::ofstream os_;
};

json history_record(int iteration, const sched::CriticScoreTable& scores,
                    const sched::SchedulerState& state) {
    return {{"iteration", iteration},
            {"mean_score", scores.mean_score},
            {"scores", scores.scores},
            {"weights", state.weights},
            {"probs", state.probs}};
}

void check_finite_loss(double loss, int iteration, const std::vector<double>& history) {
    if (std::isfinite(loss)) return;
    std::string recent;
    const std::size_t n = history.size();
    for (std::size_t i = n > 5 ? n - 5 : 0; i < n; ++i) {
        recent += (recent.empty() ? "" : ", ") + std::to_string(history[i]);
    }
    throw DomainError("non-finite loss at iteration " + std::to_string(iteration) +
                      " (recent losses: " + (recent.empty() ? "none" : recent) + ")");
}

std::filesystem::path artifact_path(const std::filesystem::path& out_dir, const std::string& name) {
    return out_dir.empty() ? std::filesystem::path() : out_dir / name;
}

}  // namespace

TrainState run_phase1_relation(DiffusionBackend& backend, const Manifest& relation_manifest,
                               const std::filesystem::path& manifest_dir, const RunConfig& config,
                               const embed::JointEmbedder& critic,
                               const std::filesystem::path& out_dir) {
    if (!backend.has_token(kRelationLiteral)) {
        throw ValidationError("relation pre-training requires the registered token <painted>");
    }
    auto classes = group_relation_classes(relation_manifest);
    if (static_cast<int>(classes.size()) != config.num_objects_N) {
        throw ValidationError("relation manifest has " + std::to_string(classes.size()) +
                              " object classes, config expects " + std::to_string(config.num_objects_N));
    }

    TrainPhaseConfig phase;
    phase.name = "pretrain-relation";
    phase.trainable.token_embeddings = true;
    phase.trainable.token_ids = {backend.token_id(kRelationLiteral)};
    phase.trainable.text_encoder = true;
    phase.prompts_use_tokens = {
        SpecialToken{kRelationLiteral, backend.embedding_dim(), TokenRole::relation}};
    phase.steps = config.total_iters_A;
    phase.learning_rate = config.phase1.learning_rate;
    phase.batch_size = config.phase1.batch_size;
    phase.sampler = SamplerKind::actor_critic;
    phase.validate(backend);

    std::map<std::string, ImageF> images;
    for (const auto& cls : classes) {
        for (const auto& ref : cls.exemplar_images) {
            if (!images.count(ref)) {
                images.emplace(ref, load_training_image(resolve_manifest_ref(manifest_dir, ref),
                                                        backend.image_size()));
            }
        }
    }
    std::vector<std::string> names;
    for (const auto& cls : classes) names.push_back(cls.name);
    std::map<std::string, const ObjectClass*> by_name;
    for (const auto& cls : classes) by_name[cls.name] = &cls;

    sched::CriticConfig critic_cfg;
    critic_cfg.object1_pool = config.object1_pool;
    critic_cfg.gens_per_eval = config.gens_per_eval;
    critic_cfg.sample_steps = config.backend.sample_steps;
    critic_cfg.relation_literal = kRelationLiteral;

    Adam emb_opt(phase.learning_rate, backend.params(ParamGroup::token_embeddings).size());
    Adam te_opt(phase.learning_rate, backend.params(ParamGroup::text_encoder).size());

    Rng train_rng(config.seed, "phase1:train");
    Rng critic_rng(config.seed, "phase1:critic");
    JsonlWriter loss_log(artifact_path(out_dir, "pretrain-relation_loss.jsonl"));
    JsonlWriter history_log(artifact_path(out_dir, "pretrain-relation_history.jsonl"));

    TrainState state;
    state.scheduler_state = sched::uniform_state(names, config.lambda, config.recalib_freq_f);
    const auto lat = backend.latent_shape();
    const int T = backend.schedule().num_steps();

    for (int iter = 0; iter < phase.steps; ++iter) {
        const std::string obj2 = sched::sample_object(*state.scheduler_state, train_rng);
        const auto& cls = *by_name.at(obj2);
        const std::string& object1 =
            config.object1_pool[train_rng.uniform_int(0, static_cast<std::int64_t>(config.object1_pool.size()) - 1)];
        const std::string prompt = object1 + " " + kRelationLiteral + " on " + obj2;

        std::vector<TrainItem> batch;
        batch.reserve(phase.batch_size);
        for (int b = 0; b < phase.batch_size; ++b) {
            const auto& ref = cls.exemplar_images[train_rng.uniform_int(
                0, static_cast<std::int64_t>(cls.exemplar_images.size()) - 1)];
            TrainItem item;
            item.image = images.at(ref);
            item.prompt = prompt;
            item.t = static_cast<int>(train_rng.uniform_int(1, T - 1));
            item.eps = draw_noise(lat, train_rng);
            batch.push_back(std::move(item));
        }
        const double loss = backend.loss_and_backward(batch, phase.trainable);
        check_finite_loss(loss, iter, state.loss_history);
        emb_opt.step(backend.params(ParamGroup::token_embeddings),
                     backend.grads(ParamGroup::token_embeddings));
        te_opt.step(backend.params(ParamGroup::text_encoder), backend.grads(ParamGroup::text_encoder));
        state.loss_history.push_back(loss);
        state.iteration = iter + 1;
        loss_log.write({{"iteration", state.iteration}, {"loss", loss}});

        if (state.iteration % config.recalib_freq_f == 0) {
            sched::CriticScoreTable scores;
            try {
                scores = sched::score_all(backend, critic, classes, critic_cfg, state.iteration,
                                          critic_rng);
            } catch (const std::exception& e) {
                diffusion::CheckpointMeta abort_meta{"pretrain-relation-aborted", state.iteration, {}};
                auto abort_path = artifact_path(out_dir, "pretrain-relation_abort.ckpt");
                std::string where;
                if (!abort_path.empty()) {
                    save_checkpoint(backend, abort_meta, abort_path);
                    state.checkpoints.push_back(abort_path.string());
                    where = "; state saved to " + abort_path.string();
                }
                throw CriticError("critic failed at iteration " + std::to_string(state.iteration) +
                                  ": " + e.what() + where);
            }
            auto next = sched::recalibrate(scores, config.lambda);
            next.recalib_freq_f = config.recalib_freq_f;
            next.history = state.scheduler_state->history;
            next.history.push_back(scores);
            state.scheduler_state = std::move(next);
            history_log.write(history_record(state.iteration, scores, *state.scheduler_state));
        }
    }

    diffusion::CheckpointMeta meta{"pretrain-relation", state.iteration, {kRelationLiteral}};
    auto ckpt = artifact_path(out_dir, "pretrain-relation.ckpt");
    if (!ckpt.empty()) {
        save_checkpoint(backend, meta, ckpt);
        state.checkpoints.push_back(ckpt.string());
    }
    return state;
}

namespace {

/// Shared loop for phases 2a/2b: uniform sampling over manifest records with
/// the record's own prompt.
TrainState run_uniform_phase(DiffusionBackend& backend, const Manifest& manifest,
                             const std::filesystem::path& manifest_dir,
                             const TrainPhaseConfig& phase, std::uint64_t seed,
                             const std::vector<ParamGroup>& opt_groups,
                             const diffusion::CheckpointMeta& meta,
                             const std::filesystem::path& out_dir) {
    phase.validate(backend);
    if (manifest.records.empty()) throw ValidationError("phase '" + phase.name + "': empty manifest");

    std::vector<ImageF> images;
    images.reserve(manifest.size());
    for (const auto& r : manifest.records) {
        images.push_back(load_training_image(resolve_manifest_ref(manifest_dir, r.image),
                                             backend.image_size()));
        backend.tokenize(r.prompt);  // fail fast on unknown tokens
    }

    std::vector<Adam> opts;
    for (auto g : opt_groups) opts.emplace_back(phase.learning_rate, backend.params(g).size());

    Rng rng(seed, phase.name + ":train");
    JsonlWriter loss_log(artifact_path(out_dir, phase.name + "_loss.jsonl"));
    const auto lat = backend.latent_shape();
    const int T = backend.schedule().num_steps();

    TrainState state;
    for (int iter = 0; iter < phase.steps; ++iter) {
        std::vector<TrainItem> batch;
        batch.reserve(phase.batch_size);
        for (int b = 0; b < phase.batch_size; ++b) {
            const auto idx = rng.uniform_int(0, static_cast<std::int64_t>(manifest.size()) - 1);
            TrainItem item;
            item.image = images[idx];
            item.prompt = manifest.records[idx].prompt;
            item.t = static_cast<int>(rng.uniform_int(1, T - 1));
            item.eps = draw_noise(lat, rng);
            batch.push_back(std::move(item));
        }
        const double loss = backend.loss_and_backward(batch, phase.trainable);
        check_finite_loss(loss, iter, state.loss_history);
        for (std::size_t i = 0; i < opts.size(); ++i) {
            opts[i].step(backend.params(opt_groups[i]), backend.grads(opt_groups[i]));
        }
        state.loss_history.push_back(loss);
        state.iteration = iter + 1;
        loss_log.write({{"iteration", state.iteration}, {"loss", loss}});
    }

    auto ckpt = artifact_path(out_dir, phase.name + ".ckpt");
    if (!ckpt.empty()) {
        diffusion::CheckpointMeta final_meta = meta;
        final_meta.iteration = state.iteration;
        save_checkpoint(backend, final_meta, ckpt);
        state.checkpoints.push_back(ckpt.string());
    }
    return state;
}

std::vector<std::string> with_token(std::vector<std::string> tokens, const std::string& literal) {
    if (std::find(tokens.begin(), tokens.end(), literal) == tokens.end()) tokens.push_back(literal);
    return tokens;
}

}  // namespace

TrainState run_phase2a_binding(DiffusionBackend& backend, const Manifest& binding_manifest,
                               const std::filesystem::path& manifest_dir, const RunConfig& config,
                               const std::filesystem::path& out_dir,
                               const std::vector<std::string>& prior_trained_tokens) {
    if (!backend.has_token(kIdentityLiteral)) {
        throw ValidationError("token binding requires the registered token <V>");
    }
    TrainPhaseConfig phase;
    phase.name = "bind-token";
    phase.trainable.token_embeddings = true;
    phase.trainable.token_ids = {backend.token_id(kIdentityLiteral)};
    phase.prompts_use_tokens = {
        SpecialToken{kIdentityLiteral, backend.embedding_dim(), TokenRole::identity}};
    phase.steps = config.phase2a.steps;
    phase.learning_rate = config.phase2a.learning_rate;
    phase.batch_size = config.phase2a.batch_size;

    diffusion::CheckpointMeta meta{"bind-token", 0,
                                   with_token(prior_trained_tokens, kIdentityLiteral)};
    return run_uniform_phase(backend, binding_manifest, manifest_dir, phase, config.seed,
                             {ParamGroup::token_embeddings}, meta, out_dir);
}

TrainState run_phase2b_identity(DiffusionBackend& backend, const Manifest& identity_manifest,
                                const std::filesystem::path& manifest_dir, const RunConfig& config,
                                const diffusion::CheckpointMeta& provenance,
                                const std::filesystem::path& out_dir) {
    const auto& trained = provenance.trained_tokens;
    if (std::find(trained.begin(), trained.end(), kIdentityLiteral) == trained.end()) {
        throw PhaseOrderingError(
            "identity learning requires a token-binding checkpoint with a trained <V> "
            "(run bind-token first; provenance phase was '" + provenance.phase + "')");
    }
    if (!backend.has_token(kIdentityLiteral)) {
        throw ValidationError("identity learning requires the registered token <V>");
    }
    TrainPhaseConfig phase;
    phase.name = "learn-identity";
    phase.trainable.denoiser = true;
    if (config.phase2b_train_token) {
        phase.trainable.token_embeddings = true;
        phase.trainable.token_ids = {backend.token_id(kIdentityLiteral)};
    }
    phase.prompts_use_tokens = {
        SpecialToken{kIdentityLiteral, backend.embedding_dim(), TokenRole::identity}};
    phase.steps = config.phase2b.steps;
    phase.learning_rate = config.phase2b.learning_rate;
    phase.batch_size = config.phase2b.batch_size;

    std::vector<ParamGroup> groups = {ParamGroup::denoiser};
    if (config.phase2b_train_token) groups.push_back(ParamGroup::token_embeddings);

    diffusion::CheckpointMeta meta{"learn-identity", 0, trained};
    return run_uniform_phase(backend, identity_manifest, manifest_dir, phase, config.seed, groups,
                             meta, out_dir);
}

}  // namespace logokit::train
