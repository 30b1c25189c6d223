#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "logokit/backend/checkpoint.hpp"
#include "logokit/backend/toy_backend.hpp"
#include "logokit/core/errors.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/core/png_io.hpp"
#include "logokit/sched/scheduler.hpp"
#include "logokit/synth/datasets.hpp"
#include "logokit/train/trainer.hpp"
#include "support.hpp"

using namespace logokit;
using namespace logokit::train;
using diffusion::CheckpointMeta;
using diffusion::ParamGroup;
using diffusion::Tensor;
using diffusion::ToyBackend;
using lktest::TempDir;

namespace {

void register_painted(ToyBackend& backend) {
    backend.register_token(SpecialToken{kRelationLiteral, backend.embedding_dim(), TokenRole::relation},
                           diffusion::TokenInit::random());
}

void register_v(ToyBackend& backend) {
    backend.register_token(SpecialToken{kIdentityLiteral, backend.embedding_dim(), TokenRole::identity},
                           diffusion::TokenInit::from_word("logo"));
}

/// Critic whose cosine depends only on whether the scored prompt mentions the
/// weak class.
class ClassRiggedCritic : public embed::JointEmbedder {
public:
    ClassRiggedCritic(std::string weak_class, double weak, double strong)
        : weak_class_(std::move(weak_class)), weak_(weak), strong_(strong) {}
    std::vector<double> embed_image(const Image8&) const override { return {1.0, 0.0}; }
    std::vector<double> embed_text(const std::string& prompt) const override {
        const double c = prompt.find(weak_class_) != std::string::npos ? weak_ : strong_;
        return {c, std::sqrt(std::max(0.0, 1.0 - c * c))};
    }
    std::string version() const override { return "class-rigged"; }

private:
    std::string weak_class_;
    double weak_, strong_;
};

struct RelationFixture {
    TempDir tmp{"relation"};
    RunConfig cfg = lktest::small_config();
    Manifest manifest;

    explicit RelationFixture(const std::vector<std::string>& names) {
        cfg.num_objects_N = static_cast<int>(names.size());
        cfg.gens_per_eval = 1;
        cfg.backend.sample_steps = 2;
        manifest = synth::write_relation_set(names, 3, cfg.backend.image_size, 31, tmp.path);
    }
};

struct BindingFixture {
    TempDir tmp{"binding"};
    RunConfig cfg = lktest::small_config();
    Manifest manifest;

    explicit BindingFixture(int count) {
        cfg.synthesis.binding_count = count;
        const LogoAsset logo = lktest::make_logo(8);
        const auto samples = synth::build_binding_set(logo, cfg.synthesis, 13);
        manifest = synth::write_samples(samples, "binding", tmp.path);
    }
};

}  // namespace

TEST_CASE("ldm loss matches the training-surface value and its boundary cases") {
    ToyBackend backend(lktest::small_config().backend);
    Rng rng(1, "loss");
    ImageF img(backend.image_size(), backend.image_size(), 3);
    for (auto& v : img.data) v = rng.uniform();
    const auto ls = backend.latent_shape();
    Tensor eps({ls[0], ls[1], ls[2]});
    for (auto& v : eps.data) v = rng.normal();

    const double direct = ldm_loss(backend, img, "ab", 7, eps);
    diffusion::TrainItem item{img, "ab", 7, eps};
    diffusion::TrainableSet den;
    den.denoiser = true;
    const double via_batch = backend.loss_and_backward(std::vector{item}, den);
    CHECK(direct == doctest::Approx(via_batch).epsilon(1e-15));

    // zeroed denoiser: loss is the mean of eps^2 over 4 x 64 = 256 draws
    auto ps = backend.params(ParamGroup::denoiser);
    std::fill(ps.begin(), ps.end(), 0.0);
    double total = 0.0;
    const int samples = 4;
    for (int i = 0; i < samples; ++i) {
        Tensor e({ls[0], ls[1], ls[2]});
        for (auto& v : e.data) v = rng.normal();
        total += ldm_loss(backend, img, "ab", 7, e);
    }
    const double mean = total / samples;
    const double sigma = std::sqrt(2.0 / (samples * static_cast<double>(eps.numel())));
    CHECK(std::abs(mean - 1.0) < 3.0 * sigma);

    // rigged perfect prediction
    const Tensor zero({ls[0], ls[1], ls[2]});
    CHECK(ldm_loss(backend, img, "ab", 7, zero) == 0.0);
}

TEST_CASE("adam leaves parameters bit-identical under zero gradients") {
    std::vector<double> params = {1.0, -2.5, 0.75};
    const std::vector<double> before = params;
    std::vector<double> zeros(3, 0.0);
    Adam opt(0.1, 3);
    for (int i = 0; i < 10; ++i) opt.step(params, zeros);
    CHECK(params == before);

    std::vector<double> grads = {0.0, 1.0, 0.0};
    opt.step(params, grads);
    CHECK(params[0] == before[0]);
    CHECK(params[1] != before[1]);
    CHECK(params[2] == before[2]);
}

TEST_CASE("phase config validation needs groups, sane hypers, and tokens") {
    ToyBackend backend(lktest::small_config().backend);
    TrainPhaseConfig phase;
    phase.name = "p";
    CHECK_THROWS_AS(phase.validate(backend), ValidationError);
    phase.trainable.denoiser = true;
    phase.steps = 0;
    CHECK_THROWS_AS(phase.validate(backend), ValidationError);
    phase.steps = 1;
    phase.prompts_use_tokens = {SpecialToken{"<V>", backend.embedding_dim(), TokenRole::identity}};
    CHECK_THROWS_AS(phase.validate(backend), ValidationError);
    register_v(backend);
    CHECK_NOTHROW(phase.validate(backend));
}

TEST_CASE("relation pre-training recalibrates floor(A/f) times and freezes the denoiser") {
    RelationFixture fx({"a mug", "a vase", "a hat"});
    fx.cfg.total_iters_A = 10;
    fx.cfg.recalib_freq_f = 5;
    ToyBackend backend(fx.cfg.backend);
    register_painted(backend);
    const auto den_sum = group_checksum(backend, ParamGroup::denoiser);
    const embed::ScriptedPairEmbedder critic(std::vector<double>(6, 0.5));

    const TrainState state =
        run_phase1_relation(backend, fx.manifest, fx.tmp.path, fx.cfg, critic, {});
    CHECK(state.iteration == 10);
    CHECK(state.loss_history.size() == 10);
    for (const double l : state.loss_history) CHECK(std::isfinite(l));
    REQUIRE(state.scheduler_state.has_value());
    CHECK(state.scheduler_state->history.size() == 2);  // floor(10 / 5)
    CHECK(group_checksum(backend, ParamGroup::denoiser) == den_sum);
}

TEST_CASE("a lagging class gains sampling probability at every recalibration") {
    RelationFixture fx({"a mug", "a vase", "a hat", "a jar"});
    fx.cfg.total_iters_A = 12;
    fx.cfg.recalib_freq_f = 4;
    fx.cfg.lambda = 2.0;
    ToyBackend backend(fx.cfg.backend);
    register_painted(backend);
    const ClassRiggedCritic critic("a vase", 0.0, 0.9);

    const TrainState state =
        run_phase1_relation(backend, fx.manifest, fx.tmp.path, fx.cfg, critic, {});
    REQUIRE(state.scheduler_state.has_value());
    REQUIRE(state.scheduler_state->history.size() == 3);
    for (const auto& table : state.scheduler_state->history) {
        const auto probs = sched::recalibrate(table, fx.cfg.lambda).probs;
        CHECK(probs.at("a vase") > 1.0 / 4.0);
        CHECK(table.scores.at("a vase") == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(table.scores.at("a mug") == doctest::Approx(0.9).epsilon(1e-12));
    }
    CHECK(state.scheduler_state->probs.at("a vase") > 1.0 / 4.0);
}

TEST_CASE("recorded scheduler history replays algorithmically") {
    RelationFixture fx({"a mug", "a vase", "a hat"});
    fx.cfg.total_iters_A = 9;
    fx.cfg.recalib_freq_f = 3;
    TempDir out("phase1_out");
    ToyBackend backend(fx.cfg.backend);
    register_painted(backend);
    const embed::ScriptedPairEmbedder critic(
        {0.1, 0.6, 0.3, 0.2, 0.4, 0.5, 0.15, 0.35, 0.55});

    run_phase1_relation(backend, fx.manifest, fx.tmp.path, fx.cfg, critic, out.path);

    std::ifstream is(out.path / "pretrain-relation_history.jsonl");
    REQUIRE(is.good());
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        std::map<std::string, double> scores = j.at("scores");
        const auto replay =
            sched::recalibrate(sched::CriticScoreTable::make(scores, j.at("iteration")), fx.cfg.lambda);
        const std::map<std::string, double> probs = j.at("probs");
        const std::map<std::string, double> weights = j.at("weights");
        // exact replay: serialized doubles round-trip bit-for-bit
        CHECK(probs == replay.probs);
        CHECK(weights == replay.weights);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("critic failure aborts with a rescue checkpoint") {
    RelationFixture fx({"a mug", "a vase", "a hat"});
    fx.cfg.total_iters_A = 4;
    fx.cfg.recalib_freq_f = 2;
    TempDir out("abort");
    ToyBackend backend(fx.cfg.backend);
    register_painted(backend);
    const embed::ScriptedPairEmbedder critic({0.5});  // exhausted mid-recalibration

    CHECK_THROWS_AS(run_phase1_relation(backend, fx.manifest, fx.tmp.path, fx.cfg, critic, out.path),
                    CriticError);
    CHECK(std::filesystem::exists(out.path / "pretrain-relation_abort.ckpt"));
    const auto meta = diffusion::peek_checkpoint(out.path / "pretrain-relation_abort.ckpt");
    CHECK(meta.phase == "pretrain-relation-aborted");
    CHECK(meta.iteration == 2);
}

TEST_CASE("relation phase insists on the token and a matching class count") {
    RelationFixture fx({"a mug", "a vase", "a hat"});
    ToyBackend backend(fx.cfg.backend);
    const embed::ScriptedPairEmbedder critic({0.5});
    CHECK_THROWS_AS(run_phase1_relation(backend, fx.manifest, fx.tmp.path, fx.cfg, critic, {}),
                    ValidationError);
    register_painted(backend);
    RunConfig wrong = fx.cfg;
    wrong.num_objects_N = 5;
    CHECK_THROWS_AS(run_phase1_relation(backend, fx.manifest, fx.tmp.path, wrong, critic, {}),
                    ValidationError);
}

TEST_CASE("token binding trains only the identity embedding") {
    BindingFixture fx(6);
    fx.cfg.phase2a.steps = 40;
    TempDir out("bind_out");
    ToyBackend backend(fx.cfg.backend);
    register_v(backend);
    const int vid = backend.token_id(kIdentityLiteral);
    const auto before_emb = backend.token_embedding(vid);
    const auto den_sum = group_checksum(backend, ParamGroup::denoiser);
    const auto te_sum = group_checksum(backend, ParamGroup::text_encoder);
    // snapshot of every embedding row except <V>
    const auto emb_before = std::vector<double>(backend.params(ParamGroup::token_embeddings).begin(),
                                                backend.params(ParamGroup::token_embeddings).end());

    const TrainState state = run_phase2a_binding(backend, fx.manifest, fx.tmp.path, fx.cfg, out.path,
                                                 {kRelationLiteral});
    CHECK(state.iteration == 40);
    CHECK(state.loss_history.size() == 40);
    CHECK(group_checksum(backend, ParamGroup::denoiser) == den_sum);
    CHECK(group_checksum(backend, ParamGroup::text_encoder) == te_sum);

    const auto after_emb = backend.token_embedding(vid);
    double delta = 0.0;
    for (std::size_t i = 0; i < after_emb.size(); ++i) {
        const double d = after_emb[i] - before_emb[i];
        delta += d * d;
    }
    CHECK(std::sqrt(delta) > 0.0);

    const auto emb_after = backend.params(ParamGroup::token_embeddings);
    const int d = backend.embedding_dim();
    for (std::size_t i = 0; i < emb_after.size(); ++i) {
        const bool v_row = i >= static_cast<std::size_t>(vid) * d &&
                           i < static_cast<std::size_t>(vid + 1) * d;
        if (!v_row) CHECK(emb_after[i] == emb_before[i]);
    }

    const auto meta = diffusion::peek_checkpoint(out.path / "bind-token.ckpt");
    CHECK(meta.phase == "bind-token");
    const auto& toks = meta.trained_tokens;
    CHECK(std::find(toks.begin(), toks.end(), kIdentityLiteral) != toks.end());
    CHECK(std::find(toks.begin(), toks.end(), kRelationLiteral) != toks.end());
}

TEST_CASE("binding loss descends from step 1 to step 100 in the seed median") {
    BindingFixture fx(6);
    fx.cfg.phase2a.steps = 100;
    fx.cfg.phase2a.learning_rate = 2e-2;
    fx.cfg.phase2a.batch_size = 16;  // averages the per-step noise draw
    std::vector<double> first, last;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RunConfig cfg = fx.cfg;
        cfg.seed = seed;
        ToyBackend backend(cfg.backend);
        register_v(backend);
        const TrainState state = run_phase2a_binding(backend, fx.manifest, fx.tmp.path, cfg, {});
        first.push_back(state.loss_history.front());
        last.push_back(state.loss_history.back());
    }
    std::sort(first.begin(), first.end());
    std::sort(last.begin(), last.end());
    CHECK(last[2] < first[2]);
}

TEST_CASE("training is reproducible for identical config and seed") {
    BindingFixture fx(4);
    fx.cfg.phase2a.steps = 12;
    ToyBackend a(fx.cfg.backend), b(fx.cfg.backend);
    register_v(a);
    register_v(b);
    const auto ha = run_phase2a_binding(a, fx.manifest, fx.tmp.path, fx.cfg, {}).loss_history;
    const auto hb = run_phase2a_binding(b, fx.manifest, fx.tmp.path, fx.cfg, {}).loss_history;
    CHECK(ha == hb);
    CHECK(group_checksum(a, ParamGroup::token_embeddings) ==
          group_checksum(b, ParamGroup::token_embeddings));

    RunConfig other = fx.cfg;
    other.seed = fx.cfg.seed + 1;
    ToyBackend c(other.backend);
    register_v(c);
    const auto hc = run_phase2a_binding(c, fx.manifest, fx.tmp.path, other, {}).loss_history;
    CHECK(ha != hc);
}

TEST_CASE("binding without a registered identity token is refused") {
    BindingFixture fx(4);
    ToyBackend backend(fx.cfg.backend);
    CHECK_THROWS_AS(run_phase2a_binding(backend, fx.manifest, fx.tmp.path, fx.cfg, {}),
                    ValidationError);
}

namespace {

struct IdentityFixture {
    TempDir tmp{"identity"};
    RunConfig cfg = lktest::small_config();
    Manifest manifest;

    explicit IdentityFixture(int count) {
        cfg.synthesis.identity_count = count;
        std::vector<std::filesystem::path> scenes;
        for (int i = 0; i < 3; ++i) {
            Image8 scene(24, 24, 3);
            for (std::size_t p = 0; p < scene.data.size(); p += 3) {
                scene.data[p] = static_cast<std::uint8_t>(205 + 10 * i);
                scene.data[p + 1] = 230;
                scene.data[p + 2] = 218;
            }
            const auto path = tmp.path / ("scene" + std::to_string(i) + ".png");
            write_png(scene, path);
            scenes.push_back(path);
        }
        const LogoAsset logo = lktest::make_logo(8);
        const auto samples = synth::build_identity_set(logo, scenes, cfg.synthesis, 17);
        manifest = synth::write_samples(samples, "identity", tmp.path);
    }
};

CheckpointMeta bound_meta() { return {"bind-token", 40, {kIdentityLiteral}}; }

}  // namespace

TEST_CASE("identity fine-tuning moves the denoiser and nothing else") {
    IdentityFixture fx(5);
    fx.cfg.phase2b.steps = 10;
    TempDir out("identity_out");
    ToyBackend backend(fx.cfg.backend);
    register_v(backend);
    const auto te_sum = group_checksum(backend, ParamGroup::text_encoder);
    const auto emb_sum = group_checksum(backend, ParamGroup::token_embeddings);
    const auto den_sum = group_checksum(backend, ParamGroup::denoiser);

    const TrainState state = run_phase2b_identity(backend, fx.manifest, fx.tmp.path, fx.cfg,
                                                  bound_meta(), out.path);
    CHECK(state.iteration == 10);
    CHECK(group_checksum(backend, ParamGroup::denoiser) != den_sum);
    CHECK(group_checksum(backend, ParamGroup::text_encoder) == te_sum);
    CHECK(group_checksum(backend, ParamGroup::token_embeddings) == emb_sum);

    const auto meta = diffusion::peek_checkpoint(out.path / "learn-identity.ckpt");
    CHECK(meta.phase == "learn-identity");
    CHECK(meta.iteration == 10);
    REQUIRE(meta.trained_tokens.size() == 1);
    CHECK(meta.trained_tokens[0] == kIdentityLiteral);
}

TEST_CASE("identity fine-tuning can co-train the token row when enabled") {
    IdentityFixture fx(4);
    fx.cfg.phase2b.steps = 8;
    fx.cfg.phase2b_train_token = true;
    ToyBackend backend(fx.cfg.backend);
    register_v(backend);
    const int vid = backend.token_id(kIdentityLiteral);
    const int d = backend.embedding_dim();
    const auto emb_before = std::vector<double>(backend.params(ParamGroup::token_embeddings).begin(),
                                                backend.params(ParamGroup::token_embeddings).end());

    run_phase2b_identity(backend, fx.manifest, fx.tmp.path, fx.cfg, bound_meta(), {});

    const auto emb_after = backend.params(ParamGroup::token_embeddings);
    bool v_row_moved = false;
    for (std::size_t i = 0; i < emb_after.size(); ++i) {
        const bool v_row = i >= static_cast<std::size_t>(vid) * d &&
                           i < static_cast<std::size_t>(vid + 1) * d;
        if (v_row) {
            v_row_moved = v_row_moved || emb_after[i] != emb_before[i];
        } else {
            CHECK(emb_after[i] == emb_before[i]);
        }
    }
    CHECK(v_row_moved);
}

TEST_CASE("identity fine-tuning refuses provenance without a bound token") {
    IdentityFixture fx(4);
    ToyBackend backend(fx.cfg.backend);
    register_v(backend);
    const CheckpointMeta unbound{"pretrain-relation", 10, {kRelationLiteral}};
    CHECK_THROWS_AS(
        run_phase2b_identity(backend, fx.manifest, fx.tmp.path, fx.cfg, unbound, {}),
        PhaseOrderingError);
    const CheckpointMeta blank{"", 0, {}};
    CHECK_THROWS_AS(run_phase2b_identity(backend, fx.manifest, fx.tmp.path, fx.cfg, blank, {}),
                    PhaseOrderingError);
}
