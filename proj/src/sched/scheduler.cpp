#include "logokit/sched/scheduler.hpp"

#include <cmath>

#include "logokit/backend/backend.hpp"
#include "logokit/core/errors.hpp"

namespace logokit::sched {

CriticScoreTable CriticScoreTable::make(std::map<std::string, double> scores, int iteration) {
    if (scores.empty()) throw ValidationError("critic score table is empty");
    double sum = 0.0;
    for (const auto& [name, s] : scores) {
        if (!std::isfinite(s)) throw DomainError("non-finite critic score for class '" + name + "'");
        sum += s;
    }
    CriticScoreTable t;
    t.scores = std::move(scores);
    t.iteration = iteration;
    t.mean_score = sum / static_cast<double>(t.scores.size());
    return t;
}

void SchedulerState::validate() const {
    if (probs.size() != weights.size() || probs.empty()) {
        throw ValidationError("scheduler state has inconsistent class sets");
    }
    double total = 0.0;
    for (const auto& [name, p] : probs) {
        auto w = weights.find(name);
        if (w == weights.end()) throw ValidationError("probability for unknown class '" + name + "'");
        if (!(w->second > 0.0)) throw DomainError("non-positive weight for class '" + name + "'");
        if (!(p > 0.0 && p < 1.0 + 1e-12)) throw DomainError("probability out of (0,1] for class '" + name + "'");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("probabilities do not sum to 1");
}

SchedulerState recalibrate(const CriticScoreTable& scores, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("recalibrate: lambda must be > 0");
    if (scores.scores.empty()) throw ValidationError("recalibrate: empty score table");
    SchedulerState state;
    state.lambda = lambda;
    double wsum = 0.0;
    for (const auto& [name, s] : scores.scores) {
        if (!std::isfinite(s)) throw DomainError("recalibrate: non-finite score for class '" + name + "'");
        double w = std::pow(lambda, scores.mean_score - s);
        state.weights[name] = w;
        wsum += w;
    }
    for (const auto& [name, w] : state.weights) {
        state.probs[name] = w / wsum;
    }
    state.history.push_back(scores);
    state.validate();
    return state;
}

SchedulerState uniform_state(std::span<const std::string> names, double lambda, int recalib_freq_f) {
    if (!(lambda > 0.0)) throw DomainError("uniform_state: lambda must be > 0");
    if (names.empty()) throw ValidationError("uniform_state: no class names");
    SchedulerState state;
    state.lambda = lambda;
    state.recalib_freq_f = recalib_freq_f;
    const double p = 1.0 / static_cast<double>(names.size());
    for (const auto& n : names) {
        state.weights[n] = 1.0;
        state.probs[n] = p;
    }
    state.validate();
    return state;
}

std::string sample_object(const SchedulerState& state, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    const std::string* last = nullptr;
    for (const auto& [name, p] : state.probs) {
        acc += p;
        last = &name;
        if (u < acc) return name;
    }
    return *last;  // guard against accumulated rounding at u ~ 1
}

double score_object(const diffusion::DiffusionBackend& backend,
                    const embed::JointEmbedder& critic,
                    const ObjectClass& obj2,
                    const CriticConfig& cfg,
                    Rng& rng) {
    if (cfg.gens_per_eval < 1) throw DomainError("score_object: gens_per_eval must be >= 1");
    if (cfg.object1_pool.empty()) throw DomainError("score_object: empty object1 pool");
    if (!backend.has_token(cfg.relation_literal)) {
        throw BackendError("score_object: relation token " + cfg.relation_literal + " is not registered");
    }
    double sum = 0.0;
    for (int g = 0; g < cfg.gens_per_eval; ++g) {
        const auto& object1 =
            cfg.object1_pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.object1_pool.size()) - 1))];
        std::string gen_prompt = object1 + " " + cfg.relation_literal + " on " + obj2.name;
        std::string plain_prompt = object1 + " painted on " + obj2.name;
        ImageF img = backend.generate(gen_prompt, cfg.sample_steps, rng);
        try {
            auto iv = critic.embed_image(to_srgb8(img));
            auto tv = critic.embed_text(plain_prompt);
            sum += embed::cosine_similarity(iv, tv);
        } catch (const CriticError&) {
            throw;
        } catch (const std::exception& e) {
            throw CriticError(std::string("critic embedding failed: ") + e.what());
        }
    }
    double s = sum / static_cast<double>(cfg.gens_per_eval);
    return std::min(1.0, std::max(-1.0, s));
}

CriticScoreTable score_all(const diffusion::DiffusionBackend& backend,
                           const embed::JointEmbedder& critic,
                           std::span<const ObjectClass> classes,
                           const CriticConfig& cfg,
                           int iteration,
                           Rng& rng) {
    std::map<std::string, double> scores;
    for (const auto& cls : classes) {
        scores[cls.name] = score_object(backend, critic, cls, cfg, rng);
    }
    return CriticScoreTable::make(std::move(scores), iteration);
}

}  // namespace logokit::sched
