#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "logokit/core/rng.hpp"
#include "logokit/core/types.hpp"
#include "logokit/embed/embedder.hpp"

namespace logokit::diffusion {
class DiffusionBackend;
}

namespace logokit::sched {

/// Per-class critic scores at one recalibration point.
struct CriticScoreTable {
    std::map<std::string, double> scores;  // object class -> s in [-1, 1]
    int iteration = 0;
    double mean_score = 0.0;

    /// Computes the mean and validates finiteness.
    static CriticScoreTable make(std::map<std::string, double> scores, int iteration = 0);
};

/// Sampling weights and probabilities for the relation dataset's object
/// classes. weights[k] = lambda^(mean - s_k), probs = weights / sum(weights).
struct SchedulerState {
    std::map<std::string, double> weights;
    std::map<std::string, double> probs;
    double lambda = 2.0;
    int recalib_freq_f = 100;
    std::vector<CriticScoreTable> history;

    void validate() const;  // probability-simplex and positivity invariants
};

/// Score-deficit reweighting: classes scoring below the mean get more sampling
/// mass when lambda > 1. Throws DomainError on lambda <= 0 or non-finite
/// scores, ValidationError on an empty table.
SchedulerState recalibrate(const CriticScoreTable& scores, double lambda);

/// Uniform starting state over the given class names.
SchedulerState uniform_state(std::span<const std::string> names, double lambda, int recalib_freq_f);

/// Categorical draw by the state's probabilities (stable name order).
std::string sample_object(const SchedulerState& state, Rng& rng);

struct CriticConfig {
    std::vector<std::string> object1_pool;
    int gens_per_eval = 4;
    int sample_steps = 20;
    std::string relation_literal = "<painted>";
};

/// Critic score for one object class: generate with the relation token in the
/// prompt, embed the image and the plain-text prompt, average the cosines over
/// gens_per_eval draws. Result clamped to [-1, 1].
double score_object(const diffusion::DiffusionBackend& backend,
                    const embed::JointEmbedder& critic,
                    const ObjectClass& obj2,
                    const CriticConfig& cfg,
                    Rng& rng);

/// Builds a full score table for all classes at the given iteration.
CriticScoreTable score_all(const diffusion::DiffusionBackend& backend,
                           const embed::JointEmbedder& critic,
                           std::span<const ObjectClass> classes,
                           const CriticConfig& cfg,
                           int iteration,
                           Rng& rng);

}  // namespace logokit::sched
