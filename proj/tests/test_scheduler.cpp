#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "logokit/backend/toy_backend.hpp"
#include "logokit/core/errors.hpp"
#include "logokit/core/rng.hpp"
#include "logokit/embed/embedder.hpp"
#include "logokit/sched/scheduler.hpp"
#include "support.hpp"

using namespace logokit;
using namespace logokit::sched;

TEST_CASE("recalibration reproduces the frozen three-class example") {
    const auto table = CriticScoreTable::make({{"A", 0.30}, {"B", 0.20}, {"C", 0.25}});
    CHECK(table.mean_score == doctest::Approx(0.25).epsilon(1e-12));
    const SchedulerState state = recalibrate(table, 2.0);
    state.validate();
    CHECK(state.weights.at("A") == doctest::Approx(0.965936).epsilon(1e-5));
    CHECK(state.weights.at("B") == doctest::Approx(1.035265).epsilon(1e-5));
    CHECK(state.weights.at("C") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(state.probs.at("A") == doctest::Approx(0.32185).epsilon(1e-5));
    CHECK(state.probs.at("B") == doctest::Approx(0.34495).epsilon(1e-5));
    CHECK(state.probs.at("C") == doctest::Approx(0.33320).epsilon(1e-5));
}

TEST_CASE("equal scores and unit lambda are uniform fixed points") {
    const auto equal = CriticScoreTable::make({{"a", 0.4}, {"b", 0.4}, {"c", 0.4}, {"d", 0.4}});
    for (const auto& [_, p] : recalibrate(equal, 2.0).probs) {
        CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    }
    const auto spread = CriticScoreTable::make({{"a", -0.9}, {"b", 0.1}, {"c", 0.8}});
    for (const auto& [_, p] : recalibrate(spread, 1.0).probs) {
        CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("lower critic scores always receive more sampling mass") {
    Rng rng(5, "prop");
    for (int trial = 0; trial < 50; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(2, 8));
        std::map<std::string, double> scores;
        for (int i = 0; i < n; ++i) {
            scores["c" + std::to_string(i)] = rng.uniform(-1.0, 1.0);
        }
        const double lambda = rng.uniform(1.0 + 1e-3, 8.0);
        const SchedulerState state = recalibrate(CriticScoreTable::make(scores), lambda);
        state.validate();
        double total = 0.0;
        for (const auto& [name, p] : state.probs) {
            total += p;
            for (const auto& [other, q] : state.probs) {
                if (scores.at(name) < scores.at(other)) CHECK(p > q);
            }
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("probabilities are invariant to a uniform score shift") {
    Rng rng(6, "shift");
    for (int trial = 0; trial < 20; ++trial) {
        std::map<std::string, double> scores, shifted;
        const double c = rng.uniform(-0.5, 0.5);
        for (int i = 0; i < 5; ++i) {
            const double s = rng.uniform(-0.5, 0.5);
            scores["k" + std::to_string(i)] = s;
            shifted["k" + std::to_string(i)] = s + c;
        }
        const auto p1 = recalibrate(CriticScoreTable::make(scores), 3.0).probs;
        const auto p2 = recalibrate(CriticScoreTable::make(shifted), 3.0).probs;
        for (const auto& [name, p] : p1) {
            CHECK(p == doctest::Approx(p2.at(name)).epsilon(1e-12));
        }
    }
}

TEST_CASE("recalibration rejects degenerate inputs") {
    const auto table = CriticScoreTable::make({{"a", 0.1}, {"b", 0.2}});
    CHECK_THROWS_AS(recalibrate(table, 0.0), DomainError);
    CHECK_THROWS_AS(recalibrate(table, -1.0), DomainError);
    CHECK_THROWS_AS(recalibrate(CriticScoreTable{}, 2.0), ValidationError);
    CHECK_THROWS_AS(CriticScoreTable::make({{"a", std::nan("")}}), DomainError);
    CHECK_THROWS_AS(CriticScoreTable::make({}), ValidationError);
}

TEST_CASE("state validation catches tampering") {
    auto state = recalibrate(CriticScoreTable::make({{"a", 0.1}, {"b", 0.3}}), 2.0);
    state.probs["a"] += 0.01;
    CHECK_THROWS_AS(state.validate(), DomainError);
    state = recalibrate(CriticScoreTable::make({{"a", 0.1}, {"b", 0.3}}), 2.0);
    state.weights["a"] = -1.0;
    CHECK_THROWS_AS(state.validate(), DomainError);
    state = recalibrate(CriticScoreTable::make({{"a", 0.1}, {"b", 0.3}}), 2.0);
    state.probs.erase("a");
    CHECK_THROWS_AS(state.validate(), ValidationError);
}

TEST_CASE("uniform starting state spreads mass evenly") {
    const std::vector<std::string> names = {"x", "y", "z", "w", "v"};
    const SchedulerState state = uniform_state(names, 2.0, 10);
    state.validate();
    CHECK(state.history.empty());
    CHECK(state.recalib_freq_f == 10);
    for (const auto& name : names) {
        CHECK(state.probs.at(name) == doctest::Approx(0.2).epsilon(1e-12));
    }
    CHECK_THROWS_AS(uniform_state(std::span<const std::string>{}, 2.0, 10), ValidationError);
}

TEST_CASE("categorical sampling tracks the stated probabilities and replays") {
    const SchedulerState state =
        recalibrate(CriticScoreTable::make({{"A", 0.30}, {"B", 0.20}, {"C", 0.25}}), 2.0);
    Rng rng(9, "draws");
    std::map<std::string, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_object(state, rng)];
    for (const auto& [name, p] : state.probs) {
        CHECK(std::abs(counts[name] / static_cast<double>(n) - p) < 0.005);
    }

    Rng r1(4, "replay"), r2(4, "replay");
    for (int i = 0; i < 200; ++i) CHECK(sample_object(state, r1) == sample_object(state, r2));
}

namespace {

ObjectClass toy_class(const std::string& name) {
    ObjectClass c;
    c.name = name;
    c.exemplar_images = {"e0.png", "e1.png", "e2.png"};
    return c;
}

}  // namespace

TEST_CASE("critic scoring averages the per-generation cosines") {
    RunConfig cfg = lktest::small_config();
    diffusion::ToyBackend backend(cfg.backend);
    backend.register_token(SpecialToken{"<painted>", backend.embedding_dim(), TokenRole::relation},
                           diffusion::TokenInit::random());
    const embed::ScriptedPairEmbedder critic({0.2, 0.4, 0.3, 0.3});
    CriticConfig ccfg;
    ccfg.object1_pool = {"a dog", "a star"};
    ccfg.gens_per_eval = 4;
    ccfg.sample_steps = 4;
    Rng rng(3, "critic");
    const double s = score_object(backend, critic, toy_class("a mug"), ccfg, rng);
    CHECK(s == doctest::Approx(0.30).epsilon(1e-12));
}

TEST_CASE("score_all produces a complete table with the batch mean") {
    RunConfig cfg = lktest::small_config();
    diffusion::ToyBackend backend(cfg.backend);
    backend.register_token(SpecialToken{"<painted>", backend.embedding_dim(), TokenRole::relation},
                           diffusion::TokenInit::random());
    const embed::ScriptedPairEmbedder critic({0.1, 0.2, 0.6, 0.8, -0.2, 0.5});
    CriticConfig ccfg;
    ccfg.object1_pool = {"a dog"};
    ccfg.gens_per_eval = 2;
    ccfg.sample_steps = 4;
    const std::vector<ObjectClass> classes = {toy_class("a mug"), toy_class("a vase"),
                                              toy_class("a hat")};
    Rng rng(8, "table");
    const auto table = score_all(backend, critic, classes, ccfg, 17, rng);
    CHECK(table.iteration == 17);
    REQUIRE(table.scores.size() == 3);
    CHECK(table.scores.at("a mug") == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(table.scores.at("a vase") == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(table.scores.at("a hat") == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(table.mean_score == doctest::Approx((0.15 + 0.7 + 0.15) / 3.0).epsilon(1e-12));
}

TEST_CASE("critic scoring surfaces configuration and capability faults") {
    RunConfig cfg = lktest::small_config();
    diffusion::ToyBackend backend(cfg.backend);
    const embed::ScriptedPairEmbedder critic({0.2});
    CriticConfig ccfg;
    ccfg.object1_pool = {"a dog"};
    Rng rng(1, "err");
    // relation token never registered
    CHECK_THROWS_AS(score_object(backend, critic, toy_class("a mug"), ccfg, rng), BackendError);

    backend.register_token(SpecialToken{"<painted>", backend.embedding_dim(), TokenRole::relation},
                           diffusion::TokenInit::random());
    CriticConfig empty_pool;
    empty_pool.object1_pool = {};
    CHECK_THROWS_AS(score_object(backend, critic, toy_class("a mug"), empty_pool, rng), DomainError);
}
