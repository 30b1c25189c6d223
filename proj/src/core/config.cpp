#include "logokit/core/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logokit/core/errors.hpp"

namespace logokit {

using nlohmann::json;

namespace {

json phase_to_json(const PhaseHyper& p) {
    return {{"steps", p.steps}, {"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}};
}

void phase_from_json(const json& j, PhaseHyper& p) {
    p.steps = j.value("steps", p.steps);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.batch_size = j.value("batch_size", p.batch_size);
}

}  // namespace

std::string RunConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["lambda"] = lambda;
    j["recalib_freq_f"] = recalib_freq_f;
    j["total_iters_A"] = total_iters_A;
    j["num_objects_N"] = num_objects_N;
    j["gens_per_eval"] = gens_per_eval;
    j["object1_pool"] = object1_pool;
    j["phase1"] = phase_to_json(phase1);
    j["phase2a"] = phase_to_json(phase2a);
    j["phase2b"] = phase_to_json(phase2b);
    j["phase2b_train_token"] = phase2b_train_token;
    j["synthesis"] = {{"out_size", synthesis.out_size},
                      {"binding_count", synthesis.binding_count},
                      {"identity_count", synthesis.identity_count},
                      {"contrast_threshold", synthesis.contrast_threshold},
                      {"scale_min", synthesis.scale_min},
                      {"scale_max", synthesis.scale_max},
                      {"binding_rotation_deg", synthesis.binding_rotation_deg},
                      {"identity_rotation_deg", synthesis.identity_rotation_deg},
                      {"margin_frac", synthesis.margin_frac},
                      {"min_logo_px", synthesis.min_logo_px},
                      {"max_contrast_proposals", synthesis.max_contrast_proposals}};
    j["backend"] = {{"kind", backend.kind},
                    {"init_seed", backend.init_seed},
                    {"image_size", backend.image_size},
                    {"latent_channels", backend.latent_channels},
                    {"feature_channels", backend.feature_channels},
                    {"embed_dim", backend.embed_dim},
                    {"cond_dim", backend.cond_dim},
                    {"attn_dim", backend.attn_dim},
                    {"train_steps", backend.train_steps},
                    {"sample_steps", backend.sample_steps},
                    {"guidance_scale", backend.guidance_scale}};
    j["workdir"] = workdir;
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("config is not a JSON object");
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.lambda = j.value("lambda", c.lambda);
    c.recalib_freq_f = j.value("recalib_freq_f", c.recalib_freq_f);
    c.total_iters_A = j.value("total_iters_A", c.total_iters_A);
    c.num_objects_N = j.value("num_objects_N", c.num_objects_N);
    c.gens_per_eval = j.value("gens_per_eval", c.gens_per_eval);
    if (j.contains("object1_pool")) c.object1_pool = j["object1_pool"].get<std::vector<std::string>>();
    if (j.contains("phase1")) phase_from_json(j["phase1"], c.phase1);
    if (j.contains("phase2a")) phase_from_json(j["phase2a"], c.phase2a);
    if (j.contains("phase2b")) phase_from_json(j["phase2b"], c.phase2b);
    c.phase2b_train_token = j.value("phase2b_train_token", c.phase2b_train_token);
    if (j.contains("synthesis")) {
        const auto& s = j["synthesis"];
        auto& d = c.synthesis;
        d.out_size = s.value("out_size", d.out_size);
        d.binding_count = s.value("binding_count", d.binding_count);
        d.identity_count = s.value("identity_count", d.identity_count);
        d.contrast_threshold = s.value("contrast_threshold", d.contrast_threshold);
        d.scale_min = s.value("scale_min", d.scale_min);
        d.scale_max = s.value("scale_max", d.scale_max);
        d.binding_rotation_deg = s.value("binding_rotation_deg", d.binding_rotation_deg);
        d.identity_rotation_deg = s.value("identity_rotation_deg", d.identity_rotation_deg);
        d.margin_frac = s.value("margin_frac", d.margin_frac);
        d.min_logo_px = s.value("min_logo_px", d.min_logo_px);
        d.max_contrast_proposals = s.value("max_contrast_proposals", d.max_contrast_proposals);
    }
    if (j.contains("backend")) {
        const auto& b = j["backend"];
        auto& d = c.backend;
        d.kind = b.value("kind", d.kind);
        d.init_seed = b.value("init_seed", d.init_seed);
        d.image_size = b.value("image_size", d.image_size);
        d.latent_channels = b.value("latent_channels", d.latent_channels);
        d.feature_channels = b.value("feature_channels", d.feature_channels);
        d.embed_dim = b.value("embed_dim", d.embed_dim);
        d.cond_dim = b.value("cond_dim", d.cond_dim);
        d.attn_dim = b.value("attn_dim", d.attn_dim);
        d.train_steps = b.value("train_steps", d.train_steps);
        d.sample_steps = b.value("sample_steps", d.sample_steps);
        d.guidance_scale = b.value("guidance_scale", d.guidance_scale);
    }
    c.workdir = j.value("workdir", c.workdir);
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("config not found: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json_text(buf.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open for write: " + path.string());
    os << to_json_text();
}

void RunConfig::validate() const {
    std::vector<std::string> bad;
    if (!(lambda > 0.0)) bad.push_back("lambda must be > 0");
    if (recalib_freq_f < 1) bad.push_back("recalib_freq_f must be >= 1");
    if (total_iters_A < 1) bad.push_back("total_iters_A must be >= 1");
    if (recalib_freq_f > total_iters_A) bad.push_back("recalib_freq_f must be <= total_iters_A");
    if (num_objects_N < 1) bad.push_back("num_objects_N must be >= 1");
    if (gens_per_eval < 1) bad.push_back("gens_per_eval must be >= 1");
    if (object1_pool.empty()) bad.push_back("object1_pool must be nonempty");
    auto check_phase = [&](const char* name, const PhaseHyper& p) {
        if (p.steps < 1) bad.push_back(std::string(name) + ".steps must be >= 1");
        if (!(p.learning_rate > 0.0)) bad.push_back(std::string(name) + ".learning_rate must be > 0");
        if (p.batch_size < 1) bad.push_back(std::string(name) + ".batch_size must be >= 1");
    };
    check_phase("phase1", phase1);
    check_phase("phase2a", phase2a);
    check_phase("phase2b", phase2b);
    if (synthesis.out_size < 16) bad.push_back("synthesis.out_size must be >= 16");
    if (synthesis.binding_count < 1) bad.push_back("synthesis.binding_count must be >= 1");
    if (synthesis.identity_count < 1) bad.push_back("synthesis.identity_count must be >= 1");
    if (!(synthesis.contrast_threshold > 0.0 && synthesis.contrast_threshold < 1.0)) {
        bad.push_back("synthesis.contrast_threshold must be in (0,1)");
    }
    if (!(synthesis.scale_min > 0.0 && synthesis.scale_min <= synthesis.scale_max && synthesis.scale_max <= 1.0)) {
        bad.push_back("synthesis scale range must satisfy 0 < scale_min <= scale_max <= 1");
    }
    if (synthesis.out_size != backend.image_size) {
        bad.push_back("synthesis.out_size must equal backend.image_size");
    }
    if (backend.kind != "toy") bad.push_back("backend.kind '" + backend.kind + "' is not available");
    if (backend.image_size < 8 || backend.image_size % 4 != 0) {
        bad.push_back("backend.image_size must be >= 8 and divisible by 4");
    }
    if (backend.train_steps < 2) bad.push_back("backend.train_steps must be >= 2");
    if (backend.sample_steps < 1) bad.push_back("backend.sample_steps must be >= 1");
    if (!bad.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& b : bad) msg += "\n  " + b;
        throw ValidationError(msg);
    }
}

}  // namespace logokit
