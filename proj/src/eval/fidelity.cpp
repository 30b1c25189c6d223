#include "logokit/eval/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "logokit/core/errors.hpp"
#include "logokit/core/rng.hpp"
#include "logokit/synth/compositor.hpp"

namespace logokit::eval {

using nlohmann::json;

namespace {

constexpr const char* kTokenLiteral = "<V>";

int count_occurrences(const std::string& text, const std::string& needle) {
    int count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

bool same_score(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

json score_to_json(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

double score_from_json(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void EvalGrid::validate() const {
    std::vector<std::string> bad;
    if (logos.empty()) bad.push_back("no logos");
    if (contexts.empty()) bad.push_back("no contexts");
    if (seeds.empty()) bad.push_back("no seeds");
    for (const auto& c : contexts) {
        const int n = count_occurrences(c, kTokenLiteral);
        if (n != 1) {
            throw TemplateError("context template '" + c + "' contains " + std::to_string(n) +
                                " occurrences of <V>; exactly one required");
        }
    }
    if (!bad.empty()) {
        std::string msg = "invalid evaluation grid:";
        for (const auto& b : bad) msg += " " + b + ";";
        throw ValidationError(msg);
    }
}

std::string prompt_for_scoring(const std::string& context_template) {
    const int n = count_occurrences(context_template, kTokenLiteral);
    if (n != 1) {
        throw TemplateError("template '" + context_template + "' contains " + std::to_string(n) +
                            " occurrences of <V>; exactly one required");
    }
    std::string out = context_template;
    out.replace(out.find(kTokenLiteral), std::string(kTokenLiteral).size(), "logo");
    return out;
}

double clip_t(const Image8& image, const std::string& scoring_prompt,
              const embed::JointEmbedder& embedder) {
    try {
        const auto u = embedder.embed_image(image);
        const auto v = embedder.embed_text(scoring_prompt);
        return embed::cosine_similarity(u, v);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw CriticError(std::string("embedder failure in clip_t: ") + e.what());
    }
}

double clip_i(const Image8& image, std::span<const Image8> references,
              const embed::ImageEmbedder& embedder) {
    if (references.empty()) throw DomainError("clip_i: at least one reference image required");
    const auto u = embedder.embed_image(image);
    double acc = 0.0;
    for (const auto& ref : references) {
        acc += embed::cosine_similarity(u, embedder.embed_image(ref));
    }
    return acc / static_cast<double>(references.size());
}

Image8 reference_image(const LogoAsset& logo, int size) {
    Image8 white(size, size, 3, 255);
    SynthesisConfig cfg;
    cfg.out_size = size;
    const double scale = 0.8;
    Image8 sticker = synth::transform_logo(logo.image, size, size, scale, 0.0);
    Placement placement;
    placement.x = (size - sticker.width) / 2;
    placement.y = (size - sticker.height) / 2;
    placement.scale = scale;
    return synth::composite(logo, white, placement, cfg).image;
}

FidelityReport run_grid(const diffusion::DiffusionBackend& backend, const EvalGrid& grid,
                        const std::map<std::string, LogoAsset>& logo_assets,
                        const embed::JointEmbedder& joint, const embed::ImageEmbedder& image_embedder,
                        int sample_steps, const std::string& checkpoint_label) {
    grid.validate();
    for (const auto& id : grid.logos) {
        if (!logo_assets.count(id)) throw ValidationError("grid references unknown logo id '" + id + "'");
    }

    FidelityReport report;
    report.checkpoint = checkpoint_label;
    report.joint_embedder_version = joint.version();
    report.image_embedder_version = image_embedder.version();

    std::map<std::string, std::vector<Image8>> references;
    for (const auto& id : grid.logos) {
        references[id] = {reference_image(logo_assets.at(id), backend.image_size())};
    }

    double sum_t = 0.0, sum_i = 0.0, sum_d = 0.0;
    int finite = 0;
    for (const auto& logo_id : grid.logos) {
        for (std::size_t ci = 0; ci < grid.contexts.size(); ++ci) {
            for (const auto seed : grid.seeds) {
                CellScore cell;
                cell.logo = logo_id;
                cell.context_index = static_cast<int>(ci);
                cell.seed = seed;
                try {
                    Rng rng(seed, "eval:gen");
                    const ImageF gen = backend.generate(grid.contexts[ci], sample_steps, rng);
                    const Image8 gen8 = to_srgb8(gen);
                    cell.clip_t = clip_t(gen8, prompt_for_scoring(grid.contexts[ci]), joint);
                    cell.clip_i = clip_i(gen8, references.at(logo_id), joint);
                    cell.dino = clip_i(gen8, references.at(logo_id), image_embedder);
                    sum_t += cell.clip_t;
                    sum_i += cell.clip_i;
                    sum_d += cell.dino;
                    ++finite;
                } catch (const std::exception&) {
                    cell.clip_t = cell.clip_i = cell.dino = std::numeric_limits<double>::quiet_NaN();
                    ++report.warning_count;
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }
    if (finite > 0) {
        report.mean_clip_t = sum_t / finite;
        report.mean_clip_i = sum_i / finite;
        report.mean_dino = sum_d / finite;
    } else {
        report.mean_clip_t = report.mean_clip_i = report.mean_dino =
            std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

std::string FidelityReport::to_json_text() const {
    json j;
    json cells_j = json::array();
    for (const auto& c : cells) {
        cells_j.push_back({{"logo", c.logo},
                           {"context_index", c.context_index},
                           {"seed", c.seed},
                           {"clip_t", score_to_json(c.clip_t)},
                           {"clip_i", score_to_json(c.clip_i)},
                           {"dino", score_to_json(c.dino)}});
    }
    j["cells"] = cells_j;
    j["aggregates"] = {{"clip_t", score_to_json(mean_clip_t)},
                       {"clip_i", score_to_json(mean_clip_i)},
                       {"dino", score_to_json(mean_dino)}};
    j["metadata"] = {{"checkpoint", checkpoint},
                     {"joint_embedder", joint_embedder_version},
                     {"image_embedder", image_embedder_version},
                     {"warnings", warning_count}};
    return j.dump(2) + "\n";
}

FidelityReport FidelityReport::from_json_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("report is not a JSON object");
    FidelityReport r;
    for (const auto& c : j.at("cells")) {
        CellScore cell;
        cell.logo = c.at("logo").get<std::string>();
        cell.context_index = c.at("context_index").get<int>();
        cell.seed = c.at("seed").get<std::uint64_t>();
        cell.clip_t = score_from_json(c.at("clip_t"));
        cell.clip_i = score_from_json(c.at("clip_i"));
        cell.dino = score_from_json(c.at("dino"));
        r.cells.push_back(std::move(cell));
    }
    const auto& agg = j.at("aggregates");
    r.mean_clip_t = score_from_json(agg.at("clip_t"));
    r.mean_clip_i = score_from_json(agg.at("clip_i"));
    r.mean_dino = score_from_json(agg.at("dino"));
    const auto& meta = j.at("metadata");
    r.checkpoint = meta.at("checkpoint").get<std::string>();
    r.joint_embedder_version = meta.at("joint_embedder").get<std::string>();
    r.image_embedder_version = meta.at("image_embedder").get<std::string>();
    r.warning_count = meta.at("warnings").get<int>();
    return r;
}

bool FidelityReport::equals(const FidelityReport& other) const {
    if (cells.size() != other.cells.size() || warning_count != other.warning_count ||
        checkpoint != other.checkpoint || joint_embedder_version != other.joint_embedder_version ||
        image_embedder_version != other.image_embedder_version ||
        !same_score(mean_clip_t, other.mean_clip_t) || !same_score(mean_clip_i, other.mean_clip_i) ||
        !same_score(mean_dino, other.mean_dino)) {
        return false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& a = cells[i];
        const auto& b = other.cells[i];
        if (a.logo != b.logo || a.context_index != b.context_index || a.seed != b.seed ||
            !same_score(a.clip_t, b.clip_t) || !same_score(a.clip_i, b.clip_i) ||
            !same_score(a.dino, b.dino)) {
            return false;
        }
    }
    return true;
}

}  // namespace logokit::eval
