#include "logokit/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "logokit/backend/checkpoint.hpp"
#include "logokit/backend/toy_backend.hpp"
#include "logokit/core/config.hpp"
#include "logokit/core/errors.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/core/png_io.hpp"
#include "logokit/diag/attention.hpp"
#include "logokit/embed/embedder.hpp"
#include "logokit/eval/fidelity.hpp"
#include "logokit/synth/compositor.hpp"
#include "logokit/synth/datasets.hpp"
#include "logokit/train/trainer.hpp"

namespace logokit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Internal marker so dispatch can map config problems to their own exit code.
struct ConfigFailure : Error {
    using Error::Error;
};

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open for write: " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunConfig load_config(const fs::path& path) {
    try {
        return RunConfig::load(path);
    } catch (const Error& e) {
        throw ConfigFailure(e.what());
    }
}

std::unique_ptr<diffusion::DiffusionBackend> make_backend(const RunConfig& cfg) {
    if (cfg.backend.kind != "toy") {
        throw ConfigFailure("backend kind '" + cfg.backend.kind + "' is not available");
    }
    return std::make_unique<diffusion::ToyBackend>(cfg.backend);
}

std::vector<std::string> default_class_names(int n) {
    static const std::vector<std::string> base = {
        "a mug",   "a vase",  "a plate", "a bottle", "a cup",   "a bowl",  "a jar",
        "a can",   "a box",   "a bag",   "a hat",    "a shirt", "a shoe",  "a ball",
        "a book",  "a lamp",  "a fan",   "a clock",  "a chair", "a table"};
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(base.size())) {
            names.push_back(base[i]);
        } else {
            names.push_back("a surface " + std::to_string(i));
        }
    }
    return names;
}

/// Half bright, half dark procedural scenes so any logo can find contrast.
std::vector<fs::path> write_default_scenes(int count, int size, std::uint64_t seed,
                                           const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<fs::path> paths;
    for (int i = 0; i < count; ++i) {
        Rng rng(seed, "scene:" + std::to_string(i));
        const bool bright = i % 2 == 0;
        const int base = static_cast<int>(bright ? rng.uniform_int(190, 230) : rng.uniform_int(25, 65));
        double tint[3];
        for (auto& t : tint) t = rng.uniform(0.85, 1.0);
        Image8 img(size, size, 3);
        for (int y = 0; y < size; ++y) {
            const double grad = 20.0 * (static_cast<double>(y) / size - 0.5);
            for (int x = 0; x < size; ++x) {
                const double noise = rng.uniform(-8.0, 8.0);
                for (int c = 0; c < 3; ++c) {
                    const double v = (base + grad + noise) * tint[c];
                    img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
                }
            }
        }
        fs::path p = dir / ("scene_" + std::to_string(i) + ".png");
        write_png(img, p);
        paths.push_back(p);
    }
    return paths;
}

ArtifactRef make_ref(const fs::path& path) { return {path.generic_string(), file_hash(path)}; }

// ---------------------------------------------------------------------------
// plotting (axis-free polyline rasters; deterministic)

struct Series {
    std::vector<double> values;
    std::array<std::uint8_t, 3> color;
};

const std::array<std::array<std::uint8_t, 3>, 10> kPalette = {{{31, 119, 180},
                                                               {255, 127, 14},
                                                               {44, 160, 44},
                                                               {214, 39, 40},
                                                               {148, 103, 189},
                                                               {140, 86, 75},
                                                               {227, 119, 194},
                                                               {127, 127, 127},
                                                               {188, 189, 34},
                                                               {23, 190, 207}}};

void draw_line(Image8& img, double x0, double y0, double x1, double y1,
               const std::array<std::uint8_t, 3>& color) {
    const int steps = std::max(2, static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0))) * 2);
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
    }
}

Image8 plot_series(const std::vector<Series>& series, int w = 480, int h = 320) {
    Image8 img(w, h, 3, 255);
    double lo = 0.0, hi = 1.0;
    bool first = true;
    std::size_t max_len = 0;
    for (const auto& s : series) {
        max_len = std::max(max_len, s.values.size());
        for (double v : s.values) {
            if (!std::isfinite(v)) continue;
            if (first) {
                lo = hi = v;
                first = false;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
        lo -= 0.5;
    }
    const int margin = 12;
    const double span_x = std::max<std::size_t>(max_len - 1, 1);
    auto px = [&](std::size_t i) { return margin + (w - 2.0 * margin) * i / span_x; };
    auto py = [&](double v) { return h - margin - (h - 2.0 * margin) * (v - lo) / (hi - lo); };
    // frame
    const std::array<std::uint8_t, 3> gray = {200, 200, 200};
    draw_line(img, margin, margin, margin, h - margin, gray);
    draw_line(img, margin, h - margin, w - margin, h - margin, gray);
    for (const auto& s : series) {
        for (std::size_t i = 0; i + 1 < s.values.size(); ++i) {
            if (!std::isfinite(s.values[i]) || !std::isfinite(s.values[i + 1])) continue;
            draw_line(img, px(i), py(s.values[i]), px(i + 1), py(s.values[i + 1]), s.color);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// per-stage option blocks

struct SynthOpts {
    std::string config;
    std::string logo;
    std::string scenes_dir;
    std::string out_dir;
};

struct TrainOpts {
    std::string config;
    std::string manifest;
    std::string init_checkpoint;
    std::string out_dir;
};

struct AttnOpts {
    std::string config;
    std::string checkpoint;
    std::string manifest;
    std::string token = "<V>";
    std::string baseline = "logo";
    std::string out_dir;
    int limit = 8;
};

struct EvalOpts {
    std::string config;
    std::string checkpoint;
    std::string logo;
    std::string logo_id;
    std::string contexts = "data/contexts20.json";
    int num_seeds = 5;
    int max_contexts = 0;
    std::string out_dir;
};

struct ReportOpts {
    std::string config;
    std::string out_dir;
};

fs::path workdir_of(const RunConfig& cfg) { return fs::path(cfg.workdir); }

fs::path default_or(const std::string& value, const fs::path& fallback) {
    return value.empty() ? fallback : fs::path(value);
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) throw LoadError("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw LoadError("no .png files in " + dir.string());
    return out;
}

// ---------------------------------------------------------------------------
// stage implementations

void cmd_synth(const SynthOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    const fs::path data = default_or(o.out_dir, wd / "data");
    LogoAsset logo = LogoAsset::load(o.logo);

    Manifest relation = synth::write_relation_set(default_class_names(cfg.num_objects_N), 3,
                                                  cfg.synthesis.out_size, cfg.seed, data / "relation");
    save_manifest(relation, data / "relation" / "manifest.jsonl");

    auto binding = synth::build_binding_set(logo, cfg.synthesis, cfg.seed);
    Manifest binding_manifest = synth::write_samples(binding, "binding", data / "binding");
    save_manifest(binding_manifest, data / "binding" / "manifest.jsonl");

    std::vector<fs::path> scenes;
    if (!o.scenes_dir.empty()) {
        scenes = list_pngs(o.scenes_dir);
    } else {
        scenes = write_default_scenes(4, cfg.synthesis.out_size, cfg.seed, data / "scenes");
    }
    auto identity = synth::build_identity_set(logo, scenes, cfg.synthesis, cfg.seed);
    Manifest identity_manifest = synth::write_samples(identity, "identity", data / "identity");
    save_manifest(identity_manifest, data / "identity" / "manifest.jsonl");

    LedgerRecord rec;
    rec.stage = "synth";
    rec.config_hash = file_hash(o.config);
    rec.inputs = {make_ref(o.logo)};
    rec.outputs = {make_ref(data / "relation" / "manifest.jsonl"),
                   make_ref(data / "binding" / "manifest.jsonl"),
                   make_ref(data / "identity" / "manifest.jsonl")};
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

void cmd_pretrain(const TrainOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    const fs::path manifest_path = default_or(o.manifest, wd / "data" / "relation" / "manifest.jsonl");
    const fs::path out = default_or(o.out_dir, wd / "train");

    auto backend = make_backend(cfg);
    backend->register_token(SpecialToken{train::kRelationLiteral, backend->embedding_dim(),
                                         TokenRole::relation},
                            diffusion::TokenInit::random());
    Manifest manifest = load_manifest(manifest_path);
    embed::ToyJointEmbedder critic;
    train::run_phase1_relation(*backend, manifest, manifest_path.parent_path(), cfg, critic, out);

    LedgerRecord rec;
    rec.stage = "pretrain-relation";
    rec.config_hash = file_hash(o.config);
    rec.inputs = {make_ref(manifest_path)};
    rec.outputs = {make_ref(out / "pretrain-relation.ckpt"),
                   make_ref(out / "pretrain-relation_loss.jsonl"),
                   make_ref(out / "pretrain-relation_history.jsonl")};
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

void cmd_bind(const TrainOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    const fs::path manifest_path = default_or(o.manifest, wd / "data" / "binding" / "manifest.jsonl");
    const fs::path out = default_or(o.out_dir, wd / "train");
    const fs::path init = default_or(o.init_checkpoint, wd / "train" / "pretrain-relation.ckpt");

    auto backend = make_backend(cfg);
    std::vector<std::string> prior;
    std::vector<ArtifactRef> inputs = {make_ref(manifest_path)};
    if (fs::exists(init)) {
        prior = load_checkpoint(*backend, init).trained_tokens;
        inputs.push_back(make_ref(init));
    } else if (!o.init_checkpoint.empty()) {
        throw LoadError("checkpoint not found: " + init.string());
    }
    if (!backend->has_token(train::kIdentityLiteral)) {
        backend->register_token(SpecialToken{train::kIdentityLiteral, backend->embedding_dim(),
                                             TokenRole::identity},
                                diffusion::TokenInit::from_word("logo"));
    }
    Manifest manifest = load_manifest(manifest_path);
    train::run_phase2a_binding(*backend, manifest, manifest_path.parent_path(), cfg, out, prior);

    LedgerRecord rec;
    rec.stage = "bind-token";
    rec.config_hash = file_hash(o.config);
    rec.inputs = inputs;
    rec.outputs = {make_ref(out / "bind-token.ckpt"), make_ref(out / "bind-token_loss.jsonl")};
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

void cmd_learn(const TrainOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    const fs::path manifest_path = default_or(o.manifest, wd / "data" / "identity" / "manifest.jsonl");
    const fs::path out = default_or(o.out_dir, wd / "train");
    const fs::path init = default_or(o.init_checkpoint, wd / "train" / "bind-token.ckpt");

    if (!fs::exists(init)) {
        throw PhaseOrderingError("identity learning requires a bind-token checkpoint; " +
                                 init.string() + " does not exist");
    }
    auto backend = make_backend(cfg);
    diffusion::CheckpointMeta provenance = load_checkpoint(*backend, init);
    Manifest manifest = load_manifest(manifest_path);
    train::run_phase2b_identity(*backend, manifest, manifest_path.parent_path(), cfg, provenance, out);

    LedgerRecord rec;
    rec.stage = "learn-identity";
    rec.config_hash = file_hash(o.config);
    rec.inputs = {make_ref(manifest_path), make_ref(init)};
    rec.outputs = {make_ref(out / "learn-identity.ckpt"), make_ref(out / "learn-identity_loss.jsonl")};
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

Image8 overlay_map(const Image8& rgb, const diffusion::Tensor& map) {
    const int mh = map.shape[0], mw = map.shape[1];
    double maxv = 0.0;
    for (double v : map.data) maxv = std::max(maxv, v);
    if (maxv <= 0.0) maxv = 1.0;
    Image8 out(rgb.width, rgb.height, 3);
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            const int cy = std::min(y * mh / rgb.height, mh - 1);
            const int cx = std::min(x * mw / rgb.width, mw - 1);
            const double w = 0.7 * map[static_cast<std::size_t>(cy) * mw + cx] / maxv;
            const double gray = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) +
                                0.114 * rgb.at(x, y, 2);
            const double r = gray * (1.0 - w) + 255.0 * w;
            const double gb = gray * (1.0 - w);
            out.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(r), 0l, 255l));
            out.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(std::lround(gb), 0l, 255l));
            out.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(std::lround(gb), 0l, 255l));
        }
    }
    return out;
}

void cmd_attn(const AttnOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    fs::path ckpt = default_or(o.checkpoint, wd / "train" / "learn-identity.ckpt");
    if (o.checkpoint.empty() && !fs::exists(ckpt)) ckpt = wd / "train" / "bind-token.ckpt";
    const fs::path manifest_path = default_or(o.manifest, wd / "data" / "binding" / "manifest.jsonl");
    const fs::path out = default_or(o.out_dir, wd / "attn");

    auto backend = make_backend(cfg);
    load_checkpoint(*backend, ckpt);
    Manifest manifest = load_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    fs::create_directories(out);

    std::ofstream scores(out / "scores.jsonl", std::ios::binary);
    if (!scores) throw LoadError("cannot open for write: " + (out / "scores.jsonl").string());
    std::vector<ArtifactRef> outputs;
    int wins = 0, total = 0;
    const std::span<const double> fracs(diag::kDefaultTimestepFracs);
    for (const auto& r : manifest.records) {
        if (total >= o.limit) break;
        if (r.mask.empty()) continue;
        Image8 img8 = flatten_rgb(read_png(resolve_manifest_ref(base, r.image)));
        Image8 mask = read_png(resolve_manifest_ref(base, r.mask));
        const ImageF img = to_linear(img8);

        Rng rng_tok(cfg.seed, "attn:" + r.image);
        auto stack_tok = diag::token_attention(*backend, img, r.prompt, o.token, fracs, rng_tok);
        auto map_tok = diag::average_map(stack_tok);
        const double score_tok = diag::localization_score(map_tok, mask);

        const std::string baseline_prompt = eval::prompt_for_scoring(r.prompt);
        Rng rng_base(cfg.seed, "attn:" + r.image);  // same noise as the token pass
        auto stack_base =
            diag::token_attention(*backend, img, baseline_prompt, o.baseline, fracs, rng_base);
        auto map_base = diag::average_map(stack_base);
        const double score_base = diag::localization_score(map_base, mask);

        const fs::path stem = fs::path(r.image).stem();
        const fs::path tok_png = out / (stem.string() + "_token.png");
        const fs::path base_png = out / (stem.string() + "_word.png");
        write_png(overlay_map(img8, map_tok), tok_png);
        write_png(overlay_map(img8, map_base), base_png);
        outputs.push_back(make_ref(tok_png));
        outputs.push_back(make_ref(base_png));

        scores << json{{"image", r.image},
                       {"token", o.token},
                       {"token_score", score_tok},
                       {"baseline", o.baseline},
                       {"baseline_score", score_base}}
                      .dump()
               << '\n';
        if (score_tok > score_base) ++wins;
        ++total;
    }
    scores << json{{"summary", {{"images", total}, {"token_wins", wins}}}}.dump() << '\n';
    scores.close();
    outputs.push_back(make_ref(out / "scores.jsonl"));

    LedgerRecord rec;
    rec.stage = "attn";
    rec.config_hash = file_hash(o.config);
    rec.inputs = {make_ref(manifest_path), make_ref(ckpt)};
    rec.outputs = outputs;
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

std::string render_metrics_table(const eval::FidelityReport& report) {
    std::ostringstream os;
    os << "cells: " << report.cells.size() << "  warnings: " << report.warning_count << "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s\n", "metric", "clip_t", "clip_i", "dino");
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-10s %10.4f %10.4f %10.4f\n", "mean", report.mean_clip_t,
                  report.mean_clip_i, report.mean_dino);
    os << buf;
    return os.str();
}

void cmd_eval(const EvalOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    const fs::path ckpt = default_or(o.checkpoint, wd / "train" / "learn-identity.ckpt");
    const fs::path out = default_or(o.out_dir, wd / "eval");

    auto backend = make_backend(cfg);
    load_checkpoint(*backend, ckpt);

    LogoAsset logo = LogoAsset::load(o.logo);
    const std::string logo_id = o.logo_id.empty() ? fs::path(o.logo).stem().string() : o.logo_id;
    logo.id = logo_id;

    json cj = json::parse(read_file(o.contexts), nullptr, false);
    if (cj.is_discarded() || !cj.contains("contexts")) {
        throw ValidationError("context file " + o.contexts + " must be JSON with a 'contexts' array");
    }
    eval::EvalGrid grid;
    grid.logos = {logo_id};
    grid.contexts = cj["contexts"].get<std::vector<std::string>>();
    if (o.max_contexts > 0 && static_cast<int>(grid.contexts.size()) > o.max_contexts) {
        grid.contexts.resize(o.max_contexts);
    }
    for (int s = 1; s <= o.num_seeds; ++s) grid.seeds.push_back(static_cast<std::uint64_t>(s));

    embed::ToyJointEmbedder joint(64);
    embed::ToyJointEmbedder visual(32);
    auto report = eval::run_grid(*backend, grid, {{logo_id, logo}}, joint, visual,
                                 cfg.backend.sample_steps, ckpt.filename().string());
    write_file(out / "report.json", report.to_json_text());
    write_file(out / "summary.txt", render_metrics_table(report));

    LedgerRecord rec;
    rec.stage = "eval";
    rec.config_hash = file_hash(o.config);
    rec.inputs = {make_ref(ckpt), make_ref(o.logo), make_ref(o.contexts)};
    rec.outputs = {make_ref(out / "report.json"), make_ref(out / "summary.txt")};
    rec.timestamp = now_utc();
    append_ledger(wd / "ledger.jsonl", rec);
}

void cmd_report(const ReportOpts& o) {
    RunConfig cfg = load_config(o.config);
    const fs::path wd = workdir_of(cfg);
    render_report(wd, default_or(o.out_dir, wd / "report"));
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigFailure*>(&e)) return "config";
    if (dynamic_cast<const PhaseOrderingError*>(&e)) return "phase_ordering";
    if (dynamic_cast<const TokenizationError*>(&e)) return "tokenization";
    if (dynamic_cast<const RegistrationError*>(&e)) return "registration";
    if (dynamic_cast<const ContrastError*>(&e)) return "contrast";
    if (dynamic_cast<const PlacementError*>(&e)) return "placement";
    if (dynamic_cast<const ScaleError*>(&e)) return "scale";
    if (dynamic_cast<const TemplateError*>(&e)) return "template";
    if (dynamic_cast<const CapabilityError*>(&e)) return "capability";
    if (dynamic_cast<const CriticError*>(&e)) return "critic";
    if (dynamic_cast<const BackendError*>(&e)) return "backend";
    if (dynamic_cast<const IntegrityError*>(&e)) return "integrity";
    if (dynamic_cast<const ShapeError*>(&e)) return "shape";
    if (dynamic_cast<const DomainError*>(&e)) return "domain";
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const LoadError*>(&e)) return "load";
    return "internal";
}

void emit_error(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"type", kind}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace

// ---------------------------------------------------------------------------
// ledger

std::string file_hash(const fs::path& path) {
    const std::string bytes = read_file(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

RunLedger RunLedger::load(const fs::path& path) {
    RunLedger ledger;
    std::ifstream is(path, std::ios::binary);
    if (!is) return ledger;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ValidationError("ledger " + path.string() + " line " + std::to_string(line_no) +
                                  ": invalid JSON");
        }
        LedgerRecord r;
        r.stage = j.value("stage", "");
        r.config_hash = j.value("config_hash", "");
        r.timestamp = j.value("timestamp", "");
        for (const char* key : {"inputs", "outputs"}) {
            auto& dst = std::string(key) == "inputs" ? r.inputs : r.outputs;
            if (j.contains(key)) {
                for (const auto& a : j[key]) {
                    dst.push_back({a.value("path", ""), a.value("hash", "")});
                }
            }
        }
        ledger.records.push_back(std::move(r));
    }
    return ledger;
}

void RunLedger::validate() const {
    std::map<std::string, std::size_t> produced;  // path -> earliest producing record
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (const auto& out : records[i].outputs) {
            if (!produced.count(out.path)) produced[out.path] = i;
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (const auto& in : records[i].inputs) {
            auto it = produced.find(in.path);
            if (it != produced.end() && it->second >= i) {
                throw IntegrityError("ledger record " + std::to_string(i) + " (" + records[i].stage +
                                     ") consumes '" + in.path +
                                     "' which is first produced by record " +
                                     std::to_string(it->second));
            }
        }
    }
}

void append_ledger(const fs::path& path, const LedgerRecord& record) {
    RunLedger ledger = RunLedger::load(path);
    ledger.records.push_back(record);
    ledger.validate();

    json j;
    j["stage"] = record.stage;
    j["config_hash"] = record.config_hash;
    json ins = json::array(), outs = json::array();
    for (const auto& a : record.inputs) ins.push_back({{"path", a.path}, {"hash", a.hash}});
    for (const auto& a : record.outputs) outs.push_back({{"path", a.path}, {"hash", a.hash}});
    j["inputs"] = ins;
    j["outputs"] = outs;
    j["timestamp"] = record.timestamp;

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::app);
    if (!os) throw LoadError("cannot open ledger for append: " + path.string());
    os << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// report rendering

void render_report(const fs::path& workdir, const fs::path& out_dir) {
    RunLedger ledger = RunLedger::load(workdir / "ledger.jsonl");
    ledger.validate();
    fs::create_directories(out_dir);

    auto ends_with = [](const std::string& s, const std::string& suffix) {
        return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    };

    std::ostringstream metrics;
    int eval_count = 0;
    for (const auto& rec : ledger.records) {
        for (const auto& out : rec.outputs) {
            const fs::path p(out.path);
            if (!fs::exists(p)) {
                throw IntegrityError("report: ledger references missing artifact " + out.path);
            }
            if (ends_with(out.path, "report.json")) {
                auto report = eval::FidelityReport::from_json_text(read_file(p));
                metrics << "== " << out.path << "\n" << render_metrics_table(report) << "\n";
                ++eval_count;
            } else if (ends_with(out.path, "_loss.jsonl")) {
                Series s;
                s.color = kPalette[0];
                std::istringstream is(read_file(p));
                std::string line;
                while (std::getline(is, line)) {
                    if (line.empty()) continue;
                    json j = json::parse(line, nullptr, false);
                    if (!j.is_discarded() && j.contains("loss")) {
                        s.values.push_back(j["loss"].get<double>());
                    }
                }
                write_png(plot_series({s}), out_dir / (p.stem().string() + ".png"));
            } else if (ends_with(out.path, "_history.jsonl")) {
                std::map<std::string, Series> by_class;
                std::istringstream is(read_file(p));
                std::string line;
                while (std::getline(is, line)) {
                    if (line.empty()) continue;
                    json j = json::parse(line, nullptr, false);
                    if (j.is_discarded() || !j.contains("probs")) continue;
                    for (const auto& [name, prob] : j["probs"].items()) {
                        by_class[name].values.push_back(prob.get<double>());
                    }
                }
                std::vector<Series> series;
                std::size_t idx = 0;
                for (auto& [name, s] : by_class) {
                    s.color = kPalette[idx++ % kPalette.size()];
                    series.push_back(std::move(s));
                }
                if (!series.empty()) {
                    write_png(plot_series(series), out_dir / (p.stem().string() + ".png"));
                }
            } else if (rec.stage == "attn" && ends_with(out.path, ".png")) {
                write_file(out_dir / "attn" / p.filename(), read_file(p));
            }
        }
    }
    if (eval_count == 0) metrics << "no evaluation reports recorded\n";
    write_file(out_dir / "metrics.txt", metrics.str());
}

// ---------------------------------------------------------------------------
// dispatch

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"logo identity training and evaluation pipeline"};
    app.require_subcommand(1);

    SynthOpts synth_opts;
    auto* synth_cmd = app.add_subcommand("synth", "build the training datasets");
    synth_cmd->add_option("--config", synth_opts.config, "run configuration file")->required();
    synth_cmd->add_option("--logo", synth_opts.logo, "logo PNG with alpha")->required();
    synth_cmd->add_option("--scenes", synth_opts.scenes_dir, "directory of natural-scene PNGs");
    synth_cmd->add_option("--out", synth_opts.out_dir, "output data directory");

    TrainOpts pretrain_opts;
    auto* pretrain_cmd = app.add_subcommand("pretrain-relation", "actor-critic relation pre-training");
    pretrain_cmd->add_option("--config", pretrain_opts.config)->required();
    pretrain_cmd->add_option("--manifest", pretrain_opts.manifest, "relation manifest");
    pretrain_cmd->add_option("--out", pretrain_opts.out_dir);

    TrainOpts bind_opts;
    auto* bind_cmd = app.add_subcommand("bind-token", "optimize the identity token embedding");
    bind_cmd->add_option("--config", bind_opts.config)->required();
    bind_cmd->add_option("--manifest", bind_opts.manifest, "binding manifest");
    bind_cmd->add_option("--init", bind_opts.init_checkpoint, "starting checkpoint");
    bind_cmd->add_option("--out", bind_opts.out_dir);

    TrainOpts learn_opts;
    auto* learn_cmd = app.add_subcommand("learn-identity", "fine-tune the denoiser on the identity set");
    learn_cmd->add_option("--config", learn_opts.config)->required();
    learn_cmd->add_option("--manifest", learn_opts.manifest, "identity manifest");
    learn_cmd->add_option("--init", learn_opts.init_checkpoint, "bind-token checkpoint");
    learn_cmd->add_option("--out", learn_opts.out_dir);

    AttnOpts attn_opts;
    auto* attn_cmd = app.add_subcommand("attn", "attention localization diagnostics");
    attn_cmd->add_option("--config", attn_opts.config)->required();
    attn_cmd->add_option("--checkpoint", attn_opts.checkpoint);
    attn_cmd->add_option("--manifest", attn_opts.manifest, "manifest with masks");
    attn_cmd->add_option("--token", attn_opts.token);
    attn_cmd->add_option("--baseline", attn_opts.baseline);
    attn_cmd->add_option("--limit", attn_opts.limit, "max images to analyze");
    attn_cmd->add_option("--out", attn_opts.out_dir);

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "fidelity metrics over the context grid");
    eval_cmd->add_option("--config", eval_opts.config)->required();
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint);
    eval_cmd->add_option("--logo", eval_opts.logo, "logo PNG with alpha")->required();
    eval_cmd->add_option("--logo-id", eval_opts.logo_id);
    eval_cmd->add_option("--contexts", eval_opts.contexts, "JSON file with a 'contexts' array");
    eval_cmd->add_option("--num-seeds", eval_opts.num_seeds);
    eval_cmd->add_option("--max-contexts", eval_opts.max_contexts, "0 = use all");
    eval_cmd->add_option("--out", eval_opts.out_dir);

    ReportOpts report_opts;
    auto* report_cmd = app.add_subcommand("report", "render plots and tables from the run ledger");
    report_cmd->add_option("--config", report_opts.config)->required();
    report_cmd->add_option("--out", report_opts.out_dir);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (synth_cmd->parsed()) cmd_synth(synth_opts);
        else if (pretrain_cmd->parsed()) cmd_pretrain(pretrain_opts);
        else if (bind_cmd->parsed()) cmd_bind(bind_opts);
        else if (learn_cmd->parsed()) cmd_learn(learn_opts);
        else if (attn_cmd->parsed()) cmd_attn(attn_opts);
        else if (eval_cmd->parsed()) cmd_eval(eval_opts);
        else if (report_cmd->parsed()) cmd_report(report_opts);
        return 0;
    } catch (const ConfigFailure& e) {
        emit_error("config", e.what());
        return 3;
    } catch (const std::exception& e) {
        emit_error(error_kind(e), e.what());
        return 1;
    }
}

}  // namespace logokit::cli
