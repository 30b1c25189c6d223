#include "logokit/core/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "logokit/core/errors.hpp"
#include "logokit/core/png_io.hpp"

namespace logokit {

using nlohmann::json;

namespace {

json record_to_json(const ManifestRecord& r) {
    json j;
    j["prompt"] = r.prompt;
    j["image"] = r.image;
    if (!r.object_class.empty()) j["class"] = r.object_class;
    if (!r.split.empty()) j["split"] = r.split;
    if (!r.mask.empty()) j["mask"] = r.mask;
    if (!r.logo_id.empty()) j["logo_id"] = r.logo_id;
    if (!r.background_kind.empty()) j["background"] = r.background_kind;
    if (r.placement) {
        j["placement"] = {{"x", r.placement->x},
                          {"y", r.placement->y},
                          {"scale", r.placement->scale},
                          {"rotation_deg", r.placement->rotation_deg}};
    }
    return j;
}

ManifestRecord record_from_json(const json& j, int line_no, std::vector<std::string>& problems) {
    ManifestRecord r;
    auto field = [&](const char* name) { return "line " + std::to_string(line_no) + ": field '" + name + "'"; };
    if (!j.is_object()) {
        problems.push_back("line " + std::to_string(line_no) + ": record is not an object");
        return r;
    }
    if (!j.contains("prompt") || !j["prompt"].is_string()) {
        problems.push_back(field("prompt") + " missing or not a string");
    } else {
        r.prompt = j["prompt"].get<std::string>();
        if (r.prompt.empty()) problems.push_back(field("prompt") + " is empty");
    }
    if (!j.contains("image") || !j["image"].is_string() || j["image"].get<std::string>().empty()) {
        problems.push_back(field("image") + " missing or empty");
    } else {
        r.image = j["image"].get<std::string>();
    }
    if (j.contains("class")) r.object_class = j["class"].get<std::string>();
    if (j.contains("split")) r.split = j["split"].get<std::string>();
    if (j.contains("mask")) r.mask = j["mask"].get<std::string>();
    if (j.contains("logo_id")) r.logo_id = j["logo_id"].get<std::string>();
    if (j.contains("background")) r.background_kind = j["background"].get<std::string>();
    if (j.contains("placement")) {
        const auto& p = j["placement"];
        if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.contains("scale")) {
            problems.push_back(field("placement") + " malformed");
        } else {
            Placement pl;
            pl.x = p["x"].get<int>();
            pl.y = p["y"].get<int>();
            pl.scale = p["scale"].get<double>();
            pl.rotation_deg = p.value("rotation_deg", 0.0);
            r.placement = pl;
        }
    }
    return r;
}

}  // namespace

std::string manifest_to_text(const Manifest& manifest) {
    std::ostringstream os;
    for (const auto& r : manifest.records) {
        os << record_to_json(r).dump() << '\n';
    }
    return os.str();
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open for write: " + path.string());
    os << manifest_to_text(manifest);
}

Manifest parse_manifest_text(const std::string& text) {
    Manifest m;
    std::vector<std::string> problems;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            problems.push_back("line " + std::to_string(line_no) + ": invalid JSON");
            continue;
        }
        m.records.push_back(record_from_json(j, line_no, problems));
    }
    if (m.records.empty() && problems.empty()) {
        problems.push_back("manifest has no records");
    }
    if (!problems.empty()) {
        std::string msg = "manifest validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ValidationError(msg);
    }
    return m;
}

std::filesystem::path resolve_manifest_ref(const std::filesystem::path& manifest_dir,
                                           const std::string& ref) {
    std::filesystem::path p(ref);
    return p.is_absolute() ? p : manifest_dir / p;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("manifest not found: " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    Manifest m = parse_manifest_text(buf.str());

    // Resolve relative image refs against the manifest's directory.
    auto base = path.parent_path();
    auto resolve = [&](const std::string& ref) { return resolve_manifest_ref(base, ref); };
    for (const auto& r : m.records) {
        if (!is_readable_png(resolve(r.image))) {
            throw IntegrityError("manifest " + path.string() + " references unreadable image: " + r.image);
        }
        if (!r.mask.empty() && !is_readable_png(resolve(r.mask))) {
            throw IntegrityError("manifest " + path.string() + " references unreadable mask: " + r.mask);
        }
    }
    return m;
}

std::vector<ObjectClass> group_relation_classes(const Manifest& manifest) {
    std::vector<ObjectClass> classes;
    std::map<std::string, std::size_t> index;
    for (const auto& r : manifest.records) {
        if (r.object_class.empty()) {
            throw ValidationError("relation record for image '" + r.image + "' lacks an object class tag");
        }
        auto it = index.find(r.object_class);
        if (it == index.end()) {
            index.emplace(r.object_class, classes.size());
            classes.push_back(ObjectClass{r.object_class, {r.image}, {r.prompt}});
        } else {
            auto& cls = classes[it->second];
            cls.exemplar_images.push_back(r.image);
            if (std::find(cls.prompt_templates.begin(), cls.prompt_templates.end(), r.prompt) ==
                cls.prompt_templates.end()) {
                cls.prompt_templates.push_back(r.prompt);
            }
        }
    }
    for (const auto& cls : classes) cls.validate();
    return classes;
}

}  // namespace logokit
