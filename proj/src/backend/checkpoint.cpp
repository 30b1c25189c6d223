#include "logokit/backend/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logokit/core/errors.hpp"
#include "logokit/core/rng.hpp"

namespace logokit::diffusion {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'K', 'C', 'P', 'T', '0', '0', '1'};

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

json header_json(const DiffusionBackend& backend, const CheckpointMeta& meta) {
    json h;
    h["backend_kind"] = backend.kind();
    h["meta"] = {{"phase", meta.phase},
                 {"iteration", meta.iteration},
                 {"trained_tokens", meta.trained_tokens}};
    json toks = json::array();
    for (const auto& t : backend.registered_tokens()) {
        toks.push_back({{"literal", t.literal},
                        {"embedding_dim", t.embedding_dim},
                        {"role", token_role_name(t.role)}});
    }
    h["special_tokens"] = toks;
    json groups = json::array();
    for (auto g : kAllGroups) {
        auto span = backend.params(g);
        json tensors = json::array();
        for (const auto& spec : backend.tensor_specs(g)) {
            tensors.push_back({{"name", spec.name},
                               {"shape", spec.shape},
                               {"offset", spec.offset},
                               {"count", spec.count}});
        }
        groups.push_back({{"name", param_group_name(g)},
                          {"count", span.size()},
                          {"checksum", hex64(fnv1a64(span.data(), span.size_bytes()))},
                          {"tensors", tensors}});
    }
    h["groups"] = groups;
    return h;
}

CheckpointMeta meta_from_header(const json& h) {
    CheckpointMeta meta;
    const auto& m = h.at("meta");
    meta.phase = m.at("phase").get<std::string>();
    meta.iteration = m.at("iteration").get<int>();
    meta.trained_tokens = m.at("trained_tokens").get<std::vector<std::string>>();
    return meta;
}

json read_header(std::ifstream& is, const std::filesystem::path& path) {
    char magic[8];
    std::uint64_t header_len = 0;
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw IntegrityError("not a checkpoint file: " + path.string());
    }
    if (!is.read(reinterpret_cast<char*>(&header_len), sizeof(header_len))) {
        throw IntegrityError("truncated checkpoint header: " + path.string());
    }
    std::string text(header_len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) {
        throw IntegrityError("truncated checkpoint header: " + path.string());
    }
    json h = json::parse(text, nullptr, false);
    if (h.is_discarded()) throw IntegrityError("corrupt checkpoint header: " + path.string());
    return h;
}

}  // namespace

void save_checkpoint(const DiffusionBackend& backend, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw LoadError("cannot open checkpoint for write: " + path.string());
    const std::string header = header_json(backend, meta).dump();
    const std::uint64_t header_len = header.size();
    os.write(kMagic, sizeof(kMagic));
    os.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    os.write(header.data(), static_cast<std::streamsize>(header_len));
    for (auto g : kAllGroups) {
        auto span = backend.params(g);
        os.write(reinterpret_cast<const char*>(span.data()),
                 static_cast<std::streamsize>(span.size_bytes()));
    }
    if (!os) throw LoadError("write failed: " + path.string());
}

CheckpointMeta load_checkpoint(DiffusionBackend& backend, const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("checkpoint not found: " + path.string());
    json h = read_header(is, path);
    if (h.at("backend_kind").get<std::string>() != backend.kind()) {
        throw IntegrityError("checkpoint backend kind '" + h["backend_kind"].get<std::string>() +
                             "' does not match '" + backend.kind() + "'");
    }
    for (const auto& jt : h.at("special_tokens")) {
        SpecialToken tok{jt.at("literal").get<std::string>(),
                         jt.at("embedding_dim").get<int>(),
                         token_role_from_name(jt.at("role").get<std::string>())};
        if (!backend.has_token(tok.literal)) {
            backend.register_token(tok, TokenInit::random());  // values overwritten below
        }
    }
    for (const auto& jg : h.at("groups")) {
        ParamGroup g = param_group_from_name(jg.at("name").get<std::string>());
        auto span = backend.params(g);
        const auto count = jg.at("count").get<std::size_t>();
        if (count != span.size()) {
            throw IntegrityError("checkpoint group '" + std::string(param_group_name(g)) +
                                 "' has " + std::to_string(count) + " parameters, backend expects " +
                                 std::to_string(span.size()));
        }
        auto specs = backend.tensor_specs(g);
        const auto& tensors = jg.at("tensors");
        if (tensors.size() != specs.size()) {
            throw IntegrityError("checkpoint tensor manifest mismatch in group '" +
                                 std::string(param_group_name(g)) + "'");
        }
        for (std::size_t i = 0; i < specs.size(); ++i) {
            if (tensors[i].at("name").get<std::string>() != specs[i].name ||
                tensors[i].at("shape").get<std::vector<int>>() != specs[i].shape) {
                throw IntegrityError("checkpoint tensor '" + tensors[i].at("name").get<std::string>() +
                                     "' does not match backend shape in group '" +
                                     std::string(param_group_name(g)) + "'");
            }
        }
        if (!is.read(reinterpret_cast<char*>(span.data()),
                     static_cast<std::streamsize>(span.size_bytes()))) {
            throw IntegrityError("truncated checkpoint payload: " + path.string());
        }
        const std::uint64_t want = parse_hex64(jg.at("checksum").get<std::string>());
        const std::uint64_t got = fnv1a64(span.data(), span.size_bytes());
        if (want != got) {
            throw IntegrityError("checksum mismatch in group '" + std::string(param_group_name(g)) +
                                 "': stored " + hex64(want) + ", loaded " + hex64(got));
        }
    }
    return meta_from_header(h);
}

CheckpointMeta peek_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("checkpoint not found: " + path.string());
    return meta_from_header(read_header(is, path));
}

}  // namespace logokit::diffusion
