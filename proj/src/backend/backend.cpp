#include "logokit/backend/backend.hpp"

#include "logokit/core/errors.hpp"

namespace logokit::diffusion {

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::token_embeddings: return "token_embeddings";
        case ParamGroup::text_encoder: return "text_encoder";
        case ParamGroup::denoiser: return "denoiser";
    }
    throw DomainError("unknown parameter group");
}

ParamGroup param_group_from_name(const std::string& name) {
    for (auto g : kAllGroups) {
        if (name == param_group_name(g)) return g;
    }
    throw DomainError("unknown parameter group name: " + name);
}

std::vector<Tensor> DiffusionBackend::attention_maps(const Tensor&, int, const std::string&, int) const {
    throw CapabilityError("backend '" + kind() + "' does not expose attention internals");
}

std::uint64_t group_checksum(const DiffusionBackend& backend, ParamGroup g) {
    auto span = backend.params(g);
    return fnv1a64(span.data(), span.size_bytes());
}

}  // namespace logokit::diffusion
