#include "logokit/diag/attention.hpp"

#include <algorithm>
#include <cmath>

#include "logokit/core/errors.hpp"

namespace logokit::diag {

using diffusion::Tensor;

std::pair<int, int> token_span(const diffusion::DiffusionBackend& backend,
                               const std::string& prompt, const std::string& token) {
    const auto prompt_toks = backend.tokenize(prompt);
    const auto token_toks = backend.tokenize(token);
    if (token_toks.empty()) throw TokenizationError("token '" + token + "' tokenizes to nothing");
    if (prompt_toks.size() < token_toks.size()) {
        throw TokenizationError("token '" + token + "' does not occur in prompt '" + prompt + "'");
    }
    int found = -1, count = 0;
    for (std::size_t i = 0; i + token_toks.size() <= prompt_toks.size(); ++i) {
        if (std::equal(token_toks.begin(), token_toks.end(), prompt_toks.begin() + i)) {
            if (found < 0) found = static_cast<int>(i);
            ++count;
        }
    }
    if (count == 0) {
        throw TokenizationError("token '" + token + "' does not occur in prompt '" + prompt + "'");
    }
    if (count > 1) {
        throw TokenizationError("token '" + token + "' occurs " + std::to_string(count) +
                                " times in prompt '" + prompt + "'; exactly one required");
    }
    return {found, found + static_cast<int>(token_toks.size())};
}

AttentionStack token_attention(const diffusion::DiffusionBackend& backend, const ImageF& image,
                               const std::string& prompt, const std::string& token,
                               std::span<const double> timestep_fracs, Rng& rng) {
    if (!backend.exposes_attention()) {
        throw CapabilityError("backend '" + backend.kind() + "' does not expose attention internals");
    }
    if (timestep_fracs.empty()) throw DomainError("token_attention: no timesteps requested");
    const auto [begin, end] = token_span(backend, prompt, token);

    Tensor z = backend.encode_image(image);
    Tensor eps(z.shape);
    for (auto& v : eps.data) v = rng.normal();  // one draw shared across timesteps

    const int T = backend.schedule().num_steps();
    const int layers = backend.attention_layers();
    AttentionStack stack;
    stack.token = token;
    for (double frac : timestep_fracs) {
        if (!(frac >= 0.0 && frac <= 1.0)) throw DomainError("timestep fraction outside [0,1]");
        const int t = std::clamp(static_cast<int>(std::lround(frac * T)), 1, T - 1);
        Tensor z_t = diffusion::noise_latent(z, t, eps, backend.schedule());
        std::vector<Tensor> acc;
        for (int pos = begin; pos < end; ++pos) {
            auto maps = backend.attention_maps(z_t, t, prompt, pos);
            if (static_cast<int>(maps.size()) != layers) {
                throw CapabilityError("backend reported " + std::to_string(layers) +
                                      " attention layers but returned " + std::to_string(maps.size()));
            }
            if (acc.empty()) {
                acc = std::move(maps);
            } else {
                for (int l = 0; l < layers; ++l) {
                    for (std::size_t i = 0; i < acc[l].numel(); ++i) acc[l][i] += maps[l][i];
                }
            }
        }
        const double inv_span = 1.0 / static_cast<double>(end - begin);
        for (auto& map : acc) {
            double sum = 0.0;
            for (auto& v : map.data) {
                v *= inv_span;
                sum += v;
            }
            if (!(sum > 0.0)) throw DomainError("attention map has no mass");
            for (auto& v : map.data) v /= sum;
            stack.maps.push_back(std::move(map));
        }
    }
    return stack;
}

Tensor average_map(const AttentionStack& stack) {
    if (stack.maps.empty()) throw DomainError("average_map: empty attention stack");
    Tensor out(stack.maps.front().shape);
    for (const auto& map : stack.maps) {
        if (!map.same_shape(out)) throw ShapeError("average_map: mixed raster shapes");
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += map[i];
    }
    const double inv = 1.0 / static_cast<double>(stack.maps.size());
    for (auto& v : out.data) v *= inv;
    return out;
}

double localization_score(const Tensor& avg_map, const Image8& mask) {
    if (avg_map.shape.size() != 2) throw ShapeError("localization_score: 2D map required");
    if (mask.channels != 1 || mask.empty()) {
        throw ShapeError("localization_score: single-channel mask required");
    }
    const int mh = avg_map.shape[0], mw = avg_map.shape[1];

    // Area-weighted downsample of the mask onto the map grid: each mask pixel
    // spreads its unit area over the map cells it overlaps.
    std::vector<double> covered(static_cast<std::size_t>(mh) * mw, 0.0);
    const double sx = static_cast<double>(mw) / mask.width;
    const double sy = static_cast<double>(mh) / mask.height;
    bool any = false;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y, 0) == 0) continue;
            any = true;
            const double cx0 = x * sx, cx1 = (x + 1) * sx;
            const double cy0 = y * sy, cy1 = (y + 1) * sy;
            for (int cy = static_cast<int>(cy0); cy < mh && cy < cy1; ++cy) {
                const double oy = std::min(cy1, cy + 1.0) - std::max(cy0, static_cast<double>(cy));
                if (oy <= 0.0) continue;
                for (int cx = static_cast<int>(cx0); cx < mw && cx < cx1; ++cx) {
                    const double ox = std::min(cx1, cx + 1.0) - std::max(cx0, static_cast<double>(cx));
                    if (ox <= 0.0) continue;
                    covered[static_cast<std::size_t>(cy) * mw + cx] += ox * oy;
                }
            }
        }
    }
    if (!any) throw DomainError("localization_score: mask is empty");

    // covered[] is in map-grid units: a fully masked cell accumulates area 1.
    double inside = 0.0, total = 0.0;
    for (std::size_t i = 0; i < covered.size(); ++i) {
        const double frac = std::min(covered[i], 1.0);
        inside += avg_map[i] * frac;
        total += avg_map[i];
    }
    if (!(total > 0.0)) throw DomainError("localization_score: map has no mass");
    return inside / total;
}

}  // namespace logokit::diag
