#include "logokit/embed/embedder.hpp"

#include <cmath>

#include "logokit/core/errors.hpp"
#include "logokit/core/rng.hpp"

namespace logokit::embed {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DomainError("cosine_similarity: length mismatch");
    if (u.empty()) throw DomainError("cosine_similarity: empty vectors");
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw DomainError("cosine_similarity: zero vector");
    return dot / std::sqrt(uu * vv);
}

ToyJointEmbedder::ToyJointEmbedder(int dim) : dim_(dim) {
    if (dim_ < 8) throw DomainError("ToyJointEmbedder: dim must be >= 8");
}

std::vector<double> ToyJointEmbedder::embed_text(const std::string& text) const {
    std::vector<double> v(dim_, 0.0);
    // Hashed character trigrams with sign mixing.
    std::string padded = "^" + text + "$";
    for (std::size_t i = 0; i + 2 < padded.size(); ++i) {
        std::uint64_t h = fnv1a64(padded.data() + i, 3);
        int slot = static_cast<int>(h % static_cast<std::uint64_t>(dim_));
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[slot] += sign;
    }
    v[0] += 0.25;  // keeps the vector nonzero for any text
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;
    return v;
}

std::vector<double> ToyJointEmbedder::embed_image(const Image8& image) const {
    if (image.empty()) throw DomainError("ToyJointEmbedder: empty image");
    std::vector<double> v(dim_, 0.0);
    // 4x4 grid of mean colors, folded into the embedding slots.
    const int grid = 4;
    int slot = 0;
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            int x0 = gx * image.width / grid, x1 = (gx + 1) * image.width / grid;
            int y0 = gy * image.height / grid, y1 = (gy + 1) * image.height / grid;
            double mean[3] = {0, 0, 0};
            int count = 0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        int ch = image.channels >= 3 ? c : 0;
                        mean[c] += image.at(x, y, ch) / 255.0;
                    }
                    ++count;
                }
            }
            for (int c = 0; c < 3; ++c) {
                double m = count > 0 ? mean[c] / count : 0.0;
                v[(slot * 3 + c) % dim_] += m - 0.5;
            }
            ++slot;
        }
    }
    v[0] += 0.25;
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;
    return v;
}

ScriptedPairEmbedder::ScriptedPairEmbedder(std::vector<double> cosines)
    : cosines_(std::move(cosines)) {}

std::vector<double> ScriptedPairEmbedder::embed_text(const std::string&) const {
    return {1.0, 0.0};
}

std::vector<double> ScriptedPairEmbedder::embed_image(const Image8&) const {
    if (next_ >= cosines_.size()) throw CriticError("ScriptedPairEmbedder: script exhausted");
    double c = cosines_[next_++];
    return {c, std::sqrt(std::max(0.0, 1.0 - c * c))};
}

}  // namespace logokit::embed
