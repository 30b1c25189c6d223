#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "logokit/core/image.hpp"

namespace logokit::embed {

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
    virtual std::string version() const = 0;
};

class ImageEmbedder {
public:
    virtual ~ImageEmbedder() = default;
    virtual std::vector<double> embed_image(const Image8& image) const = 0;
    virtual std::string version() const = 0;
};

/// Joint image/text embedder pair sharing one embedding space.
class JointEmbedder : public TextEmbedder, public ImageEmbedder {
public:
    std::string version() const override = 0;  // one overrider for both bases
};

/// Cosine similarity. Computed as dot/sqrt(|u|^2 |v|^2) so identical inputs
/// give exactly 1.0. Throws DomainError on zero vectors or length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Deterministic desk-scale embedder: images map to coarse color statistics,
/// text to hashed character-trigram counts, both L2-normalized into a shared
/// dimensionality. No semantics, but stable and nonzero for any input.
class ToyJointEmbedder : public JointEmbedder {
public:
    explicit ToyJointEmbedder(int dim = 64);
    std::vector<double> embed_text(const std::string& text) const override;
    std::vector<double> embed_image(const Image8& image) const override;
    std::string version() const override { return "toy-embedder-1-d" + std::to_string(dim_); }

private:
    int dim_;
};

/// Test double emitting prescribed unit vectors so that consecutive
/// image/text pairs realize a scripted sequence of cosines.
class ScriptedPairEmbedder : public JointEmbedder {
public:
    explicit ScriptedPairEmbedder(std::vector<double> cosines);
    std::vector<double> embed_text(const std::string& text) const override;
    std::vector<double> embed_image(const Image8& image) const override;
    std::string version() const override { return "scripted"; }

private:
    std::vector<double> cosines_;
    mutable std::size_t next_ = 0;
};

}  // namespace logokit::embed
