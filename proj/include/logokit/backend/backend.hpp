#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "logokit/backend/schedule.hpp"
#include "logokit/backend/tensor.hpp"
#include "logokit/core/image.hpp"
#include "logokit/core/rng.hpp"
#include "logokit/core/types.hpp"

namespace logokit::diffusion {

enum class ParamGroup { token_embeddings, text_encoder, denoiser };

const char* param_group_name(ParamGroup g);
ParamGroup param_group_from_name(const std::string& name);
inline constexpr std::array<ParamGroup, 3> kAllGroups = {
    ParamGroup::token_embeddings, ParamGroup::text_encoder, ParamGroup::denoiser};

/// Which parameters a training step may touch. When token_ids is nonempty,
/// embedding updates are restricted to those rows.
struct TrainableSet {
    bool token_embeddings = false;
    bool text_encoder = false;
    bool denoiser = false;
    std::vector<int> token_ids;

    bool any() const { return token_embeddings || text_encoder || denoiser; }
};

struct TokenInit {
    enum class Kind { from_word, random };
    Kind kind = Kind::random;
    std::string word;  // for from_word

    static TokenInit from_word(std::string w) { return {Kind::from_word, std::move(w)}; }
    static TokenInit random() { return {Kind::random, {}}; }
};

/// One element of a training batch: clean image, conditioning prompt, drawn
/// timestep and noise sample.
struct TrainItem {
    ImageF image;
    std::string prompt;
    int t = 0;
    Tensor eps;
};

/// Named slice of a parameter-group span, used by checkpointing.
struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;  // into the group's parameter span
    std::size_t count = 0;
};

/// Pluggable latent diffusion stack: tokenizer with extensible vocabulary,
/// text encoder, latent codec, denoiser, and addressable parameter groups.
class DiffusionBackend {
public:
    virtual ~DiffusionBackend() = default;

    virtual std::string kind() const = 0;

    // -- tokenizer ----------------------------------------------------------
    virtual std::vector<int> tokenize(const std::string& text) const = 0;
    virtual int vocab_size() const = 0;
    virtual bool has_token(const std::string& literal) const = 0;
    virtual int token_id(const std::string& literal) const = 0;
    virtual int register_token(const SpecialToken& token, const TokenInit& init) = 0;
    virtual std::vector<SpecialToken> registered_tokens() const = 0;

    // -- embeddings / text encoder ------------------------------------------
    virtual int embedding_dim() const = 0;
    virtual std::vector<double> token_embedding(int id) const = 0;
    /// Mean of the token embeddings of the word's tokenization.
    virtual std::vector<double> word_embedding(const std::string& word) const = 0;
    virtual std::vector<double> encode_text(const std::string& prompt) const = 0;

    // -- latent codec --------------------------------------------------------
    virtual int image_size() const = 0;
    virtual std::array<int, 3> latent_shape() const = 0;  // {channels, h, w}
    virtual Tensor encode_image(const ImageF& image) const = 0;
    virtual ImageF decode_latent(const Tensor& z) const = 0;

    // -- denoiser ------------------------------------------------------------
    virtual const NoiseSchedule& schedule() const = 0;
    virtual Tensor denoise(const Tensor& z_t, int t, const std::string& prompt) const = 0;

    /// Deterministic reverse-process sampling from noise.
    virtual ImageF generate(const std::string& prompt, int steps, Rng& rng) const = 0;

    // -- training surface ----------------------------------------------------
    /// Computes the mean denoising loss over the batch and accumulates
    /// gradients for the requested trainable set into the grad buffers
    /// (zeroing them first). Gradients outside the set are zero.
    virtual double loss_and_backward(std::span<const TrainItem> batch, const TrainableSet& trainable) = 0;
    virtual std::span<double> params(ParamGroup g) = 0;
    virtual std::span<const double> params(ParamGroup g) const = 0;
    virtual std::span<const double> grads(ParamGroup g) const = 0;
    virtual std::vector<TensorSpec> tensor_specs(ParamGroup g) const = 0;

    // -- attention internals -------------------------------------------------
    virtual bool exposes_attention() const { return false; }
    virtual int attention_layers() const { return 0; }
    /// Raw (unnormalized over space) per-layer attention rasters for one token
    /// position of the prompt, at latent resolution.
    virtual std::vector<Tensor> attention_maps(const Tensor& z_t, int t, const std::string& prompt,
                                               int token_pos) const;
};

/// Bit-level checksum of a parameter group (for freeze contracts).
std::uint64_t group_checksum(const DiffusionBackend& backend, ParamGroup g);

}  // namespace logokit::diffusion
