#pragma once

#include <map>

#include "logokit/backend/backend.hpp"
#include "logokit/core/config.hpp"

namespace logokit::diffusion {

/// Desk-scale diffusion stack exercising every backend interface:
///   - character-level tokenizer over printable ASCII, extensible with
///     angle-bracketed special tokens;
///   - text encoder: embedding lookup + mean pool + one dense layer;
///   - latent codec: 4x average-pool with a fixed 1x1 channel map;
///   - denoiser: three 3x3 conv layers with the timestep embedding and the
///     pooled conditioning vector added after layer 1 and one cross-attention
///     layer over per-token embeddings added after layer 2.
/// All math is double precision; total parameter count stays under 1e5.
class ToyBackend : public DiffusionBackend {
public:
    explicit ToyBackend(const BackendConfig& cfg);

    std::string kind() const override { return "toy"; }
    const BackendConfig& config() const { return cfg_; }

    std::vector<int> tokenize(const std::string& text) const override;
    int vocab_size() const override;
    bool has_token(const std::string& literal) const override;
    int token_id(const std::string& literal) const override;
    int register_token(const SpecialToken& token, const TokenInit& init) override;
    std::vector<SpecialToken> registered_tokens() const override;

    int embedding_dim() const override { return cfg_.embed_dim; }
    std::vector<double> token_embedding(int id) const override;
    std::vector<double> word_embedding(const std::string& word) const override;
    std::vector<double> encode_text(const std::string& prompt) const override;

    int image_size() const override { return cfg_.image_size; }
    std::array<int, 3> latent_shape() const override;
    Tensor encode_image(const ImageF& image) const override;
    ImageF decode_latent(const Tensor& z) const override;

    const NoiseSchedule& schedule() const override { return schedule_; }
    Tensor denoise(const Tensor& z_t, int t, const std::string& prompt) const override;

    ImageF generate(const std::string& prompt, int steps, Rng& rng) const override;

    double loss_and_backward(std::span<const TrainItem> batch, const TrainableSet& trainable) override;
    std::span<double> params(ParamGroup g) override;
    std::span<const double> params(ParamGroup g) const override;
    std::span<const double> grads(ParamGroup g) const override;
    std::vector<TensorSpec> tensor_specs(ParamGroup g) const override;

    bool exposes_attention() const override { return true; }
    int attention_layers() const override { return 1; }
    std::vector<Tensor> attention_maps(const Tensor& z_t, int t, const std::string& prompt,
                                       int token_pos) const override;

    static constexpr int kBaseVocab = 95;  // printable ASCII 32..126
    static constexpr int kTimeDim = 16;

private:
    struct Cache;

    void init_params();
    std::vector<double> time_embedding(int t) const;
    void forward(const Tensor& z_t, int t, const std::vector<int>& toks, Cache& cache) const;
    void backward(const Tensor& z_t, const Cache& cache, const std::vector<double>& d_eps_hat);
    void mask_grads(const TrainableSet& trainable);

    BackendConfig cfg_;
    NoiseSchedule schedule_;
    int lat_h_ = 0, lat_w_ = 0;

    std::vector<std::string> specials_;
    std::vector<SpecialToken> special_tokens_;
    std::map<std::string, int> special_ids_;

    // parameter groups
    std::vector<double> emb_, emb_g_;  // [vocab][D]
    std::vector<double> te_, te_g_;    // W [Cc][D] then b [Cc]
    std::vector<double> den_, den_g_;

    // fixed 1x1 codec maps (not addressable as a trainable group)
    std::vector<double> enc_w_;  // [Cz][3]
    std::vector<double> dec_w_;  // [3][Cz]

    // offsets into den_
    struct DenLayout {
        std::size_t conv1_w, conv1_b, tproj_w, tproj_b, cproj_w, cproj_b;
        std::size_t wq, wk, wv;
        std::size_t conv2_w, conv2_b, conv3_w, conv3_b;
        std::size_t total;
    } off_{};
};

}  // namespace logokit::diffusion
