#include "logokit/backend/toy_backend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "logokit/core/errors.hpp"

namespace logokit::diffusion {

namespace {

// 3x3 same-padding cross-correlation.
void conv3x3_fwd(const double* in, int cin, const double* w, const double* b, int cout,
                 int h, int wd, double* out) {
    const int P = h * wd;
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < wd; ++x) {
                double acc = b[co];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* wp = w + ((co * cin + ci) * 9);
                    const double* ip = in + ci * P;
                    for (int dy = -1; dy <= 1; ++dy) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx;
                            if (xx < 0 || xx >= wd) continue;
                            acc += ip[yy * wd + xx] * wp[(dy + 1) * 3 + (dx + 1)];
                        }
                    }
                }
                out[co * P + y * wd + x] = acc;
            }
        }
    }
}

// Accumulates dW, db and (when din != nullptr) din.
void conv3x3_bwd(const double* in, int cin, const double* w, int cout, int h, int wd,
                 const double* dout, double* dw, double* db, double* din) {
    const int P = h * wd;
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < wd; ++x) {
                const double g = dout[co * P + y * wd + x];
                if (g == 0.0) continue;
                db[co] += g;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* ip = in + ci * P;
                    double* dwp = dw + ((co * cin + ci) * 9);
                    const double* wp = w + ((co * cin + ci) * 9);
                    double* dip = din ? din + ci * P : nullptr;
                    for (int dy = -1; dy <= 1; ++dy) {
                        int yy = y + dy;
                        if (yy < 0 || yy >= h) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            int xx = x + dx;
                            if (xx < 0 || xx >= wd) continue;
                            dwp[(dy + 1) * 3 + (dx + 1)] += ip[yy * wd + xx] * g;
                            if (dip) dip[yy * wd + xx] += wp[(dy + 1) * 3 + (dx + 1)] * g;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

struct ToyBackend::Cache {
    std::vector<int> toks;
    std::vector<double> embs;    // [L][D]
    std::vector<double> pooled;  // [D]
    std::vector<double> cond;    // [Cc]
    std::vector<double> temb;    // [Dt]
    std::vector<double> a0, x1;  // [F][P]
    std::vector<double> q;       // [P][Da]
    std::vector<double> k;       // [L][Da]
    std::vector<double> v;       // [L][F]
    std::vector<double> attn_w;  // [P][L] softmax rows
    std::vector<double> attn;    // [F][P]
    std::vector<double> a2, x2;  // [F][P]
    std::vector<double> eps_hat; // [Cz][P]
};

ToyBackend::ToyBackend(const BackendConfig& cfg)
    : cfg_(cfg),
      schedule_(NoiseSchedule::linear_variance(cfg.train_steps)) {
    if (cfg_.image_size < 8 || cfg_.image_size % 4 != 0) {
        throw ValidationError("ToyBackend: image_size must be >= 8 and divisible by 4");
    }
    if (cfg_.latent_channels < 3) throw ValidationError("ToyBackend: latent_channels must be >= 3");
    lat_h_ = cfg_.image_size / 4;
    lat_w_ = cfg_.image_size / 4;
    init_params();
}

void ToyBackend::init_params() {
    const int F = cfg_.feature_channels, Cz = cfg_.latent_channels, D = cfg_.embed_dim;
    const int Cc = cfg_.cond_dim, Da = cfg_.attn_dim, Dt = kTimeDim;

    auto& o = off_;
    std::size_t p = 0;
    o.conv1_w = p; p += static_cast<std::size_t>(F) * Cz * 9;
    o.conv1_b = p; p += F;
    o.tproj_w = p; p += static_cast<std::size_t>(F) * Dt;
    o.tproj_b = p; p += F;
    o.cproj_w = p; p += static_cast<std::size_t>(F) * Cc;
    o.cproj_b = p; p += F;
    o.wq = p; p += static_cast<std::size_t>(Da) * F;
    o.wk = p; p += static_cast<std::size_t>(Da) * D;
    o.wv = p; p += static_cast<std::size_t>(F) * D;
    o.conv2_w = p; p += static_cast<std::size_t>(F) * F * 9;
    o.conv2_b = p; p += F;
    o.conv3_w = p; p += static_cast<std::size_t>(Cz) * F * 9;
    o.conv3_b = p; p += Cz;
    o.total = p;

    den_.assign(o.total, 0.0);
    den_g_.assign(o.total, 0.0);
    emb_.assign(static_cast<std::size_t>(kBaseVocab) * D, 0.0);
    emb_g_.assign(emb_.size(), 0.0);
    te_.assign(static_cast<std::size_t>(Cc) * D + Cc, 0.0);
    te_g_.assign(te_.size(), 0.0);

    Rng rng(cfg_.init_seed, "toy_backend_init");
    auto fill_normal = [&](double* dst, std::size_t n, double scale) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = scale * rng.normal();
    };
    fill_normal(emb_.data(), emb_.size(), 0.5);
    fill_normal(te_.data(), static_cast<std::size_t>(Cc) * D, 1.0 / std::sqrt(static_cast<double>(D)));
    fill_normal(den_.data() + o.conv1_w, static_cast<std::size_t>(F) * Cz * 9, 1.0 / std::sqrt(9.0 * Cz));
    fill_normal(den_.data() + o.tproj_w, static_cast<std::size_t>(F) * Dt, 1.0 / std::sqrt(static_cast<double>(Dt)));
    fill_normal(den_.data() + o.cproj_w, static_cast<std::size_t>(F) * Cc, 1.0 / std::sqrt(static_cast<double>(Cc)));
    fill_normal(den_.data() + o.wq, static_cast<std::size_t>(Da) * F, 1.0 / std::sqrt(static_cast<double>(F)));
    fill_normal(den_.data() + o.wk, static_cast<std::size_t>(Da) * D, 1.0 / std::sqrt(static_cast<double>(D)));
    fill_normal(den_.data() + o.wv, static_cast<std::size_t>(F) * D, 1.0 / std::sqrt(static_cast<double>(D)));
    fill_normal(den_.data() + o.conv2_w, static_cast<std::size_t>(F) * F * 9, 1.0 / std::sqrt(9.0 * F));
    fill_normal(den_.data() + o.conv3_w, static_cast<std::size_t>(Cz) * F * 9, 1.0 / std::sqrt(9.0 * F));

    // Fixed 1x1 codec: first three latent channels mirror RGB (centered to
    // [-1,1]), remaining channels carry the channel mean.
    enc_w_.assign(static_cast<std::size_t>(cfg_.latent_channels) * 3, 1.0 / 3.0);
    dec_w_.assign(static_cast<std::size_t>(3) * cfg_.latent_channels, 0.0);
    for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 3; ++k) enc_w_[c * 3 + k] = (c == k) ? 1.0 : 0.0;
        dec_w_[c * cfg_.latent_channels + c] = 1.0;
    }
}

// ---------------------------------------------------------------------------
// tokenizer

std::vector<int> ToyBackend::tokenize(const std::string& text) const {
    std::vector<int> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char ch = text[i];
        if (ch == '<') {
            // candidate special literal: "<...>" with no whitespace or '<' inside
            std::size_t j = i + 1;
            while (j < text.size() && text[j] != '>' && text[j] != '<' && text[j] != ' ') ++j;
            if (j < text.size() && text[j] == '>' && j > i + 1) {
                std::string literal = text.substr(i, j - i + 1);
                auto it = special_ids_.find(literal);
                if (it == special_ids_.end()) {
                    throw TokenizationError("unknown special token " + literal);
                }
                out.push_back(it->second);
                i = j + 1;
                continue;
            }
        }
        if (ch < 32 || ch > 126) {
            throw TokenizationError("character outside printable ASCII at position " + std::to_string(i));
        }
        out.push_back(ch - 32);
        ++i;
    }
    return out;
}

int ToyBackend::vocab_size() const {
    return kBaseVocab + static_cast<int>(specials_.size());
}

bool ToyBackend::has_token(const std::string& literal) const {
    if (literal.size() == 1 && literal[0] >= 32 && literal[0] <= 126) return true;
    return special_ids_.count(literal) > 0;
}

int ToyBackend::token_id(const std::string& literal) const {
    if (literal.size() == 1 && literal[0] >= 32 && literal[0] <= 126) return literal[0] - 32;
    auto it = special_ids_.find(literal);
    if (it == special_ids_.end()) throw TokenizationError("unknown token literal: " + literal);
    return it->second;
}

int ToyBackend::register_token(const SpecialToken& token, const TokenInit& init) {
    if (token.literal.empty()) throw RegistrationError("empty token literal");
    if (has_token(token.literal)) {
        throw RegistrationError("token already in vocabulary: " + token.literal);
    }
    if (token.embedding_dim != cfg_.embed_dim) {
        throw RegistrationError("token embedding_dim " + std::to_string(token.embedding_dim) +
                                " does not match backend dim " + std::to_string(cfg_.embed_dim));
    }
    std::vector<double> row(cfg_.embed_dim, 0.0);
    if (init.kind == TokenInit::Kind::from_word) {
        row = word_embedding(init.word);
    } else {
        Rng rng(cfg_.init_seed, "token_init:" + token.literal);
        for (auto& v : row) v = 0.5 * rng.normal();
    }
    int id = vocab_size();
    specials_.push_back(token.literal);
    special_tokens_.push_back(token);
    special_ids_[token.literal] = id;
    emb_.insert(emb_.end(), row.begin(), row.end());
    emb_g_.assign(emb_.size(), 0.0);
    return id;
}

std::vector<SpecialToken> ToyBackend::registered_tokens() const { return special_tokens_; }

std::vector<double> ToyBackend::token_embedding(int id) const {
    if (id < 0 || id >= vocab_size()) throw DomainError("token_embedding: id out of range");
    const int D = cfg_.embed_dim;
    return {emb_.begin() + static_cast<std::size_t>(id) * D,
            emb_.begin() + static_cast<std::size_t>(id + 1) * D};
}

std::vector<double> ToyBackend::word_embedding(const std::string& word) const {
    auto toks = tokenize(word);
    if (toks.empty()) throw DomainError("word_embedding: empty word");
    const int D = cfg_.embed_dim;
    std::vector<double> mean(D, 0.0);
    for (int id : toks) {
        for (int d = 0; d < D; ++d) mean[d] += emb_[static_cast<std::size_t>(id) * D + d];
    }
    for (auto& v : mean) v /= static_cast<double>(toks.size());
    return mean;
}

std::vector<double> ToyBackend::encode_text(const std::string& prompt) const {
    auto toks = tokenize(prompt);
    const int D = cfg_.embed_dim, Cc = cfg_.cond_dim;
    std::vector<double> pooled(D, 0.0);
    if (!toks.empty()) {
        for (int id : toks) {
            for (int d = 0; d < D; ++d) pooled[d] += emb_[static_cast<std::size_t>(id) * D + d];
        }
        for (auto& v : pooled) v /= static_cast<double>(toks.size());
    }
    std::vector<double> cond(Cc, 0.0);
    for (int c = 0; c < Cc; ++c) {
        double acc = te_[static_cast<std::size_t>(Cc) * D + c];  // bias
        for (int d = 0; d < D; ++d) acc += te_[static_cast<std::size_t>(c) * D + d] * pooled[d];
        cond[c] = acc;
    }
    return cond;
}

// ---------------------------------------------------------------------------
// latent codec

std::array<int, 3> ToyBackend::latent_shape() const {
    return {cfg_.latent_channels, lat_h_, lat_w_};
}

Tensor ToyBackend::encode_image(const ImageF& image) const {
    if (image.width != cfg_.image_size || image.height != cfg_.image_size || image.channels != 3) {
        throw ShapeError("encode_image: expected " + std::to_string(cfg_.image_size) + "x" +
                         std::to_string(cfg_.image_size) + " RGB image");
    }
    const int Cz = cfg_.latent_channels;
    Tensor z({Cz, lat_h_, lat_w_});
    for (int y = 0; y < lat_h_; ++y) {
        for (int x = 0; x < lat_w_; ++x) {
            double pooled[3] = {0, 0, 0};
            for (int dy = 0; dy < 4; ++dy) {
                for (int dx = 0; dx < 4; ++dx) {
                    for (int c = 0; c < 3; ++c) pooled[c] += image.at(x * 4 + dx, y * 4 + dy, c);
                }
            }
            for (int c = 0; c < 3; ++c) pooled[c] /= 16.0;
            for (int zc = 0; zc < Cz; ++zc) {
                double acc = 0.0;
                for (int c = 0; c < 3; ++c) acc += enc_w_[zc * 3 + c] * (2.0 * pooled[c] - 1.0);
                z[static_cast<std::size_t>(zc) * lat_h_ * lat_w_ + y * lat_w_ + x] = acc;
            }
        }
    }
    return z;
}

ImageF ToyBackend::decode_latent(const Tensor& z) const {
    auto want = latent_shape();
    if (z.shape != std::vector<int>{want[0], want[1], want[2]}) {
        throw ShapeError("decode_latent: latent shape mismatch");
    }
    const int Cz = cfg_.latent_channels;
    const int P = lat_h_ * lat_w_;
    ImageF img(cfg_.image_size, cfg_.image_size, 3);
    for (int y = 0; y < cfg_.image_size; ++y) {
        for (int x = 0; x < cfg_.image_size; ++x) {
            int ly = y / 4, lx = x / 4;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int zc = 0; zc < Cz; ++zc) {
                    acc += dec_w_[c * Cz + zc] * z[static_cast<std::size_t>(zc) * P + ly * lat_w_ + lx];
                }
                img.at(x, y, c) = std::clamp(0.5 + 0.5 * acc, 0.0, 1.0);
            }
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// denoiser

std::vector<double> ToyBackend::time_embedding(int t) const {
    std::vector<double> temb(kTimeDim, 0.0);
    double tn = static_cast<double>(t) / static_cast<double>(schedule_.num_steps());
    for (int k = 0; k < kTimeDim / 2; ++k) {
        double freq = std::pow(2.0, k);
        temb[2 * k] = std::sin(2.0 * std::numbers::pi * freq * tn);
        temb[2 * k + 1] = std::cos(2.0 * std::numbers::pi * freq * tn);
    }
    return temb;
}

void ToyBackend::forward(const Tensor& z_t, int t, const std::vector<int>& toks, Cache& c) const {
    const int F = cfg_.feature_channels, Cz = cfg_.latent_channels, D = cfg_.embed_dim;
    const int Cc = cfg_.cond_dim, Da = cfg_.attn_dim, Dt = kTimeDim;
    const int P = lat_h_ * lat_w_;
    const int L = static_cast<int>(toks.size());
    const double* dw = den_.data();

    c.toks = toks;
    c.embs.assign(static_cast<std::size_t>(L) * D, 0.0);
    for (int j = 0; j < L; ++j) {
        for (int d = 0; d < D; ++d) c.embs[j * D + d] = emb_[static_cast<std::size_t>(toks[j]) * D + d];
    }
    c.pooled.assign(D, 0.0);
    if (L > 0) {
        for (int j = 0; j < L; ++j)
            for (int d = 0; d < D; ++d) c.pooled[d] += c.embs[j * D + d];
        for (auto& v : c.pooled) v /= static_cast<double>(L);
    }
    c.cond.assign(Cc, 0.0);
    for (int cc = 0; cc < Cc; ++cc) {
        double acc = te_[static_cast<std::size_t>(Cc) * D + cc];
        for (int d = 0; d < D; ++d) acc += te_[static_cast<std::size_t>(cc) * D + d] * c.pooled[d];
        c.cond[cc] = acc;
    }
    c.temb = time_embedding(t);

    // layer 1: conv + additive timestep/conditioning injection
    c.a0.assign(static_cast<std::size_t>(F) * P, 0.0);
    conv3x3_fwd(z_t.data.data(), Cz, dw + off_.conv1_w, dw + off_.conv1_b, F, lat_h_, lat_w_, c.a0.data());
    for (int f = 0; f < F; ++f) {
        double shift = 0.0;
        for (int k = 0; k < Dt; ++k) shift += dw[off_.tproj_w + f * Dt + k] * c.temb[k];
        shift += dw[off_.tproj_b + f];
        for (int cc = 0; cc < Cc; ++cc) shift += dw[off_.cproj_w + f * Cc + cc] * c.cond[cc];
        shift += dw[off_.cproj_b + f];
        for (int p = 0; p < P; ++p) c.a0[f * P + p] += shift;
    }
    c.x1.resize(c.a0.size());
    for (std::size_t i = 0; i < c.a0.size(); ++i) c.x1[i] = std::tanh(c.a0[i]);

    // cross-attention over token embeddings
    c.q.assign(static_cast<std::size_t>(P) * Da, 0.0);
    for (int p = 0; p < P; ++p) {
        for (int a = 0; a < Da; ++a) {
            double acc = 0.0;
            for (int f = 0; f < F; ++f) acc += dw[off_.wq + a * F + f] * c.x1[f * P + p];
            c.q[p * Da + a] = acc;
        }
    }
    c.k.assign(static_cast<std::size_t>(L) * Da, 0.0);
    c.v.assign(static_cast<std::size_t>(L) * F, 0.0);
    for (int j = 0; j < L; ++j) {
        for (int a = 0; a < Da; ++a) {
            double acc = 0.0;
            for (int d = 0; d < D; ++d) acc += dw[off_.wk + a * D + d] * c.embs[j * D + d];
            c.k[j * Da + a] = acc;
        }
        for (int f = 0; f < F; ++f) {
            double acc = 0.0;
            for (int d = 0; d < D; ++d) acc += dw[off_.wv + f * D + d] * c.embs[j * D + d];
            c.v[j * F + f] = acc;
        }
    }
    c.attn_w.assign(static_cast<std::size_t>(P) * std::max(L, 1), 0.0);
    c.attn.assign(static_cast<std::size_t>(F) * P, 0.0);
    if (L > 0) {
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Da));
        for (int p = 0; p < P; ++p) {
            double maxlogit = -1e300;
            std::vector<double> logits(L);
            for (int j = 0; j < L; ++j) {
                double acc = 0.0;
                for (int a = 0; a < Da; ++a) acc += c.q[p * Da + a] * c.k[j * Da + a];
                logits[j] = acc * inv_sqrt;
                maxlogit = std::max(maxlogit, logits[j]);
            }
            double zsum = 0.0;
            for (int j = 0; j < L; ++j) {
                double e = std::exp(logits[j] - maxlogit);
                c.attn_w[p * L + j] = e;
                zsum += e;
            }
            for (int j = 0; j < L; ++j) c.attn_w[p * L + j] /= zsum;
            for (int j = 0; j < L; ++j) {
                double a = c.attn_w[p * L + j];
                for (int f = 0; f < F; ++f) c.attn[f * P + p] += a * c.v[j * F + f];
            }
        }
    }

    // layer 2: conv + additive attention injection
    c.a2.assign(static_cast<std::size_t>(F) * P, 0.0);
    conv3x3_fwd(c.x1.data(), F, dw + off_.conv2_w, dw + off_.conv2_b, F, lat_h_, lat_w_, c.a2.data());
    for (std::size_t i = 0; i < c.a2.size(); ++i) c.a2[i] += c.attn[i];
    c.x2.resize(c.a2.size());
    for (std::size_t i = 0; i < c.a2.size(); ++i) c.x2[i] = std::tanh(c.a2[i]);

    // layer 3
    c.eps_hat.assign(static_cast<std::size_t>(Cz) * P, 0.0);
    conv3x3_fwd(c.x2.data(), F, dw + off_.conv3_w, dw + off_.conv3_b, Cz, lat_h_, lat_w_, c.eps_hat.data());
}

Tensor ToyBackend::denoise(const Tensor& z_t, int t, const std::string& prompt) const {
    auto want = latent_shape();
    if (z_t.shape != std::vector<int>{want[0], want[1], want[2]}) {
        throw ShapeError("denoise: latent shape mismatch");
    }
    if (t < 0 || t > schedule_.num_steps()) throw DomainError("denoise: t out of range");
    Cache c;
    forward(z_t, t, tokenize(prompt), c);
    Tensor out(z_t.shape);
    out.data = c.eps_hat;
    return out;
}

void ToyBackend::backward(const Tensor& z_t, const Cache& c, const std::vector<double>& d_eps) {
    const int F = cfg_.feature_channels, Cz = cfg_.latent_channels, D = cfg_.embed_dim;
    const int Cc = cfg_.cond_dim, Da = cfg_.attn_dim, Dt = kTimeDim;
    const int P = lat_h_ * lat_w_;
    const int L = static_cast<int>(c.toks.size());
    const double* dw = den_.data();
    double* dg = den_g_.data();

    // layer 3
    std::vector<double> dx2(static_cast<std::size_t>(F) * P, 0.0);
    conv3x3_bwd(c.x2.data(), F, dw + off_.conv3_w, Cz, lat_h_, lat_w_, d_eps.data(),
                dg + off_.conv3_w, dg + off_.conv3_b, dx2.data());

    std::vector<double> da2(dx2.size());
    for (std::size_t i = 0; i < dx2.size(); ++i) da2[i] = dx2[i] * (1.0 - c.x2[i] * c.x2[i]);

    // layer 2 conv
    std::vector<double> dx1(static_cast<std::size_t>(F) * P, 0.0);
    conv3x3_bwd(c.x1.data(), F, dw + off_.conv2_w, F, lat_h_, lat_w_, da2.data(),
                dg + off_.conv2_w, dg + off_.conv2_b, dx1.data());

    // attention branch (dattn == da2)
    std::vector<double> dembs(static_cast<std::size_t>(std::max(L, 1)) * D, 0.0);
    if (L > 0) {
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Da));
        std::vector<double> dv(static_cast<std::size_t>(L) * F, 0.0);
        std::vector<double> dk(static_cast<std::size_t>(L) * Da, 0.0);
        std::vector<double> dq(static_cast<std::size_t>(P) * Da, 0.0);
        std::vector<double> dA(L), dlog(L);
        for (int p = 0; p < P; ++p) {
            for (int j = 0; j < L; ++j) {
                double acc = 0.0;
                for (int f = 0; f < F; ++f) acc += da2[f * P + p] * c.v[j * F + f];
                dA[j] = acc;
                double a = c.attn_w[p * L + j];
                for (int f = 0; f < F; ++f) dv[j * F + f] += a * da2[f * P + p];
            }
            double dot = 0.0;
            for (int j = 0; j < L; ++j) dot += c.attn_w[p * L + j] * dA[j];
            for (int j = 0; j < L; ++j) dlog[j] = c.attn_w[p * L + j] * (dA[j] - dot);
            for (int j = 0; j < L; ++j) {
                double g = dlog[j] * inv_sqrt;
                for (int a = 0; a < Da; ++a) {
                    dq[p * Da + a] += g * c.k[j * Da + a];
                    dk[j * Da + a] += g * c.q[p * Da + a];
                }
            }
        }
        for (int p = 0; p < P; ++p) {
            for (int a = 0; a < Da; ++a) {
                double g = dq[p * Da + a];
                if (g == 0.0) continue;
                for (int f = 0; f < F; ++f) {
                    dg[off_.wq + a * F + f] += g * c.x1[f * P + p];
                    dx1[f * P + p] += dw[off_.wq + a * F + f] * g;
                }
            }
        }
        for (int j = 0; j < L; ++j) {
            for (int a = 0; a < Da; ++a) {
                double g = dk[j * Da + a];
                if (g == 0.0) continue;
                for (int d = 0; d < D; ++d) {
                    dg[off_.wk + a * D + d] += g * c.embs[j * D + d];
                    dembs[j * D + d] += dw[off_.wk + a * D + d] * g;
                }
            }
            for (int f = 0; f < F; ++f) {
                double g = dv[j * F + f];
                if (g == 0.0) continue;
                for (int d = 0; d < D; ++d) {
                    dg[off_.wv + f * D + d] += g * c.embs[j * D + d];
                    dembs[j * D + d] += dw[off_.wv + f * D + d] * g;
                }
            }
        }
    }

    std::vector<double> da0(dx1.size());
    for (std::size_t i = 0; i < dx1.size(); ++i) da0[i] = dx1[i] * (1.0 - c.x1[i] * c.x1[i]);

    // layer 1 conv (input gradient not needed)
    conv3x3_bwd(z_t.data.data(), Cz, dw + off_.conv1_w, F, lat_h_, lat_w_, da0.data(),
                dg + off_.conv1_w, dg + off_.conv1_b, nullptr);

    // timestep / conditioning projections (broadcast over positions)
    std::vector<double> dcond(Cc, 0.0);
    for (int f = 0; f < F; ++f) {
        double gsum = 0.0;
        for (int p = 0; p < P; ++p) gsum += da0[f * P + p];
        for (int k = 0; k < Dt; ++k) dg[off_.tproj_w + f * Dt + k] += gsum * c.temb[k];
        dg[off_.tproj_b + f] += gsum;
        for (int cc = 0; cc < Cc; ++cc) {
            dg[off_.cproj_w + f * Cc + cc] += gsum * c.cond[cc];
            dcond[cc] += dw[off_.cproj_w + f * Cc + cc] * gsum;
        }
        dg[off_.cproj_b + f] += gsum;
    }

    // text encoder dense layer
    std::vector<double> dpooled(D, 0.0);
    for (int cc = 0; cc < Cc; ++cc) {
        for (int d = 0; d < D; ++d) {
            te_g_[static_cast<std::size_t>(cc) * D + d] += dcond[cc] * c.pooled[d];
            dpooled[d] += te_[static_cast<std::size_t>(cc) * D + d] * dcond[cc];
        }
        te_g_[static_cast<std::size_t>(Cc) * D + cc] += dcond[cc];
    }

    // embeddings: pooled mean path + attention K/V path
    if (L > 0) {
        const double invL = 1.0 / static_cast<double>(L);
        for (int j = 0; j < L; ++j) {
            double* row = emb_g_.data() + static_cast<std::size_t>(c.toks[j]) * D;
            for (int d = 0; d < D; ++d) row[d] += dembs[j * D + d] + dpooled[d] * invL;
        }
    }
}

double ToyBackend::loss_and_backward(std::span<const TrainItem> batch, const TrainableSet& trainable) {
    if (batch.empty()) throw DomainError("loss_and_backward: empty batch");
    if (!trainable.any()) throw DomainError("loss_and_backward: no trainable groups requested");
    std::fill(emb_g_.begin(), emb_g_.end(), 0.0);
    std::fill(te_g_.begin(), te_g_.end(), 0.0);
    std::fill(den_g_.begin(), den_g_.end(), 0.0);

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    Cache cache;
    for (const auto& item : batch) {
        Tensor z = encode_image(item.image);
        Tensor z_t = noise_latent(z, item.t, item.eps, schedule_);
        forward(z_t, item.t, tokenize(item.prompt), cache);
        const std::size_t n = cache.eps_hat.size();
        if (item.eps.numel() != n) throw ShapeError("loss_and_backward: eps shape mismatch");
        std::vector<double> d_eps(n);
        double item_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double diff = cache.eps_hat[i] - item.eps[i];
            item_loss += diff * diff;
            d_eps[i] = 2.0 * diff / static_cast<double>(n) * inv_batch;
        }
        loss += item_loss / static_cast<double>(n) * inv_batch;
        backward(z_t, cache, d_eps);
    }
    mask_grads(trainable);
    return loss;
}

void ToyBackend::mask_grads(const TrainableSet& trainable) {
    if (!trainable.token_embeddings) {
        std::fill(emb_g_.begin(), emb_g_.end(), 0.0);
    } else if (!trainable.token_ids.empty()) {
        const int D = cfg_.embed_dim;
        std::vector<char> keep(static_cast<std::size_t>(vocab_size()), 0);
        for (int id : trainable.token_ids) {
            if (id < 0 || id >= vocab_size()) throw DomainError("trainable token id out of range");
            keep[static_cast<std::size_t>(id)] = 1;
        }
        for (int id = 0; id < vocab_size(); ++id) {
            if (!keep[static_cast<std::size_t>(id)]) {
                std::fill_n(emb_g_.begin() + static_cast<std::size_t>(id) * D, D, 0.0);
            }
        }
    }
    if (!trainable.text_encoder) std::fill(te_g_.begin(), te_g_.end(), 0.0);
    if (!trainable.denoiser) std::fill(den_g_.begin(), den_g_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// sampling

ImageF ToyBackend::generate(const std::string& prompt, int steps, Rng& rng) const {
    if (steps < 1) throw DomainError("generate: steps must be >= 1");
    auto toks = tokenize(prompt);  // validates the prompt up front
    (void)toks;
    const auto ls = latent_shape();
    Tensor z({ls[0], ls[1], ls[2]});
    for (auto& v : z.data) v = rng.normal();

    const int T = schedule_.num_steps();
    std::vector<int> ladder(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        ladder[i] = static_cast<int>(std::lround((T - 1) * (1.0 - static_cast<double>(i) / steps)));
    }
    for (int i = 0; i < steps; ++i) {
        int tc = ladder[i], tn = ladder[i + 1];
        if (tc == tn) continue;
        Tensor eps_hat = denoise(z, tc, prompt);
        if (cfg_.guidance_scale != 1.0) {
            Tensor eps_un = denoise(z, tc, "");
            for (std::size_t k = 0; k < eps_hat.numel(); ++k) {
                eps_hat[k] = eps_un[k] + cfg_.guidance_scale * (eps_hat[k] - eps_un[k]);
            }
        }
        const double ac = schedule_.alpha_bar(tc), an = schedule_.alpha_bar(tn);
        const double sac = std::sqrt(ac), snc = std::sqrt(1.0 - ac);
        const double san = std::sqrt(an), snn = std::sqrt(1.0 - an);
        for (std::size_t k = 0; k < z.numel(); ++k) {
            double x0 = (z[k] - snc * eps_hat[k]) / sac;
            z[k] = san * x0 + snn * eps_hat[k];
        }
    }
    return decode_latent(z);
}

// ---------------------------------------------------------------------------
// parameter access

std::span<double> ToyBackend::params(ParamGroup g) {
    switch (g) {
        case ParamGroup::token_embeddings: return emb_;
        case ParamGroup::text_encoder: return te_;
        case ParamGroup::denoiser: return den_;
    }
    throw DomainError("unknown parameter group");
}

std::span<const double> ToyBackend::params(ParamGroup g) const {
    switch (g) {
        case ParamGroup::token_embeddings: return emb_;
        case ParamGroup::text_encoder: return te_;
        case ParamGroup::denoiser: return den_;
    }
    throw DomainError("unknown parameter group");
}

std::span<const double> ToyBackend::grads(ParamGroup g) const {
    switch (g) {
        case ParamGroup::token_embeddings: return emb_g_;
        case ParamGroup::text_encoder: return te_g_;
        case ParamGroup::denoiser: return den_g_;
    }
    throw DomainError("unknown parameter group");
}

std::vector<TensorSpec> ToyBackend::tensor_specs(ParamGroup g) const {
    const int F = cfg_.feature_channels, Cz = cfg_.latent_channels, D = cfg_.embed_dim;
    const int Cc = cfg_.cond_dim, Da = cfg_.attn_dim, Dt = kTimeDim;
    switch (g) {
        case ParamGroup::token_embeddings:
            return {{"table", {vocab_size(), D}, 0, emb_.size()}};
        case ParamGroup::text_encoder:
            return {{"dense_w", {Cc, D}, 0, static_cast<std::size_t>(Cc) * D},
                    {"dense_b", {Cc}, static_cast<std::size_t>(Cc) * D, static_cast<std::size_t>(Cc)}};
        case ParamGroup::denoiser: {
            auto spec = [](std::string n, std::vector<int> s, std::size_t off) {
                std::size_t count = Tensor::numel_of(s);
                return TensorSpec{std::move(n), std::move(s), off, count};
            };
            std::vector<TensorSpec> out;
            out.push_back(spec("conv1_w", {F, Cz, 3, 3}, off_.conv1_w));
            out.push_back(spec("conv1_b", {F}, off_.conv1_b));
            out.push_back(spec("tproj_w", {F, Dt}, off_.tproj_w));
            out.push_back(spec("tproj_b", {F}, off_.tproj_b));
            out.push_back(spec("cproj_w", {F, Cc}, off_.cproj_w));
            out.push_back(spec("cproj_b", {F}, off_.cproj_b));
            out.push_back(spec("attn_wq", {Da, F}, off_.wq));
            out.push_back(spec("attn_wk", {Da, D}, off_.wk));
            out.push_back(spec("attn_wv", {F, D}, off_.wv));
            out.push_back(spec("conv2_w", {F, F, 3, 3}, off_.conv2_w));
            out.push_back(spec("conv2_b", {F}, off_.conv2_b));
            out.push_back(spec("conv3_w", {Cz, F, 3, 3}, off_.conv3_w));
            out.push_back(spec("conv3_b", {Cz}, off_.conv3_b));
            return out;
        }
    }
    throw DomainError("unknown parameter group");
}

std::vector<Tensor> ToyBackend::attention_maps(const Tensor& z_t, int t, const std::string& prompt,
                                               int token_pos) const {
    auto toks = tokenize(prompt);
    if (token_pos < 0 || token_pos >= static_cast<int>(toks.size())) {
        throw DomainError("attention_maps: token position out of range");
    }
    Cache c;
    forward(z_t, t, toks, c);
    const int P = lat_h_ * lat_w_;
    const int L = static_cast<int>(toks.size());
    Tensor map({lat_h_, lat_w_});
    for (int p = 0; p < P; ++p) map[p] = c.attn_w[p * L + token_pos];
    return {map};
}

}  // namespace logokit::diffusion
