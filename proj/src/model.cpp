#include "tsb/model.hpp"

#include <cmath>

namespace tsb {

void ModelConfig::validate() const {
    if (channels < 1 || input_len < 1 || horizon < 1 || d_model < 1 ||
        encoder_layers < 1 || decoder_layers < 1 || heads < 1 || bilstm_layers < 1)
        throw ConfigError("model config: all dimensions must be >= 1");
    if (d_model % 2 != 0)
        throw ConfigError("model config: d_model must be even for the Bi-LSTM halves");
    if (d_model % heads != 0)
        throw ConfigError("model config: d_model " + std::to_string(d_model) +
                          " not divisible by heads " + std::to_string(heads));
}

Tensor positional_encoding(std::int64_t length, std::int64_t d_model) {
    std::vector<double> pe(static_cast<std::size_t>(length * d_model));
    for (std::int64_t pos = 0; pos < length; ++pos) {
        for (std::int64_t i = 0; i < d_model; i += 2) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe[static_cast<std::size_t>(pos * d_model + i)] = std::sin(angle);
            if (i + 1 < d_model)
                pe[static_cast<std::size_t>(pos * d_model + i + 1)] = std::cos(angle);
        }
    }
    return Tensor::from_data({length, d_model}, std::move(pe));
}

std::vector<std::uint8_t> hard_decision(const std::vector<double>& dbm, double lambda) {
    std::vector<std::uint8_t> out(dbm.size());
    for (std::size_t i = 0; i < dbm.size(); ++i) out[i] = dbm[i] >= lambda ? 1 : 0;
    return out;
}

namespace {

Tensor affine_gamma(std::int64_t d) { return Tensor::full({d}, 1.0, true); }
Tensor affine_beta(std::int64_t d) { return Tensor::zeros({d}, true); }

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const HeadProjections& p) {
    for (std::size_t h = 0; h < p.w_q.size(); ++h) {
        const std::string hp = prefix + ".h" + std::to_string(h);
        out.emplace_back(hp + ".w_q", p.w_q[h]);
        out.emplace_back(hp + ".w_k", p.w_k[h]);
        out.emplace_back(hp + ".w_v", p.w_v[h]);
    }
    out.emplace_back(prefix + ".w_out", p.w_out);
}

void collect(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
             const StackedBiLstm& s) {
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        const std::string lp = prefix + ".l" + std::to_string(l);
        for (auto& kv : s.layers[l].forward_cell.named(lp + ".fwd")) out.push_back(kv);
        for (auto& kv : s.layers[l].backward_cell.named(lp + ".bwd")) out.push_back(kv);
    }
}

}  // namespace

TsbModel::TsbModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_stream(seed, 0x7358 /* "ts" */));
    const std::int64_t d = cfg_.d_model;
    const double emb_bound = 1.0 / std::sqrt(static_cast<double>(cfg_.channels));
    w_embed_ = Tensor::uniform({cfg_.channels, d}, rng, -emb_bound, emb_bound, true);
    b_embed_ = Tensor::zeros({d}, true);

    AttentionConfig att{d, cfg_.heads};
    for (std::int64_t n = 0; n < cfg_.encoder_layers; ++n) {
        EncoderLayerParams layer;
        layer.self_attn = HeadProjections::init(att, rng);
        layer.stack = StackedBiLstm::init(cfg_.bilstm_layers, d, rng);
        layer.norm1_gamma = affine_gamma(d);
        layer.norm1_beta = affine_beta(d);
        layer.norm2_gamma = affine_gamma(d);
        layer.norm2_beta = affine_beta(d);
        encoder_.push_back(std::move(layer));
    }
    for (std::int64_t e = 0; e < cfg_.decoder_layers; ++e) {
        DecoderLayerParams layer;
        layer.self_attn = HeadProjections::init(att, rng);
        layer.cross_attn = HeadProjections::init(att, rng);
        layer.stack = StackedBiLstm::init(cfg_.bilstm_layers, d, rng);
        layer.norm1_gamma = affine_gamma(d);
        layer.norm1_beta = affine_beta(d);
        layer.norm2_gamma = affine_gamma(d);
        layer.norm2_beta = affine_beta(d);
        layer.norm3_gamma = affine_gamma(d);
        layer.norm3_beta = affine_beta(d);
        decoder_.push_back(std::move(layer));
    }
    final_norm_gamma_ = affine_gamma(d);
    final_norm_beta_ = affine_beta(d);
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(d));
    w_head_ = Tensor::uniform({d, cfg_.channels}, rng, -head_bound, head_bound, true);
    b_head_ = Tensor::zeros({cfg_.channels}, true);
}

Tensor TsbModel::embed(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != cfg_.channels)
        throw DimensionError("embed: expected Lx" + std::to_string(cfg_.channels) +
                             ", got " + shape_str(x.shape()));
    Tensor emb = add(matmul(x, w_embed_), b_embed_);
    return add(emb, positional_encoding(x.rows(), cfg_.d_model));
}

Tensor TsbModel::encoder_layer_forward(std::size_t layer, const Tensor& x) const {
    const auto& p = encoder_.at(layer);
    Tensor s1 = layer_norm(add(multi_head_attention(x, x, p.self_attn), x),
                           p.norm1_gamma, p.norm1_beta);
    Tensor s2 = layer_norm(add(stacked_bilstm_forward(s1, p.stack), s1),
                           p.norm2_gamma, p.norm2_beta);
    return s2;
}

Tensor TsbModel::encode(const Tensor& enc_in) const {
    Tensor x = embed(enc_in);
    for (std::size_t n = 0; n < encoder_.size(); ++n) x = encoder_layer_forward(n, x);
    return x;
}

Tensor TsbModel::decoder_self_attention_sublayer(std::size_t layer, const Tensor& q,
                                                 const BoolMask& mask) const {
    const auto& p = decoder_.at(layer);
    return layer_norm(add(multi_head_attention(q, q, p.self_attn, &mask), q),
                      p.norm1_gamma, p.norm1_beta);
}

Tensor TsbModel::decoder_layer_forward(std::size_t layer, const Tensor& q,
                                       const Tensor& enc_out,
                                       const BoolMask& mask) const {
    const auto& p = decoder_.at(layer);
    Tensor s1 = decoder_self_attention_sublayer(layer, q, mask);
    Tensor s2 = layer_norm(add(multi_head_attention(s1, enc_out, p.cross_attn), s1),
                           p.norm2_gamma, p.norm2_beta);
    Tensor s3 = layer_norm(add(stacked_bilstm_forward(s2, p.stack), s2),
                           p.norm3_gamma, p.norm3_beta);
    return s3;
}

Tensor TsbModel::output_head(const Tensor& x) const {
    Tensor normed = layer_norm(x, final_norm_gamma_, final_norm_beta_);
    return add(matmul(normed, w_head_), b_head_);
}

Tensor TsbModel::forward_teacher_forced(const Tensor& enc_in, const Tensor& dec_in) const {
    Tensor enc_out = encode(enc_in);
    Tensor x = embed(dec_in);
    const BoolMask mask = make_causal_mask(dec_in.rows());
    for (std::size_t e = 0; e < decoder_.size(); ++e)
        x = decoder_layer_forward(e, x, enc_out, mask);
    return output_head(x);
}

Tensor TsbModel::make_decoder_input(const Tensor& enc_in, const Tensor& target) {
    const std::int64_t m = target.rows();
    const std::int64_t f = target.cols();
    std::vector<double> rows(static_cast<std::size_t>(m * f));
    const auto& enc = enc_in.data();
    const auto& tgt = target.data();
    const std::size_t last = static_cast<std::size_t>((enc_in.rows() - 1) * f);
    for (std::int64_t j = 0; j < f; ++j)
        rows[static_cast<std::size_t>(j)] = enc[last + static_cast<std::size_t>(j)];
    for (std::int64_t r = 1; r < m; ++r)
        for (std::int64_t j = 0; j < f; ++j)
            rows[static_cast<std::size_t>(r * f + j)] =
                tgt[static_cast<std::size_t>((r - 1) * f + j)];
    return Tensor::from_data({m, f}, std::move(rows));
}

std::vector<double> TsbModel::predict_autoregressive(
    const std::vector<double>& enc_in) const {
    const std::int64_t t = cfg_.input_len;
    const std::int64_t f = cfg_.channels;
    const std::int64_t m_total = cfg_.horizon;
    if (static_cast<std::int64_t>(enc_in.size()) != t * f)
        throw DimensionError("predict: encoder input must be " + std::to_string(t) +
                             "x" + std::to_string(f));
    NoGradGuard no_grad;
    Tensor enc = Tensor::from_data({t, f}, enc_in);
    Tensor enc_out = encode(enc);

    std::vector<double> dec_rows(enc_in.end() - f, enc_in.end());  // start row
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m_total * f));
    for (std::int64_t m = 1; m <= m_total; ++m) {
        Tensor dec = Tensor::from_data({m, f}, dec_rows);
        Tensor x = embed(dec);
        const BoolMask mask = make_causal_mask(m);
        for (std::size_t e = 0; e < decoder_.size(); ++e)
            x = decoder_layer_forward(e, x, enc_out, mask);
        Tensor pred = output_head(x);
        const auto& pd = pred.data();
        const std::size_t tail = static_cast<std::size_t>((m - 1) * f);
        for (std::int64_t j = 0; j < f; ++j) {
            const double v = pd[tail + static_cast<std::size_t>(j)];
            out.push_back(v);
            dec_rows.push_back(v);
        }
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> TsbModel::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embed.w", w_embed_);
    out.emplace_back("embed.b", b_embed_);
    for (std::size_t n = 0; n < encoder_.size(); ++n) {
        const std::string p = "enc" + std::to_string(n);
        collect(out, p + ".attn", encoder_[n].self_attn);
        collect(out, p + ".stack", encoder_[n].stack);
        out.emplace_back(p + ".norm1.gamma", encoder_[n].norm1_gamma);
        out.emplace_back(p + ".norm1.beta", encoder_[n].norm1_beta);
        out.emplace_back(p + ".norm2.gamma", encoder_[n].norm2_gamma);
        out.emplace_back(p + ".norm2.beta", encoder_[n].norm2_beta);
    }
    for (std::size_t e = 0; e < decoder_.size(); ++e) {
        const std::string p = "dec" + std::to_string(e);
        collect(out, p + ".self_attn", decoder_[e].self_attn);
        collect(out, p + ".cross_attn", decoder_[e].cross_attn);
        collect(out, p + ".stack", decoder_[e].stack);
        out.emplace_back(p + ".norm1.gamma", decoder_[e].norm1_gamma);
        out.emplace_back(p + ".norm1.beta", decoder_[e].norm1_beta);
        out.emplace_back(p + ".norm2.gamma", decoder_[e].norm2_gamma);
        out.emplace_back(p + ".norm2.beta", decoder_[e].norm2_beta);
        out.emplace_back(p + ".norm3.gamma", decoder_[e].norm3_gamma);
        out.emplace_back(p + ".norm3.beta", decoder_[e].norm3_beta);
    }
    out.emplace_back("final_norm.gamma", final_norm_gamma_);
    out.emplace_back("final_norm.beta", final_norm_beta_);
    out.emplace_back("head.w", w_head_);
    out.emplace_back("head.b", b_head_);
    return out;
}

std::vector<Tensor> TsbModel::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

std::vector<Tensor> TsbModel::weight_matrices() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params())
        if (t.rank() == 2) out.push_back(t);
    return out;
}

std::int64_t TsbModel::param_count() const {
    std::int64_t n = 0;
    for (auto& [name, t] : named_params()) n += t.numel();
    return n;
}

std::int64_t TsbModel::expected_param_count(const ModelConfig& cfg) {
    const std::int64_t d = cfg.d_model, f = cfg.channels, l = cfg.bilstm_layers;
    const std::int64_t attn = 4 * d * d;                      // o*(3*d*d/o) + d*d
    const std::int64_t cell = 3 * d * d + 2 * d;              // 4(HD + H^2 + H), H=d/2
    const std::int64_t stack = l * 2 * cell;
    const std::int64_t enc = attn + stack + 4 * d;
    const std::int64_t dec = 2 * attn + stack + 6 * d;
    return (f * d + d) + cfg.encoder_layers * enc + cfg.decoder_layers * dec + 2 * d +
           (d * f + f);
}

void TsbModel::zero_grad() const {
    for (auto& [name, t] : named_params()) {
        Tensor copy = t;
        copy.zero_grad();
    }
}

void TsbModel::load_param(const std::string& name, const std::vector<double>& values) {
    for (auto& [n, t] : named_params()) {
        if (n == name) {
            Tensor copy = t;
            auto& dst = copy.leaf_data();
            if (dst.size() != values.size())
                throw DimensionError("load_param: size mismatch for " + name);
            dst = values;
            return;
        }
    }
    throw ConfigError("load_param: unknown parameter " + name);
}

}  // namespace tsb
