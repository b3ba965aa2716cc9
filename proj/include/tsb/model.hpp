#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsb/attention.hpp"
#include "tsb/recurrent.hpp"
#include "tsb/tensor.hpp"

namespace tsb {

struct ModelConfig {
    std::int64_t channels = 32;       // F
    std::int64_t input_len = 96;      // encoder window T
    std::int64_t horizon = 48;        // prediction steps M
    std::int64_t d_model = 64;
    std::int64_t encoder_layers = 3;  // N
    std::int64_t decoder_layers = 3;  // E
    std::int64_t heads = 8;           // o
    std::int64_t bilstm_layers = 2;   // L_Bi per sublayer

    void validate() const;
};

// Fixed sinusoidal positional encoding, length x d_model, no gradient.
Tensor positional_encoding(std::int64_t length, std::int64_t d_model);

// 0 where the value stays below the threshold (channel available),
// 1 where it reaches it.
std::vector<std::uint8_t> hard_decision(const std::vector<double>& dbm, double lambda);

struct EncoderLayerParams {
    HeadProjections self_attn;
    StackedBiLstm stack;
    Tensor norm1_gamma, norm1_beta;
    Tensor norm2_gamma, norm2_beta;
};

struct DecoderLayerParams {
    HeadProjections self_attn;
    HeadProjections cross_attn;
    StackedBiLstm stack;
    Tensor norm1_gamma, norm1_beta;
    Tensor norm2_gamma, norm2_beta;
    Tensor norm3_gamma, norm3_beta;
};

// Transformer encoder-decoder whose feed-forward sublayers are stacked
// bidirectional LSTMs. Sequences are single samples (time x channels);
// batching maps over samples.
class TsbModel {
public:
    TsbModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // x is length x channels; embedding plus positional encoding.
    Tensor embed(const Tensor& x) const;

    Tensor encoder_layer_forward(std::size_t layer, const Tensor& x) const;
    // Embeds and runs all encoder layers.
    Tensor encode(const Tensor& enc_in) const;

    // First decoder sublayer only: masked self-attention + residual + norm.
    Tensor decoder_self_attention_sublayer(std::size_t layer, const Tensor& q,
                                           const BoolMask& mask) const;
    Tensor decoder_layer_forward(std::size_t layer, const Tensor& q,
                                 const Tensor& enc_out, const BoolMask& mask) const;

    // enc_in is T x F, dec_in is M' x F (start row followed by shifted
    // targets); returns predictions for all M' positions.
    Tensor forward_teacher_forced(const Tensor& enc_in, const Tensor& dec_in) const;

    // Start row for teacher forcing: last encoder row, then target rows
    // 0..M-2.
    static Tensor make_decoder_input(const Tensor& enc_in, const Tensor& target);

    // Feeds each generated row back as the next decoder input; returns
    // horizon x channels, row-major. Runs without recording gradients.
    std::vector<double> predict_autoregressive(const std::vector<double>& enc_in) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;
    // Rank-2 parameters only: the L2-regularized set.
    std::vector<Tensor> weight_matrices() const;
    std::int64_t param_count() const;
    static std::int64_t expected_param_count(const ModelConfig& cfg);

    void zero_grad() const;

    // Overwrites parameter values from a flat name -> values map (checkpoint
    // restore); shapes must match exactly.
    void load_param(const std::string& name, const std::vector<double>& values);

private:
    ModelConfig cfg_;
    Tensor w_embed_, b_embed_;
    std::vector<EncoderLayerParams> encoder_;
    std::vector<DecoderLayerParams> decoder_;
    Tensor final_norm_gamma_, final_norm_beta_;
    Tensor w_head_, b_head_;

    Tensor output_head(const Tensor& x) const;
};

}  // namespace tsb
