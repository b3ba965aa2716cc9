#pragma once

#include <cstdint>
#include <vector>

#include "tsb/tensor.hpp"

namespace tsb {

struct AttentionConfig {
    std::int64_t d_model = 64;
    std::int64_t heads = 8;

    std::int64_t d_k() const { return d_model / heads; }
    std::int64_t d_v() const { return d_model / heads; }
    void validate() const;
};

// Per-head query/key/value projections plus the final output projection.
struct HeadProjections {
    std::vector<Tensor> w_q;  // each d_model x d_k
    std::vector<Tensor> w_k;  // each d_model x d_k
    std::vector<Tensor> w_v;  // each d_model x d_v
    Tensor w_out;             // (heads * d_v) x d_model

    static HeadProjections init(const AttentionConfig& cfg, Rng& rng);
    std::int64_t heads() const { return static_cast<std::int64_t>(w_q.size()); }
};

// Boolean attention mask; allow[i*cols + j] != 0 lets query i see key j.
struct BoolMask {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<std::uint8_t> allow;

    bool allowed(std::int64_t i, std::int64_t j) const {
        return allow[static_cast<std::size_t>(i * cols + j)] != 0;
    }
};

// Lower triangular including the diagonal: position i may attend to j <= i.
BoolMask make_causal_mask(std::int64_t t);

// Softmax(Q K^T / sqrt(d_k)) V. Masked-out logits get -1e9 added before the
// softmax. Every query row must keep at least one allowed key.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k,
                                    const Tensor& v,
                                    const BoolMask* mask = nullptr);

// Per-head projected attention, concatenated, then projected by w_out.
// Self-attention when x_q and x_kv are the same tensor.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv,
                            const HeadProjections& proj,
                            const BoolMask* mask = nullptr);

}  // namespace tsb
