#include "tsb/attention.hpp"

#include <cmath>

namespace tsb {

namespace {
constexpr double kMaskedLogit = -1e9;
}

void AttentionConfig::validate() const {
    if (d_model < 1 || heads < 1)
        throw ConfigError("attention: d_model and heads must be >= 1");
    if (d_model % heads != 0)
        throw ConfigError("attention: d_model " + std::to_string(d_model) +
                          " not divisible by heads " + std::to_string(heads));
}

HeadProjections HeadProjections::init(const AttentionConfig& cfg, Rng& rng) {
    cfg.validate();
    HeadProjections p;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    for (std::int64_t h = 0; h < cfg.heads; ++h) {
        p.w_q.push_back(Tensor::uniform({cfg.d_model, cfg.d_k()}, rng, -bound, bound, true));
        p.w_k.push_back(Tensor::uniform({cfg.d_model, cfg.d_k()}, rng, -bound, bound, true));
        p.w_v.push_back(Tensor::uniform({cfg.d_model, cfg.d_v()}, rng, -bound, bound, true));
    }
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(cfg.heads * cfg.d_v()));
    p.w_out = Tensor::uniform({cfg.heads * cfg.d_v(), cfg.d_model}, rng, -out_bound,
                              out_bound, true);
    return p;
}

BoolMask make_causal_mask(std::int64_t t) {
    if (t < 1) throw ConfigError("make_causal_mask: length must be >= 1");
    BoolMask m;
    m.rows = t;
    m.cols = t;
    m.allow.assign(static_cast<std::size_t>(t * t), 0);
    for (std::int64_t i = 0; i < t; ++i)
        for (std::int64_t j = 0; j <= i; ++j)
            m.allow[static_cast<std::size_t>(i * t + j)] = 1;
    return m;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k,
                                    const Tensor& v, const BoolMask* mask) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw DimensionError("attention: Q, K, V must be rank-2");
    if (q.cols() != k.cols())
        throw DimensionError("attention: Q/K width mismatch: " + shape_str(q.shape()) +
                             " vs " + shape_str(k.shape()));
    if (k.rows() != v.rows())
        throw DimensionError("attention: K/V length mismatch: " + shape_str(k.shape()) +
                             " vs " + shape_str(v.shape()));
    const std::int64_t t_q = q.rows(), t_k = k.rows(), d_k = q.cols();

    Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_k)));
    if (mask) {
        if (mask->rows != t_q || mask->cols != t_k)
            throw DimensionError("attention: mask is " + std::to_string(mask->rows) +
                                 "x" + std::to_string(mask->cols) + ", expected " +
                                 std::to_string(t_q) + "x" + std::to_string(t_k));
        std::vector<double> add_mask(static_cast<std::size_t>(t_q * t_k), 0.0);
        for (std::int64_t i = 0; i < t_q; ++i) {
            bool any = false;
            for (std::int64_t j = 0; j < t_k; ++j) {
                if (mask->allowed(i, j))
                    any = true;
                else
                    add_mask[static_cast<std::size_t>(i * t_k + j)] = kMaskedLogit;
            }
            if (!any)
                throw ContractError("attention: query row " + std::to_string(i) +
                                    " is fully masked");
        }
        logits = add(logits, Tensor::from_data({t_q, t_k}, std::move(add_mask)));
    }
    Tensor weights = softmax(logits, 1);
    return matmul(weights, v);
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv,
                            const HeadProjections& proj, const BoolMask* mask) {
    if (x_q.rank() != 2 || x_kv.rank() != 2)
        throw DimensionError("multi_head_attention: inputs must be rank-2");
    if (x_q.cols() != x_kv.cols())
        throw DimensionError("multi_head_attention: d_model mismatch: " +
                             shape_str(x_q.shape()) + " vs " + shape_str(x_kv.shape()));
    std::vector<Tensor> heads;
    heads.reserve(proj.w_q.size());
    for (std::size_t h = 0; h < proj.w_q.size(); ++h) {
        Tensor qh = matmul(x_q, proj.w_q[h]);
        Tensor kh = matmul(x_kv, proj.w_k[h]);
        Tensor vh = matmul(x_kv, proj.w_v[h]);
        heads.push_back(scaled_dot_product_attention(qh, kh, vh, mask));
    }
    Tensor cat = heads.size() == 1 ? heads[0] : concat(heads, 1);
    return matmul(cat, proj.w_out);
}

}  // namespace tsb
