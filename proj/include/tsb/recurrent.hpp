#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tsb/tensor.hpp"

namespace tsb {

// One LSTM cell: gate input weights (H x D), recurrent weights (H x H) and
// biases (H) for the forget, input, update and output gates.
struct LstmCellParams {
    Tensor w_f, w_i, w_c, w_o;  // input weights, H x D
    Tensor u_f, u_i, u_c, u_o;  // recurrent weights, H x H
    Tensor b_f, b_i, b_c, b_o;  // biases, H

    static LstmCellParams init(std::int64_t hidden, std::int64_t input, Rng& rng);
    std::int64_t hidden() const { return w_f.rows(); }
    std::int64_t input() const { return w_f.cols(); }
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

// f = sig(W_f p + U_f h + b_f); i, o likewise; c~ = tanh(W_c p + U_c h + b_c);
// c = f.c_prev + i.c~; h = o.tanh(c). Inputs are row vectors (1 x D / 1 x H).
std::pair<Tensor, Tensor> lstm_cell_step(const Tensor& p_t, const Tensor& h_prev,
                                         const Tensor& c_prev,
                                         const LstmCellParams& params);

struct BiLstmLayer {
    LstmCellParams forward_cell;
    LstmCellParams backward_cell;

    static BiLstmLayer init(std::int64_t hidden, std::int64_t input, Rng& rng);
    std::int64_t hidden() const { return forward_cell.hidden(); }
};

// Scans x (T x D) in both directions from zero initial states and
// concatenates per-step outputs to T x 2H, backward states aligned to the
// original time index.
Tensor bilstm_layer_forward(const Tensor& x, const BiLstmLayer& layer);

struct StackedBiLstm {
    std::vector<BiLstmLayer> layers;

    // Per-direction hidden size is d_model/2 so each layer maps
    // T x d_model -> T x d_model and the surrounding residual adds type-check.
    static StackedBiLstm init(std::int64_t n_layers, std::int64_t d_model, Rng& rng);
};

Tensor stacked_bilstm_forward(const Tensor& x, const StackedBiLstm& stack);

}  // namespace tsb
