#include "tsb/recurrent.hpp"

#include <cmath>

namespace tsb {

LstmCellParams LstmCellParams::init(std::int64_t hidden, std::int64_t input, Rng& rng) {
    if (hidden < 1 || input < 1)
        throw ConfigError("lstm cell: hidden and input sizes must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto w = [&] { return Tensor::uniform({hidden, input}, rng, -bound, bound, true); };
    auto u = [&] { return Tensor::uniform({hidden, hidden}, rng, -bound, bound, true); };
    auto b = [&] { return Tensor::zeros({hidden}, true); };
    LstmCellParams p;
    p.w_f = w(); p.w_i = w(); p.w_c = w(); p.w_o = w();
    p.u_f = u(); p.u_i = u(); p.u_c = u(); p.u_o = u();
    p.b_f = b(); p.b_i = b(); p.b_c = b(); p.b_o = b();
    return p;
}

std::vector<std::pair<std::string, Tensor>> LstmCellParams::named(
    const std::string& prefix) const {
    return {
        {prefix + ".w_f", w_f}, {prefix + ".w_i", w_i}, {prefix + ".w_c", w_c},
        {prefix + ".w_o", w_o}, {prefix + ".u_f", u_f}, {prefix + ".u_i", u_i},
        {prefix + ".u_c", u_c}, {prefix + ".u_o", u_o}, {prefix + ".b_f", b_f},
        {prefix + ".b_i", b_i}, {prefix + ".b_c", b_c}, {prefix + ".b_o", b_o},
    };
}

namespace {

void check_vec(const Tensor& t, std::int64_t width, const char* what) {
    if (t.rank() != 2 || t.rows() != 1 || t.cols() != width)
        throw DimensionError(std::string("lstm_cell_step: ") + what + " must be 1x" +
                             std::to_string(width) + ", got " + shape_str(t.shape()));
}

// Fused gate update: pre is 1 x 4H laid out [f | i | c~ | o]. Emits [h | c]
// as one 1 x 2H node with a hand-written adjoint; the scan runs this once
// per step, so keeping it a single node carries the whole sequence cost.
Tensor lstm_gates(const Tensor& pre, const Tensor& c_prev) {
    const std::int64_t h = c_prev.cols();
    if (pre.cols() != 4 * h)
        throw DimensionError("lstm_gates: pre-activation width " +
                             shape_str(pre.shape()) + " does not match 4x hidden " +
                             std::to_string(h));
    const double* pv = pre.data().data();
    const double* cp = c_prev.data().data();
    auto saved = std::make_shared<std::vector<double>>(static_cast<std::size_t>(5 * h));
    double* f = saved->data();
    double* i = f + h;
    double* g = i + h;
    double* o = g + h;
    double* tanh_c = o + h;
    std::vector<double> out(static_cast<std::size_t>(2 * h));
    for (std::int64_t j = 0; j < h; ++j) {
        f[j] = 1.0 / (1.0 + std::exp(-pv[j]));
        i[j] = 1.0 / (1.0 + std::exp(-pv[h + j]));
        g[j] = std::tanh(pv[2 * h + j]);
        o[j] = 1.0 / (1.0 + std::exp(-pv[3 * h + j]));
        const double c = f[j] * cp[j] + i[j] * g[j];
        tanh_c[j] = std::tanh(c);
        out[static_cast<std::size_t>(j)] = o[j] * tanh_c[j];
        out[static_cast<std::size_t>(h + j)] = c;
    }
    return make_op_result(
        "lstm_gates", {1, 2 * h}, std::move(out), {pre, c_prev},
        [pre, c_prev, saved, h](autodiff::Node& self) {
            auto& pn = *pre.node();
            auto& cn = *c_prev.node();
            const double* f = saved->data();
            const double* i = f + h;
            const double* g = i + h;
            const double* o = g + h;
            const double* tanh_c = o + h;
            const double* cp = cn.data.data();
            const double* dh = self.grad.data();
            const double* dc_out = dh + h;
            double* dpre = pn.requires_grad ? pn.grad_buffer() : nullptr;
            double* dcp = cn.requires_grad ? cn.grad_buffer() : nullptr;
            for (std::int64_t j = 0; j < h; ++j) {
                const double dc =
                    dc_out[j] + dh[j] * o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
                if (dpre) {
                    dpre[j] += dc * cp[j] * f[j] * (1.0 - f[j]);
                    dpre[h + j] += dc * g[j] * i[j] * (1.0 - i[j]);
                    dpre[2 * h + j] += dc * i[j] * (1.0 - g[j] * g[j]);
                    dpre[3 * h + j] += dh[j] * tanh_c[j] * o[j] * (1.0 - o[j]);
                }
                if (dcp) dcp[j] += dc * f[j];
            }
        });
}

std::pair<Tensor, Tensor> gate_update(const Tensor& pre, const Tensor& c_prev) {
    const std::int64_t h = c_prev.cols();
    Tensor hc = lstm_gates(pre, c_prev);
    return {slice(hc, 1, 0, h), slice(hc, 1, h, 2 * h)};
}

// Fused per-cell weights for a whole-sequence scan: the input projection of
// all four gates is one T x 4H matmul, only the recurrence stays stepwise.
struct FusedCell {
    Tensor wx_t;   // D x 4H
    Tensor u_t;    // H x 4H
    Tensor bias;   // 4H
    std::int64_t h;
};

FusedCell fuse(const LstmCellParams& p) {
    FusedCell f;
    f.h = p.hidden();
    f.wx_t = transpose(concat({p.w_f, p.w_i, p.w_c, p.w_o}, 0));
    f.u_t = transpose(concat({p.u_f, p.u_i, p.u_c, p.u_o}, 0));
    f.bias = concat({p.b_f, p.b_i, p.b_c, p.b_o}, 0);
    return f;
}

// One directional scan; step_order maps scan position to time index.
std::vector<Tensor> scan_direction(const Tensor& x, const LstmCellParams& params,
                                   bool reverse) {
    const std::int64_t t_len = x.rows();
    const FusedCell cell = fuse(params);
    Tensor g = add(matmul(x, cell.wx_t), cell.bias);  // T x 4H

    Tensor h = Tensor::zeros({1, cell.h});
    Tensor c = Tensor::zeros({1, cell.h});
    std::vector<Tensor> out(static_cast<std::size_t>(t_len));
    for (std::int64_t s = 0; s < t_len; ++s) {
        const std::int64_t t = reverse ? t_len - 1 - s : s;
        Tensor pre = add(slice(g, 0, t, t + 1), matmul(h, cell.u_t));
        auto [h_t, c_t] = gate_update(pre, c);
        h = h_t;
        c = c_t;
        out[static_cast<std::size_t>(t)] = h_t;
    }
    return out;
}

}  // namespace

std::pair<Tensor, Tensor> lstm_cell_step(const Tensor& p_t, const Tensor& h_prev,
                                         const Tensor& c_prev,
                                         const LstmCellParams& params) {
    const std::int64_t h = params.hidden();
    const std::int64_t d = params.input();
    check_vec(p_t, d, "p_t");
    check_vec(h_prev, h, "h_prev");
    check_vec(c_prev, h, "c_prev");

    auto gate_pre = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
        return add(add(matmul(p_t, transpose(w)), matmul(h_prev, transpose(u))), b);
    };
    Tensor pre = concat({gate_pre(params.w_f, params.u_f, params.b_f),
                         gate_pre(params.w_i, params.u_i, params.b_i),
                         gate_pre(params.w_c, params.u_c, params.b_c),
                         gate_pre(params.w_o, params.u_o, params.b_o)},
                        1);
    return gate_update(pre, c_prev);
}

BiLstmLayer BiLstmLayer::init(std::int64_t hidden, std::int64_t input, Rng& rng) {
    BiLstmLayer layer;
    layer.forward_cell = LstmCellParams::init(hidden, input, rng);
    layer.backward_cell = LstmCellParams::init(hidden, input, rng);
    return layer;
}

Tensor bilstm_layer_forward(const Tensor& x, const BiLstmLayer& layer) {
    if (x.rank() != 2)
        throw DimensionError("bilstm_layer_forward: input must be rank-2, got " +
                             shape_str(x.shape()));
    if (x.cols() != layer.forward_cell.input())
        throw DimensionError("bilstm_layer_forward: input width " +
                             shape_str(x.shape()) + " does not match cell input " +
                             std::to_string(layer.forward_cell.input()));
    std::vector<Tensor> fwd = scan_direction(x, layer.forward_cell, false);
    std::vector<Tensor> bwd = scan_direction(x, layer.backward_cell, true);
    return concat({concat(fwd, 0), concat(bwd, 0)}, 1);
}

StackedBiLstm StackedBiLstm::init(std::int64_t n_layers, std::int64_t d_model, Rng& rng) {
    if (n_layers < 1) throw ConfigError("stacked bilstm: need at least one layer");
    if (d_model % 2 != 0)
        throw ConfigError("stacked bilstm: d_model must be even, got " +
                          std::to_string(d_model));
    StackedBiLstm s;
    const std::int64_t h = d_model / 2;
    for (std::int64_t l = 0; l < n_layers; ++l)
        s.layers.push_back(BiLstmLayer::init(h, d_model, rng));  // 2H == d_model chains
    return s;
}

Tensor stacked_bilstm_forward(const Tensor& x, const StackedBiLstm& stack) {
    if (stack.layers.empty())
        throw ConfigError("stacked bilstm: no layers configured");
    Tensor out = x;
    for (const auto& layer : stack.layers) out = bilstm_layer_forward(out, layer);
    return out;
}

}  // namespace tsb
