#include "tsb/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "tsb/kernels.hpp"

namespace tsb {

namespace {

std::atomic<std::uint64_t> g_seq{1};

thread_local bool t_grad_enabled = true;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                             shape_str(t.shape()));
}

void check_finite_input(const Tensor& t, const char* op) {
    for (double v : t.data())
        if (!std::isfinite(v))
            throw NumericError(std::string(op) + ": non-finite input value");
}

// [outer, extent, inner] view of one axis.
struct AxisView {
    std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::int64_t axis) {
    AxisView v;
    for (std::int64_t i = 0; i < axis; ++i) v.outer *= s[static_cast<std::size_t>(i)];
    v.extent = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
        v.inner *= s[i];
    return v;
}

}  // namespace

namespace autodiff {

double* Node::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad.data();
}

}  // namespace autodiff

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool on) { g_finite_checks = on; }

// ----------------------------------------------------------- construction

static std::shared_ptr<autodiff::Node> make_leaf(Shape shape,
                                                 std::vector<double> data,
                                                 bool requires_grad) {
    if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
    for (auto e : shape)
        if (e <= 0)
            throw DimensionError("tensor extents must be positive, got " +
                                 shape_str(shape));
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
        throw DimensionError("data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    auto n = std::make_shared<autodiff::Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), value);
    return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi,
                       bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.uniform(lo, hi);
    return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

// -------------------------------------------------------------- accessors

const Shape& Tensor::shape() const& { return node_->shape; }
Shape Tensor::shape() && { return node_->shape; }
std::int64_t Tensor::numel() const { return node_->numel(); }
std::int64_t Tensor::rank() const { return static_cast<std::int64_t>(node_->shape.size()); }

std::int64_t Tensor::rows() const {
    check_rank2(*this, "rows");
    return node_->shape[0];
}

std::int64_t Tensor::cols() const {
    check_rank2(*this, "cols");
    return node_->shape[1];
}

const std::vector<double>& Tensor::data() const& { return node_->data; }
std::vector<double> Tensor::data() && { return node_->data; }

std::vector<double>& Tensor::leaf_data() {
    if (node_->backward_fn)
        throw ContractError("leaf_data: tensor is an op result, not a leaf");
    return node_->data;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->backward_fn; }

const std::vector<double>& Tensor::grad() const& { return node_->grad; }
std::vector<double> Tensor::grad() && { return node_->grad; }

std::vector<double>& Tensor::leaf_grad() {
    if (node_->backward_fn)
        throw ContractError("leaf_grad: tensor is an op result, not a leaf");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1)
        throw ContractError("item: tensor has " + std::to_string(numel()) +
                            " elements, expected 1");
    return node_->data[0];
}

Tensor Tensor::detach() const {
    return from_data(node_->shape, node_->data, false);
}

// ----------------------------------------------------------- op recording

Tensor make_op_result(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents, autodiff::BackwardFn fn) {
    if (finite_checks_enabled()) {
        for (double v : data)
            if (!std::isfinite(v))
                throw NumericError(std::string(op) + ": produced non-finite value");
    }
    bool needs_grad = false;
    if (grad_enabled())
        for (const auto& p : parents)
            if (p.requires_grad()) needs_grad = true;

    auto n = make_leaf(std::move(shape), std::move(data), needs_grad);
    if (needs_grad) {
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(fn);
    }
    return Tensor(n);
}

// ------------------------------------------------------------------- ops

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: inner dimensions differ: " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m * n));
    kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
    return make_op_result(
        "matmul", {m, n}, std::move(out), {a, b},
        [a, b, m, k, n](autodiff::Node& self) {
            auto& an = *a.node();
            auto& bn = *b.node();
            if (an.requires_grad)  // dA += dC * B^T
                kernels::matmul(self.grad.data(), bn.data.data(), an.grad_buffer(),
                                m, n, k, false, true, true);
            if (bn.requires_grad)  // dB += A^T * dC
                kernels::matmul(an.data.data(), self.grad.data(), bn.grad_buffer(),
                                k, m, n, true, false, true);
        });
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const std::int64_t m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<std::size_t>(m * n));
    const auto& src = a.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j * m + i)] = src[static_cast<std::size_t>(i * n + j)];
    return make_op_result("transpose", {n, m}, std::move(out), {a},
                          [a, m, n](autodiff::Node& self) {
                              auto& an = *a.node();
                              if (!an.requires_grad) return;
                              double* da = an.grad_buffer();
                              for (std::int64_t j = 0; j < n; ++j)
                                  for (std::int64_t i = 0; i < m; ++i)
                                      da[i * n + j] += self.grad[static_cast<std::size_t>(j * m + i)];
                          });
}

Tensor broadcast_to(const Tensor& a, const Shape& target) {
    if (a.shape() == target) return a;
    const auto& src = a.shape();
    if (src.size() > target.size())
        throw DimensionError("broadcast_to: source rank exceeds target: " +
                             shape_str(src) + " vs " + shape_str(target));
    // right-align; every expanded extent must be a leading 1
    const std::size_t pad = target.size() - src.size();
    bool in_leading = true;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const std::int64_t s = i < pad ? 1 : src[i - pad];
        if (s == target[i] && !(s == 1 && in_leading)) {
            in_leading = false;
            continue;
        }
        if (s == 1 && in_leading) continue;
        throw DimensionError("broadcast_to: " + shape_str(src) +
                             " cannot broadcast to " + shape_str(target) +
                             " (only leading-1 extents expand)");
    }
    const std::int64_t block = a.numel();
    const std::int64_t rep = shape_numel(target) / block;
    std::vector<double> out(static_cast<std::size_t>(block * rep));
    for (std::int64_t r = 0; r < rep; ++r)
        std::memcpy(out.data() + r * block, a.data().data(),
                    static_cast<std::size_t>(block) * sizeof(double));
    return make_op_result("broadcast_to", target, std::move(out), {a},
                          [a, block, rep](autodiff::Node& self) {
                              auto& an = *a.node();
                              if (!an.requires_grad) return;
                              double* da = an.grad_buffer();
                              for (std::int64_t r = 0; r < rep; ++r)
                                  kernels::serial::axpy(1.0, self.grad.data() + r * block,
                                                        da, block);
                          });
}

namespace {

// Aligns shapes for binary elementwise ops by broadcasting the smaller side.
std::pair<Tensor, Tensor> align_binary(const Tensor& a, const Tensor& b,
                                       const char* op) {
    if (a.shape() == b.shape()) return {a, b};
    if (a.numel() >= b.numel()) {
        try {
            return {a, broadcast_to(b, a.shape())};
        } catch (const DimensionError&) {
        }
    } else {
        try {
            return {broadcast_to(a, b.shape()), b};
        } catch (const DimensionError&) {
        }
    }
    throw DimensionError(std::string(op) + ": incompatible shapes " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = align_binary(a0, b0, "add");
    std::vector<double> out(static_cast<std::size_t>(a.numel()));
    kernels::add(a.data().data(), b.data().data(), out.data(), a.numel());
    return make_op_result("add", a.shape(), std::move(out), {a, b},
                          [a, b](autodiff::Node& self) {
                              auto& an = *a.node();
                              auto& bn = *b.node();
                              const std::int64_t n = self.numel();
                              if (an.requires_grad)
                                  kernels::axpy(1.0, self.grad.data(), an.grad_buffer(), n);
                              if (bn.requires_grad)
                                  kernels::axpy(1.0, self.grad.data(), bn.grad_buffer(), n);
                          });
}

Tensor sub(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = align_binary(a0, b0, "sub");
    std::vector<double> out(static_cast<std::size_t>(a.numel()));
    kernels::sub(a.data().data(), b.data().data(), out.data(), a.numel());
    return make_op_result("sub", a.shape(), std::move(out), {a, b},
                          [a, b](autodiff::Node& self) {
                              auto& an = *a.node();
                              auto& bn = *b.node();
                              const std::int64_t n = self.numel();
                              if (an.requires_grad)
                                  kernels::axpy(1.0, self.grad.data(), an.grad_buffer(), n);
                              if (bn.requires_grad)
                                  kernels::axpy(-1.0, self.grad.data(), bn.grad_buffer(), n);
                          });
}

Tensor mul(const Tensor& a0, const Tensor& b0) {
    auto [a, b] = align_binary(a0, b0, "mul");
    std::vector<double> out(static_cast<std::size_t>(a.numel()));
    kernels::mul(a.data().data(), b.data().data(), out.data(), a.numel());
    return make_op_result(
        "mul", a.shape(), std::move(out), {a, b},
        [a, b](autodiff::Node& self) {
            auto& an = *a.node();
            auto& bn = *b.node();
            const std::int64_t n = self.numel();
            if (an.requires_grad) {
                double* da = an.grad_buffer();
                const double* g = self.grad.data();
                const double* bv = bn.data.data();
                for (std::int64_t i = 0; i < n; ++i) da[i] += g[i] * bv[i];
            }
            if (bn.requires_grad) {
                double* db = bn.grad_buffer();
                const double* g = self.grad.data();
                const double* av = an.data.data();
                for (std::int64_t i = 0; i < n; ++i) db[i] += g[i] * av[i];
            }
        });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(static_cast<std::size_t>(a.numel()));
    kernels::scale(a.data().data(), s, out.data(), a.numel());
    return make_op_result("scale", a.shape(), std::move(out), {a},
                          [a, s](autodiff::Node& self) {
                              auto& an = *a.node();
                              if (an.requires_grad)
                                  kernels::axpy(s, self.grad.data(), an.grad_buffer(),
                                                self.numel());
                          });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(static_cast<std::size_t>(x.numel()));
    kernels::sigmoid(x.data().data(), out.data(), x.numel());
    return make_op_result(
        "sigmoid", x.shape(), std::move(out), {x},
        [x](autodiff::Node& self) {
            auto& xn = *x.node();
            if (!xn.requires_grad) return;
            double* dx = xn.grad_buffer();
            const double* y = self.data.data();
            const double* g = self.grad.data();
            const std::int64_t n = self.numel();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
        });
}

Tensor tanh(const Tensor& x) {
    std::vector<double> out(static_cast<std::size_t>(x.numel()));
    kernels::tanh(x.data().data(), out.data(), x.numel());
    return make_op_result(
        "tanh", x.shape(), std::move(out), {x},
        [x](autodiff::Node& self) {
            auto& xn = *x.node();
            if (!xn.requires_grad) return;
            double* dx = xn.grad_buffer();
            const double* y = self.data.data();
            const double* g = self.grad.data();
            const std::int64_t n = self.numel();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
        });
}

Tensor softmax(const Tensor& x, std::int64_t axis) {
    if (axis < 0 || axis >= x.rank())
        throw DimensionError("softmax: axis " + std::to_string(axis) +
                             " out of range for " + shape_str(x.shape()));
    check_finite_input(x, "softmax");
    const AxisView v = axis_view(x.shape(), axis);
    std::vector<double> out(static_cast<std::size_t>(x.numel()));
    if (v.inner == 1) {
        kernels::softmax_rows(x.data().data(), out.data(), v.outer, v.extent);
    } else {
        // strided fallback; only the last axis is on any hot path
        const auto& src = x.data();
        for (std::int64_t o = 0; o < v.outer; ++o)
            for (std::int64_t in = 0; in < v.inner; ++in) {
                const std::int64_t base = o * v.extent * v.inner + in;
                double mx = src[static_cast<std::size_t>(base)];
                for (std::int64_t c = 1; c < v.extent; ++c)
                    mx = std::max(mx, src[static_cast<std::size_t>(base + c * v.inner)]);
                double sum = 0.0;
                for (std::int64_t c = 0; c < v.extent; ++c) {
                    const double e = std::exp(src[static_cast<std::size_t>(base + c * v.inner)] - mx);
                    out[static_cast<std::size_t>(base + c * v.inner)] = e;
                    sum += e;
                }
                for (std::int64_t c = 0; c < v.extent; ++c)
                    out[static_cast<std::size_t>(base + c * v.inner)] /= sum;
            }
    }
    return make_op_result(
        "softmax", x.shape(), std::move(out), {x},
        [x, v](autodiff::Node& self) {
            auto& xn = *x.node();
            if (!xn.requires_grad) return;
            double* dx = xn.grad_buffer();
            if (v.inner == 1) {
                kernels::softmax_rows_backward(self.data.data(), self.grad.data(), dx,
                                               v.outer, v.extent);
                return;
            }
            for (std::int64_t o = 0; o < v.outer; ++o)
                for (std::int64_t in = 0; in < v.inner; ++in) {
                    const std::int64_t base = o * v.extent * v.inner + in;
                    double dot = 0.0;
                    for (std::int64_t c = 0; c < v.extent; ++c) {
                        const auto idx = static_cast<std::size_t>(base + c * v.inner);
                        dot += self.grad[idx] * self.data[idx];
                    }
                    for (std::int64_t c = 0; c < v.extent; ++c) {
                        const auto idx = static_cast<std::size_t>(base + c * v.inner);
                        dx[idx] += self.data[idx] * (self.grad[idx] - dot);
                    }
                }
        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
    const std::int64_t cols = x.shape().back();
    if (gamma.rank() != 1 || gamma.numel() != cols || beta.rank() != 1 ||
        beta.numel() != cols)
        throw DimensionError("layer_norm: affine shapes " + shape_str(gamma.shape()) +
                             "/" + shape_str(beta.shape()) +
                             " do not match last extent of " + shape_str(x.shape()));
    const std::int64_t rows = x.numel() / cols;
    std::vector<double> out(static_cast<std::size_t>(x.numel()));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    kernels::layer_norm_rows(x.data().data(), gamma.data().data(), beta.data().data(),
                             eps, out.data(), xhat->data(), inv_std->data(), rows, cols);
    return make_op_result(
        "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat, inv_std, rows, cols](autodiff::Node& self) {
            auto& xn = *x.node();
            auto& gn = *gamma.node();
            auto& bn = *beta.node();
            std::vector<double> dg_scratch, db_scratch;
            double* dg = gn.requires_grad ? gn.grad_buffer() : nullptr;
            double* db = bn.requires_grad ? bn.grad_buffer() : nullptr;
            if (!dg) {
                dg_scratch.assign(static_cast<std::size_t>(cols), 0.0);
                dg = dg_scratch.data();
            }
            if (!db) {
                db_scratch.assign(static_cast<std::size_t>(cols), 0.0);
                db = db_scratch.data();
            }
            if (xn.requires_grad) {
                kernels::layer_norm_rows_backward(self.grad.data(), gn.data.data(),
                                                  xhat->data(), inv_std->data(),
                                                  xn.grad_buffer(), dg, db, rows, cols);
            } else {
                // still reduce dgamma/dbeta when only the affines need grads
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < cols; ++j) {
                        const auto idx = static_cast<std::size_t>(r * cols + j);
                        dg[j] += self.grad[idx] * (*xhat)[idx];
                        db[j] += self.grad[idx];
                    }
            }
        });
}

Tensor concat(const std::vector<Tensor>& parts, std::int64_t axis) {
    if (parts.empty()) throw ContractError("concat: empty input list");
    const auto& first = parts.front().shape();
    if (axis < 0 || axis >= static_cast<std::int64_t>(first.size()))
        throw DimensionError("concat: axis " + std::to_string(axis) +
                             " out of range for " + shape_str(first));
    Shape out_shape = first;
    std::int64_t total_axis = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != first.size())
            throw DimensionError("concat: rank mismatch " + shape_str(first) +
                                 " vs " + shape_str(s));
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != static_cast<std::size_t>(axis) && s[i] != first[i])
                throw DimensionError("concat: non-axis extents differ: " +
                                     shape_str(first) + " vs " + shape_str(s));
        total_axis += s[static_cast<std::size_t>(axis)];
    }
    out_shape[static_cast<std::size_t>(axis)] = total_axis;

    const AxisView ov = axis_view(out_shape, axis);
    std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
    std::vector<std::int64_t> offsets(parts.size());
    std::int64_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        offsets[p] = off;
        const std::int64_t ext = parts[p].shape()[static_cast<std::size_t>(axis)];
        const double* src = parts[p].data().data();
        for (std::int64_t o = 0; o < ov.outer; ++o)
            std::memcpy(out.data() + (o * ov.extent + off) * ov.inner,
                        src + o * ext * ov.inner,
                        static_cast<std::size_t>(ext * ov.inner) * sizeof(double));
        off += ext;
    }
    return make_op_result(
        "concat", out_shape, std::move(out), parts,
        [parts, offsets, ov, axis](autodiff::Node& self) {
            for (std::size_t p = 0; p < parts.size(); ++p) {
                auto& pn = *parts[p].node();
                if (!pn.requires_grad) continue;
                const std::int64_t ext = pn.shape[static_cast<std::size_t>(axis)];
                double* dp = pn.grad_buffer();
                for (std::int64_t o = 0; o < ov.outer; ++o)
                    kernels::serial::axpy(
                        1.0, self.grad.data() + (o * ov.extent + offsets[p]) * ov.inner,
                        dp + o * ext * ov.inner, ext * ov.inner);
            }
        });
}

Tensor slice(const Tensor& a, std::int64_t axis, std::int64_t start, std::int64_t stop) {
    if (axis < 0 || axis >= a.rank())
        throw DimensionError("slice: axis " + std::to_string(axis) +
                             " out of range for " + shape_str(a.shape()));
    const std::int64_t ext = a.shape()[static_cast<std::size_t>(axis)];
    if (start < 0 || stop > ext || start >= stop)
        throw DimensionError("slice: range [" + std::to_string(start) + "," +
                             std::to_string(stop) + ") invalid for extent " +
                             std::to_string(ext));
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(axis)] = stop - start;
    const AxisView v = axis_view(a.shape(), axis);
    const std::int64_t width = stop - start;
    std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
    for (std::int64_t o = 0; o < v.outer; ++o)
        std::memcpy(out.data() + o * width * v.inner,
                    a.data().data() + (o * v.extent + start) * v.inner,
                    static_cast<std::size_t>(width * v.inner) * sizeof(double));
    return make_op_result(
        "slice", out_shape, std::move(out), {a},
        [a, v, start, width](autodiff::Node& self) {
            auto& an = *a.node();
            if (!an.requires_grad) return;
            double* da = an.grad_buffer();
            for (std::int64_t o = 0; o < v.outer; ++o)
                kernels::serial::axpy(1.0, self.grad.data() + o * width * v.inner,
                                      da + (o * v.extent + start) * v.inner,
                                      width * v.inner);
        });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op_result("sum", {1}, {s}, {x}, [x](autodiff::Node& self) {
        auto& xn = *x.node();
        if (!xn.requires_grad) return;
        double* dx = xn.grad_buffer();
        const double g = self.grad[0];
        const std::int64_t n = xn.numel();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += g;
    });
}

Tensor mean(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    return make_op_result("mean", {1}, {s * inv}, {x}, [x, inv](autodiff::Node& self) {
        auto& xn = *x.node();
        if (!xn.requires_grad) return;
        double* dx = xn.grad_buffer();
        const double g = self.grad[0] * inv;
        const std::int64_t n = xn.numel();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += g;
    });
}

// --------------------------------------------------------------- backward

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got " +
                            shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->requires_grad) return;  // nothing reachable requires gradients

    // every reachable grad-requiring node, then reverse creation order;
    // the walk keeps shared ownership so clearing parent links later cannot
    // free a node that is still queued
    std::vector<std::shared_ptr<autodiff::Node>> order;
    std::unordered_set<autodiff::Node*> seen;
    std::vector<std::shared_ptr<autodiff::Node>> stack{root};
    seen.insert(root.get());
    while (!stack.empty()) {
        std::shared_ptr<autodiff::Node> n = std::move(stack.back());
        stack.pop_back();
        for (const auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.push_back(p);
        order.push_back(std::move(n));
    }
    std::sort(order.begin(), order.end(),
              [](const std::shared_ptr<autodiff::Node>& a,
                 const std::shared_ptr<autodiff::Node>& b) { return a->seq > b->seq; });

    root->grad_buffer();
    root->grad[0] += 1.0;

    for (const auto& n : order) {
        if (n->backward_fn) {
            n->grad_buffer();
            n->backward_fn(*n);
            // the tape is spent: drop links and intermediate grads
            n->backward_fn = nullptr;
            n->parents.clear();
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

}  // namespace tsb
