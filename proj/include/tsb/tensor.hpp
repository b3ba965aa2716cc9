#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tsb/common.hpp"

namespace tsb {

class Tensor;

namespace autodiff {

struct Node;

// Adds this node's contribution to its parents' grad buffers.
using BackwardFn = std::function<void(Node&)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated on first use, same extent as data
    bool requires_grad = false;
    std::uint64_t seq = 0;  // creation order; parents always precede children
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward_fn;  // empty on leaves

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    double* grad_buffer();  // allocates zeros on demand
};

}  // namespace autodiff

// Thread-local switch: when recording is off, ops compute values only.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Post-op NaN/Inf detection. Defaults to on in debug builds.
bool finite_checks_enabled();
void set_finite_checks(bool on);

// Dense 64-bit tensor participating in a reverse-mode gradient tape.
// Values are immutable after creation except for leaf mutation between
// graph phases (parameter updates) and grad accumulation during backward.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                          bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const&;
    Shape shape() &&;  // by value on temporaries
    std::int64_t numel() const;
    std::int64_t rank() const;
    std::int64_t rows() const;  // rank-2 helpers
    std::int64_t cols() const;

    const std::vector<double>& data() const&;
    std::vector<double> data() &&;  // by value on temporaries
    // Leaf-only in-place access (parameter updates, finite differences).
    std::vector<double>& leaf_data();

    bool requires_grad() const;
    bool is_leaf() const;
    // Empty until backward has touched this tensor.
    const std::vector<double>& grad() const&;
    std::vector<double> grad() &&;
    // Leaf-only mutable gradient access (clipping).
    std::vector<double>& leaf_grad();
    void zero_grad();

    double item() const;  // numel()==1

    // Value copy detached from the graph.
    Tensor detach() const;

    std::shared_ptr<autodiff::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<autodiff::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<autodiff::Node> node_;

    friend Tensor make_op_result(const char* op, Shape shape,
                                 std::vector<double> data,
                                 std::vector<Tensor> parents,
                                 autodiff::BackwardFn fn);
};

// Low-level graph construction; ops and tests with custom adjoints use this.
Tensor make_op_result(const char* op, Shape shape, std::vector<double> data,
                      std::vector<Tensor> parents, autodiff::BackwardFn fn);

// ---- registered ops ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);  // broadcasts leading-1 extents
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor softmax(const Tensor& x, std::int64_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor concat(const std::vector<Tensor>& parts, std::int64_t axis);
// Half-open [start, stop) along one axis.
Tensor slice(const Tensor& a, std::int64_t axis, std::int64_t start,
             std::int64_t stop);
// Source shape is right-aligned against target; expanded extents must be
// leading ones.
Tensor broadcast_to(const Tensor& a, const Shape& target);

Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Populates grads of every requires_grad leaf reachable from loss, visiting
// each node exactly once in reverse creation order, then clears the graph.
void backward(const Tensor& loss);

}  // namespace tsb
