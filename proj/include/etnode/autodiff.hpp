#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "etnode/tensor.hpp"

namespace etnode::autodiff {

class Tape;

/// One recorded value in the computation graph. Nodes are owned by their
/// Tape and referenced by raw pointer; the tape order is the topological
/// order (parents always precede children).
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward; same shape as value
    std::vector<Node*> parents;
    std::function<void()> backprop;  // adds this node's contribution to parents
    bool requires_grad = false;
    Tape* tape = nullptr;

    std::size_t size() const { return value.size(); }
    const std::vector<std::size_t>& shape() const { return value.shape(); }

    /// Grad accumulator, zero-allocated on first touch.
    Tensor& grad_buf();
};

/// Records forward operations and replays them in reverse for gradients.
/// Single-threaded per tape; distinct tapes are independent.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf with no gradient (inputs, targets, noise draws).
    Node* constant(Tensor value);

    /// Leaf that participates in backward (model parameters).
    Node* param(Tensor value);

    /// Records an op output. Used by the op functions below.
    Node* record(Tensor value, std::vector<Node*> parents,
                 std::function<void()> backprop);

    /// Reverse sweep from a scalar loss. Every node is visited at most once;
    /// fan-out accumulates additively. Gradients are read off the parameter
    /// nodes afterwards.
    void backward(Node* loss);

    std::size_t size() const { return nodes_.size(); }

    /// Enables post-op finiteness checks on this tape (always on in debug
    /// builds).
    void set_check_finite(bool on) { check_finite_ = on; }
    bool check_finite() const { return check_finite_; }

private:
    std::deque<std::unique_ptr<Node>> nodes_;
#ifdef NDEBUG
    bool check_finite_ = false;
#else
    bool check_finite_ = true;
#endif
};

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic. Broadcasting covers scalar-with-
// tensor and row-/column-vector-with-matrix; anything else must be spelled
// out explicitly.
Node* add(Node* a, Node* b);
Node* sub(Node* a, Node* b);
Node* mul(Node* a, Node* b);
Node* scalar_mul(Node* a, double c);
Node* add_scalar(Node* a, double c);

/// out[i][j] = m[i][j] * v[i] (column-vector broadcast, explicit form).
Node* scale_rows(Node* m, Node* v);

// Unary maps.
Node* sigmoid(Node* a);
Node* tanh_op(Node* a);
Node* exp_op(Node* a);
Node* log_op(Node* a);
Node* square(Node* a);
Node* softplus(Node* a);

// Linear algebra.
/// matmul: (m,k)x(k,n) -> (m,n), or (m,k)x(k) -> (m).
Node* matmul(Node* a, Node* b);
/// affine: W x + b with W (m,k), x (k), b (m).
Node* affine(Node* w, Node* x, Node* b);
/// Slice-wise tensor product: W (n,d,e) with H (n,e) -> (n,d), one matrix-
/// vector product per leading index.
Node* slicewise_matmul(Node* w, Node* h);

// Reductions and shape ops.
/// Numerically stable softmax along the given axis of a rank-1/2 tensor.
Node* softmax(Node* a, std::size_t axis);
/// Sum along an axis of a rank-2 tensor -> rank-1; rank-1 -> scalar.
Node* sum_axis(Node* a, std::size_t axis);
Node* sum_all(Node* a);
Node* mean_all(Node* a);
/// Concatenate rank-2 tensors along axis 0 or 1, or rank-1 along axis 0.
Node* concat(const std::vector<Node*>& parts, std::size_t axis);
/// Stack rank-1 tensors of equal length into a rank-2 tensor (k,d).
Node* stack(const std::vector<Node*>& rows);
/// Concatenate single-element (scalar) nodes into a rank-1 tensor.
Node* pack(const std::vector<Node*>& scalars);
/// Drop one axis at a fixed index: rank-3 axis 0 -> rank-2; rank-2 -> rank-1;
/// rank-1 -> scalar.
Node* slice(Node* a, std::size_t axis, std::size_t index);

// ---------------------------------------------------------------------------
/// Finite-difference gradient checker. `build` constructs the scalar loss on
/// a fresh tape from the current contents of `params` and reports the
/// parameter leaf nodes in matching order. Returns the max over all entries
/// of |autodiff - centraldiff| / max(1, |centraldiff|). The function must be
/// deterministic between probes (frozen noise); a drifting base value raises
/// OracleError.
struct GradCheckGraph {
    Node* loss = nullptr;
    std::vector<Node*> param_nodes;
};
double grad_check(const std::function<GradCheckGraph(Tape&)>& build,
                  const std::vector<Tensor*>& params, double eps);

}  // namespace etnode::autodiff
