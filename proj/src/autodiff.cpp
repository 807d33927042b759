#include "etnode/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace etnode::autodiff {

namespace {

void require_same_tape(Node* a, Node* b, const char* op) {
    if (a == nullptr || b == nullptr || a->tape != b->tape) {
        throw ContractError(std::string(op) + ": operands live on different tapes");
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Index mapping for the supported broadcast forms. `full` walks the output
// linearly, the others fold the output index back onto the smaller operand.
struct IndexMap {
    enum Kind { full, scalar, row, col } kind = full;
    std::size_t cols = 1;

    std::size_t operator()(std::size_t i) const {
        switch (kind) {
            case full: return i;
            case scalar: return 0;
            case row: return i % cols;
            case col: return i / cols;
        }
        return i;
    }
};

struct BroadcastPlan {
    std::vector<std::size_t> out_shape;
    IndexMap a, b;
};

bool is_scalar_like(const Tensor& t) { return t.size() == 1 && t.rank() <= 1; }

BroadcastPlan resolve_broadcast(const Tensor& a, const Tensor& b, const char* op) {
    BroadcastPlan plan;
    if (a.same_shape(b)) {
        plan.out_shape = a.shape();
        return plan;
    }
    if (is_scalar_like(a)) {
        plan.out_shape = b.shape();
        plan.a.kind = IndexMap::scalar;
        return plan;
    }
    if (is_scalar_like(b)) {
        plan.out_shape = a.shape();
        plan.b.kind = IndexMap::scalar;
        return plan;
    }
    auto vec_with_matrix = [op](const Tensor& vec, const Tensor& mat, IndexMap& m) {
        std::size_t rows = mat.dim(0), cols = mat.dim(1);
        // A length-cols vector applies per row; a length-rows vector per
        // column. For square matrices the row reading wins; use scale_rows
        // for the explicit column form.
        if (vec.size() == cols) {
            m.kind = IndexMap::row;
            m.cols = cols;
        } else if (vec.size() == rows) {
            m.kind = IndexMap::col;
            m.cols = cols;
        } else {
            throw ShapeError(std::string(op) + ": cannot broadcast " + vec.shape_str() +
                             " with " + mat.shape_str());
        }
    };
    if (a.rank() == 1 && b.rank() == 2) {
        plan.out_shape = b.shape();
        vec_with_matrix(a, b, plan.a);
        return plan;
    }
    if (b.rank() == 1 && a.rank() == 2) {
        plan.out_shape = a.shape();
        vec_with_matrix(b, a, plan.b);
        return plan;
    }
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace

Tensor& Node::grad_buf() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
}

Node* Tape::constant(Tensor value) {
    return record(std::move(value), {}, nullptr);
}

Node* Tape::param(Tensor value) {
    Node* n = record(std::move(value), {}, nullptr);
    n->requires_grad = true;
    return n;
}

Node* Tape::record(Tensor value, std::vector<Node*> parents,
                   std::function<void()> backprop) {
    if (check_finite_ && !value.all_finite()) {
        throw NumericError("non-finite value produced on tape");
    }
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    node->tape = this;
    for (Node* p : parents) {
        if (p->requires_grad) {
            node->requires_grad = true;
            break;
        }
    }
    if (node->requires_grad) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

void Tape::backward(Node* loss) {
    if (loss == nullptr || loss->tape != this) {
        throw ContractError("backward: loss does not belong to this tape");
    }
    if (loss->value.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            loss->value.shape_str());
    }
    for (auto& n : nodes_) n->grad = Tensor{};
    loss->grad_buf()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        if (!n->requires_grad || n->grad.empty() || !n->backprop) continue;
        n->backprop();
    }
}

// ---------------------------------------------------------------------------
// binary elementwise

namespace {

template <typename Fwd, typename Bwd>
Node* elementwise_binary(Node* a, Node* b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_tape(a, b, name);
    BroadcastPlan plan = resolve_broadcast(a->value, b->value, name);
    std::size_t n = Tensor::shape_size(plan.out_shape);
    std::vector<double> out(n);
    const double* av = a->value.data();
    const double* bv = b->value.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[plan.a(i)], bv[plan.b(i)]);
    Node* r = a->tape->record(Tensor::raw(plan.out_shape, std::move(out)), {a, b},
                              nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r, plan, bwd]() {
            const double* g = r->grad.data();
            const double* av = a->value.data();
            const double* bv = b->value.data();
            double* ga = a->requires_grad ? a->grad_buf().data() : nullptr;
            double* gb = b->requires_grad ? b->grad_buf().data() : nullptr;
            std::size_t n = r->value.size();
            for (std::size_t i = 0; i < n; ++i) {
                auto [da, db] = bwd(av[plan.a(i)], bv[plan.b(i)], g[i]);
                if (ga) ga[plan.a(i)] += da;
                if (gb) gb[plan.b(i)] += db;
            }
        };
    }
    return r;
}

}  // namespace

Node* add(Node* a, Node* b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g) { return std::pair<double, double>(g, g); });
}

Node* sub(Node* a, Node* b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g) { return std::pair<double, double>(g, -g); });
}

Node* mul(Node* a, Node* b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g) {
            return std::pair<double, double>(g * y, g * x);
        });
}

Node* scalar_mul(Node* a, double c) {
    std::vector<double> out(a->value.vec());
    for (double& x : out) x *= c;
    Node* r = a->tape->record(Tensor::raw(a->shape(), std::move(out)), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, c]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            for (std::size_t i = 0; i < r->size(); ++i) ga[i] += c * g[i];
        };
    }
    return r;
}

Node* add_scalar(Node* a, double c) {
    std::vector<double> out(a->value.vec());
    for (double& x : out) x += c;
    Node* r = a->tape->record(Tensor::raw(a->shape(), std::move(out)), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            for (std::size_t i = 0; i < r->size(); ++i) ga[i] += g[i];
        };
    }
    return r;
}

Node* scale_rows(Node* m, Node* v) {
    require_same_tape(m, v, "scale_rows");
    if (m->value.rank() != 2 || v->value.rank() != 1 ||
        v->value.size() != m->value.dim(0)) {
        throw ShapeError("scale_rows: need (r,c) with (r), got " +
                         m->value.shape_str() + " and " + v->value.shape_str());
    }
    std::size_t rows = m->value.dim(0), cols = m->value.dim(1);
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[i * cols + j] = m->value[i * cols + j] * v->value[i];
    Node* r = m->tape->record(Tensor::raw({rows, cols}, std::move(out)), {m, v},
                              nullptr);
    if (r->requires_grad) {
        r->backprop = [m, v, r, rows, cols]() {
            const double* g = r->grad.data();
            double* gm = m->requires_grad ? m->grad_buf().data() : nullptr;
            double* gv = v->requires_grad ? v->grad_buf().data() : nullptr;
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    double gij = g[i * cols + j];
                    if (gm) gm[i * cols + j] += gij * v->value[i];
                    if (gv) gv[i] += gij * m->value[i * cols + j];
                }
            }
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// unary maps

namespace {

template <typename Fwd, typename Deriv>
Node* elementwise_unary(Node* a, Fwd fwd, Deriv deriv) {
    std::vector<double> out(a->value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a->value[i]);
    Node* r = a->tape->record(Tensor::raw(a->shape(), std::move(out)), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, deriv]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            for (std::size_t i = 0; i < r->size(); ++i)
                ga[i] += g[i] * deriv(a->value[i], r->value[i]);
        };
    }
    return r;
}

}  // namespace

Node* sigmoid(Node* a) {
    return elementwise_unary(
        a, [](double x) { return stable_sigmoid(x); },
        [](double, double y) { return y * (1.0 - y); });
}

Node* tanh_op(Node* a) {
    return elementwise_unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Node* exp_op(Node* a) {
    return elementwise_unary(
        a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Node* log_op(Node* a) {
    return elementwise_unary(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Node* square(Node* a) {
    return elementwise_unary(
        a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Node* softplus(Node* a) {
    return elementwise_unary(
        a,
        [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return stable_sigmoid(x); });
}

// ---------------------------------------------------------------------------
// linear algebra

Node* matmul(Node* a, Node* b) {
    require_same_tape(a, b, "matmul");
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.rank() != 2) {
        throw ShapeError("matmul: left operand must be rank 2, got " + A.shape_str());
    }
    std::size_t m = A.dim(0), k = A.dim(1);
    bool vec = B.rank() == 1;
    std::size_t n = vec ? 1 : (B.rank() == 2 ? B.dim(1) : 0);
    std::size_t bk = vec ? B.size() : (B.rank() == 2 ? B.dim(0) : 0);
    if ((B.rank() != 1 && B.rank() != 2) || bk != k) {
        throw ShapeError("matmul: inner dimensions differ, " + A.shape_str() + " vs " +
                         B.shape_str());
    }
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
        }
    std::vector<std::size_t> out_shape = vec ? std::vector<std::size_t>{m}
                                             : std::vector<std::size_t>{m, n};
    Node* r = a->tape->record(Tensor::raw(std::move(out_shape), std::move(out)),
                              {a, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, b, r, m, k, n]() {
            const double* g = r->grad.data();
            const double* A = a->value.data();
            const double* B = b->value.data();
            if (a->requires_grad) {
                double* ga = a->grad_buf().data();
                // dA = G B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            s += g[i * n + j] * B[p * n + j];
                        ga[i * k + p] += s;
                    }
            }
            if (b->requires_grad) {
                double* gb = b->grad_buf().data();
                // dB = A^T G
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i)
                            s += A[i * k + p] * g[i * n + j];
                        gb[p * n + j] += s;
                    }
            }
        };
    }
    return r;
}

Node* affine(Node* w, Node* x, Node* b) {
    require_same_tape(w, x, "affine");
    require_same_tape(w, b, "affine");
    const Tensor& W = w->value;
    if (W.rank() != 2 || x->value.rank() != 1 || b->value.rank() != 1 ||
        x->value.size() != W.dim(1) || b->value.size() != W.dim(0)) {
        throw ShapeError("affine: need (m,k) (k) (m), got " + W.shape_str() + " " +
                         x->value.shape_str() + " " + b->value.shape_str());
    }
    std::size_t m = W.dim(0), k = W.dim(1);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = b->value[i];
        for (std::size_t j = 0; j < k; ++j) s += W[i * k + j] * x->value[j];
        out[i] = s;
    }
    Node* r = w->tape->record(Tensor::raw({m}, std::move(out)), {w, x, b}, nullptr);
    if (r->requires_grad) {
        r->backprop = [w, x, b, r, m, k]() {
            const double* g = r->grad.data();
            if (w->requires_grad) {
                double* gw = w->grad_buf().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < k; ++j)
                        gw[i * k + j] += g[i] * x->value[j];
            }
            if (x->requires_grad) {
                double* gx = x->grad_buf().data();
                for (std::size_t j = 0; j < k; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        s += w->value[i * k + j] * g[i];
                    gx[j] += s;
                }
            }
            if (b->requires_grad) {
                double* gb = b->grad_buf().data();
                for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
            }
        };
    }
    return r;
}

Node* slicewise_matmul(Node* w, Node* h) {
    require_same_tape(w, h, "slicewise_matmul");
    const Tensor& W = w->value;
    const Tensor& H = h->value;
    if (W.rank() != 3 || H.rank() != 2 || W.dim(0) != H.dim(0) ||
        W.dim(2) != H.dim(1)) {
        throw ShapeError("slicewise_matmul: need (n,d,e) with (n,e), got " +
                         W.shape_str() + " and " + H.shape_str());
    }
    std::size_t n = W.dim(0), d = W.dim(1), e = W.dim(2);
    std::vector<double> out(n * d, 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < e; ++j)
                acc += W[(s * d + i) * e + j] * H[s * e + j];
            out[s * d + i] = acc;
        }
    Node* r = w->tape->record(Tensor::raw({n, d}, std::move(out)), {w, h}, nullptr);
    if (r->requires_grad) {
        r->backprop = [w, h, r, n, d, e]() {
            const double* g = r->grad.data();
            double* gw = w->requires_grad ? w->grad_buf().data() : nullptr;
            double* gh = h->requires_grad ? h->grad_buf().data() : nullptr;
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t i = 0; i < d; ++i) {
                    double gsi = g[s * d + i];
                    for (std::size_t j = 0; j < e; ++j) {
                        if (gw) gw[(s * d + i) * e + j] += gsi * h->value[s * e + j];
                        if (gh) gh[s * e + j] += w->value[(s * d + i) * e + j] * gsi;
                    }
                }
        };
    }
    return r;
}

// ---------------------------------------------------------------------------
// reductions and shape ops

Node* softmax(Node* a, std::size_t axis) {
    const Tensor& A = a->value;
    if (A.rank() == 0 || A.rank() > 2 || axis >= A.rank()) {
        throw ShapeError("softmax: unsupported shape " + A.shape_str() + " axis " +
                         std::to_string(axis));
    }
    // Treat the tensor as `slices` independent softmaxes of length `len`
    // with stride `stride`.
    std::size_t len, slices, slice_stride, elem_stride;
    if (A.rank() == 1) {
        len = A.size();
        slices = 1;
        slice_stride = 0;
        elem_stride = 1;
    } else if (axis == 0) {
        len = A.dim(0);
        slices = A.dim(1);
        slice_stride = 1;
        elem_stride = A.dim(1);
    } else {
        len = A.dim(1);
        slices = A.dim(0);
        slice_stride = A.dim(1);
        elem_stride = 1;
    }
    std::vector<double> out(A.size());
    for (std::size_t s = 0; s < slices; ++s) {
        std::size_t base = s * slice_stride;
        double mx = A[base];
        for (std::size_t i = 1; i < len; ++i)
            mx = std::max(mx, A[base + i * elem_stride]);
        double denom = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            double e = std::exp(A[base + i * elem_stride] - mx);
            out[base + i * elem_stride] = e;
            denom += e;
        }
        for (std::size_t i = 0; i < len; ++i) out[base + i * elem_stride] /= denom;
    }
    Node* r = a->tape->record(Tensor::raw(A.shape(), std::move(out)), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, len, slices, slice_stride, elem_stride]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            const double* y = r->value.data();
            for (std::size_t s = 0; s < slices; ++s) {
                std::size_t base = s * slice_stride;
                double dot = 0.0;
                for (std::size_t i = 0; i < len; ++i) {
                    std::size_t ix = base + i * elem_stride;
                    dot += g[ix] * y[ix];
                }
                for (std::size_t i = 0; i < len; ++i) {
                    std::size_t ix = base + i * elem_stride;
                    ga[ix] += y[ix] * (g[ix] - dot);
                }
            }
        };
    }
    return r;
}

Node* sum_axis(Node* a, std::size_t axis) {
    const Tensor& A = a->value;
    if (A.rank() == 1) {
        if (axis != 0) throw ShapeError("sum_axis: axis out of range for rank 1");
        double s = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
        Node* r = a->tape->record(Tensor::scalar(s), {a}, nullptr);
        if (r->requires_grad) {
            r->backprop = [a, r]() {
                double g = r->grad[0];
                double* ga = a->grad_buf().data();
                for (std::size_t i = 0; i < a->size(); ++i) ga[i] += g;
            };
        }
        return r;
    }
    if (A.rank() != 2 || axis > 1) {
        throw ShapeError("sum_axis: unsupported shape " + A.shape_str());
    }
    std::size_t rows = A.dim(0), cols = A.dim(1);
    std::size_t out_len = axis == 0 ? cols : rows;
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[axis == 0 ? j : i] += A[i * cols + j];
    Node* r = a->tape->record(Tensor::raw({out_len}, std::move(out)), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, rows, cols, axis]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    ga[i * cols + j] += g[axis == 0 ? j : i];
        };
    }
    return r;
}

Node* sum_all(Node* a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) s += a->value[i];
    Node* r = a->tape->record(Tensor::scalar(s), {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r]() {
            double g = r->grad[0];
            double* ga = a->grad_buf().data();
            for (std::size_t i = 0; i < a->size(); ++i) ga[i] += g;
        };
    }
    return r;
}

Node* mean_all(Node* a) {
    double s = 0.0;
    std::size_t n = a->size();
    for (std::size_t i = 0; i < n; ++i) s += a->value[i];
    Node* r = a->tape->record(Tensor::scalar(s / static_cast<double>(n)), {a},
                              nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, n]() {
            double g = r->grad[0] / static_cast<double>(n);
            double* ga = a->grad_buf().data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g;
        };
    }
    return r;
}

Node* concat(const std::vector<Node*>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no operands");
    for (Node* p : parts) require_same_tape(parts[0], p, "concat");
    std::size_t rank = parts[0]->value.rank();
    if (rank == 1) {
        if (axis != 0) throw ShapeError("concat: axis out of range for rank 1");
        std::size_t total = 0;
        for (Node* p : parts) {
            if (p->value.rank() != 1) throw ShapeError("concat: mixed ranks");
            total += p->value.size();
        }
        std::vector<double> out;
        out.reserve(total);
        for (Node* p : parts)
            out.insert(out.end(), p->value.vec().begin(), p->value.vec().end());
        Node* r = parts[0]->tape->record(Tensor::raw({total}, std::move(out)),
                                         parts, nullptr);
        if (r->requires_grad) {
            std::vector<Node*> ps = parts;
            r->backprop = [ps, r]() {
                std::size_t off = 0;
                for (Node* p : ps) {
                    if (p->requires_grad) {
                        double* gp = p->grad_buf().data();
                        for (std::size_t i = 0; i < p->size(); ++i)
                            gp[i] += r->grad[off + i];
                    }
                    off += p->size();
                }
            };
        }
        return r;
    }
    if (rank != 2 || axis > 1) {
        throw ShapeError("concat: unsupported rank/axis");
    }
    if (axis == 0) {
        std::size_t cols = parts[0]->value.dim(1), rows = 0;
        for (Node* p : parts) {
            if (p->value.rank() != 2 || p->value.dim(1) != cols)
                throw ShapeError("concat: column counts differ");
            rows += p->value.dim(0);
        }
        std::vector<double> out;
        out.reserve(rows * cols);
        for (Node* p : parts)
            out.insert(out.end(), p->value.vec().begin(), p->value.vec().end());
        Node* r = parts[0]->tape->record(Tensor::raw({rows, cols}, std::move(out)),
                                         parts, nullptr);
        if (r->requires_grad) {
            std::vector<Node*> ps = parts;
            r->backprop = [ps, r]() {
                std::size_t off = 0;
                for (Node* p : ps) {
                    if (p->requires_grad) {
                        double* gp = p->grad_buf().data();
                        for (std::size_t i = 0; i < p->size(); ++i)
                            gp[i] += r->grad[off + i];
                    }
                    off += p->size();
                }
            };
        }
        return r;
    }
    // axis == 1
    std::size_t rows = parts[0]->value.dim(0), cols = 0;
    for (Node* p : parts) {
        if (p->value.rank() != 2 || p->value.dim(0) != rows)
            throw ShapeError("concat: row counts differ");
        cols += p->value.dim(1);
    }
    std::vector<double> out(rows * cols);
    std::size_t col_off = 0;
    for (Node* p : parts) {
        std::size_t pc = p->value.dim(1);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < pc; ++j)
                out[i * cols + col_off + j] = p->value[i * pc + j];
        col_off += pc;
    }
    Node* r = parts[0]->tape->record(Tensor::raw({rows, cols}, std::move(out)),
                                     parts, nullptr);
    if (r->requires_grad) {
        std::vector<Node*> ps = parts;
        r->backprop = [ps, r, rows, cols]() {
            std::size_t col_off = 0;
            for (Node* p : ps) {
                std::size_t pc = p->value.dim(1);
                if (p->requires_grad) {
                    double* gp = p->grad_buf().data();
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            gp[i * pc + j] += r->grad[i * cols + col_off + j];
                }
                col_off += pc;
            }
        };
    }
    return r;
}

Node* stack(const std::vector<Node*>& rows) {
    if (rows.empty()) throw ContractError("stack: no operands");
    std::size_t d = rows[0]->value.size();
    for (Node* p : rows) {
        require_same_tape(rows[0], p, "stack");
        if (p->value.rank() != 1 || p->value.size() != d)
            throw ShapeError("stack: rows must be rank-1 of equal length");
    }
    std::size_t k = rows.size();
    std::vector<double> out;
    out.reserve(k * d);
    for (Node* p : rows)
        out.insert(out.end(), p->value.vec().begin(), p->value.vec().end());
    Node* r = rows[0]->tape->record(Tensor::raw({k, d}, std::move(out)), rows,
                                    nullptr);
    if (r->requires_grad) {
        std::vector<Node*> ps = rows;
        r->backprop = [ps, r, d]() {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                Node* p = ps[i];
                if (!p->requires_grad) continue;
                double* gp = p->grad_buf().data();
                for (std::size_t j = 0; j < d; ++j) gp[j] += r->grad[i * d + j];
            }
        };
    }
    return r;
}

Node* pack(const std::vector<Node*>& scalars) {
    if (scalars.empty()) throw ContractError("pack: no operands");
    std::vector<double> out;
    out.reserve(scalars.size());
    for (Node* p : scalars) {
        require_same_tape(scalars[0], p, "pack");
        if (p->value.size() != 1)
            throw ShapeError("pack: operands must be scalars");
        out.push_back(p->value[0]);
    }
    Node* r = scalars[0]->tape->record(Tensor::raw({scalars.size()}, std::move(out)),
                                       scalars, nullptr);
    if (r->requires_grad) {
        std::vector<Node*> ps = scalars;
        r->backprop = [ps, r]() {
            for (std::size_t i = 0; i < ps.size(); ++i)
                if (ps[i]->requires_grad) ps[i]->grad_buf()[0] += r->grad[i];
        };
    }
    return r;
}

Node* slice(Node* a, std::size_t axis, std::size_t index) {
    const Tensor& A = a->value;
    if (A.rank() == 0 || axis >= A.rank() || index >= A.dim(axis)) {
        throw ShapeError("slice: axis " + std::to_string(axis) + " index " +
                         std::to_string(index) + " out of range for " +
                         A.shape_str());
    }
    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < A.rank(); ++i)
        if (i != axis) out_shape.push_back(A.dim(i));
    // Element stride layout: offset = index*inner for the sliced axis.
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= A.dim(i);
    for (std::size_t i = axis + 1; i < A.rank(); ++i) inner *= A.dim(i);
    std::size_t axis_len = A.dim(axis);
    std::size_t out_n = outer * inner;
    std::vector<double> out(out_n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            out[o * inner + i] = A[(o * axis_len + index) * inner + i];
    Node* r = a->tape->record(
        out_shape.empty() ? Tensor::scalar(out[0])
                          : Tensor::raw(std::move(out_shape), std::move(out)),
        {a}, nullptr);
    if (r->requires_grad) {
        r->backprop = [a, r, outer, inner, axis_len, index]() {
            double* ga = a->grad_buf().data();
            const double* g = r->grad.data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < inner; ++i)
                    ga[(o * axis_len + index) * inner + i] += g[o * inner + i];
        };
    }
    return r;
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<GradCheckGraph(Tape&)>& build,
                  const std::vector<Tensor*>& params, double eps) {
    if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");
    double base;
    std::vector<Tensor> autodiff_grads;
    {
        Tape tape;
        GradCheckGraph g = build(tape);
        if (g.loss == nullptr || g.loss->value.size() != 1) {
            throw ContractError("grad_check: build must produce a scalar loss");
        }
        if (g.param_nodes.size() != params.size()) {
            throw ContractError("grad_check: parameter node count mismatch");
        }
        base = g.loss->value[0];
        tape.backward(g.loss);
        for (std::size_t i = 0; i < params.size(); ++i) {
            Node* n = g.param_nodes[i];
            autodiff_grads.push_back(n->grad.empty()
                                         ? Tensor::zeros(n->value.shape())
                                         : n->grad);
        }
    }
    {
        // Probe determinism: a drifting base value would corrupt the
        // central differences below.
        Tape tape;
        GradCheckGraph g = build(tape);
        if (g.loss->value[0] != base) {
            throw OracleError("grad_check: function is not deterministic between "
                              "probe evaluations");
        }
    }
    auto eval = [&build]() {
        Tape tape;
        return build(tape).loss->value[0];
    };
    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        for (std::size_t j = 0; j < p.size(); ++j) {
            double orig = p[j];
            p[j] = orig + eps;
            double fp = eval();
            p[j] = orig - eps;
            double fm = eval();
            p[j] = orig;
            double fd = (fp - fm) / (2.0 * eps);
            double ad = autodiff_grads[pi][j];
            double err = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace etnode::autodiff
