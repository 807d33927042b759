#include "etnode/tgru.hpp"

#include <cmath>

namespace etnode::tgru {

using namespace autodiff;

TgruParams TgruParams::init(std::size_t vars, std::size_t d, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    TgruParams p;
    p.W_r = rng.uniform_tensor({vars, d, d}, -bound, bound);
    p.W_z = rng.uniform_tensor({vars, d, d}, -bound, bound);
    p.W_h = rng.uniform_tensor({vars, d, d}, -bound, bound);
    p.V_r = rng.uniform_tensor({vars, d}, -bound, bound);
    p.V_z = rng.uniform_tensor({vars, d}, -bound, bound);
    p.V_h = rng.uniform_tensor({vars, d}, -bound, bound);
    p.b_r = Tensor::zeros({vars, d});
    p.b_z = Tensor::zeros({vars, d});
    p.b_h = Tensor::zeros({vars, d});
    return p;
}

BoundTgru bind(Tape& tape, const TgruParams& p) {
    return BoundTgru{
        tape.param(p.W_r), tape.param(p.W_z), tape.param(p.W_h),
        tape.param(p.V_r), tape.param(p.V_z), tape.param(p.V_h),
        tape.param(p.b_r), tape.param(p.b_z), tape.param(p.b_h),
    };
}

Node* step(const BoundTgru& p, Node* h_prev, Node* x) {
    if (h_prev->value.rank() != 2 || x->value.rank() != 1 ||
        x->value.size() != h_prev->value.dim(0)) {
        throw ShapeError("tgru step: H " + h_prev->value.shape_str() + " with x " +
                         x->value.shape_str());
    }
    // Eq-form cell update; the slice-wise product keeps variables separate.
    Node* reset = sigmoid(add(add(slicewise_matmul(p.W_r, h_prev),
                                  scale_rows(p.V_r, x)),
                              p.b_r));
    Node* update = sigmoid(add(add(slicewise_matmul(p.W_z, h_prev),
                                   scale_rows(p.V_z, x)),
                               p.b_z));
    Node* candidate = tanh_op(add(add(slicewise_matmul(p.W_h, mul(reset, h_prev)),
                                      scale_rows(p.V_h, x)),
                                  p.b_h));
    // H_t = (1 - U) .* H_prev + U .* H~  ==  H_prev + U .* (H~ - H_prev)
    return add(h_prev, mul(update, sub(candidate, h_prev)));
}

std::vector<Node*> unroll(const BoundTgru& p, Tape& tape, const Tensor& window,
                          Node* h0) {
    if (window.rank() != 2 || window.dim(0) == 0) {
        throw ContractError("tgru unroll: window must be a non-empty (T, vars) "
                            "matrix");
    }
    std::size_t steps = window.dim(0);
    std::size_t vars = window.dim(1);
    std::size_t d = p.W_r->value.dim(1);
    Node* h = h0 ? h0 : tape.constant(Tensor::zeros({vars, d}));
    std::vector<Node*> states;
    states.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> xt(vars);
        for (std::size_t n = 0; n < vars; ++n) xt[n] = window.at(t, n);
        Node* x = tape.constant(Tensor::raw({vars}, std::move(xt)));
        h = step(p, h, x);
        states.push_back(h);
    }
    return states;
}

}  // namespace etnode::tgru
