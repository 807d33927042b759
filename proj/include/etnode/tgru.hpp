#pragma once

#include <cstddef>
#include <vector>

#include "etnode/autodiff.hpp"
#include "etnode/rng.hpp"
#include "etnode/tensor.hpp"

namespace etnode::tgru {

using autodiff::Node;
using autodiff::Tape;

/// Parameters of the tensorized GRU cell. Each of the `vars` input features
/// owns an independent d-dimensional slice: W_* holds one (d,d) recurrent
/// matrix per variable, V_* one d-vector of input weights (the input to a
/// slice is that variable's scalar), b_* one d-vector of biases.
struct TgruParams {
    Tensor W_r, W_z, W_h;  // (vars, d, d)
    Tensor V_r, V_z, V_h;  // (vars, d)
    Tensor b_r, b_z, b_h;  // (vars, d)

    std::size_t vars() const { return W_r.dim(0); }
    std::size_t hidden_per_var() const { return W_r.dim(1); }
    std::size_t hidden_total() const { return vars() * hidden_per_var(); }

    /// Recurrent-scale init: weights uniform in [-1/sqrt(d), 1/sqrt(d)],
    /// biases zero.
    static TgruParams init(std::size_t vars, std::size_t d, Rng& rng);
};

/// Parameter nodes bound onto one tape.
struct BoundTgru {
    Node *W_r, *W_z, *W_h;
    Node *V_r, *V_z, *V_h;
    Node *b_r, *b_z, *b_h;
};

BoundTgru bind(Tape& tape, const TgruParams& params);

/// One cell update. H_prev is (vars, d), x is the (vars) input step ordered
/// [exogenous..., target]. Variable n sees only its own slice of H_prev and
/// its own input scalar; no cross-variable mixing happens here.
Node* step(const BoundTgru& p, Node* h_prev, Node* x);

/// Unrolls the cell over a (T, vars) window from the all-zeros initial state
/// (or an explicit one) and returns all T hidden matrices.
std::vector<Node*> unroll(const BoundTgru& p, Tape& tape, const Tensor& window,
                          Node* h0 = nullptr);

}  // namespace etnode::tgru
