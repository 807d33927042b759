#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "etnode/autodiff.hpp"
#include "etnode/rng.hpp"
#include "etnode/tensor.hpp"

namespace etnode::odenet {

using autodiff::Node;
using autodiff::Tape;

/// GRU-form autonomous vector field on the latent space: gates z through a
/// reset/update pair and pulls it toward the tanh candidate.
struct FieldParams {
    Tensor W_r, W_u, W_h;  // (q, q)
    Tensor b_r, b_u, b_h;  // (q)

    std::size_t latent_dim() const { return W_r.dim(0); }

    static FieldParams init(std::size_t q, Rng& rng);
};

struct BoundField {
    Node *W_r, *W_u, *W_h;
    Node *b_r, *b_u, *b_h;
};

BoundField bind(Tape& tape, const FieldParams& p);

/// dz/dt = u .* (h~ - z) with u = sig(W_u z + b_u) and
/// h~ = tanh(W_h (r .* z) + b_h), r = sig(W_r z + b_r). With
/// reset_gate=false the candidate uses z directly (the formula as printed
/// without the reset gate).
Node* vector_field(const BoundField& p, Node* z, bool reset_gate = true);

/// Strictly increasing positive prediction offsets, in units of the input
/// sampling interval past the window end.
class TimeGrid {
public:
    static TimeGrid from(std::vector<double> offsets);
    const std::vector<double>& offsets() const { return offsets_; }
    std::size_t size() const { return offsets_.size(); }

private:
    std::vector<double> offsets_;
};

enum class SolverMethod { euler, rk4, rk45 };

SolverMethod solver_method_from(const std::string& name);
std::string to_string(SolverMethod m);

struct SolverConfig {
    SolverMethod method = SolverMethod::rk4;
    double step = 0.1;       // fixed-step methods
    double rtol = 1e-6;      // rk45
    double atol = 1e-8;      // rk45
    std::size_t max_steps = 100000;
};

using FieldFn = std::function<Node*(Node*)>;

/// Integrates z' = field(z) from offset 0 through the grid, emitting the
/// state exactly at each grid offset. Fixed-step methods shorten the final
/// sub-step to land on grid points; rk45 is Dormand-Prince 5(4) with
/// per-component error control err <= atol + rtol*|z|. Every solver step is
/// recorded on the tape, so gradients flow to the initial state and the
/// field parameters.
std::vector<Node*> ode_solve(const FieldFn& field, Node* z0, const TimeGrid& grid,
                             const SolverConfig& cfg);

/// Affine scalar readout applied at every grid point.
struct ReadoutParams {
    Tensor weight;  // (q)
    Tensor bias;    // scalar

    static ReadoutParams init(std::size_t q, Rng& rng);
};

struct BoundReadout {
    Node* weight;
    Node* bias;
};

BoundReadout bind(Tape& tape, const ReadoutParams& p);

/// One scalar node per latent state.
std::vector<Node*> readout(const BoundReadout& ro, const std::vector<Node*>& zs);

}  // namespace etnode::odenet
