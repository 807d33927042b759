#include "etnode/odenet.hpp"

#include <algorithm>
#include <cmath>

namespace etnode::odenet {

using namespace autodiff;

FieldParams FieldParams::init(std::size_t q, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(q));
    FieldParams p;
    p.W_r = rng.uniform_tensor({q, q}, -bound, bound);
    p.W_u = rng.uniform_tensor({q, q}, -bound, bound);
    p.W_h = rng.uniform_tensor({q, q}, -bound, bound);
    p.b_r = Tensor::zeros({q});
    p.b_u = Tensor::zeros({q});
    p.b_h = Tensor::zeros({q});
    return p;
}

BoundField bind(Tape& tape, const FieldParams& p) {
    return BoundField{tape.param(p.W_r), tape.param(p.W_u), tape.param(p.W_h),
                      tape.param(p.b_r), tape.param(p.b_u), tape.param(p.b_h)};
}

Node* vector_field(const BoundField& p, Node* z, bool reset_gate) {
    Node* update = sigmoid(affine(p.W_u, z, p.b_u));
    Node* pre = z;
    if (reset_gate) {
        Node* reset = sigmoid(affine(p.W_r, z, p.b_r));
        pre = mul(reset, z);
    }
    Node* candidate = tanh_op(affine(p.W_h, pre, p.b_h));
    return mul(update, sub(candidate, z));
}

TimeGrid TimeGrid::from(std::vector<double> offsets) {
    if (offsets.empty()) throw ContractError("time grid must not be empty");
    double prev = 0.0;
    for (double m : offsets) {
        if (!std::isfinite(m) || m <= prev) {
            throw ContractError("time grid offsets must be finite, positive and "
                                "strictly increasing");
        }
        prev = m;
    }
    TimeGrid g;
    g.offsets_ = std::move(offsets);
    return g;
}

SolverMethod solver_method_from(const std::string& name) {
    if (name == "euler") return SolverMethod::euler;
    if (name == "rk4") return SolverMethod::rk4;
    if (name == "rk45") return SolverMethod::rk45;
    throw ConfigError("unknown solver method '" + name +
                      "' (expected euler, rk4 or rk45)");
}

std::string to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::euler: return "euler";
        case SolverMethod::rk4: return "rk4";
        case SolverMethod::rk45: return "rk45";
    }
    return "?";
}

namespace {

void check_state_finite(Node* z) {
    if (!z->value.all_finite()) {
        throw NumericError("ode_solve: state left the finite range");
    }
}

Node* euler_step(const FieldFn& field, Node* z, double h) {
    return add(z, scalar_mul(field(z), h));
}

Node* rk4_step(const FieldFn& field, Node* z, double h) {
    Node* k1 = field(z);
    Node* k2 = field(add(z, scalar_mul(k1, h * 0.5)));
    Node* k3 = field(add(z, scalar_mul(k2, h * 0.5)));
    Node* k4 = field(add(z, scalar_mul(k3, h)));
    Node* incr = add(add(k1, k4), scalar_mul(add(k2, k3), 2.0));
    return add(z, scalar_mul(incr, h / 6.0));
}

// Dormand-Prince 5(4) tableau.
constexpr double kA[6][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
};
constexpr double kB5[7] = {35.0 / 384, 0.0,           500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kB4[7] = {5179.0 / 57600,    0.0,         7571.0 / 16695,
                           393.0 / 640,       -92097.0 / 339200,
                           187.0 / 2100,      1.0 / 40};

struct Rk45Result {
    Node* z_new;
    double err_norm;  // max_i |e_i| / (atol + rtol*max(|z_i|, |z_new_i|))
};

Rk45Result rk45_step(const FieldFn& field, Node* z, double h, double rtol,
                     double atol) {
    Node* k[7];
    k[0] = field(z);
    for (int s = 1; s < 6; ++s) {
        Node* arg = z;
        for (int j = 0; j < s; ++j) {
            if (kA[s][j] == 0.0) continue;
            arg = add(arg, scalar_mul(k[j], h * kA[s][j]));
        }
        k[s] = field(arg);
    }
    Node* z_new = z;
    for (int s = 0; s < 7; ++s) {
        if (kB5[s] == 0.0) continue;
        z_new = add(z_new, scalar_mul(k[s], h * kB5[s]));
    }
    k[6] = field(z_new);
    // Error estimate drives step control only; it stays off the gradient
    // path, so it is evaluated on plain values.
    double err_norm = 0.0;
    std::size_t q = z->value.size();
    for (std::size_t i = 0; i < q; ++i) {
        double e = 0.0;
        for (int s = 0; s < 7; ++s)
            e += (kB5[s] - kB4[s]) * k[s]->value[i];
        e *= h;
        double scale =
            atol + rtol * std::max(std::abs(z->value[i]), std::abs(z_new->value[i]));
        err_norm = std::max(err_norm, std::abs(e) / scale);
    }
    return Rk45Result{z_new, err_norm};
}

}  // namespace

std::vector<Node*> ode_solve(const FieldFn& field, Node* z0, const TimeGrid& grid,
                             const SolverConfig& cfg) {
    if (cfg.step <= 0.0 || cfg.rtol <= 0.0 || cfg.atol <= 0.0 ||
        cfg.max_steps == 0) {
        throw ContractError("ode_solve: solver configuration must be positive");
    }
    std::vector<Node*> out;
    out.reserve(grid.size());
    Node* z = z0;
    std::size_t steps_taken = 0;
    auto budget = [&]() {
        if (++steps_taken > cfg.max_steps) {
            throw SolverError("ode_solve: exceeded max_steps = " +
                              std::to_string(cfg.max_steps));
        }
    };

    if (cfg.method == SolverMethod::euler || cfg.method == SolverMethod::rk4) {
        double t_prev = 0.0;
        for (double target : grid.offsets()) {
            double gap = target - t_prev;
            // Equal subdivision of the gap; when gap is a whole multiple of
            // the configured step this reproduces it exactly.
            auto n = static_cast<std::size_t>(std::ceil(gap / cfg.step - 1e-12));
            n = std::max<std::size_t>(n, 1);
            double sub = gap / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                budget();
                z = cfg.method == SolverMethod::euler ? euler_step(field, z, sub)
                                                      : rk4_step(field, z, sub);
                check_state_finite(z);
            }
            out.push_back(z);
            t_prev = target;
        }
        return out;
    }

    // rk45 with embedded error control.
    double max_gap = grid.offsets()[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
        max_gap = std::max(max_gap, grid.offsets()[i] - grid.offsets()[i - 1]);
    const double h_min = 1e-4, h_max = max_gap;
    double h = std::clamp(cfg.step, h_min, h_max);
    double t = 0.0;
    for (double target : grid.offsets()) {
        while (t < target - 1e-12) {
            double h_try = std::min(h, target - t);
            budget();
            Rk45Result r = rk45_step(field, z, h_try, cfg.rtol, cfg.atol);
            if (r.err_norm <= 1.0 || h_try <= h_min) {
                z = r.z_new;
                check_state_finite(z);
                t += h_try;
            }
            double factor = r.err_norm > 0.0
                                ? 0.9 * std::pow(r.err_norm, -0.2)
                                : 5.0;
            h = std::clamp(h_try * std::clamp(factor, 0.2, 5.0), h_min, h_max);
        }
        out.push_back(z);
        t = target;
    }
    return out;
}

ReadoutParams ReadoutParams::init(std::size_t q, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(q));
    return ReadoutParams{rng.uniform_tensor({q}, -bound, bound),
                         Tensor::scalar(0.0)};
}

BoundReadout bind(Tape& tape, const ReadoutParams& p) {
    return BoundReadout{tape.param(p.weight), tape.param(p.bias)};
}

std::vector<Node*> readout(const BoundReadout& ro, const std::vector<Node*>& zs) {
    if (zs.empty()) throw ContractError("readout: no latent states");
    std::vector<Node*> ys;
    ys.reserve(zs.size());
    for (Node* z : zs) ys.push_back(add(sum_all(mul(ro.weight, z)), ro.bias));
    return ys;
}

}  // namespace etnode::odenet
