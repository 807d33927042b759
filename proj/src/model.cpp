#include "etnode/model.hpp"

#include <cmath>

namespace etnode::train {

using namespace autodiff;

Variant variant_from(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "no_ode") return Variant::no_ode;
    if (name == "no_att") return Variant::no_att;
    throw ConfigError("unknown variant '" + name +
                      "' (expected full, no_ode or no_att)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_ode: return "no_ode";
        case Variant::no_att: return "no_att";
    }
    return "?";
}

std::size_t EtnOdeModel::context_dim() const {
    return cfg.variant == Variant::no_att ? cfg.hidden_dim : vars;
}

EtnOdeModel EtnOdeModel::init(const ModelConfig& cfg, std::size_t vars,
                              std::vector<std::string> feature_names,
                              data::NormStats stats) {
    if (vars < 2) {
        throw ContractError("model needs at least one exogenous series plus the "
                            "target");
    }
    EtnOdeModel m;
    m.cfg = cfg;
    m.vars = vars;
    m.feature_names = std::move(feature_names);
    m.stats = std::move(stats);

    Rng rng(Rng::derive(cfg.seed, 0x6d6f64656cULL));  // init stream
    m.cell = tgru::TgruParams::init(vars, cfg.hidden_dim, rng);
    if (cfg.variant != Variant::no_att) {
        m.temporal = attention::TemporalScorerParams::init(vars, cfg.hidden_dim, rng);
        m.variable = attention::VariableScorerParams::init(cfg.hidden_dim, rng);
    }
    std::size_t ctx = m.context_dim();
    if (cfg.variant != Variant::no_ode) {
        m.encoder = latent::EncoderParams::init(cfg.latent_dim, ctx, rng);
        m.field = odenet::FieldParams::init(cfg.latent_dim, rng);
        m.readout = odenet::ReadoutParams::init(cfg.latent_dim, rng);
    } else {
        double bound = 1.0 / std::sqrt(static_cast<double>(ctx));
        m.head_w = rng.uniform_tensor({cfg.horizon, ctx}, -bound, bound);
        m.head_b = Tensor::zeros({cfg.horizon});
    }
    return m;
}

namespace {

template <typename Model, typename Fn>
void visit_params(Model& m, Fn&& fn) {
    fn("tgru.W_r", m.cell.W_r);
    fn("tgru.W_z", m.cell.W_z);
    fn("tgru.W_h", m.cell.W_h);
    fn("tgru.V_r", m.cell.V_r);
    fn("tgru.V_z", m.cell.V_z);
    fn("tgru.V_h", m.cell.V_h);
    fn("tgru.b_r", m.cell.b_r);
    fn("tgru.b_z", m.cell.b_z);
    fn("tgru.b_h", m.cell.b_h);
    if (m.temporal) {
        fn("att.temporal.w", m.temporal->w);
        fn("att.temporal.c", m.temporal->c);
        fn("att.variable.v", m.variable->v);
        fn("att.variable.c", m.variable->c);
    }
    if (m.encoder) {
        fn("latent.mu_w", m.encoder->mu_w);
        fn("latent.mu_b", m.encoder->mu_b);
        fn("latent.sig_w", m.encoder->sig_w);
        fn("latent.sig_b", m.encoder->sig_b);
        fn("ode.W_r", m.field->W_r);
        fn("ode.W_u", m.field->W_u);
        fn("ode.W_h", m.field->W_h);
        fn("ode.b_r", m.field->b_r);
        fn("ode.b_u", m.field->b_u);
        fn("ode.b_h", m.field->b_h);
        fn("readout.w", m.readout->weight);
        fn("readout.b", m.readout->bias);
    }
    if (m.head_w) {
        fn("head.w", *m.head_w);
        fn("head.b", *m.head_b);
    }
}

}  // namespace

void EtnOdeModel::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(*this, fn);
}

void EtnOdeModel::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    visit_params(*this, fn);
}

std::vector<std::string> EtnOdeModel::param_names() const {
    std::vector<std::string> names;
    for_each_param([&](const std::string& n, const Tensor&) { names.push_back(n); });
    return names;
}

std::size_t EtnOdeModel::param_count() const {
    std::size_t n = 0;
    for_each_param([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

BoundModel bind(Tape& tape, const EtnOdeModel& model) {
    BoundModel b;
    b.cell = tgru::bind(tape, model.cell);
    b.leaves = {b.cell.W_r, b.cell.W_z, b.cell.W_h, b.cell.V_r, b.cell.V_z,
                b.cell.V_h, b.cell.b_r, b.cell.b_z, b.cell.b_h};
    if (model.temporal) {
        b.temporal = attention::bind(tape, *model.temporal);
        b.variable = attention::bind(tape, *model.variable);
        b.leaves.push_back(b.temporal->w);
        b.leaves.push_back(b.temporal->c);
        b.leaves.push_back(b.variable->v);
        b.leaves.push_back(b.variable->c);
    }
    if (model.encoder) {
        b.encoder = latent::bind(tape, *model.encoder);
        b.field = odenet::bind(tape, *model.field);
        b.readout = odenet::bind(tape, *model.readout);
        b.leaves.push_back(b.encoder->mu_w);
        b.leaves.push_back(b.encoder->mu_b);
        b.leaves.push_back(b.encoder->sig_w);
        b.leaves.push_back(b.encoder->sig_b);
        b.leaves.push_back(b.field->W_r);
        b.leaves.push_back(b.field->W_u);
        b.leaves.push_back(b.field->W_h);
        b.leaves.push_back(b.field->b_r);
        b.leaves.push_back(b.field->b_u);
        b.leaves.push_back(b.field->b_h);
        b.leaves.push_back(b.readout->weight);
        b.leaves.push_back(b.readout->bias);
    }
    if (model.head_w) {
        b.head_w = tape.param(*model.head_w);
        b.head_b = tape.param(*model.head_b);
        b.leaves.push_back(b.head_w);
        b.leaves.push_back(b.head_b);
    }
    return b;
}

WindowGraph forward_window(Tape& tape, const EtnOdeModel& model,
                           const BoundModel& bound, const Tensor& inputs,
                           const std::vector<double>& grid,
                           const std::vector<double>* targets,
                           const Tensor* noise) {
    if (grid.empty()) throw ContractError("forward_window: empty grid");
    WindowGraph g;

    std::vector<Node*> states = tgru::unroll(bound.cell, tape, inputs);

    Node* context = nullptr;
    if (model.cfg.variant == Variant::no_att) {
        // Mean pooling over time and variables in place of attention.
        Node* sum_t = states[0];
        for (std::size_t t = 1; t < states.size(); ++t)
            sum_t = add(sum_t, states[t]);
        Node* pooled = sum_axis(sum_t, 0);  // (d)
        double scale = 1.0 / (static_cast<double>(states.size()) *
                              static_cast<double>(model.vars));
        context = scalar_mul(pooled, scale);
    } else {
        g.alpha = attention::temporal_attention(*bound.temporal, states);
        g.beta = attention::variable_attention(*bound.variable, g.alpha, states);
        context = attention::context_vector(g.alpha, g.beta, states);
    }

    latent::Posterior posterior{nullptr, nullptr};
    if (model.cfg.variant == Variant::no_ode) {
        // Direct affine head over the context; defined on the trained
        // integer offsets only.
        for (double m : grid) {
            double r = std::round(m);
            if (std::abs(m - r) > 1e-9 || r < 1.0 ||
                r > static_cast<double>(model.cfg.horizon)) {
                throw ContractError(
                    "variant no_ode predicts integer offsets 1.." +
                    std::to_string(model.cfg.horizon) + " only");
            }
        }
        Node* all = affine(bound.head_w, context, bound.head_b);  // (K)
        if (grid.size() == model.cfg.horizon) {
            bool dense = true;
            for (std::size_t k = 0; k < grid.size(); ++k)
                dense = dense && std::llround(grid[k]) == static_cast<long long>(k + 1);
            if (dense) g.preds = all;
        }
        if (!g.preds) {
            std::vector<Node*> picked;
            for (double m : grid)
                picked.push_back(slice(all, 0, static_cast<std::size_t>(
                                                   std::llround(m) - 1)));
            g.preds = pack(picked);
        }
    } else {
        posterior = latent::encode_posterior(*bound.encoder, context);
        Node* z0 = noise ? latent::sample_latent(posterior, tape.constant(*noise))
                         : posterior.mu;
        auto time_grid = odenet::TimeGrid::from(grid);
        bool reset = model.cfg.reset_gate;
        const odenet::BoundField& field = *bound.field;
        auto rhs = [&field, reset](Node* z) {
            return odenet::vector_field(field, z, reset);
        };
        std::vector<Node*> zs = odenet::ode_solve(rhs, z0, time_grid,
                                                  model.cfg.solver);
        g.preds = pack(odenet::readout(*bound.readout, zs));
    }

    if (targets) {
        if (targets->size() != grid.size()) {
            throw ContractError("forward_window: targets do not match grid");
        }
        Node* y = tape.constant(Tensor::from({targets->size()}, *targets));
        g.mse = loss_mse(g.preds, y);
        g.nll = loss_nll(g.preds, y, model.cfg.noise_std);
        if (posterior.mu) {
            g.kl = latent::kl_divergence(posterior);
            g.loss = add(add(g.mse, g.kl), g.nll);
        } else {
            g.loss = add(g.mse, g.nll);
        }
    }
    return g;
}

Node* loss_mse(Node* yhat, Node* y) {
    require_same_shape(yhat->value, y->value, "loss_mse");
    return mean_all(square(sub(yhat, y)));
}

Node* loss_nll(Node* yhat, Node* y, double s) {
    if (s <= 0.0) throw ContractError("loss_nll: noise std must be positive");
    require_same_shape(yhat->value, y->value, "loss_nll");
    std::size_t k = yhat->value.rank() == 2 ? yhat->value.dim(1)
                                            : yhat->value.size();
    double kd = static_cast<double>(k);
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    double constant = 0.5 * kd * (kLog2Pi + 2.0 * std::log(s));
    Node* quad = scalar_mul(mean_all(square(sub(yhat, y))), kd / (2.0 * s * s));
    return add_scalar(quad, constant);
}

Node* loss_total(Node* mse, Node* kl, Node* nll, Node* l2) {
    Node* total = mse;
    if (kl) total = add(total, kl);
    total = add(total, nll);
    if (l2) total = add(total, l2);
    return total;
}

Node* l2_penalty(const BoundModel& bound, double lambda) {
    Node* acc = nullptr;
    for (Node* p : bound.leaves) {
        Node* sq = sum_all(square(p));
        acc = acc ? add(acc, sq) : sq;
    }
    return scalar_mul(acc, lambda);
}

}  // namespace etnode::train
