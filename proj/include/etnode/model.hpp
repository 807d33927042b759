#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "etnode/attention.hpp"
#include "etnode/autodiff.hpp"
#include "etnode/data.hpp"
#include "etnode/latent.hpp"
#include "etnode/odenet.hpp"
#include "etnode/tgru.hpp"

namespace etnode::train {

using autodiff::Node;
using autodiff::Tape;

enum class Variant { full, no_ode, no_att };

Variant variant_from(const std::string& name);
std::string to_string(Variant v);

struct ModelConfig {
    std::size_t window = 20;      // T
    std::size_t horizon = 3;      // K, training offsets 1..K
    std::size_t hidden_dim = 10;  // d per variable
    std::size_t latent_dim = 32;  // q
    double noise_std = 0.05;      // observation noise s
    double l2 = 0.001;
    double learning_rate = 0.01;
    std::size_t batch_size = 128;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    odenet::SolverConfig solver;
    Variant variant = Variant::full;
    bool reset_gate = true;
    std::size_t threads = 1;
    double train_split = 0.9;
    double val_split = 0.1;
};

/// All learnable state plus everything needed to run the model on new data.
struct EtnOdeModel {
    ModelConfig cfg;
    std::size_t vars = 0;  // N+1
    std::vector<std::string> feature_names;
    data::NormStats stats;

    tgru::TgruParams cell;
    // attention (absent for no_att)
    std::optional<attention::TemporalScorerParams> temporal;
    std::optional<attention::VariableScorerParams> variable;
    // variational bottleneck + continuous decoder (absent for no_ode)
    std::optional<latent::EncoderParams> encoder;
    std::optional<odenet::FieldParams> field;
    std::optional<odenet::ReadoutParams> readout;
    // direct head (no_ode only): context -> K outputs
    std::optional<Tensor> head_w, head_b;

    /// Context dimensionality: vars for attention variants, hidden_dim for
    /// the mean-pooled no_att variant.
    std::size_t context_dim() const;

    static EtnOdeModel init(const ModelConfig& cfg, std::size_t vars,
                            std::vector<std::string> feature_names,
                            data::NormStats stats);

    /// Visits every parameter tensor in a fixed order with a stable name.
    void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_param(
        const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::vector<std::string> param_names() const;
    std::size_t param_count() const;
};

/// Parameter leaves bound onto one tape, aligned with for_each_param order.
struct BoundModel {
    tgru::BoundTgru cell;
    std::optional<attention::BoundTemporal> temporal;
    std::optional<attention::BoundVariable> variable;
    std::optional<latent::BoundEncoder> encoder;
    std::optional<odenet::BoundField> field;
    std::optional<odenet::BoundReadout> readout;
    Node* head_w = nullptr;
    Node* head_b = nullptr;
    std::vector<Node*> leaves;  // for_each_param order
};

BoundModel bind(Tape& tape, const EtnOdeModel& model);

/// One window's forward graph. Loss parts are built only when targets are
/// provided; alpha/beta only for attention variants.
struct WindowGraph {
    Node* preds = nullptr;  // rank-1, one entry per grid offset (normalized)
    Node* loss = nullptr;
    Node* mse = nullptr;
    Node* kl = nullptr;
    Node* nll = nullptr;
    Node* alpha = nullptr;  // (T, vars)
    Node* beta = nullptr;   // (vars)
};

/// Builds encoder -> attention/pooling -> bottleneck -> decoder -> readout
/// for one window. `noise` enables the reparameterized draw; with nullptr the
/// latent state is the posterior mean (evaluation mode). `targets` is the
/// normalized target vector aligned with `grid`.
WindowGraph forward_window(Tape& tape, const EtnOdeModel& model,
                           const BoundModel& bound, const Tensor& inputs,
                           const std::vector<double>& grid,
                           const std::vector<double>* targets,
                           const Tensor* noise);

// Loss assembly pieces (shared with tests and the batch graph).
/// (1/L) sum_i (1/K) sum_t (yhat - y)^2 for same-shape nodes.
Node* loss_mse(Node* yhat, Node* y);
/// Gaussian negative log-likelihood with noise std s, summed over the K
/// outputs of a sample and averaged over samples.
Node* loss_nll(Node* yhat, Node* y, double s);
/// mse + kl + nll (+ optional L2 penalty node).
Node* loss_total(Node* mse, Node* kl, Node* nll, Node* l2_penalty);
/// lambda * sum over parameter leaves of ||theta||^2.
Node* l2_penalty(const BoundModel& bound, double lambda);

}  // namespace etnode::train
