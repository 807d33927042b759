#pragma once

#include <cstddef>

#include "etnode/autodiff.hpp"
#include "etnode/rng.hpp"
#include "etnode/tensor.hpp"

namespace etnode::latent {

using autodiff::Node;
using autodiff::Tape;

/// Lower bound keeping sigma strictly positive.
inline constexpr double kSigmaFloor = 1e-3;

/// Affine encoder from the context vector to posterior mean and pre-sigma.
struct EncoderParams {
    Tensor mu_w;   // (q, context_dim)
    Tensor mu_b;   // (q)
    Tensor sig_w;  // (q, context_dim)
    Tensor sig_b;  // (q)

    std::size_t latent_dim() const { return mu_w.dim(0); }

    static EncoderParams init(std::size_t q, std::size_t context_dim, Rng& rng);
};

struct BoundEncoder {
    Node *mu_w, *mu_b, *sig_w, *sig_b;
};

BoundEncoder bind(Tape& tape, const EncoderParams& p);

/// Posterior parameters; sigma holds standard deviations.
struct Posterior {
    Node* mu;
    Node* sigma;
};

/// mu = A_mu c + b_mu; sigma = softplus(A_sig c + b_sig) + kSigmaFloor.
Posterior encode_posterior(const BoundEncoder& enc, Node* context);

/// Reparameterized draw z = mu + sigma .* noise; deterministic given noise.
Node* sample_latent(const Posterior& post, Node* noise);

/// KL(q || N(0, I)) in closed form: 1/2 sum(mu^2 + sigma^2 - 1 - ln sigma^2).
Node* kl_divergence(const Posterior& post);

/// Value-level closed form, shared by tests and reporting.
double kl_closed_form(const Tensor& mu, const Tensor& sigma);

}  // namespace etnode::latent
