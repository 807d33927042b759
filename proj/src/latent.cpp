#include "etnode/latent.hpp"

#include <cmath>

namespace etnode::latent {

using namespace autodiff;

EncoderParams EncoderParams::init(std::size_t q, std::size_t context_dim,
                                  Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(context_dim));
    EncoderParams p;
    p.mu_w = rng.uniform_tensor({q, context_dim}, -bound, bound);
    p.mu_b = Tensor::zeros({q});
    p.sig_w = rng.uniform_tensor({q, context_dim}, -bound, bound);
    p.sig_b = Tensor::zeros({q});
    return p;
}

BoundEncoder bind(Tape& tape, const EncoderParams& p) {
    return BoundEncoder{tape.param(p.mu_w), tape.param(p.mu_b),
                        tape.param(p.sig_w), tape.param(p.sig_b)};
}

Posterior encode_posterior(const BoundEncoder& enc, Node* context) {
    Node* mu = affine(enc.mu_w, context, enc.mu_b);
    Node* sigma = add_scalar(softplus(affine(enc.sig_w, context, enc.sig_b)),
                             kSigmaFloor);
    return Posterior{mu, sigma};
}

Node* sample_latent(const Posterior& post, Node* noise) {
    return add(post.mu, mul(post.sigma, noise));
}

Node* kl_divergence(const Posterior& post) {
    for (std::size_t i = 0; i < post.sigma->value.size(); ++i) {
        if (post.sigma->value[i] <= 0.0) {
            throw ContractError("kl_divergence: sigma must be positive");
        }
    }
    // 1/2 sum(mu^2 + sigma^2 - 1 - 2 ln sigma)
    Node* terms = sub(add(square(post.mu), square(post.sigma)),
                      add_scalar(scalar_mul(log_op(post.sigma), 2.0), 1.0));
    return scalar_mul(sum_all(terms), 0.5);
}

double kl_closed_form(const Tensor& mu, const Tensor& sigma) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (sigma[i] <= 0.0) {
            throw ContractError("kl_closed_form: sigma must be positive");
        }
        s += mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 -
             2.0 * std::log(sigma[i]);
    }
    return 0.5 * s;
}

}  // namespace etnode::latent
