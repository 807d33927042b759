#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "etnode/autodiff.hpp"
#include "etnode/rng.hpp"
#include "etnode/tensor.hpp"

namespace etnode::attention {

using autodiff::Node;
using autodiff::Tape;

/// Per-variable affine score map for the temporal softmax: row n of `w` and
/// entry n of `c` form the scorer of variable n.
struct TemporalScorerParams {
    Tensor w;  // (vars, d)
    Tensor c;  // (vars)

    static TemporalScorerParams init(std::size_t vars, std::size_t d, Rng& rng);
};

/// Shared affine score map for the variable softmax.
struct VariableScorerParams {
    Tensor v;  // (d)
    Tensor c;  // scalar

    static VariableScorerParams init(std::size_t d, Rng& rng);
};

struct BoundTemporal {
    Node* w;
    Node* c;
};
struct BoundVariable {
    Node* v;
    Node* c;
};

BoundTemporal bind(Tape& tape, const TemporalScorerParams& p);
BoundVariable bind(Tape& tape, const VariableScorerParams& p);

/// Temporal attention over a hidden-state sequence [H_1..H_T], each (vars,d).
/// Returns alpha (T, vars), column-stochastic over t per variable, computed
/// with max-subtracted softmax.
Node* temporal_attention(const BoundTemporal& scorer,
                         const std::vector<Node*>& h_seq);

/// Variable attention: pools P = sum_t alpha_t .* H_t, scores each pooled row
/// with the shared map, and returns beta (vars) summing to one.
Node* variable_attention(const BoundVariable& scorer, Node* alpha,
                         const std::vector<Node*>& h_seq);

/// Context vector C[n] = beta[n] * sum_t alpha[t][n] * sum_i H_t[n][i].
Node* context_vector(Node* alpha, Node* beta, const std::vector<Node*>& h_seq);

/// Writes variable_attention.csv (feature, weight) and temporal_attention.csv
/// (t, feature, weight) into `dir`. alpha is (T, vars), beta (vars); callers
/// pass batch-averaged weights.
void export_attention(const Tensor& alpha, const Tensor& beta,
                      const std::vector<std::string>& feature_names,
                      const std::filesystem::path& dir);

/// Reads back a CSV written by export_attention (for round-trip checks and
/// downstream tooling). Returns rows of (labels..., weight).
struct AttentionCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> labels;
    std::vector<double> weights;
};
AttentionCsv read_attention_csv(const std::filesystem::path& file);

}  // namespace etnode::attention
