#include "etnode/attention.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace etnode::attention {

using namespace autodiff;

TemporalScorerParams TemporalScorerParams::init(std::size_t vars, std::size_t d,
                                                Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    return TemporalScorerParams{rng.uniform_tensor({vars, d}, -bound, bound),
                                Tensor::zeros({vars})};
}

VariableScorerParams VariableScorerParams::init(std::size_t d, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    return VariableScorerParams{rng.uniform_tensor({d}, -bound, bound),
                                Tensor::scalar(0.0)};
}

BoundTemporal bind(Tape& tape, const TemporalScorerParams& p) {
    return BoundTemporal{tape.param(p.w), tape.param(p.c)};
}

BoundVariable bind(Tape& tape, const VariableScorerParams& p) {
    return BoundVariable{tape.param(p.v), tape.param(p.c)};
}

Node* temporal_attention(const BoundTemporal& scorer,
                         const std::vector<Node*>& h_seq) {
    if (h_seq.empty()) throw ContractError("temporal_attention: empty sequence");
    // Score of variable n at time t is w_n . h^n_t + c_n; stacking over t
    // gives (T, vars) logits, softmaxed over t per variable.
    std::vector<Node*> scores;
    scores.reserve(h_seq.size());
    for (Node* h : h_seq) {
        scores.push_back(add(sum_axis(mul(h, scorer.w), 1), scorer.c));
    }
    return softmax(stack(scores), 0);
}

Node* variable_attention(const BoundVariable& scorer, Node* alpha,
                         const std::vector<Node*>& h_seq) {
    if (h_seq.empty()) throw ContractError("variable_attention: empty sequence");
    Node* pooled = nullptr;
    for (std::size_t t = 0; t < h_seq.size(); ++t) {
        Node* weighted = scale_rows(h_seq[t], slice(alpha, 0, t));
        pooled = pooled ? add(pooled, weighted) : weighted;
    }
    Node* logits = add(matmul(pooled, scorer.v), scorer.c);
    return softmax(logits, 0);
}

Node* context_vector(Node* alpha, Node* beta, const std::vector<Node*>& h_seq) {
    if (h_seq.empty()) throw ContractError("context_vector: empty sequence");
    // sum_t alpha_t .* rowsum(H_t), then scaled by beta (constant over t).
    Node* acc = nullptr;
    for (std::size_t t = 0; t < h_seq.size(); ++t) {
        Node* term = mul(slice(alpha, 0, t), sum_axis(h_seq[t], 1));
        acc = acc ? add(acc, term) : term;
    }
    return mul(beta, acc);
}

namespace {

std::string fmt_weight(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void export_attention(const Tensor& alpha, const Tensor& beta,
                      const std::vector<std::string>& feature_names,
                      const std::filesystem::path& dir) {
    if (alpha.rank() != 2 || beta.rank() != 1 || alpha.dim(1) != beta.size() ||
        feature_names.size() != beta.size()) {
        throw ShapeError("export_attention: alpha " + alpha.shape_str() +
                         ", beta " + beta.shape_str() + ", " +
                         std::to_string(feature_names.size()) + " names");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    {
        std::ofstream out = open(dir / "variable_attention.csv");
        out << "feature,weight\n";
        for (std::size_t n = 0; n < beta.size(); ++n)
            out << feature_names[n] << "," << fmt_weight(beta[n]) << "\n";
        if (!out) throw IoError("write failed: variable_attention.csv");
    }
    {
        std::ofstream out = open(dir / "temporal_attention.csv");
        out << "t,feature,weight\n";
        for (std::size_t t = 0; t < alpha.dim(0); ++t)
            for (std::size_t n = 0; n < alpha.dim(1); ++n)
                out << (t + 1) << "," << feature_names[n] << ","
                    << fmt_weight(alpha.at(t, n)) << "\n";
        if (!out) throw IoError("write failed: temporal_attention.csv");
    }
}

AttentionCsv read_attention_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read " + file.string());
    AttentionCsv result;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            result.header = cells;
            first = false;
            continue;
        }
        if (cells.empty()) continue;
        result.weights.push_back(std::stod(cells.back()));
        cells.pop_back();
        result.labels.push_back(cells);
    }
    return result;
}

}  // namespace etnode::attention
