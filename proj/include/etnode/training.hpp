#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etnode/data.hpp"
#include "etnode/model.hpp"
#include "etnode/odenet.hpp"

namespace etnode::train {

/// Standard Adam with bias correction. Moments are owned here, aligned with
/// the model's parameter order.
struct AdamState {
    std::vector<Tensor> m, v;
    long long step = 0;

    static AdamState init_like(const EtnOdeModel& model);
};

/// One update over all parameter tensors. Throws NumericError on a
/// non-finite gradient without touching parameters or state (callers skip
/// the batch).
void adam_step(AdamState& state, EtnOdeModel& model,
               const std::vector<Tensor>& grads, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

struct MetricsRow {
    std::size_t epoch = 0;
    std::string split;  // "train" or "val"
    double rmse = 0, mae = 0, loss = 0, kl = 0, nll = 0, mse = 0;
};

struct TrainResult {
    EtnOdeModel model;  // parameters of the best-validation epoch
    std::size_t best_epoch = 0;
    double best_val_rmse = 0;
    std::vector<MetricsRow> history;
};

/// Mini-batch training over the train split with best-validation selection.
/// Deterministic in (config, dataset): shuffling and reparameterization
/// noise come from seeded sub-streams and gradient reduction is ordered.
TrainResult train(const ModelConfig& cfg, const data::WindowedDataset& dataset);

struct OffsetMetrics {
    double offset = 0;
    double rmse = 0, mae = 0;
    std::size_t count = 0;
};

/// Deterministic evaluation (latent state = posterior mean) over one split,
/// reported in raw target units. Integer offsets up to K read the window
/// targets; half offsets (k+0.5) read the held-out samples of a
/// half-resampled dataset.
std::vector<OffsetMetrics> evaluate(const EtnOdeModel& model,
                                    const data::WindowedDataset& dataset,
                                    const odenet::TimeGrid& grid,
                                    data::Split split = data::Split::test);

/// Repeats the last observed target at every offset.
std::vector<OffsetMetrics> persistence_baseline(const data::WindowedDataset& dataset,
                                                const odenet::TimeGrid& grid,
                                                data::Split split = data::Split::test);

struct Prediction {
    std::size_t window_end_index = 0;
    double offset = 0;
    double value = 0;  // raw target units
};

/// Per-window predictions at the grid offsets (raw units, deterministic).
std::vector<Prediction> predict(const EtnOdeModel& model,
                                const data::WindowedDataset& dataset,
                                const odenet::TimeGrid& grid,
                                data::Split split = data::Split::test);

/// Full-batch loss graph on a single tape: mean of the per-window losses
/// plus the L2 penalty. Used by gradient checks and the two-path L2
/// consistency test; training itself accumulates per-window tapes.
autodiff::Node* batch_loss(autodiff::Tape& tape, const EtnOdeModel& model,
                           const BoundModel& bound,
                           const std::vector<const data::Window*>& windows,
                           const std::vector<Tensor>& noises);

/// Runs fn(i) for i in [0, n), possibly on several threads. Results must be
/// written to disjoint slots; the caller reduces in index order so outputs
/// do not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace etnode::train
