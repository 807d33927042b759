#include "etnode/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "etnode/log.hpp"

namespace etnode::train {

using namespace autodiff;

AdamState AdamState::init_like(const EtnOdeModel& model) {
    AdamState s;
    model.for_each_param([&](const std::string&, const Tensor& t) {
        s.m.push_back(Tensor::zeros(t.shape()));
        s.v.push_back(Tensor::zeros(t.shape()));
    });
    return s;
}

void adam_step(AdamState& state, EtnOdeModel& model,
               const std::vector<Tensor>& grads, double lr, double beta1,
               double beta2, double eps) {
    std::vector<Tensor*> params;
    model.for_each_param(
        [&](const std::string&, Tensor& t) { params.push_back(&t); });
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ContractError("adam_step: gradient/state layout mismatch");
    }
    for (const Tensor& g : grads) {
        if (!g.all_finite()) {
            throw NumericError("adam_step: non-finite gradient");
        }
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        const Tensor& g = grads[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end]() {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::vector<double> integer_grid(std::size_t horizon) {
    std::vector<double> grid(horizon);
    for (std::size_t k = 0; k < horizon; ++k) grid[k] = static_cast<double>(k + 1);
    return grid;
}

struct WindowPass {
    std::vector<Tensor> grads;
    double loss = 0, mse = 0, kl = 0, nll = 0;
    std::vector<double> preds_norm;
};

WindowPass run_window(const EtnOdeModel& model, const data::Window& w,
                      const std::vector<double>& grid, const Tensor* noise,
                      bool with_grads) {
    Tape tape;
    BoundModel bound = bind(tape, model);
    WindowGraph g = forward_window(tape, model, bound, w.inputs, grid, &w.y_norm,
                                   noise);
    WindowPass pass;
    pass.loss = g.loss->value[0];
    pass.mse = g.mse->value[0];
    pass.kl = g.kl ? g.kl->value[0] : 0.0;
    pass.nll = g.nll->value[0];
    pass.preds_norm.assign(g.preds->value.vec().begin(),
                           g.preds->value.vec().end());
    if (with_grads) {
        tape.backward(g.loss);
        pass.grads.reserve(bound.leaves.size());
        for (Node* leaf : bound.leaves) {
            pass.grads.push_back(leaf->grad.empty()
                                     ? Tensor::zeros(leaf->value.shape())
                                     : std::move(leaf->grad));
        }
    }
    return pass;
}

struct SplitStats {
    double loss = 0, mse = 0, kl = 0, nll = 0;
    double sq = 0, abs_sum = 0;
    std::size_t windows = 0, residuals = 0;

    void add(const WindowPass& p, const data::Window& w,
             const data::NormStats& stats) {
        loss += p.loss;
        mse += p.mse;
        kl += p.kl;
        nll += p.nll;
        windows += 1;
        for (std::size_t k = 0; k < p.preds_norm.size(); ++k) {
            double r = stats.denorm_target(p.preds_norm[k]) - w.y_raw[k];
            sq += r * r;
            abs_sum += std::abs(r);
            residuals += 1;
        }
    }

    MetricsRow row(std::size_t epoch, const std::string& split) const {
        MetricsRow r;
        r.epoch = epoch;
        r.split = split;
        double wn = std::max<std::size_t>(windows, 1);
        double rn = std::max<std::size_t>(residuals, 1);
        r.loss = loss / wn;
        r.mse = mse / wn;
        r.kl = kl / wn;
        r.nll = nll / wn;
        r.rmse = std::sqrt(sq / rn);
        r.mae = abs_sum / rn;
        return r;
    }
};

}  // namespace

TrainResult train(const ModelConfig& cfg, const data::WindowedDataset& dataset) {
    auto train_windows = dataset.of(data::Split::train);
    auto val_windows = dataset.of(data::Split::val);
    if (train_windows.empty()) {
        throw ContractError("train: no training windows (series too short for the "
                            "requested window/horizon/split)");
    }
    if (cfg.horizon != dataset.K) {
        throw ContractError("train: config horizon does not match the dataset");
    }

    EtnOdeModel model = EtnOdeModel::init(cfg, dataset.feature_names.size(),
                                          dataset.feature_names, dataset.stats);
    AdamState adam = AdamState::init_like(model);
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x73687566ULL));
    Rng noise_rng(Rng::derive(cfg.seed, 0x6e6f6973ULL));
    std::vector<double> grid = integer_grid(cfg.horizon);
    bool uses_noise = cfg.variant != Variant::no_ode;

    TrainResult result;
    result.best_val_rmse = std::numeric_limits<double>::infinity();
    EtnOdeModel best = model;
    std::size_t best_epoch = 0;

    std::vector<std::size_t> order(train_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        SplitStats train_stats;
        std::size_t batch_size = std::max<std::size_t>(1, cfg.batch_size);

        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t count = std::min(batch_size, order.size() - start);
            // Noise is drawn sequentially up front so draws do not depend on
            // the thread schedule.
            std::vector<Tensor> noises;
            if (uses_noise) {
                noises.reserve(count);
                for (std::size_t i = 0; i < count; ++i)
                    noises.push_back(noise_rng.normal_tensor({cfg.latent_dim}));
            }
            std::vector<WindowPass> passes(count);
            parallel_for(count, cfg.threads, [&](std::size_t i) {
                const data::Window& w = *train_windows[order[start + i]];
                passes[i] = run_window(model, w, grid,
                                       uses_noise ? &noises[i] : nullptr, true);
            });

            std::vector<Tensor> grad_acc;
            for (std::size_t i = 0; i < count; ++i) {
                const data::Window& w = *train_windows[order[start + i]];
                train_stats.add(passes[i], w, dataset.stats);
                if (grad_acc.empty()) {
                    grad_acc = std::move(passes[i].grads);
                } else {
                    for (std::size_t p = 0; p < grad_acc.size(); ++p)
                        for (std::size_t j = 0; j < grad_acc[p].size(); ++j)
                            grad_acc[p][j] += passes[i].grads[p][j];
                }
            }
            double inv = 1.0 / static_cast<double>(count);
            std::size_t p = 0;
            model.for_each_param([&](const std::string&, const Tensor& theta) {
                for (std::size_t j = 0; j < theta.size(); ++j) {
                    grad_acc[p][j] = grad_acc[p][j] * inv +
                                     2.0 * cfg.l2 * theta[j];
                }
                ++p;
            });
            try {
                adam_step(adam, model, grad_acc, cfg.learning_rate);
            } catch (const NumericError& e) {
                log::warn(std::string("skipping batch: ") + e.what());
            }
        }

        MetricsRow train_row = train_stats.row(epoch, "train");
        if (!std::isfinite(train_row.loss)) {
            throw NumericError("training diverged at epoch " +
                               std::to_string(epoch) + " (loss " +
                               std::to_string(train_row.loss) + ")");
        }
        result.history.push_back(train_row);

        double selection_rmse = train_row.rmse;
        if (!val_windows.empty()) {
            std::vector<WindowPass> passes(val_windows.size());
            parallel_for(val_windows.size(), cfg.threads, [&](std::size_t i) {
                passes[i] = run_window(model, *val_windows[i], grid, nullptr,
                                       false);
            });
            SplitStats val_stats;
            for (std::size_t i = 0; i < passes.size(); ++i)
                val_stats.add(passes[i], *val_windows[i], dataset.stats);
            MetricsRow val_row = val_stats.row(epoch, "val");
            result.history.push_back(val_row);
            selection_rmse = val_row.rmse;
        }
        if (selection_rmse < result.best_val_rmse) {
            result.best_val_rmse = selection_rmse;
            best = model;
            best_epoch = epoch;
        }
        log::info("epoch " + std::to_string(epoch) + " loss " +
                  std::to_string(train_row.loss) + " val_rmse " +
                  std::to_string(selection_rmse));
    }

    result.model = std::move(best);
    result.best_epoch = best_epoch;
    return result;
}

namespace {

// Offset kinds used by evaluate/persistence: integer offsets address window
// targets, half offsets address held-out half-rate truth.
struct OffsetPlan {
    double offset;
    bool half;
    std::size_t k;  // target index (integer) or held-out step (half)
};

std::vector<OffsetPlan> plan_offsets(const data::WindowedDataset& dataset,
                                     const odenet::TimeGrid& grid) {
    std::vector<OffsetPlan> plans;
    for (double m : grid.offsets()) {
        double r = std::round(m);
        if (std::abs(m - r) < 1e-9) {
            if (r < 1.0 || r > static_cast<double>(dataset.K)) {
                throw ContractError("evaluate: integer offset " +
                                    std::to_string(m) + " outside stored horizon 1.." +
                                    std::to_string(dataset.K));
            }
            plans.push_back({m, false, static_cast<std::size_t>(r) - 1});
            continue;
        }
        double half_k = m - 0.5;
        double hk = std::round(half_k);
        if (std::abs(half_k - hk) < 1e-9 && hk >= 0.0) {
            if (!dataset.half_truth) {
                throw ContractError(
                    "evaluate: fractional offset " + std::to_string(m) +
                    " requires a half-resampled dataset with held-out truth");
            }
            plans.push_back({m, true, static_cast<std::size_t>(hk)});
            continue;
        }
        throw ContractError("evaluate: no ground truth exists for offset " +
                            std::to_string(m));
    }
    return plans;
}

std::vector<OffsetMetrics> metrics_from(
    const std::vector<OffsetPlan>& plans,
    const std::vector<std::vector<double>>& preds_raw,
    const std::vector<const data::Window*>& windows,
    const data::WindowedDataset& dataset) {
    std::vector<OffsetMetrics> out;
    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
        const OffsetPlan& plan = plans[pi];
        double sq = 0, abs_sum = 0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const data::Window& w = *windows[i];
            double truth;
            if (plan.half) {
                auto t = dataset.fractional_truth(w, plan.offset);
                if (!t) continue;  // window end too close to the series end
                truth = *t;
            } else {
                truth = w.y_raw[plan.k];
            }
            double r = preds_raw[i][pi] - truth;
            sq += r * r;
            abs_sum += std::abs(r);
            n += 1;
        }
        OffsetMetrics m;
        m.offset = plan.offset;
        m.count = n;
        if (n > 0) {
            m.rmse = std::sqrt(sq / static_cast<double>(n));
            m.mae = abs_sum / static_cast<double>(n);
        }
        out.push_back(m);
    }
    return out;
}

std::vector<std::vector<double>> forward_split(
    const EtnOdeModel& model, const std::vector<const data::Window*>& windows,
    const std::vector<double>& offsets) {
    std::vector<std::vector<double>> preds(windows.size());
    parallel_for(windows.size(), model.cfg.threads, [&](std::size_t i) {
        Tape tape;
        BoundModel bound = bind(tape, model);
        WindowGraph g = forward_window(tape, model, bound, windows[i]->inputs,
                                       offsets, nullptr, nullptr);
        std::vector<double> row(g.preds->value.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            row[k] = model.stats.denorm_target(g.preds->value[k]);
        preds[i] = std::move(row);
    });
    return preds;
}

}  // namespace

std::vector<OffsetMetrics> evaluate(const EtnOdeModel& model,
                                    const data::WindowedDataset& dataset,
                                    const odenet::TimeGrid& grid,
                                    data::Split split) {
    auto windows = dataset.of(split);
    if (windows.empty()) {
        throw ContractError("evaluate: the requested split has no windows");
    }
    auto plans = plan_offsets(dataset, grid);
    auto preds = forward_split(model, windows, grid.offsets());
    return metrics_from(plans, preds, windows, dataset);
}

std::vector<OffsetMetrics> persistence_baseline(const data::WindowedDataset& dataset,
                                                const odenet::TimeGrid& grid,
                                                data::Split split) {
    auto windows = dataset.of(split);
    if (windows.empty()) {
        throw ContractError("persistence_baseline: the requested split has no "
                            "windows");
    }
    auto plans = plan_offsets(dataset, grid);
    std::vector<std::vector<double>> preds(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i)
        preds[i].assign(plans.size(), windows[i]->last_target_raw);
    return metrics_from(plans, preds, windows, dataset);
}

std::vector<Prediction> predict(const EtnOdeModel& model,
                                const data::WindowedDataset& dataset,
                                const odenet::TimeGrid& grid, data::Split split) {
    auto windows = dataset.of(split);
    if (windows.empty()) {
        throw ContractError("predict: the requested split has no windows");
    }
    auto preds = forward_split(model, windows, grid.offsets());
    std::vector<Prediction> rows;
    rows.reserve(windows.size() * grid.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            rows.push_back(Prediction{windows[i]->end_index, grid.offsets()[k],
                                      preds[i][k]});
        }
    }
    return rows;
}

Node* batch_loss(Tape& tape, const EtnOdeModel& model, const BoundModel& bound,
                 const std::vector<const data::Window*>& windows,
                 const std::vector<Tensor>& noises) {
    if (windows.empty()) throw ContractError("batch_loss: no windows");
    std::vector<double> grid = integer_grid(model.cfg.horizon);
    bool uses_noise = model.cfg.variant != Variant::no_ode;
    if (uses_noise && noises.size() != windows.size()) {
        throw ContractError("batch_loss: one noise draw per window required");
    }
    std::vector<Node*> losses;
    losses.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        WindowGraph g = forward_window(tape, model, bound, windows[i]->inputs,
                                       grid, &windows[i]->y_norm,
                                       uses_noise ? &noises[i] : nullptr);
        losses.push_back(g.loss);
    }
    Node* mean_loss = mean_all(pack(losses));
    return add(mean_loss, l2_penalty(bound, model.cfg.l2));
}

}  // namespace etnode::train
