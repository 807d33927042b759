#pragma once

#include <filesystem>

#include "etnode/training.hpp"

namespace etnode::train {

/// Self-describing JSON checkpoint: config, named parameter tensors (shape +
/// row-major values), normalization statistics, best epoch and the metrics
/// history. Keys are emitted sorted and doubles with round-trip precision,
/// so identical runs produce identical bytes and loads are bit-exact.
/// `run_config` is the resolved flat-format run configuration (data column
/// selection, resampling flag, ...) carried along verbatim.
void save_checkpoint(const TrainResult& result, const std::string& run_config,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
    EtnOdeModel model;
    std::size_t best_epoch = 0;
    double best_val_rmse = 0;
    std::vector<MetricsRow> history;
    std::string run_config;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace etnode::train
