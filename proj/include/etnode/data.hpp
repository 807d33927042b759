#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "etnode/tensor.hpp"

namespace etnode::data {

/// Regularly sampled multivariate series, columns ordered
/// [exogenous..., target]. `half_truth` is populated by resample_half: entry
/// i holds the dropped original target at index 2i+1, the ground truth for
/// fractional-offset evaluation.
struct MultivariateSeries {
    std::vector<std::string> names;         // exogenous..., target
    std::vector<std::vector<double>> cols;  // same order, equal lengths
    std::optional<std::vector<double>> half_truth;

    std::size_t length() const { return cols.empty() ? 0 : cols[0].size(); }
    std::size_t num_vars() const { return cols.size(); }  // N+1
    const std::vector<double>& target() const { return cols.back(); }
    const std::string& target_name() const { return names.back(); }
};

/// Parses the named columns (exogenous order preserved, target last).
MultivariateSeries load_csv(const std::filesystem::path& path,
                            const std::string& target_col,
                            const std::vector<std::string>& exo_cols);

/// Header row of a CSV file (used to resolve "all non-target columns").
std::vector<std::string> read_header(const std::filesystem::path& path);

/// Per-column z-score statistics (population std).
struct NormStats {
    std::vector<double> mean, stddev;  // aligned with series columns

    double denorm_target(double z) const {
        return z * stddev.back() + mean.back();
    }
    double norm_target(double y) const {
        return (y - mean.back()) / stddev.back();
    }
};

/// Stats over the first `train_rows` rows only. Zero-variance columns are
/// rejected by name.
NormStats compute_stats(const MultivariateSeries& series, std::size_t train_rows);

/// z-scores every column with the given stats; half_truth stays raw.
MultivariateSeries normalize(const MultivariateSeries& series,
                             const NormStats& stats);

/// Keeps even indices; dropped odd-index target values become half_truth.
MultivariateSeries resample_half(const MultivariateSeries& series);

/// `gap` marks windows whose targets straddle a split boundary; they belong
/// to neither side and are never used.
enum class Split { train, val, test, gap };

/// One training example: T input rows and K future targets.
struct Window {
    std::size_t end_index;          // series row of the last input step
    Tensor inputs;                  // (T, vars), normalized
    std::vector<double> y_norm;     // K targets, normalized
    std::vector<double> y_raw;      // K targets, raw units
    double last_target_raw;         // y at end_index (persistence forecast)
    Split split;
};

struct WindowedDataset {
    std::vector<Window> windows;  // chronological
    std::vector<std::string> feature_names;
    NormStats stats;
    std::size_t T = 0, K = 0;
    std::size_t train_rows = 0;  // rows feeding normalization stats
    std::optional<std::vector<double>> half_truth;  // raw, from resample_half

    std::vector<const Window*> of(Split s) const;
    /// Ground truth at fractional offset k+0.5 from a window, when the
    /// dataset was half-resampled. Returns nullopt when out of range.
    std::optional<double> fractional_truth(const Window& w, double offset) const;
};

/// Builds all len-T-K+1 windows over the raw series and assigns chronological
/// splits: stats come from the first train_frac rows, validation is carved
/// from the tail of the training portion (val_frac of it), and windows
/// whose targets straddle a boundary are assigned to neither side (no target
/// leakage). A trained model evaluating a new file passes its stored stats
/// via `stats_override`.
WindowedDataset make_windows(const MultivariateSeries& raw, std::size_t T,
                             std::size_t K, double train_frac = 0.9,
                             double val_frac = 0.1,
                             const NormStats* stats_override = nullptr);

/// One causal driver of the synthetic target.
struct LagDriver {
    std::string column;
    std::size_t lag = 0;
    double coeff = 0.0;
};

struct SyntheticSpec {
    std::size_t len = 2000;
    std::size_t num_exo = 5;
    std::vector<LagDriver> drivers = {{"x1", 3, 0.6}, {"x2", 6, 0.3}};
    double ar_coeff = 0.3;
    double noise = 0.05;
};

/// Smooth sinusoid-mix exogenous processes plus a target driven by lagged
/// exogenous terms, an autoregressive term and Gaussian noise. Deterministic
/// in the seed.
MultivariateSeries gen_synthetic(std::uint64_t seed, const SyntheticSpec& spec);

/// Writes a series as CSV (header row, one sample per row).
void write_csv(const MultivariateSeries& series, const std::filesystem::path& path);

}  // namespace etnode::data
