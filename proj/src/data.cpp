#include "etnode/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "etnode/rng.hpp"

namespace etnode::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim spaces and stray carriage returns
        std::size_t b = cell.find_first_not_of(" \t\r");
        std::size_t e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row) {
    if (cell.empty()) {
        throw ParseError("non-numeric cell at data row " + std::to_string(row));
    }
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + cell.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric cell '" + cell + "' at data row " +
                         std::to_string(row));
    }
    return v;
}

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

MultivariateSeries load_csv(const std::filesystem::path& path,
                            const std::string& target_col,
                            const std::vector<std::string>& exo_cols) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path.string());
    std::vector<std::string> header = split_csv_line(line);

    auto column_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        std::string available;
        for (std::size_t i = 0; i < header.size(); ++i)
            available += (i ? ", " : "") + header[i];
        throw SchemaError("column '" + name + "' not found; available columns: " +
                          available);
    };

    std::vector<std::string> wanted = exo_cols;
    wanted.push_back(target_col);
    std::vector<std::size_t> indices;
    indices.reserve(wanted.size());
    for (const auto& name : wanted) indices.push_back(column_index(name));

    MultivariateSeries series;
    series.names = wanted;
    series.cols.assign(wanted.size(), {});
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells = split_csv_line(line);
        for (std::size_t c = 0; c < indices.size(); ++c) {
            if (indices[c] >= cells.size()) {
                throw ParseError("missing cell at data row " + std::to_string(row));
            }
            series.cols[c].push_back(parse_cell(cells[indices[c]], row));
        }
    }
    return series;
}

std::vector<std::string> read_header(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path.string());
    return split_csv_line(line);
}

NormStats compute_stats(const MultivariateSeries& series, std::size_t train_rows) {
    if (train_rows == 0 || train_rows > series.length()) {
        throw ContractError("compute_stats: train_rows out of range");
    }
    NormStats stats;
    for (std::size_t c = 0; c < series.cols.size(); ++c) {
        const auto& col = series.cols[c];
        double mean = 0.0;
        for (std::size_t i = 0; i < train_rows; ++i) mean += col[i];
        mean /= static_cast<double>(train_rows);
        double var = 0.0;
        for (std::size_t i = 0; i < train_rows; ++i) {
            double d = col[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(train_rows);  // population convention
        double sd = std::sqrt(var);
        if (sd < 1e-12 * (std::abs(mean) + 1.0)) {
            throw ContractError("zero-variance column '" + series.names[c] +
                                "' in the training split");
        }
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    return stats;
}

MultivariateSeries normalize(const MultivariateSeries& series,
                             const NormStats& stats) {
    if (stats.mean.size() != series.cols.size()) {
        throw ContractError("normalize: stats do not match column count");
    }
    MultivariateSeries out = series;
    for (std::size_t c = 0; c < out.cols.size(); ++c) {
        for (double& v : out.cols[c]) v = (v - stats.mean[c]) / stats.stddev[c];
    }
    return out;
}

MultivariateSeries resample_half(const MultivariateSeries& series) {
    if (series.length() < 2) {
        throw ContractError("resample_half: need at least 2 rows");
    }
    MultivariateSeries out;
    out.names = series.names;
    out.cols.assign(series.cols.size(), {});
    for (std::size_t c = 0; c < series.cols.size(); ++c) {
        for (std::size_t i = 0; i < series.cols[c].size(); i += 2)
            out.cols[c].push_back(series.cols[c][i]);
    }
    std::vector<double> held;
    for (std::size_t i = 1; i < series.target().size(); i += 2)
        held.push_back(series.target()[i]);
    out.half_truth = std::move(held);
    return out;
}

std::vector<const Window*> WindowedDataset::of(Split s) const {
    std::vector<const Window*> out;
    for (const Window& w : windows)
        if (w.split == s) out.push_back(&w);
    return out;
}

std::optional<double> WindowedDataset::fractional_truth(const Window& w,
                                                        double offset) const {
    if (!half_truth) return std::nullopt;
    double k_real = offset - 0.5;
    auto k = static_cast<long long>(std::llround(k_real));
    if (k < 0 || std::abs(k_real - static_cast<double>(k)) > 1e-9)
        return std::nullopt;
    std::size_t idx = w.end_index + static_cast<std::size_t>(k);
    if (idx >= half_truth->size()) return std::nullopt;
    return (*half_truth)[idx];
}

WindowedDataset make_windows(const MultivariateSeries& raw, std::size_t T,
                             std::size_t K, double train_frac, double val_frac,
                             const NormStats* stats_override) {
    std::size_t len = raw.length();
    if (T == 0 || K == 0) throw ContractError("make_windows: T and K must be >= 1");
    if (len < T + K) {
        throw ContractError("make_windows: series too short, need at least " +
                            std::to_string(T + K) + " rows, got " +
                            std::to_string(len));
    }
    if (train_frac <= 0.0 || train_frac > 1.0 || val_frac < 0.0 || val_frac >= 1.0) {
        throw ContractError("make_windows: invalid split fractions");
    }

    auto b_test = static_cast<std::size_t>(std::floor(train_frac * len));
    b_test = std::min(b_test, len);
    std::size_t val_rows = static_cast<std::size_t>(std::floor(val_frac * b_test));
    std::size_t b_val = b_test - val_rows;

    WindowedDataset ds;
    ds.T = T;
    ds.K = K;
    ds.feature_names = raw.names;
    ds.train_rows = b_test;
    if (stats_override) {
        if (stats_override->mean.size() != raw.num_vars()) {
            throw ContractError("make_windows: stats do not match column count");
        }
        ds.stats = *stats_override;
    } else {
        ds.stats = compute_stats(raw, b_test);
    }
    MultivariateSeries norm = normalize(raw, ds.stats);
    ds.half_truth = raw.half_truth;

    std::size_t vars = raw.num_vars();
    std::size_t count = len - T - K + 1;
    ds.windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Window w;
        w.end_index = i + T - 1;
        std::vector<double> x(T * vars);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t c = 0; c < vars; ++c)
                x[t * vars + c] = norm.cols[c][i + t];
        w.inputs = Tensor::raw({T, vars}, std::move(x));
        w.y_norm.resize(K);
        w.y_raw.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            w.y_norm[k] = norm.target()[i + T + k];
            w.y_raw[k] = raw.target()[i + T + k];
        }
        w.last_target_raw = raw.target()[w.end_index];
        std::size_t first_target = i + T;
        std::size_t last_target = i + T + K - 1;
        if (last_target < b_val) {
            w.split = Split::train;
        } else if (first_target >= b_val && last_target < b_test) {
            w.split = Split::val;
        } else if (first_target >= b_test) {
            w.split = Split::test;
        } else {
            w.split = Split::gap;  // targets straddle a boundary; never used
        }
        ds.windows.push_back(std::move(w));
    }
    return ds;
}

MultivariateSeries gen_synthetic(std::uint64_t seed, const SyntheticSpec& spec) {
    if (spec.num_exo == 0) throw ContractError("gen_synthetic: need exogenous series");
    if (spec.len < 2) throw ContractError("gen_synthetic: len too small");

    std::vector<std::string> exo_names;
    for (std::size_t j = 1; j <= spec.num_exo; ++j)
        exo_names.push_back("x" + std::to_string(j));

    std::size_t max_lag = 0;
    std::vector<std::size_t> driver_cols;
    for (const auto& d : spec.drivers) {
        auto it = std::find(exo_names.begin(), exo_names.end(), d.column);
        if (it == exo_names.end()) {
            throw ContractError("gen_synthetic: driver column '" + d.column +
                                "' is not an exogenous series");
        }
        if (d.lag >= spec.len) {
            throw ContractError("gen_synthetic: lag " + std::to_string(d.lag) +
                                " >= series length");
        }
        driver_cols.push_back(static_cast<std::size_t>(it - exo_names.begin()));
        max_lag = std::max(max_lag, d.lag);
    }

    Rng rng(seed);
    std::size_t burn = max_lag + 50;
    std::size_t total = spec.len + burn;
    constexpr std::size_t kHarmonics = 3;
    // Sinusoid lags alone are nearly collinear; the jitter keeps individual
    // lags identifiable for regression-style analyses.
    constexpr double kExoJitter = 0.05;
    constexpr double kTwoPi = 6.283185307179586476925286766559;

    std::vector<std::vector<double>> exo(spec.num_exo);
    for (std::size_t j = 0; j < spec.num_exo; ++j) {
        double period[kHarmonics], amp[kHarmonics], phase[kHarmonics];
        for (std::size_t h = 0; h < kHarmonics; ++h) {
            period[h] = rng.uniform(20.0, 200.0);
            amp[h] = rng.uniform(0.5, 1.0) / static_cast<double>(h + 1);
            phase[h] = rng.uniform(0.0, kTwoPi);
        }
        exo[j].resize(total);
        for (std::size_t t = 0; t < total; ++t) {
            double v = 0.0;
            for (std::size_t h = 0; h < kHarmonics; ++h)
                v += amp[h] * std::sin(kTwoPi * static_cast<double>(t) / period[h] +
                                       phase[h]);
            exo[j][t] = v + kExoJitter * rng.normal();
        }
    }

    std::vector<double> y(total, 0.0);
    double prev = 0.0;
    for (std::size_t t = 0; t < total; ++t) {
        double v = spec.ar_coeff * prev;
        for (std::size_t di = 0; di < spec.drivers.size(); ++di) {
            const auto& d = spec.drivers[di];
            if (t >= d.lag) v += d.coeff * exo[driver_cols[di]][t - d.lag];
        }
        if (spec.noise > 0.0) v += spec.noise * rng.normal();
        y[t] = v;
        prev = v;
    }

    MultivariateSeries series;
    series.names = exo_names;
    series.names.push_back("y");
    for (std::size_t j = 0; j < spec.num_exo; ++j)
        series.cols.emplace_back(exo[j].begin() + static_cast<long>(burn),
                                 exo[j].end());
    series.cols.emplace_back(y.begin() + static_cast<long>(burn), y.end());
    return series;
}

void write_csv(const MultivariateSeries& series,
               const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t c = 0; c < series.names.size(); ++c)
        out << (c ? "," : "") << series.names[c];
    out << "\n";
    for (std::size_t i = 0; i < series.length(); ++i) {
        for (std::size_t c = 0; c < series.cols.size(); ++c)
            out << (c ? "," : "") << fmt_value(series.cols[c][i]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace etnode::data
