#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etnode/attention.hpp"
#include "etnode/checkpoint.hpp"
#include "etnode/config.hpp"
#include "etnode/data.hpp"
#include "etnode/log.hpp"
#include "etnode/training.hpp"

namespace fs = std::filesystem;
using namespace etnode;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

struct CommonFlags {
    std::string config_path;
    std::string data_path;
    std::string checkpoint_path;
    std::string out_dir = "run";
    std::string offsets;
    std::string variant;
    std::optional<std::uint64_t> seed;
};

/// Resolves config file plus flag overrides (flags win).
config::RunConfig resolve_config(const CommonFlags& flags) {
    config::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = config::load_file(flags.config_path);
    if (!flags.data_path.empty()) cfg.data_path = flags.data_path;
    if (flags.seed) cfg.model.seed = *flags.seed;
    if (!flags.variant.empty())
        cfg.model.variant = train::variant_from(flags.variant);
    if (!flags.offsets.empty()) cfg.offsets = config::parse_offsets(flags.offsets);
    return cfg;
}

/// Loads the series per config: column selection, length check, optional
/// half-rate resampling.
data::MultivariateSeries load_series(config::RunConfig& cfg) {
    if (cfg.data_path.empty()) {
        throw ConfigError("no data file given (config key 'data' or --data)");
    }
    if (cfg.exo_cols.empty()) {
        for (const std::string& name : data::read_header(cfg.data_path)) {
            if (name != cfg.target_col) cfg.exo_cols.push_back(name);
        }
    }
    data::MultivariateSeries series =
        data::load_csv(cfg.data_path, cfg.target_col, cfg.exo_cols);
    std::size_t min_rows = cfg.model.window + cfg.model.horizon + 2;
    if (series.length() < min_rows) {
        throw ContractError("dataset has " + std::to_string(series.length()) +
                            " rows; need at least " + std::to_string(min_rows) +
                            " for window " + std::to_string(cfg.model.window) +
                            " and horizon " + std::to_string(cfg.model.horizon));
    }
    if (cfg.resample_half) series = data::resample_half(series);
    return series;
}

odenet::TimeGrid grid_from(const config::RunConfig& cfg) {
    if (!cfg.offsets.empty()) return odenet::TimeGrid::from(cfg.offsets);
    std::vector<double> offsets(cfg.model.horizon);
    for (std::size_t k = 0; k < offsets.size(); ++k)
        offsets[k] = static_cast<double>(k + 1);
    return odenet::TimeGrid::from(offsets);
}

std::string metrics_csv(const std::vector<train::MetricsRow>& rows) {
    std::string out = "epoch,split,rmse,mae,loss,kl,nll,mse\n";
    for (const auto& r : rows) {
        out += std::to_string(r.epoch) + "," + r.split + "," + fmt17(r.rmse) + "," +
               fmt17(r.mae) + "," + fmt17(r.loss) + "," + fmt17(r.kl) + "," +
               fmt17(r.nll) + "," + fmt17(r.mse) + "\n";
    }
    return out;
}

int cmd_train(const CommonFlags& flags) {
    config::RunConfig cfg = resolve_config(flags);
    data::MultivariateSeries series = load_series(cfg);
    data::WindowedDataset ds =
        data::make_windows(series, cfg.model.window, cfg.model.horizon,
                           cfg.model.train_split, cfg.model.val_split);
    log::info("training on " + std::to_string(ds.of(data::Split::train).size()) +
              " windows, validating on " +
              std::to_string(ds.of(data::Split::val).size()));
    train::TrainResult result = train::train(cfg.model, ds);

    fs::create_directories(flags.out_dir);
    std::string manifest = cfg.to_manifest();
    train::save_checkpoint(result, manifest,
                           fs::path(flags.out_dir) / "checkpoint.json");
    write_text(fs::path(flags.out_dir) / "metrics.csv",
               metrics_csv(result.history));
    write_text(fs::path(flags.out_dir) / "manifest.cfg", manifest);
    std::cout << "best_epoch " << result.best_epoch << "\n"
              << "best_val_rmse " << fmt17(result.best_val_rmse) << "\n";
    return 0;
}

struct LoadedRun {
    train::LoadedCheckpoint ckpt;
    config::RunConfig cfg;
    data::WindowedDataset ds;
};

LoadedRun load_run(const CommonFlags& flags) {
    if (flags.checkpoint_path.empty()) {
        throw ConfigError("--checkpoint is required");
    }
    LoadedRun run;
    run.ckpt = train::load_checkpoint(flags.checkpoint_path);
    run.cfg = config::load_string(run.ckpt.run_config);
    run.cfg.model = run.ckpt.model.cfg;
    if (!flags.data_path.empty()) run.cfg.data_path = flags.data_path;
    if (!flags.offsets.empty())
        run.cfg.offsets = config::parse_offsets(flags.offsets);
    data::MultivariateSeries series = load_series(run.cfg);
    run.ds = data::make_windows(series, run.cfg.model.window,
                                run.cfg.model.horizon, run.cfg.model.train_split,
                                run.cfg.model.val_split, &run.ckpt.model.stats);
    if (run.ds.feature_names != run.ckpt.model.feature_names) {
        throw SchemaError("data columns do not match the checkpoint's features");
    }
    return run;
}

int cmd_predict(const CommonFlags& flags) {
    LoadedRun run = load_run(flags);
    odenet::TimeGrid grid = grid_from(run.cfg);
    auto rows = train::predict(run.ckpt.model, run.ds, grid);
    std::string csv = "window_end_index,offset,prediction\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.window_end_index) + "," + fmt17(r.offset) + "," +
               fmt17(r.value) + "\n";
    }
    fs::create_directories(flags.out_dir);
    write_text(fs::path(flags.out_dir) / "predictions.csv", csv);
    std::cout << "predictions " << rows.size() << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags) {
    LoadedRun run = load_run(flags);
    odenet::TimeGrid grid = grid_from(run.cfg);
    auto model_metrics = train::evaluate(run.ckpt.model, run.ds, grid);
    auto base_metrics = train::persistence_baseline(run.ds, grid);

    std::string csv = "offset,rmse,mae,baseline_rmse,baseline_mae,windows\n";
    std::printf("%-8s %-12s %-12s %-14s %-14s %s\n", "offset", "rmse", "mae",
                "base_rmse", "base_mae", "windows");
    for (std::size_t i = 0; i < model_metrics.size(); ++i) {
        const auto& m = model_metrics[i];
        const auto& b = base_metrics[i];
        std::printf("%-8g %-12s %-12s %-14s %-14s %zu\n", m.offset,
                    fmt6(m.rmse).c_str(), fmt6(m.mae).c_str(),
                    fmt6(b.rmse).c_str(), fmt6(b.mae).c_str(), m.count);
        csv += fmt17(m.offset) + "," + fmt17(m.rmse) + "," + fmt17(m.mae) + "," +
               fmt17(b.rmse) + "," + fmt17(b.mae) + "," + std::to_string(m.count) +
               "\n";
    }
    fs::create_directories(flags.out_dir);
    write_text(fs::path(flags.out_dir) / "eval_metrics.csv", csv);
    return 0;
}

int cmd_export_attention(const CommonFlags& flags) {
    LoadedRun run = load_run(flags);
    const train::EtnOdeModel& model = run.ckpt.model;
    if (model.cfg.variant == train::Variant::no_att) {
        throw ConfigError("checkpoint was trained with variant no_att; it has no "
                          "attention to export");
    }
    auto windows = run.ds.of(data::Split::test);
    if (windows.empty()) {
        throw ContractError("export-attention: the test split has no windows");
    }
    std::vector<double> grid(model.cfg.horizon);
    for (std::size_t k = 0; k < grid.size(); ++k)
        grid[k] = static_cast<double>(k + 1);

    Tensor alpha_sum = Tensor::zeros({model.cfg.window, model.vars});
    Tensor beta_sum = Tensor::zeros({model.vars});
    std::vector<std::pair<Tensor, Tensor>> parts(windows.size());
    train::parallel_for(windows.size(), model.cfg.threads, [&](std::size_t i) {
        autodiff::Tape tape;
        train::BoundModel bound = train::bind(tape, model);
        train::WindowGraph g = train::forward_window(
            tape, model, bound, windows[i]->inputs, grid, nullptr, nullptr);
        parts[i] = {g.alpha->value, g.beta->value};
    });
    for (const auto& [a, b] : parts) {
        for (std::size_t i = 0; i < alpha_sum.size(); ++i) alpha_sum[i] += a[i];
        for (std::size_t i = 0; i < beta_sum.size(); ++i) beta_sum[i] += b[i];
    }
    double inv = 1.0 / static_cast<double>(windows.size());
    for (std::size_t i = 0; i < alpha_sum.size(); ++i) alpha_sum[i] *= inv;
    for (std::size_t i = 0; i < beta_sum.size(); ++i) beta_sum[i] *= inv;

    attention::export_attention(alpha_sum, beta_sum, model.feature_names,
                                flags.out_dir);
    std::cout << "exported attention over " << windows.size() << " windows\n";
    return 0;
}

struct GenFlags {
    std::string out_path;
    std::uint64_t seed = 0;
    std::size_t len = 2000;
    std::size_t num_exo = 5;
    std::string lags;
    double ar = 0.3;
    bool no_ar = false;
    double noise = 0.05;
};

data::LagDriver parse_lag(const std::string& item) {
    // column:lag:coeff
    std::size_t c1 = item.find(':');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                             : item.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw ConfigError("bad lag spec '" + item + "' (expected column:lag:coeff)");
    }
    data::LagDriver d;
    d.column = item.substr(0, c1);
    try {
        d.lag = std::stoul(item.substr(c1 + 1, c2 - c1 - 1));
        d.coeff = std::stod(item.substr(c2 + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad lag spec '" + item + "' (expected column:lag:coeff)");
    }
    return d;
}

int cmd_gen_synthetic(const GenFlags& flags) {
    data::SyntheticSpec spec;
    spec.len = flags.len;
    spec.num_exo = flags.num_exo;
    spec.noise = flags.noise;
    spec.ar_coeff = flags.no_ar ? 0.0 : flags.ar;
    if (!flags.lags.empty()) {
        spec.drivers.clear();
        std::stringstream ss(flags.lags);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) spec.drivers.push_back(parse_lag(item));
        }
    }
    data::MultivariateSeries series = data::gen_synthetic(flags.seed, spec);
    data::write_csv(series, flags.out_path);
    std::cout << "wrote " << series.length() << " rows, " << series.num_vars()
              << " columns\n";
    for (const auto& d : spec.drivers) {
        std::cout << "driver " << d.column << " lag " << d.lag << " coeff "
                  << fmt17(d.coeff) << "\n";
    }
    std::cout << "ar_coeff " << fmt17(spec.ar_coeff) << "\n"
              << "noise " << fmt17(spec.noise) << "\n";
    return 0;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_checkpoint) {
    cmd->add_option("--config", flags.config_path, "flat key=value config file");
    cmd->add_option("--data", flags.data_path, "input CSV");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--offsets", flags.offsets,
                    "comma-separated prediction offsets, e.g. 1,1.5,2");
    cmd->add_option("--seed", flags.seed, "random seed override");
    if (with_checkpoint) {
        cmd->add_option("--checkpoint", flags.checkpoint_path, "checkpoint file");
    } else {
        cmd->add_option("--variant", flags.variant, "full, no_ode or no_att");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etnode: continuous-time multivariate forecasting"};
    app.require_subcommand(1);

    CommonFlags train_flags, predict_flags, eval_flags, export_flags;
    GenFlags gen_flags;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, train_flags, false);

    CLI::App* predict_cmd =
        app.add_subcommand("predict", "predict at arbitrary offsets");
    add_common(predict_cmd, predict_flags, true);

    CLI::App* eval_cmd =
        app.add_subcommand("eval", "per-offset RMSE/MAE with baseline");
    add_common(eval_cmd, eval_flags, true);

    CLI::App* export_cmd =
        app.add_subcommand("export-attention", "write attention CSVs");
    add_common(export_cmd, export_flags, true);

    CLI::App* gen_cmd =
        app.add_subcommand("gen-synthetic", "generate a synthetic dataset");
    gen_cmd->add_option("--out", gen_flags.out_path, "output CSV path")
        ->required();
    gen_cmd->add_option("--seed", gen_flags.seed, "random seed");
    gen_cmd->add_option("--len", gen_flags.len, "series length");
    gen_cmd->add_option("--exo", gen_flags.num_exo, "number of exogenous series");
    gen_cmd->add_option("--lags", gen_flags.lags,
                        "drivers as column:lag:coeff[,...]");
    gen_cmd->add_option("--ar", gen_flags.ar, "autoregressive coefficient");
    gen_cmd->add_flag("--no-ar", gen_flags.no_ar, "disable the autoregression");
    gen_cmd->add_option("--noise", gen_flags.noise, "target noise std");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (predict_cmd->parsed()) return cmd_predict(predict_flags);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags);
        if (export_cmd->parsed()) return cmd_export_attention(export_flags);
        if (gen_cmd->parsed()) return cmd_gen_synthetic(gen_flags);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
