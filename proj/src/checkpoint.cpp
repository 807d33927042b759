#include "etnode/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace etnode::train {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
    json j;
    j["window"] = c.window;
    j["horizon"] = c.horizon;
    j["hidden_dim"] = c.hidden_dim;
    j["latent_dim"] = c.latent_dim;
    j["noise_std"] = c.noise_std;
    j["l2"] = c.l2;
    j["learning_rate"] = c.learning_rate;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["solver"] = odenet::to_string(c.solver.method);
    j["solver_step"] = c.solver.step;
    j["solver_rtol"] = c.solver.rtol;
    j["solver_atol"] = c.solver.atol;
    j["solver_max_steps"] = c.solver.max_steps;
    j["variant"] = to_string(c.variant);
    j["reset_gate"] = c.reset_gate;
    j["threads"] = c.threads;
    j["train_split"] = c.train_split;
    j["val_split"] = c.val_split;
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.window = j.at("window").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.noise_std = j.at("noise_std").get<double>();
    c.l2 = j.at("l2").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.solver.method = odenet::solver_method_from(j.at("solver").get<std::string>());
    c.solver.step = j.at("solver_step").get<double>();
    c.solver.rtol = j.at("solver_rtol").get<double>();
    c.solver.atol = j.at("solver_atol").get<double>();
    c.solver.max_steps = j.at("solver_max_steps").get<std::size_t>();
    c.variant = variant_from(j.at("variant").get<std::string>());
    c.reset_gate = j.at("reset_gate").get<bool>();
    c.threads = j.at("threads").get<std::size_t>();
    c.train_split = j.at("train_split").get<double>();
    c.val_split = j.at("val_split").get<double>();
    return c;
}

}  // namespace

void save_checkpoint(const TrainResult& result, const std::string& run_config,
                     const std::filesystem::path& path) {
    json j;
    j["format"] = "etnode-checkpoint";
    j["version"] = kFormatVersion;
    j["config"] = config_to_json(result.model.cfg);
    j["vars"] = result.model.vars;
    j["feature_names"] = result.model.feature_names;
    j["normalization"] = {{"mean", result.model.stats.mean},
                          {"stddev", result.model.stats.stddev}};
    j["best_epoch"] = result.best_epoch;
    // Untrained checkpoints (epochs = 0) carry no validation score; JSON has
    // no infinity, so the field becomes null.
    if (std::isfinite(result.best_val_rmse)) {
        j["best_val_rmse"] = result.best_val_rmse;
    } else {
        j["best_val_rmse"] = nullptr;
    }
    j["run_config"] = run_config;
    json params = json::object();
    result.model.for_each_param([&](const std::string& name, const Tensor& t) {
        params[name] = {{"shape", t.shape()}, {"data", t.vec()}};
    });
    j["params"] = params;
    json history = json::array();
    for (const MetricsRow& r : result.history) {
        history.push_back({{"epoch", r.epoch},
                           {"split", r.split},
                           {"rmse", r.rmse},
                           {"mae", r.mae},
                           {"loss", r.loss},
                           {"kl", r.kl},
                           {"nll", r.nll},
                           {"mse", r.mse}});
    }
    j["history"] = history;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "etnode-checkpoint") {
        throw SchemaError("not an etnode checkpoint: " + path.string());
    }
    if (j.value("version", 0) != kFormatVersion) {
        throw SchemaError("unsupported checkpoint version in " + path.string());
    }
    LoadedCheckpoint loaded;
    ModelConfig cfg = config_from_json(j.at("config"));
    auto vars = j.at("vars").get<std::size_t>();
    auto names = j.at("feature_names").get<std::vector<std::string>>();
    data::NormStats stats;
    stats.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    stats.stddev = j.at("normalization").at("stddev").get<std::vector<double>>();

    // Rebuild the skeleton, then overwrite every named tensor.
    EtnOdeModel model = EtnOdeModel::init(cfg, vars, names, stats);
    const json& params = j.at("params");
    model.for_each_param([&](const std::string& name, Tensor& t) {
        if (!params.contains(name)) {
            throw SchemaError("checkpoint missing parameter '" + name + "'");
        }
        const json& p = params.at(name);
        auto shape = p.at("shape").get<std::vector<std::size_t>>();
        auto values = p.at("data").get<std::vector<double>>();
        if (shape != t.shape()) {
            throw SchemaError("checkpoint parameter '" + name +
                              "' has inconsistent shape");
        }
        t = Tensor::from(shape, values);
    });
    if (params.size() != model.param_names().size()) {
        throw SchemaError("checkpoint holds unexpected parameter tensors");
    }
    loaded.model = std::move(model);
    loaded.best_epoch = j.value("best_epoch", 0);
    loaded.run_config = j.value("run_config", "");
    const json& bvr = j.at("best_val_rmse");
    loaded.best_val_rmse = bvr.is_number()
                               ? bvr.get<double>()
                               : std::numeric_limits<double>::infinity();
    for (const json& r : j.value("history", json::array())) {
        MetricsRow row;
        row.epoch = r.at("epoch").get<std::size_t>();
        row.split = r.at("split").get<std::string>();
        row.rmse = r.at("rmse").get<double>();
        row.mae = r.at("mae").get<double>();
        row.loss = r.at("loss").get<double>();
        row.kl = r.at("kl").get<double>();
        row.nll = r.at("nll").get<double>();
        row.mse = r.at("mse").get<double>();
        loaded.history.push_back(row);
    }
    return loaded;
}

}  // namespace etnode::train
