#include "etnode/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace etnode::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" +
                          value + "'");
    }
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("config key '" + key +
                          "': expected a non-negative integer, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" +
                      value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i)
        out += (i ? "," : "") + items[i];
    return out;
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "batch_size",  "data",          "epochs",        "exogenous",
        "hidden_dim",  "horizon",       "l2",            "latent_dim",
        "learning_rate", "noise_std",   "offsets",       "resample_half",
        "reset_gate",  "seed",          "solver",        "solver_atol",
        "solver_max_steps", "solver_rtol", "solver_step", "target",
        "threads",     "train_split",   "val_split",     "variant",
        "window",
    };
    return keys;
}

}  // namespace

std::vector<double> parse_offsets(const std::string& text) {
    std::vector<double> out;
    for (const std::string& item : split_list(text))
        out.push_back(to_double("offsets", item));
    if (out.empty()) throw ConfigError("offsets: empty list");
    double prev = 0.0;
    for (double m : out) {
        if (!(m > prev)) {
            throw ConfigError("offsets must be positive and strictly increasing");
        }
        prev = m;
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
    train::ModelConfig& m = cfg.model;
    if (key == "window") m.window = to_uint(key, value);
    else if (key == "horizon") m.horizon = to_uint(key, value);
    else if (key == "hidden_dim") m.hidden_dim = to_uint(key, value);
    else if (key == "latent_dim") m.latent_dim = to_uint(key, value);
    else if (key == "noise_std") m.noise_std = to_double(key, value);
    else if (key == "l2") m.l2 = to_double(key, value);
    else if (key == "learning_rate") m.learning_rate = to_double(key, value);
    else if (key == "batch_size") m.batch_size = to_uint(key, value);
    else if (key == "epochs") m.epochs = to_uint(key, value);
    else if (key == "seed") m.seed = to_uint(key, value);
    else if (key == "solver") m.solver.method = odenet::solver_method_from(value);
    else if (key == "solver_step") m.solver.step = to_double(key, value);
    else if (key == "solver_rtol") m.solver.rtol = to_double(key, value);
    else if (key == "solver_atol") m.solver.atol = to_double(key, value);
    else if (key == "solver_max_steps") m.solver.max_steps = to_uint(key, value);
    else if (key == "variant") m.variant = train::variant_from(value);
    else if (key == "reset_gate") m.reset_gate = to_bool(key, value);
    else if (key == "threads") m.threads = to_uint(key, value);
    else if (key == "train_split") m.train_split = to_double(key, value);
    else if (key == "val_split") m.val_split = to_double(key, value);
    else if (key == "data") cfg.data_path = value;
    else if (key == "target") cfg.target_col = value;
    else if (key == "exogenous") cfg.exo_cols = split_list(value);
    else if (key == "resample_half") cfg.resample_half = to_bool(key, value);
    else if (key == "offsets") cfg.offsets = parse_offsets(value);
    else {
        std::string known;
        for (const auto& k : known_keys()) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown config key '" + key + "'; known keys: " + known);
    }
}

namespace {

RunConfig parse_stream(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        apply_override(cfg, key, value);
    }
    return cfg;
}

}  // namespace

RunConfig load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    return parse_stream(in, path.string());
}

RunConfig load_string(const std::string& text) {
    std::istringstream in(text);
    return parse_stream(in, "<embedded config>");
}

std::string RunConfig::to_manifest() const {
    std::map<std::string, std::string> kv;
    kv["window"] = std::to_string(model.window);
    kv["horizon"] = std::to_string(model.horizon);
    kv["hidden_dim"] = std::to_string(model.hidden_dim);
    kv["latent_dim"] = std::to_string(model.latent_dim);
    kv["noise_std"] = fmt(model.noise_std);
    kv["l2"] = fmt(model.l2);
    kv["learning_rate"] = fmt(model.learning_rate);
    kv["batch_size"] = std::to_string(model.batch_size);
    kv["epochs"] = std::to_string(model.epochs);
    kv["seed"] = std::to_string(model.seed);
    kv["solver"] = odenet::to_string(model.solver.method);
    kv["solver_step"] = fmt(model.solver.step);
    kv["solver_rtol"] = fmt(model.solver.rtol);
    kv["solver_atol"] = fmt(model.solver.atol);
    kv["solver_max_steps"] = std::to_string(model.solver.max_steps);
    kv["variant"] = train::to_string(model.variant);
    kv["reset_gate"] = model.reset_gate ? "true" : "false";
    kv["threads"] = std::to_string(model.threads);
    kv["train_split"] = fmt(model.train_split);
    kv["val_split"] = fmt(model.val_split);
    kv["data"] = data_path;
    kv["target"] = target_col;
    kv["exogenous"] = join(exo_cols);
    kv["resample_half"] = resample_half ? "true" : "false";
    if (!offsets.empty()) {
        std::string list;
        for (std::size_t i = 0; i < offsets.size(); ++i)
            list += (i ? "," : "") + fmt(offsets[i]);
        kv["offsets"] = list;
    }
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

}  // namespace etnode::config
