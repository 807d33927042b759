#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etnode/model.hpp"

namespace etnode::config {

/// Resolved run configuration: model hyperparameters plus data selection.
/// Sources are a flat `key = value` file ('#' comments) and command-line
/// overrides; overrides win. Unknown keys are rejected by name.
struct RunConfig {
    train::ModelConfig model;
    std::string data_path;
    std::string target_col = "y";
    std::vector<std::string> exo_cols;  // empty: all non-target columns
    bool resample_half = false;
    std::vector<double> offsets;  // default eval offsets; empty: 1..K

    /// Flat key=value rendering with sorted keys; loading it back yields the
    /// same configuration byte for byte.
    std::string to_manifest() const;
};

/// Parses a config file. Unknown keys raise ConfigError naming the key.
RunConfig load_file(const std::filesystem::path& path);

/// Parses config text in the same flat format (used for configs embedded in
/// checkpoints).
RunConfig load_string(const std::string& text);

/// Applies a single key=value override (same key set as the file).
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

/// Comma-separated strictly increasing positive reals, e.g. "1,1.5,2".
std::vector<double> parse_offsets(const std::string& text);

}  // namespace etnode::config
