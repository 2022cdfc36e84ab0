#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "safechain/nn/mlp.hpp"

namespace safechain::nn {

nlohmann::json to_json(const MlpSpec& spec);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

/// Writes `values` as raw little-endian float64 to `<stem>.bin`.
void write_flat_vector(const std::filesystem::path& bin_path, const Eigen::VectorXd& values);
Eigen::VectorXd read_flat_vector(const std::filesystem::path& bin_path);

/// `<stem>.bin` holds the parameters and `<stem>.json` the sidecar
/// (`{"mlp": {...}, ...extra}`).
void save_checkpoint(const std::filesystem::path& stem, const MlpSpec& spec,
                     const Eigen::VectorXd& values, const nlohmann::json& extra = {});

struct LoadedCheckpoint {
  MlpSpec spec;
  Eigen::VectorXd values;
  nlohmann::json sidecar;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace safechain::nn
