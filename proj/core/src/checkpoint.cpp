#include "safechain/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace safechain::nn {

nlohmann::json to_json(const MlpSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"output_dim", spec.output_dim},
          {"activation", "tanh"}};
}

MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  spec.output_dim = j.at("output_dim").get<std::size_t>();
  if (j.contains("activation") && j.at("activation") != "tanh") {
    throw std::invalid_argument("checkpoint: unsupported activation");
  }
  spec.validate();
  return spec;
}

void write_flat_vector(const std::filesystem::path& bin_path, const Eigen::VectorXd& values) {
  std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + bin_path.string());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    std::array<char, 8> bytes{};
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    out.write(bytes.data(), 8);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + bin_path.string());
}

Eigen::VectorXd read_flat_vector(const std::filesystem::path& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + bin_path.string());
  std::vector<double> values;
  std::array<char, 8> bytes{};
  while (in.read(bytes.data(), 8)) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
    }
    values.push_back(std::bit_cast<double>(bits));
  }
  if (in.gcount() != 0) throw std::runtime_error("checkpoint: truncated " + bin_path.string());
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void save_checkpoint(const std::filesystem::path& stem, const MlpSpec& spec,
                     const Eigen::VectorXd& values, const nlohmann::json& extra) {
  nlohmann::json sidecar = extra.is_object() ? extra : nlohmann::json::object();
  sidecar["mlp"] = to_json(spec);
  sidecar["num_values"] = values.size();
  sidecar["format"] = "float64-le";
  write_flat_vector(std::filesystem::path(stem.string() + ".bin"), values);
  std::ofstream js(stem.string() + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("checkpoint: cannot write sidecar for " + stem.string());
  js << sidecar.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream js(stem.string() + ".json");
  if (!js) throw std::runtime_error("checkpoint: missing sidecar " + stem.string() + ".json");
  LoadedCheckpoint ck;
  ck.sidecar = nlohmann::json::parse(js);
  ck.spec = mlp_spec_from_json(ck.sidecar.at("mlp"));
  ck.values = read_flat_vector(stem.string() + ".bin");
  if (ck.values.size() != ck.sidecar.at("num_values").get<Eigen::Index>()) {
    throw std::runtime_error("checkpoint: value count does not match sidecar");
  }
  if (!ck.values.allFinite()) throw std::runtime_error("checkpoint: non-finite parameters");
  return ck;
}

}  // namespace safechain::nn
