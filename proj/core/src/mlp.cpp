#include "safechain/nn/mlp.hpp"

#include <cmath>

#include <Eigen/QR>

namespace safechain::nn {

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    n += layer_out(l) * layer_in(l) + layer_out(l);
  }
  return n;
}

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) {
    throw std::invalid_argument("mlp: input_dim and output_dim must be >= 1");
  }
  if (hidden_dims.empty()) throw std::invalid_argument("mlp: hidden_dims must be non-empty");
  for (auto h : hidden_dims) {
    if (h == 0) throw std::invalid_argument("mlp: hidden dims must be >= 1");
  }
}

Eigen::VectorXd mlp_forward(const MlpSpec& spec, const FlatParams& params,
                            const Eigen::VectorXd& input) {
  spec.validate();
  const Mat<double> x = input;
  const Mat<double> y = forward_batch<double>(
      spec, {params.data(), static_cast<std::size_t>(params.size())}, x);
  return y.col(0);
}

FlatParams init_params(const MlpSpec& spec, std::mt19937_64& rng, double output_gain) {
  spec.validate();
  FlatParams p = FlatParams::Zero(static_cast<Eigen::Index>(spec.num_params()));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_in(l));
    const auto out = static_cast<Eigen::Index>(spec.layer_out(l));
    const double gain = (l + 1 == spec.num_layers()) ? output_gain : std::sqrt(2.0);
    // Orthonormal rows or columns from the QR factor of a Gaussian matrix.
    const Eigen::Index big = std::max(in, out);
    const Eigen::Index small = std::min(in, out);
    Eigen::MatrixXd g(big, small);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    // Fix the sign ambiguity so the distribution is uniform (Haar).
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
    for (Eigen::Index j = 0; j < small; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    Eigen::Map<Eigen::MatrixXd> w(p.data() + offset, out, in);
    w = (out >= in) ? Eigen::MatrixXd(q) : Eigen::MatrixXd(q.transpose());
    w *= gain;
    offset += static_cast<std::size_t>(out * in + out);
  }
  return p;
}

}  // namespace safechain::nn
