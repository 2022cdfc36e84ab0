#pragma once

#include <random>

#include "safechain/dist/atoms.hpp"
#include "safechain/nn/adam.hpp"

namespace safechain::algo {

struct CriticOptions {
  double learning_rate = 1e-3;
  std::size_t steps = 240;
  std::size_t minibatch = 128;  // 0 = full batch every step
  std::size_t warmup_epochs = 5;
  double range_margin = 0.1;
};

/// Tracks min/max of fitted targets for the first `warmup_epochs` calls, then
/// freezes. The span is widened by `margin` on each side; a degenerate span is
/// padded by 1.
class TargetRange {
 public:
  void observe(const Eigen::VectorXd& targets, std::size_t warmup_epochs);
  bool initialized() const { return seen_ > 0; }
  bool frozen(std::size_t warmup_epochs) const { return seen_ >= warmup_epochs; }
  std::pair<double, double> bounds(double margin) const;

 private:
  std::size_t seen_ = 0;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

/// Scalar value network trained by mean squared error. Outputs are affinely
/// rescaled by the target range so the network itself works at unit scale.
class ScalarCritic {
 public:
  ScalarCritic(std::size_t obs_dim, std::vector<std::size_t> hidden, CriticOptions options,
               std::mt19937_64& rng);

  /// Runs `options.steps` Adam steps and returns the full-batch loss afterwards.
  double fit(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets, std::mt19937_64& rng);
  Eigen::VectorXd values(const Eigen::MatrixXd& states) const;
  double loss(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets) const;

  const nn::MlpSpec& spec() const { return spec_; }
  const nn::FlatParams& params() const { return params_; }
  double offset() const { return offset_; }
  double scale() const { return scale_; }

 private:
  nn::MlpSpec spec_;
  nn::FlatParams params_;
  nn::Adam adam_;
  CriticOptions options_;
  TargetRange range_;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

/// Categorical value head trained by the moment-matched Gaussian NLL. The atom
/// grid follows the observed target range during warm-up and is fixed after.
class DistributionalCritic {
 public:
  DistributionalCritic(std::size_t obs_dim, std::vector<std::size_t> hidden,
                       std::size_t num_atoms, dist::HeadRole role, CriticOptions options,
                       std::mt19937_64& rng);

  double fit(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets, std::mt19937_64& rng);
  Eigen::VectorXd values(const Eigen::MatrixXd& states) const;
  double loss(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets) const;
  dist::AtomicDistribution distribution(const Eigen::VectorXd& observation) const;

  const dist::ValueHead& head() const { return head_; }

 private:
  dist::ValueHead head_;
  nn::Adam adam_;
  CriticOptions options_;
  TargetRange range_;
};

}  // namespace safechain::algo
