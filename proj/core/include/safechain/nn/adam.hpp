#pragma once

#include <Eigen/Core>

namespace safechain::nn {

/// Adam with the usual bias correction; operates on flat parameter vectors.
class Adam {
 public:
  explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  void reset() {
    m_.resize(0);
    v_.resize(0);
    t_ = 0;
  }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace safechain::nn
