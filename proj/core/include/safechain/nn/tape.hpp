#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

#include "safechain/nn/dual.hpp"
#include "safechain/nn/mlp.hpp"

namespace safechain::nn {

/// A recorded scalar computation over flat parameters.
///
/// The objective is a generic callable `f(std::span<const S> params,
/// std::span<S> grad) -> S` that returns the value and accumulates its
/// gradient by hand-written reverse passes. It is instantiated for `double`
/// (values and gradients) and for `Dual` (forward-over-reverse Hessian-vector
/// products), so second order comes from the same first-order code.
class GradientTape {
 public:
  using Objective = std::function<double(std::span<const double>, std::span<double>)>;
  using DualObjective = std::function<Dual(std::span<const Dual>, std::span<Dual>)>;

  template <class F>
  static GradientTape record(FlatParams at, F objective) {
    GradientTape tape;
    tape.params_ = std::move(at);
    tape.objective_ = objective;
    tape.dual_objective_ = objective;
    tape.outputs_.resize(1);
    Eigen::VectorXd scratch = Eigen::VectorXd::Zero(tape.params_.size());
    tape.outputs_[0] = tape.objective_(span(tape.params_), span(scratch));
    return tape;
  }

  /// Records a network forward pass; the tape is scalar only when
  /// `spec.output_dim == 1`.
  static GradientTape record_forward(const MlpSpec& spec, FlatParams params,
                                     const Eigen::VectorXd& input);

  bool is_scalar() const { return outputs_.size() == 1; }
  double value() const;
  const Eigen::VectorXd& outputs() const { return outputs_; }
  const FlatParams& params() const { return params_; }

  /// Re-evaluates the objective, writing the gradient.
  double replay(std::span<double> grad) const;
  Dual replay_dual(std::span<const Dual> params, std::span<Dual> grad) const;

 private:
  static std::span<const double> span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }
  static std::span<double> span(Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
  }

  FlatParams params_;
  Eigen::VectorXd outputs_;
  Objective objective_;
  DualObjective dual_objective_;
};

/// d(scalar)/d(params) at the recorded point.
FlatParams scalar_grad(const GradientTape& tape);

/// (H + damping I) v where H is the Hessian of the tape's scalar.
FlatParams hessian_vector_product(const GradientTape& tape, const FlatParams& v,
                                  double damping = 0.0);

}  // namespace safechain::nn
