#include "safechain/nn/tape.hpp"

#include <stdexcept>
#include <string>

namespace safechain::nn {

GradientTape GradientTape::record_forward(const MlpSpec& spec, FlatParams params,
                                          const Eigen::VectorXd& input) {
  spec.validate();
  if (static_cast<std::size_t>(input.size()) != spec.input_dim) {
    throw std::invalid_argument("tape: input dimension mismatch");
  }
  auto objective = [spec, input](auto p, auto grad) {
    using S = typename decltype(grad)::element_type;
    const Mat<S> x = input.cast<S>();
    MlpTrace<S> trace;
    const Mat<S> y = forward_batch<S>(spec, p, x, &trace);
    // Only meaningful for single-output networks; callers check is_scalar().
    Mat<S> d_out = Mat<S>::Zero(y.rows(), 1);
    d_out(0, 0) = S(1.0);
    backward_batch<S>(spec, p, trace, d_out, grad);
    return y(0, 0);
  };
  GradientTape tape = record(std::move(params), objective);
  tape.outputs_ = mlp_forward(spec, tape.params_, input);
  return tape;
}

double GradientTape::value() const {
  if (!is_scalar()) {
    throw std::logic_error("tape: output has dimension " + std::to_string(outputs_.size()) +
                           ", expected a scalar");
  }
  return outputs_[0];
}

double GradientTape::replay(std::span<double> grad) const {
  return objective_(span(params_), grad);
}

Dual GradientTape::replay_dual(std::span<const Dual> params, std::span<Dual> grad) const {
  return dual_objective_(params, grad);
}

FlatParams scalar_grad(const GradientTape& tape) {
  if (!tape.is_scalar()) {
    throw std::logic_error("scalar_grad: tape output is not scalar (dimension " +
                           std::to_string(tape.outputs().size()) + ")");
  }
  FlatParams grad = FlatParams::Zero(tape.params().size());
  tape.replay({grad.data(), static_cast<std::size_t>(grad.size())});
  if (!grad.allFinite()) throw std::runtime_error("scalar_grad: non-finite gradient");
  return grad;
}

FlatParams hessian_vector_product(const GradientTape& tape, const FlatParams& v,
                                  double damping) {
  if (!tape.is_scalar()) throw std::logic_error("hessian_vector_product: tape is not scalar");
  const auto& theta = tape.params();
  if (v.size() != theta.size()) {
    throw std::invalid_argument("hessian_vector_product: vector length " +
                                std::to_string(v.size()) + " != " +
                                std::to_string(theta.size()));
  }
  if (damping < 0.0) throw std::invalid_argument("hessian_vector_product: negative damping");
  const auto n = static_cast<std::size_t>(theta.size());
  std::vector<Dual> p(n), g(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = Dual(theta[static_cast<Eigen::Index>(i)],
                                                  v[static_cast<Eigen::Index>(i)]);
  tape.replay_dual(p, g);
  FlatParams hv(theta.size());
  for (std::size_t i = 0; i < n; ++i) hv[static_cast<Eigen::Index>(i)] = g[i].d;
  hv += damping * v;
  return hv;
}

}  // namespace safechain::nn
