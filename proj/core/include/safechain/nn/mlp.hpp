#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "safechain/nn/dual.hpp"

namespace safechain::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Flat parameter vector of a network (weights then bias, layer by layer).
using FlatParams = Eigen::VectorXd;

/// Dense feed-forward network shape: tanh on hidden layers, identity on output.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t output_dim = 1;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  std::size_t layer_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_dims[layer - 1];
  }
  std::size_t layer_out(std::size_t layer) const {
    return layer == hidden_dims.size() ? output_dim : hidden_dims[layer];
  }
  std::size_t num_params() const;
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Post-activation values of every layer for one batched forward pass.
/// `acts[0]` is the input; `acts.back()` is the network output.
template <class S>
struct MlpTrace {
  std::vector<Mat<S>> acts;
};

namespace detail {

inline void check_params(const MlpSpec& spec, std::size_t n) {
  if (n != spec.num_params()) {
    throw std::invalid_argument("mlp: parameter length " + std::to_string(n) +
                                " does not match spec (" +
                                std::to_string(spec.num_params()) + ")");
  }
}

// GEMM for double or Dual operands. Dual products are split into three
// double GEMMs so they run on Eigen's vectorized kernels.
template <class A, class B>
auto product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using S = typename A::Scalar;
  if constexpr (std::is_same_v<S, double>) {
    return Mat<double>(a * b);
  } else {
    const Mat<double> av = a.unaryExpr([](const Dual& x) { return x.v; });
    const Mat<double> ad = a.unaryExpr([](const Dual& x) { return x.d; });
    const Mat<double> bv = b.unaryExpr([](const Dual& x) { return x.v; });
    const Mat<double> bd = b.unaryExpr([](const Dual& x) { return x.d; });
    const Mat<double> pv = av * bv;
    Mat<double> pd = ad * bv;
    pd.noalias() += av * bd;
    Mat<Dual> out(pv.rows(), pv.cols());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out.data()[i] = Dual(pv.data()[i], pd.data()[i]);
    }
    return out;
  }
}

}  // namespace detail

/// Batched forward pass; columns of `x` are samples.
template <class S>
Mat<S> forward_batch(const MlpSpec& spec, std::span<const S> params, const Mat<S>& x,
                     MlpTrace<S>* trace = nullptr) {
  detail::check_params(spec, params.size());
  if (static_cast<std::size_t>(x.rows()) != spec.input_dim) {
    throw std::invalid_argument("mlp: input dimension " + std::to_string(x.rows()) +
                                " != " + std::to_string(spec.input_dim));
  }
  if (trace) {
    trace->acts.clear();
    trace->acts.push_back(x);
  }
  Mat<S> a = x;
  std::size_t offset = 0;
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<Eigen::Index>(spec.layer_in(l));
    const auto out = static_cast<Eigen::Index>(spec.layer_out(l));
    Eigen::Map<const Mat<S>> w(params.data() + offset, out, in);
    offset += static_cast<std::size_t>(out * in);
    Eigen::Map<const Vec<S>> bias(params.data() + offset, out);
    offset += static_cast<std::size_t>(out);

    Mat<S> z = detail::product(w, a);
    z.colwise() += bias;
    if (l + 1 < layers) {
      z = z.unaryExpr([](const S& v) {
        using std::tanh;
        return tanh(v);
      });
    }
    a = std::move(z);
    if (trace) trace->acts.push_back(a);
  }
  return a;
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
template <class S>
void backward_batch(const MlpSpec& spec, std::span<const S> params, const MlpTrace<S>& trace,
                    const Mat<S>& d_out, std::span<S> grad) {
  detail::check_params(spec, params.size());
  detail::check_params(spec, grad.size());
  const std::size_t layers = spec.num_layers();
  if (trace.acts.size() != layers + 1) {
    throw std::invalid_argument("mlp: trace does not match spec");
  }
  if (d_out.rows() != trace.acts.back().rows() || d_out.cols() != trace.acts.back().cols()) {
    throw std::invalid_argument("mlp: output gradient shape mismatch");
  }

  std::vector<std::size_t> offsets(layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += spec.layer_out(l) * spec.layer_in(l) + spec.layer_out(l);
  }

  Mat<S> g = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(spec.layer_in(l));
    const auto out = static_cast<Eigen::Index>(spec.layer_out(l));
    const Mat<S>& a_in = trace.acts[l];
    Eigen::Map<const Mat<S>> w(params.data() + offsets[l], out, in);
    Eigen::Map<Mat<S>> gw(grad.data() + offsets[l], out, in);
    Eigen::Map<Vec<S>> gb(grad.data() + offsets[l] + static_cast<std::size_t>(out * in), out);

    gw += detail::product(g, a_in.transpose());
    gb += g.rowwise().sum();
    if (l > 0) {
      Mat<S> da = detail::product(w.transpose(), g);
      // tanh'(z) = 1 - tanh(z)^2, with tanh(z) = a_in
      g = da.cwiseProduct(a_in.unaryExpr([](const S& t) { return S(1.0) - t * t; }));
    }
  }
}

/// Single-sample forward pass in double precision.
Eigen::VectorXd mlp_forward(const MlpSpec& spec, const FlatParams& params,
                            const Eigen::VectorXd& input);

/// Orthogonal init (gain sqrt(2)) on hidden layers, `output_gain` on the last
/// layer, zero biases.
FlatParams init_params(const MlpSpec& spec, std::mt19937_64& rng, double output_gain);

}  // namespace safechain::nn
