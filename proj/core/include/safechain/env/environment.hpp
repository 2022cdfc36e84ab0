#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include <Eigen/Core>

namespace safechain::env {

struct Transition {
  Eigen::VectorXd observation;
  double reward = 0.0;      // training signal
  double raw_reward = 0.0;  // reward of the underlying task, before any wrapper shaping
  double cost = 0.0;
  bool done = false;
};

/// Episodic control task seen by the learner. Actions live in the policy's
/// normalized box; each implementation maps them to its own units.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t horizon() const = 0;

  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual Transition step(std::span<const double> action) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace safechain::env
