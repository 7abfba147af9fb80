#pragma once

#include <vector>

#include "mnmt/tape.hpp"

namespace mnmt::num {

// Zeiler's AdaDelta with per-element running averages of g^2 and dx^2.
class AdaDelta {
 public:
  AdaDelta(const ParameterSet& params, double rho = 0.95, double epsilon = 1e-6);

  void step(ParameterSet& params, const Gradients& grads);

  double rho() const noexcept { return rho_; }
  double epsilon() const noexcept { return epsilon_; }
  const std::vector<Tensor>& mean_sq_grad() const noexcept { return eg2_; }
  const std::vector<Tensor>& mean_sq_delta() const noexcept { return edx2_; }

 private:
  double rho_;
  double epsilon_;
  std::vector<Tensor> eg2_;
  std::vector<Tensor> edx2_;
};

}  // namespace mnmt::num
