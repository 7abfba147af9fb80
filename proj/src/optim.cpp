#include "mnmt/optim.hpp"

#include <cmath>

#include "mnmt/common.hpp"

namespace mnmt::num {

AdaDelta::AdaDelta(const ParameterSet& params, double rho, double epsilon) : rho_(rho), epsilon_(epsilon) {
  if (!(rho > 0.0 && rho < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "AdaDelta needs rho in (0,1) and epsilon > 0");
  }
  for (const auto& p : params) {
    eg2_.emplace_back(p.value.shape());
    edx2_.emplace_back(p.value.shape());
  }
}

void AdaDelta::step(ParameterSet& params, const Gradients& grads) {
  if (params.size() != eg2_.size() || grads.size() != eg2_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "AdaDelta state does not match parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& x = params[i].value;
    const Tensor& g = grads[i];
    if (!x.same_shape(g) || !x.same_shape(eg2_[i])) {
      throw Error(ErrorCode::ShapeMismatch, "AdaDelta shape mismatch on '" + params[i].name + "'");
    }
    double* eg2 = eg2_[i].data();
    double* edx2 = edx2_[i].data();
    for (std::size_t k = 0; k < x.size(); ++k) {
      eg2[k] = rho_ * eg2[k] + (1.0 - rho_) * g[k] * g[k];
      const double dx = -(std::sqrt(edx2[k] + epsilon_) / std::sqrt(eg2[k] + epsilon_)) * g[k];
      edx2[k] = rho_ * edx2[k] + (1.0 - rho_) * dx * dx;
      x[k] += dx;
    }
  }
}

}  // namespace mnmt::num
