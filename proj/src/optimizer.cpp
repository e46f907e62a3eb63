#include "spatialgen/optimizer.hpp"

#include <cmath>
#include <string>

#include "spatialgen/error.hpp"

namespace spatialgen {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam: " + std::to_string(params.size()) +
                                              " parameters but " + std::to_string(grads.size()) +
                                              " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->rows(), p->cols(), 0.0);
      state.v.emplace_back(p->rows(), p->cols(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam: state was built for a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !state.m[i].same_shape(grads[i])) {
      throw Error(ErrorCode::ShapeMismatch, "adam: parameter " + std::to_string(i) + " has shape " +
                                                params[i]->shape_string() + ", gradient " +
                                                grads[i].shape_string());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

}  // namespace spatialgen
