#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spatialgen/tensor.hpp"

namespace spatialgen {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates, one tensor per parameter, plus step count.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of `params` in place. Moments are lazily
/// sized on the first call.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamOptions& options);

}  // namespace spatialgen
