#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spatialgen/tape.hpp"
#include "spatialgen/tensor.hpp"

namespace spatialgen::ad {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Builds a scalar on `tape` from leaves bound to the given parameter blocks.
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct BlockReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  bool passed = true;
};

struct FiniteDiffReport {
  std::vector<BlockReport> blocks;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Relative error with denominator max(|a|, |b|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `f` against central differences
/// (f(p + h) - f(p - h)) / 2h, entry by entry. Failures are reported, not thrown.
FiniteDiffReport finite_diff_check(const TapeFunction& f, std::span<const NamedTensor> params,
                                   double h, double tol);

}  // namespace spatialgen::ad
