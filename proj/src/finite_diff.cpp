#include "spatialgen/finite_diff.hpp"

#include <algorithm>
#include <cmath>

namespace spatialgen::ad {
namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& values) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (const Tensor& v : values) vars.push_back(tape.leaf(v));
  return f(tape, vars).value().item();
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

FiniteDiffReport finite_diff_check(const TapeFunction& f, std::span<const NamedTensor> params,
                                   double h, double tol) {
  std::vector<Tensor> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.value);

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& v : values) vars.push_back(tape.leaf(v));
    const Var loss = f(tape, vars);
    const Gradients grads = tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(grads[v]);
  }

  FiniteDiffReport report;
  for (std::size_t b = 0; b < values.size(); ++b) {
    BlockReport block{params[b].name};
    for (std::size_t i = 0; i < values[b].size(); ++i) {
      const double original = values[b][i];
      values[b][i] = original + h;
      const double up = evaluate(f, values);
      values[b][i] = original - h;
      const double down = evaluate(f, values);
      values[b][i] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[b][i], numeric);
      if (err > block.max_rel_error || i == 0) {
        block.max_rel_error = err;
        block.worst_index = i;
        block.analytic = analytic[b][i];
        block.numeric = numeric;
      }
    }
    block.passed = block.max_rel_error < tol;
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    report.passed = report.passed && block.passed;
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace spatialgen::ad
