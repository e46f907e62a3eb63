#include "spatialgen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spatialgen/error.hpp"

namespace spatialgen::ad {
namespace {

constexpr double kProbClamp = 1e-7;

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw Error(ErrorCode::ShapeMismatch, "operands recorded on different tapes");
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": incompatible shapes " +
                                            a.shape_string() + " and " + b.shape_string());
}

}  // namespace

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<VarId> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::NonFiniteResult,
                "non-finite value produced by node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape_ != this || loss.id() >= nodes_.size()) {
    throw Error(ErrorCode::DisconnectedLoss, "loss is not recorded on this tape");
  }
  const Tensor& loss_value = nodes_[loss.id()].value;
  if (loss_value.size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward needs a scalar loss, got " +
                                              loss_value.shape_string());
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  std::vector<bool> touched(nodes_.size(), false);
  auto ensure = [&](VarId id) -> Tensor& {
    if (!touched[id]) {
      const Tensor& v = nodes_[id].value;
      out.grads_[id] = Tensor(v.rows(), v.cols(), 0.0);
      touched[id] = true;
    }
    return out.grads_[id];
  };
  ensure(loss.id())[0] = 1.0;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!touched[i] || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (VarId in : node.inputs) {
      in_values.push_back(&nodes_[in].value);
      in_grads.push_back(&ensure(in));
    }
    node.backward(BackwardContext{in_values, node.value, out.grads_[i], in_grads});
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) ensure(i);
  return out;
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  const std::size_t n = x.rows(), m = x.cols(), p = y.cols();
  Tensor out(n, p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < m; ++t) {
      const double xv = x(i, t);
      for (std::size_t j = 0; j < p; ++j) out(i, j) += xv * y(t, j);
    }
  }
  return a.tape().record(std::move(out), {a.id(), b.id()}, [](const BackwardContext& c) {
    const Tensor& x = *c.inputs[0];
    const Tensor& y = *c.inputs[1];
    const Tensor& g = c.output_grad;
    Tensor& gx = *c.input_grads[0];
    Tensor& gy = *c.input_grads[1];
    const std::size_t n = x.rows(), m = x.cols(), p = y.cols();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < m; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) acc += g(i, j) * y(t, j);
        gx(i, t) += acc;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < m; ++t) {
        const double xv = x(i, t);
        for (std::size_t j = 0; j < p; ++j) gy(t, j) += xv * g(i, j);
      }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool broadcast = !x.same_shape(y);
  if (broadcast && !(y.rows() == 1 && y.cols() == x.cols())) shape_error("add", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += broadcast ? y(0, j) : y(i, j);
  }
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [broadcast](const BackwardContext& c) {
                           const Tensor& g = c.output_grad;
                           Tensor& ga = *c.input_grads[0];
                           Tensor& gb = *c.input_grads[1];
                           for (std::size_t i = 0; i < g.rows(); ++i) {
                             for (std::size_t j = 0; j < g.cols(); ++j) {
                               ga(i, j) += g(i, j);
                               if (broadcast) {
                                 gb(0, j) += g(i, j);
                               } else {
                                 gb(i, j) += g(i, j);
                               }
                             }
                           }
                         });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_error("sub", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape().record(std::move(out), {a.id(), b.id()}, [](const BackwardContext& c) {
    const Tensor& g = c.output_grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      (*c.input_grads[0])[i] += g[i];
      (*c.input_grads[1])[i] -= g[i];
    }
  });
}

Var concat(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows()) shape_error("concat", x, y);
  const std::size_t cx = x.cols(), cy = y.cols();
  Tensor out(x.rows(), cx + cy);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < cx; ++j) out(i, j) = x(i, j);
    for (std::size_t j = 0; j < cy; ++j) out(i, cx + j) = y(i, j);
  }
  return a.tape().record(std::move(out), {a.id(), b.id()}, [cx, cy](const BackwardContext& c) {
    const Tensor& g = c.output_grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < cx; ++j) (*c.input_grads[0])(i, j) += g(i, j);
      for (std::size_t j = 0; j < cy; ++j) (*c.input_grads[1])(i, j) += g(i, cx + j);
    }
  });
}

Var leaky_relu(Var a, double slope) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : slope * v;
  return a.tape().record(std::move(out), {a.id()}, [slope](const BackwardContext& c) {
    const Tensor& x = *c.inputs[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      (*c.input_grads[0])[i] += c.output_grad[i] * (x[i] > 0.0 ? 1.0 : slope);
    }
  });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  if (x.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "softmax over empty rows");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row_view(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= total;
  }
  return a.tape().record(std::move(out), {a.id()}, [](const BackwardContext& c) {
    const Tensor& y = c.output;
    const Tensor& g = c.output_grad;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) {
        (*c.input_grads[0])(i, j) += y(i, j) * (g(i, j) - dot);
      }
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return a.tape().record(std::move(out), {a.id()}, [](const BackwardContext& c) {
    const Tensor& y = c.output;
    for (std::size_t i = 0; i < y.size(); ++i) {
      (*c.input_grads[0])[i] += c.output_grad[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Var sum_sq(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v * v;
  return a.tape().record(Tensor::scalar(total), {a.id()}, [](const BackwardContext& c) {
    const Tensor& x = *c.inputs[0];
    const double g = c.output_grad[0];
    for (std::size_t i = 0; i < x.size(); ++i) (*c.input_grads[0])[i] += 2.0 * x[i] * g;
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape().record(Tensor::scalar(total), {a.id()}, [](const BackwardContext& c) {
    const double g = c.output_grad[0];
    for (double& v : c.input_grads[0]->data()) v += g;
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().record(std::move(out), {a.id()}, [factor](const BackwardContext& c) {
    for (std::size_t i = 0; i < c.output_grad.size(); ++i) {
      (*c.input_grads[0])[i] += factor * c.output_grad[i];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> ids) {
  const Tensor& x = a.value();
  Tensor out(ids.size(), x.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= x.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "gather_rows: row " + std::to_string(ids[r]) +
                                                " out of range for " + x.shape_string());
    }
    std::copy_n(x.row_view(ids[r]).begin(), x.cols(), out.row_view(r).begin());
  }
  std::vector<std::size_t> index(ids.begin(), ids.end());
  return a.tape().record(std::move(out), {a.id()},
                         [index = std::move(index)](const BackwardContext& c) {
                           const Tensor& g = c.output_grad;
                           Tensor& gx = *c.input_grads[0];
                           for (std::size_t r = 0; r < index.size(); ++r) {
                             for (std::size_t j = 0; j < g.cols(); ++j) gx(index[r], j) += g(r, j);
                           }
                         });
}

Var weighted_sum(Var rows, std::span<const std::size_t> ids, Var weights) {
  require_same_tape(rows, weights);
  const Tensor& z = rows.value();
  const Tensor& w = weights.value();
  const std::size_t m = w.rows(), k = w.cols(), d = z.cols();
  if (ids.size() != m * k) {
    throw Error(ErrorCode::ShapeMismatch, "weighted_sum: " + std::to_string(ids.size()) +
                                              " ids for weights " + w.shape_string());
  }
  for (std::size_t id : ids) {
    if (id >= z.rows()) throw Error(ErrorCode::ShapeMismatch, "weighted_sum: id out of range");
  }
  Tensor out(m, d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double wt = w(i, t);
      const std::size_t src = ids[i * k + t];
      for (std::size_t j = 0; j < d; ++j) out(i, j) += wt * z(src, j);
    }
  }
  std::vector<std::size_t> index(ids.begin(), ids.end());
  return rows.tape().record(
      std::move(out), {rows.id(), weights.id()},
      [index = std::move(index)](const BackwardContext& c) {
        const Tensor& z = *c.inputs[0];
        const Tensor& w = *c.inputs[1];
        const Tensor& g = c.output_grad;
        Tensor& gz = *c.input_grads[0];
        Tensor& gw = *c.input_grads[1];
        const std::size_t m = w.rows(), k = w.cols(), d = z.cols();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t t = 0; t < k; ++t) {
            const std::size_t src = index[i * k + t];
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dot += g(i, j) * z(src, j);
              gz(src, j) += w(i, t) * g(i, j);
            }
            gw(i, t) += dot;
          }
        }
      });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw Error(ErrorCode::ShapeMismatch, "reshape " + x.shape_string() + " to (" +
                                              std::to_string(rows) + ", " +
                                              std::to_string(cols) + ")");
  }
  Tensor out(rows, cols, std::vector<double>(x.data().begin(), x.data().end()));
  return a.tape().record(std::move(out), {a.id()}, [](const BackwardContext& c) {
    for (std::size_t i = 0; i < c.output_grad.size(); ++i) {
      (*c.input_grads[0])[i] += c.output_grad[i];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "slice_cols [" + std::to_string(begin) + ", " +
                                              std::to_string(end) + ") of " + x.shape_string());
  }
  const std::size_t width = end - begin;
  Tensor out(x.rows(), width);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < width; ++j) out(i, j) = x(i, begin + j);
  }
  return a.tape().record(std::move(out), {a.id()}, [begin, width](const BackwardContext& c) {
    const Tensor& g = c.output_grad;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < width; ++j) (*c.input_grads[0])(i, begin + j) += g(i, j);
    }
  });
}

Var bce(Var prob, const Tensor& labels) {
  const Tensor& p = prob.value();
  if (!p.same_shape(labels)) shape_error("bce", p, labels);
  if (p.size() == 0) throw Error(ErrorCode::LengthMismatch, "bce over zero samples");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    total -= labels[i] * std::log(pc) + (1.0 - labels[i]) * std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  return prob.tape().record(Tensor::scalar(total / n), {prob.id()},
                            [labels, n](const BackwardContext& c) {
                              const Tensor& p = *c.inputs[0];
                              const double g = c.output_grad[0];
                              for (std::size_t i = 0; i < p.size(); ++i) {
                                if (p[i] < kProbClamp || p[i] > 1.0 - kProbClamp) continue;
                                const double d = -(labels[i] / p[i]) +
                                                 (1.0 - labels[i]) / (1.0 - p[i]);
                                (*c.input_grads[0])[i] += g * d / n;
                              }
                            });
}

Var external_scalar(Var input, double value, Tensor grad) {
  if (!grad.same_shape(input.value())) shape_error("external_scalar", input.value(), grad);
  return input.tape().record(Tensor::scalar(value), {input.id()},
                             [grad = std::move(grad)](const BackwardContext& c) {
                               const double g = c.output_grad[0];
                               for (std::size_t i = 0; i < grad.size(); ++i) {
                                 (*c.input_grads[0])[i] += g * grad[i];
                               }
                             });
}

}  // namespace spatialgen::ad
