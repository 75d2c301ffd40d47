// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation on a recorded tape (ValueGraph).
// Every primitive appends one node holding its output tensor, its input node
// indices, and a closure implementing the local derivative rule. backward()
// sweeps the tape once in reverse. Shapes follow the batch-row convention:
// example batches are [batch x dim] matrices and weight matrices are stored
// input-dim x output-dim, so a forward pass is a chain of plain matmuls.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "camoe/tensor.hpp"

namespace camoe {

class ValueGraph;

// Trainable leaf: value plus the gradient written by the last backward pass.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), gradient(value.shape()) {}
};

// Handle to a node on a ValueGraph.
struct Value {
  std::size_t idx = 0;
  ValueGraph* graph = nullptr;

  bool valid() const { return graph != nullptr; }
};

// Mutable batch-norm state owned by the model, updated by train-mode forward.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  explicit BatchNormState(std::size_t dim = 0) {
    if (dim > 0) {
      running_mean = Tensor({dim});
      running_var = Tensor::filled({dim}, 1.0);
    }
  }
};

class ValueGraph {
public:
  using BackFn = std::function<void(ValueGraph&, std::size_t)>;

  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackFn back;
    Parameter* param = nullptr;
    const char* op = "leaf";
  };

  ValueGraph() { nodes_.reserve(128); }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(Value v) const { return nodes_.at(v.idx).value; }

  // Gradient of the last backward() root with respect to node v. Zero tensor
  // if no path reached it.
  Tensor gradient(Value v) const {
    if (v.idx < grads_.size() && !grads_[v.idx].empty()) return grads_[v.idx];
    return Tensor(nodes_.at(v.idx).value.shape());
  }

  // -- leaves ---------------------------------------------------------------

  Value leaf(Tensor t) {
    check_finite("leaf", t);
    return push({std::move(t), {}, nullptr, nullptr, "leaf"});
  }

  Value constant(Tensor t) { return leaf(std::move(t)); }

  Value param(Parameter& p) {
    check_finite("param", p.value);
    Value v = push({p.value, {}, nullptr, &p, "param"});
    params_.push_back(v.idx);
    return v;
  }

  // -- primitives -----------------------------------------------------------

  // [m,k] x [k,n] -> [m,n]
  Value matmul(Value a, Value b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
      shape_error("matmul", A, B);
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n});
    matmul_accum(A.data(), B.data(), C.data(), m, k, n, false, false);
    return record("matmul", std::move(C), {a, b},
                  [m, k, n](ValueGraph& g, std::size_t self) {
                    const Node& node = g.nodes_[self];
                    const Tensor& G = g.grads_[self];
                    const Tensor& A = g.nodes_[node.inputs[0]].value;
                    const Tensor& B = g.nodes_[node.inputs[1]].value;
                    // dA = G . B^T ; dB = A^T . G
                    Tensor& dA = g.grad_slot(node.inputs[0]);
                    Tensor& dB = g.grad_slot(node.inputs[1]);
                    matmul_accum(G.data(), B.data(), dA.data(), m, n, k, false, true);
                    matmul_accum(A.data(), G.data(), dB.data(), k, m, n, true, false);
                  });
  }

  Value add(Value a, Value b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_error("add", A, B);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
    return record("add", std::move(C), {a, b}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      g.accumulate(node.inputs[0], G);
      g.accumulate(node.inputs[1], G);
    });
  }

  // [m,n] + [n] broadcast over rows. The only broadcast in the primitive set.
  Value add_row_bias(Value a, Value bias) {
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    if (A.rank() != 2 || B.rank() != 1 || A.cols() != B.size()) {
      shape_error("add_row_bias", A, B);
    }
    Tensor C = A;
    const std::size_t m = A.rows(), n = A.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += B[j];
    return record("add_row_bias", std::move(C), {a, bias},
                  [m, n](ValueGraph& g, std::size_t self) {
                    const Node& node = g.nodes_[self];
                    const Tensor& G = g.grads_[self];
                    g.accumulate(node.inputs[0], G);
                    Tensor& db = g.grad_slot(node.inputs[1]);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) db[j] += G[i * n + j];
                  });
  }

  Value hadamard(Value a, Value b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) shape_error("hadamard", A, B);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    return record("hadamard", std::move(C), {a, b}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      const Tensor& A = g.nodes_[node.inputs[0]].value;
      const Tensor& B = g.nodes_[node.inputs[1]].value;
      Tensor& dA = g.grad_slot(node.inputs[0]);
      Tensor& dB = g.grad_slot(node.inputs[1]);
      for (std::size_t i = 0; i < G.size(); ++i) {
        dA[i] += G[i] * B[i];
        dB[i] += G[i] * A[i];
      }
    });
  }

  // Multiply by a compile-time-constant scalar (expert masks, lambda weights).
  Value scale(Value a, double c) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= c;
    return record("scale", std::move(C), {a}, [c](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += c * G[i];
    });
  }

  // Row-wise scaling: [m,n] rows scaled by the [m,1] column s. Used to weight
  // expert outputs by per-example gate coefficients.
  Value row_scale(Value a, Value s) {
    const Tensor& A = value(a);
    const Tensor& S = value(s);
    if (A.rank() != 2 || S.rank() != 2 || S.cols() != 1 || S.rows() != A.rows()) {
      shape_error("row_scale", A, S);
    }
    const std::size_t m = A.rows(), n = A.cols();
    Tensor C = A;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] *= S[i];
    return record("row_scale", std::move(C), {a, s},
                  [m, n](ValueGraph& g, std::size_t self) {
                    const Node& node = g.nodes_[self];
                    const Tensor& G = g.grads_[self];
                    const Tensor& A = g.nodes_[node.inputs[0]].value;
                    const Tensor& S = g.nodes_[node.inputs[1]].value;
                    Tensor& dA = g.grad_slot(node.inputs[0]);
                    Tensor& dS = g.grad_slot(node.inputs[1]);
                    for (std::size_t i = 0; i < m; ++i) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        dA[i * n + j] += G[i * n + j] * S[i];
                        acc += G[i * n + j] * A[i * n + j];
                      }
                      dS[i] += acc;
                    }
                  });
  }

  // Column j of an [m,n] matrix as [m,1].
  Value column(Value a, std::size_t j) {
    const Tensor& A = value(a);
    if (A.rank() != 2 || j >= A.cols()) {
      throw std::invalid_argument("column: index " + std::to_string(j) +
                                  " out of range for shape " + A.shape_str());
    }
    const std::size_t m = A.rows(), n = A.cols();
    Tensor C({m, 1});
    for (std::size_t i = 0; i < m; ++i) C[i] = A[i * n + j];
    return record("column", std::move(C), {a}, [j, m, n](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < m; ++i) dA[i * n + j] += G[i];
    });
  }

  // Horizontal concatenation of [m,n_i] blocks.
  Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t m = value(parts[0]).rows();
    std::size_t total = 0;
    std::vector<std::size_t> widths;
    for (const Value& p : parts) {
      const Tensor& T = value(p);
      if (T.rank() != 2 || T.rows() != m) shape_error("concat_cols", value(parts[0]), T);
      widths.push_back(T.cols());
      total += T.cols();
    }
    Tensor C({m, total});
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const Tensor& T = value(parts[p]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < widths[p]; ++j) C[i * total + off + j] = T[i * widths[p] + j];
      off += widths[p];
    }
    return record("concat_cols", std::move(C), parts,
                  [m, total, widths](ValueGraph& g, std::size_t self) {
                    const Node& node = g.nodes_[self];
                    const Tensor& G = g.grads_[self];
                    std::size_t off = 0;
                    for (std::size_t p = 0; p < node.inputs.size(); ++p) {
                      Tensor& dP = g.grad_slot(node.inputs[p]);
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < widths[p]; ++j)
                          dP[i * widths[p] + j] += G[i * total + off + j];
                      off += widths[p];
                    }
                  });
  }

  // ReLU; subgradient at 0 taken as 0.
  Value relu(Value a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = C[i] > 0.0 ? C[i] : 0.0;
    return record("relu", std::move(C), {a}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      const Tensor& A = g.nodes_[node.inputs[0]].value;
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += A[i] > 0.0 ? G[i] : 0.0;
    });
  }

  Value sigmoid(Value a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = stable_sigmoid(C[i]);
    return record("sigmoid", std::move(C), {a}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      const Tensor& Y = g.nodes_[self].value;
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * Y[i] * (1.0 - Y[i]);
    });
  }

  // Softmax over the last axis (per row for matrices).
  Value softmax_rows(Value a) {
    const Tensor& A = value(a);
    const std::size_t m = A.rank() == 2 ? A.rows() : 1;
    const std::size_t n = A.rank() == 2 ? A.cols() : A.size();
    Tensor C = A;
    for (std::size_t i = 0; i < m; ++i) {
      double mx = C[i * n];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, C[i * n + j]);
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        C[i * n + j] = std::exp(C[i * n + j] - mx);
        sum += C[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] /= sum;
    }
    return record("softmax", std::move(C), {a}, [m, n](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      const Tensor& Y = g.nodes_[self].value;
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += G[i * n + j] * Y[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          dA[i * n + j] += Y[i * n + j] * (G[i * n + j] - dot);
      }
    });
  }

  Value log(Value a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::log(C[i]);
    return record("log", std::move(C), {a}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const Tensor& G = g.grads_[self];
      const Tensor& A = g.nodes_[node.inputs[0]].value;
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] / A[i];
    });
  }

  Value sum(Value a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    return record("sum", Tensor::scalar(s), {a}, [](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const double go = g.grads_[self][0];
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += go;
    });
  }

  Value mean(Value a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    const double inv = 1.0 / static_cast<double>(A.size());
    return record("mean", Tensor::scalar(s * inv), {a}, [inv](ValueGraph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const double go = g.grads_[self][0];
      Tensor& dA = g.grad_slot(node.inputs[0]);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += go * inv;
    });
  }

  // Batch normalization across rows, per column. Train mode normalizes by
  // batch statistics (biased variance) and folds them into the running
  // estimates; infer mode uses the running estimates only and is
  // deterministic row-by-row. gamma and beta are [n] vectors.
  Value batchnorm(Value x, Value gamma, Value beta, BatchNormState& state, bool training,
                  double momentum = 0.99, double eps = 1e-5) {
    const Tensor& X = value(x);
    const Tensor& Gm = value(gamma);
    const Tensor& Bt = value(beta);
    if (X.rank() != 2 || Gm.rank() != 1 || Gm.size() != X.cols() || !Gm.same_shape(Bt)) {
      shape_error("batchnorm", X, Gm);
    }
    const std::size_t m = X.rows(), n = X.cols();
    if (training && m < 2) {
      throw std::invalid_argument("batchnorm: train mode requires batch size >= 2, got " +
                                  std::to_string(m));
    }
    if (state.running_mean.size() != n) {
      throw std::invalid_argument("batchnorm: running stats dim " +
                                  std::to_string(state.running_mean.size()) +
                                  " does not match input " + X.shape_str());
    }

    Tensor mu({n}), var({n});
    if (training) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += X[i * n + j];
        mu[j] = s / static_cast<double>(m);
      }
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = X[i * n + j] - mu[j];
          s += d * d;
        }
        var[j] = s / static_cast<double>(m);
      }
      for (std::size_t j = 0; j < n; ++j) {
        state.running_mean[j] = momentum * state.running_mean[j] + (1.0 - momentum) * mu[j];
        state.running_var[j] = momentum * state.running_var[j] + (1.0 - momentum) * var[j];
      }
    } else {
      mu = state.running_mean;
      var = state.running_var;
    }

    Tensor invstd({n});
    for (std::size_t j = 0; j < n; ++j) invstd[j] = 1.0 / std::sqrt(var[j] + eps);

    Tensor xhat({m, n});
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double h = (X[i * n + j] - mu[j]) * invstd[j];
        xhat[i * n + j] = h;
        out[i * n + j] = Gm[j] * h + Bt[j];
      }
    }

    auto xhat_p = std::make_shared<Tensor>(std::move(xhat));
    auto invstd_p = std::make_shared<Tensor>(std::move(invstd));
    return record("batchnorm", std::move(out), {x, gamma, beta},
                  [m, n, training, xhat_p, invstd_p](ValueGraph& g, std::size_t self) {
                    const Node& node = g.nodes_[self];
                    const Tensor& G = g.grads_[self];
                    const Tensor& Gm = g.nodes_[node.inputs[1]].value;
                    const Tensor& H = *xhat_p;
                    const Tensor& IS = *invstd_p;
                    Tensor& dX = g.grad_slot(node.inputs[0]);
                    Tensor& dGm = g.grad_slot(node.inputs[1]);
                    Tensor& dBt = g.grad_slot(node.inputs[2]);
                    for (std::size_t j = 0; j < n; ++j) {
                      double sum_g = 0.0, sum_gh = 0.0;
                      for (std::size_t i = 0; i < m; ++i) {
                        sum_g += G[i * n + j];
                        sum_gh += G[i * n + j] * H[i * n + j];
                      }
                      dGm[j] += sum_gh;
                      dBt[j] += sum_g;
                      if (training) {
                        // dL/dx through batch mean and variance:
                        // dx_i = gamma*invstd/m * (m*g_i - sum(g) - h_i * sum(g*h))
                        const double c = Gm[j] * IS[j] / static_cast<double>(m);
                        for (std::size_t i = 0; i < m; ++i) {
                          dX[i * n + j] += c * (static_cast<double>(m) * G[i * n + j] - sum_g -
                                                H[i * n + j] * sum_gh);
                        }
                      } else {
                        const double c = Gm[j] * IS[j];
                        for (std::size_t i = 0; i < m; ++i) dX[i * n + j] += c * G[i * n + j];
                      }
                    }
                  });
  }

  // Append a custom primitive. Out-of-module fused ops (losses) use this.
  Value record(const char* op, Tensor out, const std::vector<Value>& inputs, BackFn back) {
    check_finite(op, out);
    Node node;
    node.value = std::move(out);
    node.op = op;
    node.back = std::move(back);
    node.inputs.reserve(inputs.size());
    for (const Value& v : inputs) {
      if (v.graph != this) {
        throw std::invalid_argument(std::string(op) + ": input from a different graph");
      }
      node.inputs.push_back(v.idx);
    }
    return push(std::move(node));
  }

  // -- backward -------------------------------------------------------------

  // Reverse sweep from a scalar root. Writes d(root)/d(p) into every
  // Parameter recorded on this graph; each node is visited exactly once.
  void backward(Value root) {
    if (root.graph != this) throw std::invalid_argument("backward: root from a different graph");
    const Tensor& r = nodes_.at(root.idx).value;
    if (r.size() != 1) {
      throw std::invalid_argument("backward: root must be scalar, got shape " + r.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor());
    grads_[root.idx] = Tensor::scalar(1.0);
    for (std::size_t i = root.idx + 1; i-- > 0;) {
      if (grads_[i].empty()) continue;  // no path from root
      const Node& node = nodes_[i];
      if (node.back) node.back(*this, i);
    }
    for (std::size_t idx : params_) {
      Parameter* p = nodes_[idx].param;
      p->gradient = grads_[idx].empty() ? Tensor(p->value.shape()) : grads_[idx];
    }
  }

  // Smallest |preactivation| seen by any relu node; used by gradient-check
  // harnesses to stay away from the kink.
  double min_abs_relu_input() const {
    double best = std::numeric_limits<double>::infinity();
    for (const Node& node : nodes_) {
      if (std::string_view(node.op) != "relu") continue;
      const Tensor& in = nodes_[node.inputs[0]].value;
      for (std::size_t i = 0; i < in.size(); ++i) best = std::min(best, std::abs(in[i]));
    }
    return best;
  }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) {
      return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  Tensor& grad_slot(std::size_t idx) {
    if (grads_[idx].empty()) grads_[idx] = Tensor(nodes_[idx].value.shape());
    return grads_[idx];
  }

  void accumulate(std::size_t idx, const Tensor& g) {
    Tensor& slot = grad_slot(idx);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
  }

private:
  Value push(Node node) {
    nodes_.push_back(std::move(node));
    return Value{nodes_.size() - 1, this};
  }

  static void check_finite(const char* op, const Tensor& t) {
    if (!t.all_finite()) {
      throw std::runtime_error(std::string(op) + ": non-finite value produced");
    }
  }

  [[noreturn]] static void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }

  // C += A.B with optional logical transposes, row-major.
  static void matmul_accum(const double* A, const double* B, double* C, std::size_t m,
                           std::size_t k, std::size_t n, bool ta, bool tb) {
    // Interpretation: result is m x n, contraction length k. When ta is set A
    // is stored k x m (use A[kk*m+i]); when tb is set B is stored n x k.
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double a = ta ? A[kk * m + i] : A[i * k + kk];
        if (a == 0.0) continue;
        if (!tb) {
          const double* brow = B + kk * n;
          double* crow = C + i * n;
          for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        } else {
          double* crow = C + i * n;
          for (std::size_t j = 0; j < n; ++j) crow[j] += a * B[j * k + kk];
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<std::size_t> params_;
};

// Central-difference gradient check. fn must return the scalar objective at a
// point and, when grad is non-null, fill the analytic gradient (same shape as
// the point). Returns max over coordinates of
// |analytic - central difference| / max(1, |analytic|).
inline double finite_diff_check(const std::function<double(const Tensor&, Tensor*)>& fn,
                                const Tensor& point, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");
  Tensor analytic(point.shape());
  fn(point, &analytic);
  Tensor x = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + epsilon;
    const double fp = fn(x, nullptr);
    x[i] = orig - epsilon;
    const double fm = fn(x, nullptr);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * epsilon);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace camoe
