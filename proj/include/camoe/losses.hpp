// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives and the training loop. The central objective is the
// adaptively-masked multi-task BCE: every example carries a task tag derived
// from its slot, and each task's loss term sees only its own examples, so the
// dominant modality cannot push the other task's tower around. Losses are
// computed from logits in log-sum-exp stable form.

#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoe/datagen.hpp"
#include "camoe/graph.hpp"
#include "camoe/model.hpp"
#include "camoe/rng.hpp"

namespace camoe {

enum class LossKind { Alm, Bce, Focal, WeightedBce };

inline std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Alm: return "alm";
    case LossKind::Bce: return "bce";
    case LossKind::Focal: return "focal";
    case LossKind::WeightedBce: return "weighted-bce";
  }
  throw std::logic_error("loss_kind_name: bad kind");
}

inline LossKind parse_loss_kind(const std::string& s) {
  for (LossKind k : {LossKind::Alm, LossKind::Bce, LossKind::Focal, LossKind::WeightedBce}) {
    if (loss_kind_name(k) == s) return k;
  }
  throw std::invalid_argument("unknown loss kind \"" + s + "\"");
}

struct OptimizerConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
};

struct LossConfig {
  LossKind kind = LossKind::Alm;
  std::vector<double> lambdas;  // per-task weights; empty means uniform
  double focal_gamma = 2.0;
  double focal_alpha = 1.0;
  double weight_positive = 1.0;  // class weights for weighted-bce
  double weight_negative = 1.0;
  OptimizerConfig optimizer;

  std::vector<double> lambdas_for(std::size_t num_tasks) const {
    std::vector<double> l = lambdas;
    if (l.empty()) l.assign(num_tasks, 1.0 / static_cast<double>(num_tasks));
    if (l.size() != num_tasks) {
      throw std::invalid_argument("loss: " + std::to_string(l.size()) + " lambdas for " +
                                  std::to_string(num_tasks) + " tasks");
    }
    double sum = 0.0;
    for (double v : l) {
      if (v < 0.0) throw std::invalid_argument("loss: negative lambda");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("loss: lambdas sum to " + std::to_string(sum) + ", expected 1");
    }
    return l;
  }
};

// log(1 + e^z), stable for large |z|.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Binary cross entropy of a logit against a 0/1 label.
inline double bce_from_logit(double z, double y) { return softplus(z) - z * y; }

inline constexpr double kProbClamp = 1e-12;

// -- fused loss nodes ---------------------------------------------------------

// sum_i w_i * bce(z_i, y_i) over a [n,1] (or [n]) logit column. Labels and
// weights are constants; d/dz_i = w_i * (sigmoid(z_i) - y_i).
inline Value bce_logits_weighted_sum(ValueGraph& g, Value logits, std::vector<double> labels,
                                     std::vector<double> weights) {
  const Tensor& z = g.value(logits);
  if (z.size() != labels.size() || z.size() != weights.size()) {
    throw std::invalid_argument("bce: logits/labels/weights length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += weights[i] * bce_from_logit(z[i], labels[i]);
  return g.record(
      "bce_logits", Tensor::scalar(total), {logits},
      [logits, labels = std::move(labels), weights = std::move(weights)](ValueGraph& gr,
                                                                         std::size_t self) {
        const double go = gr.grad_slot(self).item();
        const Tensor& z = gr.value(logits);
        Tensor& dz = gr.grad_slot(logits.idx);
        for (std::size_t i = 0; i < z.size(); ++i) {
          dz[i] += go * weights[i] * (ValueGraph::stable_sigmoid(z[i]) - labels[i]);
        }
      });
}

// sum_i w_i * (-alpha * (1 - p_t)^gamma * log p_t) on probability inputs,
// p_t the probability assigned to the true class. Probabilities are clamped
// to [kProbClamp, 1-kProbClamp] at entry; the clamp saturates the gradient.
inline Value focal_weighted_sum(ValueGraph& g, Value probs, std::vector<double> labels,
                                std::vector<double> weights, double gamma, double alpha) {
  if (gamma < 0.0) throw std::invalid_argument("focal: gamma must be >= 0");
  const Tensor& p = g.value(probs);
  if (p.size() != labels.size() || p.size() != weights.size()) {
    throw std::invalid_argument("focal: probs/labels/weights length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::min(std::max(p[i], kProbClamp), 1.0 - kProbClamp);
    const double pt = labels[i] > 0.5 ? pc : 1.0 - pc;
    total += weights[i] * (-alpha * std::pow(1.0 - pt, gamma) * std::log(pt));
  }
  return g.record(
      "focal", Tensor::scalar(total), {probs},
      [probs, labels = std::move(labels), weights = std::move(weights), gamma,
       alpha](ValueGraph& gr, std::size_t self) {
        const double go = gr.grad_slot(self).item();
        const Tensor& p = gr.value(probs);
        Tensor& dp = gr.grad_slot(probs.idx);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] <= kProbClamp || p[i] >= 1.0 - kProbClamp) continue;  // saturated
          const bool pos = labels[i] > 0.5;
          const double pt = pos ? p[i] : 1.0 - p[i];
          // d/dpt of -alpha (1-pt)^gamma log pt
          double d = -alpha * std::pow(1.0 - pt, gamma) / pt;
          if (gamma > 0.0) d += alpha * gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
          dp[i] += go * weights[i] * (pos ? d : -d);
        }
      });
}

// mean_i of the focal term with unit weights; the probability-space entry
// point: focal with gamma = 0, alpha = 1 reduces to plain cross entropy.
inline Value focal_loss(ValueGraph& g, Value probs, const std::vector<double>& labels,
                        double gamma, double alpha) {
  const std::size_t n = g.value(probs).size();
  Value s = focal_weighted_sum(g, probs, labels, std::vector<double>(n, 1.0), gamma, alpha);
  return g.scale(s, 1.0 / static_cast<double>(n));
}

// -- multi-task objectives ----------------------------------------------------

// Adaptive loss masking: L = (1/N) sum_i sum_m lambda_m 1{task(i)=m} bce_i(m).
// Each example contributes to exactly one task's term. example_task[i] is the
// task index owning example i's slot. Lambda normalization is the caller's
// contract, not re-checked here.
inline Value alm_loss(ValueGraph& g, const std::vector<Value>& task_logits,
                      const std::vector<double>& labels,
                      const std::vector<std::size_t>& example_task,
                      const std::vector<double>& lambdas) {
  const std::size_t n = labels.size();
  if (example_task.size() != n) throw std::invalid_argument("alm_loss: task tags != labels");
  if (task_logits.size() != lambdas.size()) {
    throw std::invalid_argument("alm_loss: logits/lambdas count mismatch");
  }
  for (std::size_t t : example_task) {
    if (t >= task_logits.size()) {
      throw std::invalid_argument("alm_loss: example mapped to task " + std::to_string(t) +
                                  " outside the grouping");
    }
  }
  Value total;
  for (std::size_t m = 0; m < task_logits.size(); ++m) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (example_task[i] == m) w[i] = lambdas[m];
    }
    Value term = bce_logits_weighted_sum(g, task_logits[m], labels, std::move(w));
    total = m == 0 ? term : g.add(total, term);
  }
  return g.scale(total, 1.0 / static_cast<double>(n));
}

// The no-masking ablation arm: every example's label feeds every head.
inline Value unmasked_mtl_loss(ValueGraph& g, const std::vector<Value>& task_logits,
                               const std::vector<double>& labels,
                               const std::vector<double>& lambdas) {
  const std::size_t n = labels.size();
  if (task_logits.size() != lambdas.size()) {
    throw std::invalid_argument("unmasked_mtl_loss: logits/lambdas count mismatch");
  }
  Value total;
  for (std::size_t m = 0; m < task_logits.size(); ++m) {
    Value term =
        bce_logits_weighted_sum(g, task_logits[m], labels, std::vector<double>(n, lambdas[m]));
    total = m == 0 ? term : g.add(total, term);
  }
  return g.scale(total, 1.0 / static_cast<double>(n));
}

// Configured objective over one forward pass. Masked variants (alm, focal,
// weighted-bce) apply the task indicator; plain bce is the unmasked arm.
inline Value batch_objective(ValueGraph& g, const std::vector<Value>& task_logits,
                             const std::vector<double>& labels,
                             const std::vector<std::size_t>& example_task, const LossConfig& cfg,
                             const std::vector<double>& lambdas) {
  const std::size_t n = labels.size();
  switch (cfg.kind) {
    case LossKind::Alm:
      return alm_loss(g, task_logits, labels, example_task, lambdas);
    case LossKind::Bce:
      return unmasked_mtl_loss(g, task_logits, labels, lambdas);
    case LossKind::WeightedBce: {
      Value total;
      for (std::size_t m = 0; m < task_logits.size(); ++m) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (example_task[i] == m) {
            w[i] = lambdas[m] * (labels[i] > 0.5 ? cfg.weight_positive : cfg.weight_negative);
          }
        }
        Value term = bce_logits_weighted_sum(g, task_logits[m], labels, std::move(w));
        total = m == 0 ? term : g.add(total, term);
      }
      return g.scale(total, 1.0 / static_cast<double>(n));
    }
    case LossKind::Focal: {
      Value total;
      for (std::size_t m = 0; m < task_logits.size(); ++m) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (example_task[i] == m) w[i] = lambdas[m];
        }
        Value term = focal_weighted_sum(g, g.sigmoid(task_logits[m]), labels, std::move(w),
                                        cfg.focal_gamma, cfg.focal_alpha);
        total = m == 0 ? term : g.add(total, term);
      }
      return g.scale(total, 1.0 / static_cast<double>(n));
    }
  }
  throw std::logic_error("batch_objective: bad loss kind");
}

// Scalar (no-graph) evaluation of the configured objective; used for
// validation scoring and reporting.
inline double objective_value(const std::vector<std::vector<double>>& task_logits,
                              const std::vector<double>& labels,
                              const std::vector<std::size_t>& example_task, const LossConfig& cfg,
                              const std::vector<double>& lambdas) {
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t m = 0; m < task_logits.size(); ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      double w = lambdas[m];
      switch (cfg.kind) {
        case LossKind::Bce:
          break;
        case LossKind::Alm:
          if (example_task[i] != m) w = 0.0;
          break;
        case LossKind::WeightedBce:
          w = example_task[i] == m
                  ? w * (labels[i] > 0.5 ? cfg.weight_positive : cfg.weight_negative)
                  : 0.0;
          break;
        case LossKind::Focal:
          if (example_task[i] != m) w = 0.0;
          break;
      }
      if (w == 0.0) continue;
      if (cfg.kind == LossKind::Focal) {
        const double p = ValueGraph::stable_sigmoid(task_logits[m][i]);
        const double pc = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
        const double pt = labels[i] > 0.5 ? pc : 1.0 - pc;
        total += w * (-cfg.focal_alpha * std::pow(1.0 - pt, cfg.focal_gamma) * std::log(pt));
      } else {
        total += w * bce_from_logit(task_logits[m][i], labels[i]);
      }
    }
  }
  return total / static_cast<double>(n);
}

// -- optimizer ----------------------------------------------------------------

// Adaptive moment estimation with bias correction.
class Adam {
public:
  explicit Adam(const std::vector<Parameter*>& params, double learning_rate)
      : lr_(learning_rate) {
    for (Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step(const std::vector<Parameter*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = *params[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.gradient[i];
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
        p.value[i] -= lr_ * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + eps_);
      }
    }
  }

private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// -- training loop ------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  std::vector<double> train_loss;  // per task, mean BCE over the examples the task trains on
  std::vector<double> val_loss;
  double objective = 0.0;      // configured training objective, running mean
  double val_objective = 0.0;  // configured objective on the validation set
};

struct TrainReport {
  std::vector<std::string> task_names;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double wall_seconds = 0.0;

  // One epoch per line.
  void to_jsonl(std::ostream& out) const {
    for (const EpochStats& e : epochs) {
      nlohmann::json j;
      j["epoch"] = e.epoch;
      nlohmann::json tr, va;
      for (std::size_t t = 0; t < task_names.size(); ++t) {
        tr[task_names[t]] = e.train_loss[t];
        va[task_names[t]] = e.val_loss[t];
      }
      j["train"] = tr;
      j["validation"] = va;
      j["objective"] = e.objective;
      j["validation_objective"] = e.val_objective;
      out << j.dump() << "\n";
    }
  }
};

namespace detail {

struct TaskLossAccum {
  std::vector<double> sum;
  std::vector<std::size_t> count;

  explicit TaskLossAccum(std::size_t tasks) : sum(tasks, 0.0), count(tasks, 0) {}

  void add(std::size_t task, double bce) {
    sum[task] += bce;
    count[task]++;
  }

  std::vector<double> means() const {
    std::vector<double> out(sum.size(), 0.0);
    for (std::size_t t = 0; t < sum.size(); ++t) {
      if (count[t] > 0) out[t] = sum[t] / static_cast<double>(count[t]);
    }
    return out;
  }
};

// Per-task mean BCE on a dataset, masked by task ownership unless the loss is
// the unmasked kind. Also returns the configured objective value.
inline std::pair<std::vector<double>, double> dataset_losses(CamoeModel& model, const Dataset& d,
                                                             const LossConfig& cfg,
                                                             const std::vector<double>& lambdas) {
  auto preds = model.predict(d, nullptr, /*with_temperature=*/false);
  const std::size_t tasks = model.num_tasks();
  std::vector<double> labels(d.size());
  std::vector<std::size_t> task_of(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    labels[i] = d.impressions[i].label;
    task_of[i] = model.grouping().task_of(d.impressions[i].slot);
  }
  TaskLossAccum acc(tasks);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (cfg.kind == LossKind::Bce) {
      for (std::size_t m = 0; m < tasks; ++m) acc.add(m, bce_from_logit(preds.logits[m][i], labels[i]));
    } else {
      acc.add(task_of[i], bce_from_logit(preds.logits[task_of[i]][i], labels[i]));
    }
  }
  const double obj = objective_value(preds.logits, labels, task_of, cfg, lambdas);
  return {acc.means(), obj};
}

}  // namespace detail

// Mini-batch Adam training with early stopping on the validation objective.
// Deterministic for a fixed optimizer seed: batch order is drawn from one
// seeded stream across epochs. When no validation set is supplied, a
// stratified 10% of the training data is carved off for it. The parameters
// of the best validation epoch are restored on return.
inline TrainReport train(CamoeModel& model, const Dataset& dataset, const LossConfig& cfg,
                         const Dataset* validation = nullptr) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<double> lambdas = cfg.lambdas_for(model.num_tasks());

  Dataset fit_local, val_local;
  const Dataset* fit = &dataset;
  const Dataset* val = validation;
  if (val == nullptr) {
    auto parts = split(dataset, 0.9, detail::mix_seed(cfg.optimizer.seed, 7));
    fit_local = std::move(parts.first);
    val_local = std::move(parts.second);
    fit = &fit_local;
    val = &val_local;
  }

  TrainReport report;
  for (const auto& t : model.grouping().tasks) report.task_names.push_back(t.name);
  if (cfg.optimizer.max_epochs == 0) return report;

  // Per-example tags and labels for the fit set.
  const std::size_t n = fit->size();
  std::vector<double> labels(n);
  std::vector<std::size_t> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = fit->impressions[i].label;
    tags[i] = model.grouping().task_of(fit->impressions[i].slot);
  }

  std::vector<Parameter*> params = model.parameters();
  Adam adam(params, cfg.optimizer.learning_rate);
  Rng order_rng(detail::mix_seed(cfg.optimizer.seed, 8));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  Tensor best_rm, best_rv;
  std::size_t epochs_since_best = 0;

  const std::size_t bs = std::max<std::size_t>(1, cfg.optimizer.batch_size);
  for (std::size_t epoch = 1; epoch <= cfg.optimizer.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    detail::TaskLossAccum train_acc(model.num_tasks());
    double obj_sum = 0.0;
    std::size_t obj_batches = 0;

    const std::size_t fdim = model.hyper().feature_dim;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      const std::size_t b = stop - start;
      if (b < 2) continue;  // train-mode batchnorm needs two rows
      Tensor x({b, fdim});
      std::vector<double> yb(b);
      std::vector<std::size_t> tb(b);
      for (std::size_t i = 0; i < b; ++i) {
        const Impression& imp = fit->impressions[order[start + i]];
        if (imp.features.size() != fdim) {
          throw std::invalid_argument("train: impression feature dim " +
                                      std::to_string(imp.features.size()) + " != model dim " +
                                      std::to_string(fdim));
        }
        for (std::size_t j = 0; j < fdim; ++j) x.at(i, j) = imp.features[j];
        yb[i] = imp.label;
        tb[i] = tags[order[start + i]];
      }
      try {
        ValueGraph g;
        std::vector<Value> logits = model.forward(g, x, /*training=*/true);
        Value loss = batch_objective(g, logits, yb, tb, cfg, lambdas);
        const double loss_value = g.value(loss).item();
        if (!std::isfinite(loss_value)) throw std::runtime_error("non-finite loss");
        g.backward(loss);
        adam.step(params);
        obj_sum += loss_value;
        ++obj_batches;
        for (std::size_t m = 0; m < model.num_tasks(); ++m) {
          const Tensor& z = g.value(logits[m]);
          for (std::size_t i = 0; i < b; ++i) {
            if (cfg.kind == LossKind::Bce || tb[i] == m) {
              train_acc.add(m, bce_from_logit(z[i], yb[i]));
            }
          }
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("train: epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(start / bs) + ": " + e.what());
      }
    }

    auto [val_means, val_obj] = detail::dataset_losses(model, *val, cfg, lambdas);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_acc.means();
    stats.val_loss = val_means;
    stats.objective = obj_batches ? obj_sum / static_cast<double>(obj_batches) : 0.0;
    stats.val_objective = val_obj;
    report.epochs.push_back(stats);

    if (val_obj < best_val) {
      best_val = val_obj;
      report.best_epoch = epoch;
      epochs_since_best = 0;
      best_params.clear();
      for (Parameter* p : params) best_params.push_back(p->value);
      best_rm = model.bn_state().running_mean;
      best_rv = model.bn_state().running_var;
    } else if (++epochs_since_best >= cfg.optimizer.patience) {
      break;
    }
  }

  if (!best_params.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_params[k];
    model.bn_state().running_mean = best_rm;
    model.bn_state().running_var = best_rv;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace camoe
