// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Post-training probability calibration: one temperature per task, fitted by
// NLL over held-out logits, plus expected calibration error and reliability
// diagram data. Temperature scaling is strictly monotone in the logit, so
// ranking metrics are unchanged by construction.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "camoe/graph.hpp"
#include "camoe/losses.hpp"
#include "camoe/model.hpp"

namespace camoe {

// P(y=1|z) = sigmoid(z / T).
inline double apply_temperature(double logit, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("apply_temperature: T must be > 0, got " +
                                std::to_string(temperature));
  }
  return ValueGraph::stable_sigmoid(logit / temperature);
}

struct CalibrationHead {
  std::string task_name;
  double temperature = 1.0;
  std::size_t iterations = 0;  // objective evaluations during the fit
  double final_nll = 0.0;
};

enum class BinScheme { EqualWidth, EqualMass };

inline std::string bin_scheme_name(BinScheme s) {
  return s == BinScheme::EqualWidth ? "equal-width" : "equal-mass";
}

struct ReliabilityBins {
  BinScheme scheme = BinScheme::EqualMass;
  struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double empirical_ctr = 0.0;  // mean label, the accuracy of the probability
  };
  std::vector<Bin> bins;

  std::size_t total() const {
    std::size_t n = 0;
    for (const Bin& b : bins) n += b.count;
    return n;
  }
};

struct EceResult {
  double value = 0.0;
  ReliabilityBins bins;
};

// ECE = sum_m (|B_m|/n) |acc(B_m) - conf(B_m)|; empty bins contribute zero.
inline EceResult ece(const std::vector<double>& probabilities, const std::vector<int>& labels,
                     BinScheme scheme = BinScheme::EqualMass, std::size_t num_bins = 15) {
  const std::size_t n = probabilities.size();
  if (n == 0 || labels.size() != n) {
    throw std::invalid_argument("ece: need matching non-empty probabilities and labels");
  }
  if (num_bins == 0) throw std::invalid_argument("ece: need at least one bin");

  ReliabilityBins rb;
  rb.scheme = scheme;
  std::vector<std::vector<std::size_t>> members(num_bins);
  if (scheme == BinScheme::EqualWidth) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = probabilities[i];
      std::size_t b = static_cast<std::size_t>(p * static_cast<double>(num_bins));
      if (b >= num_bins) b = num_bins - 1;
      members[b].push_back(i);
    }
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return probabilities[a] < probabilities[b]; });
    const std::size_t base = n / num_bins, extra = n % num_bins;
    std::size_t pos = 0, nominal_end = 0;
    for (std::size_t b = 0; b < num_bins; ++b) {
      nominal_end += base + (b < extra ? 1 : 0);
      std::size_t end = std::max(nominal_end, pos);
      // A bin boundary never splits tied predictions.
      while (end > pos && end < n && probabilities[idx[end]] == probabilities[idx[end - 1]]) ++end;
      for (; pos < end; ++pos) members[b].push_back(idx[pos]);
    }
  }

  double total = 0.0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    ReliabilityBins::Bin bin;
    if (scheme == BinScheme::EqualWidth) {
      bin.lo = static_cast<double>(b) / static_cast<double>(num_bins);
      bin.hi = static_cast<double>(b + 1) / static_cast<double>(num_bins);
    }
    bin.count = members[b].size();
    if (!members[b].empty()) {
      double conf = 0.0, acc = 0.0, lo = 1.0, hi = 0.0;
      for (std::size_t i : members[b]) {
        conf += probabilities[i];
        acc += labels[i];
        lo = std::min(lo, probabilities[i]);
        hi = std::max(hi, probabilities[i]);
      }
      bin.mean_confidence = conf / static_cast<double>(bin.count);
      bin.empirical_ctr = acc / static_cast<double>(bin.count);
      if (scheme == BinScheme::EqualMass) {
        bin.lo = lo;
        bin.hi = hi;
      }
      total += (static_cast<double>(bin.count) / static_cast<double>(n)) *
               std::abs(bin.empirical_ctr - bin.mean_confidence);
    }
    rb.bins.push_back(bin);
  }
  return {total, rb};
}

// NLL of temperature-scaled logits, mean per example.
inline double temperature_nll(const std::vector<double>& logits, const std::vector<int>& labels,
                              double temperature) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += bce_from_logit(logits[i] / temperature, static_cast<double>(labels[i]));
  }
  return total / static_cast<double>(logits.size());
}

// Fit T > 0 minimizing NLL: coarse log-space grid bracket, then golden-section
// refinement. Deterministic; requires both classes present.
inline CalibrationHead fit_temperature(const std::vector<double>& logits,
                                       const std::vector<int>& labels,
                                       const std::string& task_name = "") {
  const std::size_t n = logits.size();
  if (n == 0 || labels.size() != n) {
    throw std::invalid_argument("fit_temperature: need matching non-empty logits and labels");
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) (y ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("fit_temperature: labels are single-class" +
                                (task_name.empty() ? std::string{} : " for task " + task_name));
  }
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("fit_temperature: non-finite logit");
  }

  CalibrationHead head;
  head.task_name = task_name;

  const double lo_log = -5.0, hi_log = 5.0;
  const std::size_t grid_points = 81;
  double best_log = 0.0, best_nll = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double lg =
        lo_log + (hi_log - lo_log) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double nll = temperature_nll(logits, labels, std::exp(lg));
    ++head.iterations;
    if (nll < best_nll) {
      best_nll = nll;
      best_log = lg;
      best_i = i;
    }
  }

  // Golden-section refinement on the bracketing interval in log space.
  const double step = (hi_log - lo_log) / static_cast<double>(grid_points - 1);
  double a = best_log - step, b = best_log + step;
  (void)best_i;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = temperature_nll(logits, labels, std::exp(c));
  double fd = temperature_nll(logits, labels, std::exp(d));
  head.iterations += 2;
  while (b - a > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = temperature_nll(logits, labels, std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = temperature_nll(logits, labels, std::exp(d));
    }
    ++head.iterations;
  }
  const double refined_log = (a + b) / 2.0;
  const double refined_nll = temperature_nll(logits, labels, std::exp(refined_log));
  if (refined_nll <= best_nll) {
    head.temperature = std::exp(refined_log);
    head.final_nll = refined_nll;
  } else {
    head.temperature = std::exp(best_log);
    head.final_nll = best_nll;
  }
  return head;
}

// Fit one temperature per task on the validation examples owned by that task
// and store it on the model. Validation must be disjoint from training data;
// that is the caller's contract.
inline std::vector<CalibrationHead> calibrate_model(CamoeModel& model, const Dataset& validation) {
  if (validation.empty()) throw std::invalid_argument("calibrate_model: empty validation set");
  auto preds = model.predict(validation, nullptr, /*with_temperature=*/false);
  std::vector<CalibrationHead> heads;
  for (std::size_t t = 0; t < model.num_tasks(); ++t) {
    const std::string& name = model.grouping().tasks[t].name;
    std::vector<double> logits;
    std::vector<int> labels;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      if (model.grouping().task_of(validation.impressions[i].slot) != t) continue;
      logits.push_back(preds.logits[t][i]);
      labels.push_back(validation.impressions[i].label);
    }
    if (logits.empty()) {
      throw std::invalid_argument("calibrate_model: no validation examples for task " + name);
    }
    CalibrationHead head = fit_temperature(logits, labels, name);
    model.set_temperature(t, head.temperature);
    heads.push_back(std::move(head));
  }
  return heads;
}

// Reliability diagram export: 20 equal-mass bins per task.
inline void save_reliability_csv(const std::vector<double>& probabilities,
                                 const std::vector<int>& labels, const std::string& path,
                                 std::size_t num_bins = 20) {
  EceResult r = ece(probabilities, labels, BinScheme::EqualMass, num_bins);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_reliability_csv: cannot open " + path);
  out << "bin,lo,hi,count,mean_confidence,empirical_ctr\n";
  for (std::size_t b = 0; b < r.bins.bins.size(); ++b) {
    const auto& bin = r.bins.bins[b];
    out << b << ',' << format_real(bin.lo) << ',' << format_real(bin.hi) << ',' << bin.count << ','
        << format_real(bin.mean_confidence) << ',' << format_real(bin.empirical_ctr) << "\n";
  }
}

}  // namespace camoe
