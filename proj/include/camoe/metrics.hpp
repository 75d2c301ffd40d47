// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Ranking and multi-objective evaluation: AUC-PR, per-slot report cards with
// relative change against a baseline, and Pareto-front analysis.

#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoe/calibration.hpp"
#include "camoe/datagen.hpp"
#include "camoe/model.hpp"
#include "camoe/slots.hpp"

namespace camoe {

// Area under the precision-recall curve. Thresholds are placed only at
// distinct score values, so tied positives and negatives enter together, and
// the area is a step integral over recall (no trapezoid interpolation):
//   area = sum_k (R_k - R_{k-1}) * P_k.
inline double auc_pr(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (n == 0 || labels.size() != n) {
    throw std::invalid_argument("auc_pr: need matching non-empty scores and labels");
  }
  std::size_t positives = 0;
  for (int y : labels) positives += y ? 1 : 0;
  if (positives == 0) throw std::invalid_argument("auc_pr: no positive labels");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < n) {
    const double threshold = scores[idx[i]];
    while (i < n && scores[idx[i]] == threshold) {
      (labels[idx[i]] ? tp : fp)++;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

struct SlotCell {
  std::size_t count = 0;
  std::size_t positives = 0;
  std::optional<double> auc_pr;  // absent when the slot has no positives
  std::optional<double> ece;
  std::optional<double> auc_pr_pct_change;  // vs a named baseline
  std::optional<double> ece_pct_change;
};

struct SlotReport {
  std::string name;
  std::string baseline_name;
  std::map<std::string, SlotCell> cells;  // keyed by slot name

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    if (!baseline_name.empty()) j["baseline"] = baseline_name;
    nlohmann::json slots;
    for (const auto& [slot, cell] : cells) {
      nlohmann::json c;
      c["count"] = cell.count;
      c["positives"] = cell.positives;
      if (cell.auc_pr) c["auc_pr"] = *cell.auc_pr;
      if (cell.ece) c["ece"] = *cell.ece;
      if (cell.auc_pr_pct_change) c["auc_pr_pct_change"] = *cell.auc_pr_pct_change;
      if (cell.ece_pct_change) c["ece_pct_change"] = *cell.ece_pct_change;
      slots[slot] = c;
    }
    j["slots"] = slots;
    return j;
  }

  static SlotReport from_json(const nlohmann::json& j) {
    SlotReport r;
    r.name = j.value("name", "");
    r.baseline_name = j.value("baseline", "");
    for (const auto& [slot, c] : j.at("slots").items()) {
      SlotCell cell;
      cell.count = c.at("count").get<std::size_t>();
      cell.positives = c.at("positives").get<std::size_t>();
      if (c.contains("auc_pr")) cell.auc_pr = c.at("auc_pr").get<double>();
      if (c.contains("ece")) cell.ece = c.at("ece").get<double>();
      if (c.contains("auc_pr_pct_change"))
        cell.auc_pr_pct_change = c.at("auc_pr_pct_change").get<double>();
      if (c.contains("ece_pct_change")) cell.ece_pct_change = c.at("ece_pct_change").get<double>();
      r.cells[slot] = cell;
    }
    return r;
  }
};

inline double pct_change(double value, double base) { return 100.0 * (value - base) / base; }

// Attach per-cell relative changes; both reports must cover the same slots.
inline void attach_baseline(SlotReport& report, const SlotReport& baseline) {
  if (baseline.cells.size() != report.cells.size()) {
    throw std::invalid_argument("evaluate: baseline covers different slots");
  }
  for (auto& [slot, cell] : report.cells) {
    auto it = baseline.cells.find(slot);
    if (it == baseline.cells.end()) {
      throw std::invalid_argument("evaluate: baseline missing slot " + slot);
    }
    if (cell.auc_pr && it->second.auc_pr) {
      cell.auc_pr_pct_change = pct_change(*cell.auc_pr, *it->second.auc_pr);
    }
    if (cell.ece && it->second.ece && *it->second.ece > 0.0) {
      cell.ece_pct_change = pct_change(*cell.ece, *it->second.ece);
    }
  }
}

// Per-slot AUC-PR and ECE from per-example scores aligned with the dataset.
// A slot with no positives keeps its counts but has no AUC-PR cell. When a
// baseline report is given, per-cell relative changes are attached; the two
// reports must cover the same slots.
inline SlotReport evaluate_scores(const std::vector<double>& scores, const Dataset& data,
                                  const SlotReport* baseline = nullptr,
                                  const std::string& name = "",
                                  BinScheme ece_scheme = BinScheme::EqualMass,
                                  std::size_t ece_bins = 15) {
  if (scores.size() != data.size()) {
    throw std::invalid_argument("evaluate: scores length does not match dataset");
  }
  SlotReport report;
  report.name = name;
  for (AdSlot slot : kAllSlots) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.impressions[i].slot != slot) continue;
      s.push_back(scores[i]);
      y.push_back(data.impressions[i].label);
    }
    if (s.empty()) continue;
    SlotCell cell;
    cell.count = s.size();
    cell.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (cell.positives > 0) cell.auc_pr = auc_pr(s, y);
    cell.ece = ece(s, y, ece_scheme, ece_bins).value;
    report.cells[slot_name(slot)] = cell;
  }
  if (baseline) {
    report.baseline_name = baseline->name;
    attach_baseline(report, *baseline);
  }
  return report;
}

// Scores an impression with the head that owns its slot (with temperature).
inline std::vector<double> model_scores(CamoeModel& model, const Dataset& data,
                                        const ExpertMask* mask = nullptr) {
  auto preds = model.predict(data, mask, /*with_temperature=*/true);
  std::vector<double> scores(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = preds.probabilities[model.grouping().task_of(data.impressions[i].slot)][i];
  }
  return scores;
}

// Model report card. AUC-PR ranks by the raw head logit: temperature scaling
// is strictly monotone, so ranking metrics are identical either way, and the
// logit avoids the spurious ties that sigmoid saturation would introduce for
// very confident models. ECE sees the calibrated probabilities.
inline SlotReport evaluate(CamoeModel& model, const Dataset& data,
                           const SlotReport* baseline = nullptr, const std::string& name = "",
                           const ExpertMask* mask = nullptr) {
  auto preds = model.predict(data, mask, /*with_temperature=*/true);
  SlotReport report;
  report.name = name;
  for (AdSlot slot : kAllSlots) {
    std::vector<double> logits, probs;
    std::vector<int> y;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.impressions[i].slot != slot) continue;
      const std::size_t task = model.grouping().task_of(slot);
      logits.push_back(preds.logits[task][i]);
      probs.push_back(preds.probabilities[task][i]);
      y.push_back(data.impressions[i].label);
    }
    if (y.empty()) continue;
    SlotCell cell;
    cell.count = y.size();
    cell.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    if (cell.positives > 0) cell.auc_pr = auc_pr(logits, y);
    cell.ece = ece(probs, y, BinScheme::EqualMass, 15).value;
    report.cells[slot_name(slot)] = cell;
  }
  if (baseline) {
    report.baseline_name = baseline->name;
    attach_baseline(report, *baseline);
  }
  return report;
}

// -- Pareto analysis ----------------------------------------------------------

struct ObjectivePoint {
  std::string label;
  std::map<std::string, double> coordinates;  // higher is better on every axis
};

struct ParetoResult {
  std::vector<std::string> front;  // labels of non-dominated points
  std::map<std::string, std::vector<std::string>> dominated_by;
};

// a dominates b: >= on every axis, > on at least one.
inline bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  bool strict = false;
  for (const auto& [axis, av] : a.coordinates) {
    const double bv = b.coordinates.at(axis);
    if (av < bv) return false;
    if (av > bv) strict = true;
  }
  return strict;
}

inline ParetoResult pareto_front(const std::vector<ObjectivePoint>& points) {
  if (points.empty()) throw std::invalid_argument("pareto_front: no points");
  for (const ObjectivePoint& p : points) {
    if (p.coordinates.empty()) throw std::invalid_argument("pareto_front: point without axes");
    for (const auto& [axis, v] : p.coordinates) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("pareto_front: non-finite coordinate on " + p.label);
      }
      if (points[0].coordinates.size() != p.coordinates.size() ||
          points[0].coordinates.count(axis) == 0) {
        throw std::invalid_argument("pareto_front: inconsistent axes on " + p.label);
      }
    }
  }
  ParetoResult result;
  for (const ObjectivePoint& p : points) {
    std::vector<std::string> dominators;
    for (const ObjectivePoint& q : points) {
      if (&p != &q && dominates(q, p)) dominators.push_back(q.label);
    }
    if (dominators.empty()) {
      result.front.push_back(p.label);
    } else {
      result.dominated_by[p.label] = std::move(dominators);
    }
  }
  return result;
}

}  // namespace camoe
