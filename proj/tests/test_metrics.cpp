// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "camoe/metrics.hpp"

using namespace camoe;

namespace {

// Independent brute-force PR sweep: recount the confusion matrix at every
// distinct threshold from scratch.
double brute_force_auc_pr(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
  std::size_t total_pos = 0;
  for (int y : labels) total_pos += y ? 1 : 0;
  double area = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] ? tp : fp)++;
    }
    const double recall = double(tp) / double(total_pos);
    const double precision = double(tp) / double(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

}  // namespace

TEST_CASE("auc_pr is one under perfect separation", "[metrics]") {
  REQUIRE(auc_pr({0.9, 0.8, 0.7, 0.2, 0.1}, {1, 1, 1, 0, 0}) == 1.0);
}

TEST_CASE("auc_pr matches the documented four-score case", "[metrics]") {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  const std::vector<int> y = {1, 0, 1, 0};
  const double expect = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
  REQUIRE(auc_pr(s, y) == Catch::Approx(expect).epsilon(1e-15));
  REQUIRE(auc_pr(s, y) == brute_force_auc_pr(s, y));
}

TEST_CASE("auc_pr of constant scores is the prevalence", "[metrics]") {
  const std::vector<double> s(10, 0.4);
  const std::vector<int> y = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  REQUIRE(auc_pr(s, y) == Catch::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("auc_pr requires at least one positive", "[metrics]") {
  REQUIRE_THROWS_AS(auc_pr({0.5, 0.2}, {0, 0}), std::invalid_argument);
}

TEST_CASE("auc_pr equals the brute-force sweep on random small sets", "[metrics]") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool any_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse quantization to force frequent score ties.
      s[i] = std::round(rng.uniform() * 8.0) / 8.0;
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
      any_pos |= y[i] == 1;
    }
    if (!any_pos) y[rng.index(n)] = 1;
    REQUIRE(auc_pr(s, y) == brute_force_auc_pr(s, y));
  }
}

TEST_CASE("auc_pr is invariant under strictly increasing transforms", "[metrics]") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.index(40);
    std::vector<double> s(n), s2(n);
    std::vector<int> y(n);
    bool any_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.uniform(-3.0, 3.0);
      s2[i] = std::exp(0.7 * s[i]) + 2.0;  // strictly increasing map
      y[i] = rng.bernoulli(0.3) ? 1 : 0;
      any_pos |= y[i] == 1;
    }
    if (!any_pos) y[0] = 1;
    REQUIRE(auc_pr(s, y) == Catch::Approx(auc_pr(s2, y)).epsilon(1e-15));
  }
}

TEST_CASE("evaluate against itself reports zero change everywhere", "[metrics]") {
  GeneratorConfig cfg;
  cfg.n = 3000;
  cfg.seed = 7;
  cfg.base_ctr = {0.1, 0.1, 0.3, 0.3, 0.3, 0.2, 0.2};
  Dataset d = generate(cfg);
  std::vector<double> scores;
  Rng rng(9);
  for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(rng.uniform());
  SlotReport base = evaluate_scores(scores, d, nullptr, "base");
  SlotReport self = evaluate_scores(scores, d, &base, "self");
  std::size_t total = 0;
  for (const auto& [slot, cell] : self.cells) {
    total += cell.count;
    if (cell.auc_pr_pct_change) REQUIRE(*cell.auc_pr_pct_change == 0.0);
    if (cell.ece_pct_change) REQUIRE(*cell.ece_pct_change == 0.0);
  }
  REQUIRE(total == d.size());
}

TEST_CASE("evaluate matches direct per-slot auc_pr calls", "[metrics]") {
  Dataset d;
  d.feature_dim = 1;
  auto push = [&](AdSlot slot, int label) {
    Impression imp;
    imp.slot = slot;
    imp.label = label;
    imp.features = {0.0};
    d.impressions.push_back(imp);
  };
  // Eight hand-picked examples across two slots.
  push(AdSlot::StreamAudio, 1);
  push(AdSlot::StreamAudio, 0);
  push(AdSlot::StreamAudio, 0);
  push(AdSlot::StreamAudio, 1);
  push(AdSlot::StreamVideo, 0);
  push(AdSlot::StreamVideo, 1);
  push(AdSlot::StreamVideo, 0);
  push(AdSlot::StreamVideo, 1);
  const std::vector<double> scores = {0.9, 0.6, 0.3, 0.7, 0.2, 0.8, 0.5, 0.4};
  SlotReport r = evaluate_scores(scores, d);
  REQUIRE(r.cells.size() == 2);
  REQUIRE(*r.cells.at("StreamAudio").auc_pr ==
          auc_pr({0.9, 0.6, 0.3, 0.7}, {1, 0, 0, 1}));
  REQUIRE(*r.cells.at("StreamVideo").auc_pr ==
          auc_pr({0.2, 0.8, 0.5, 0.4}, {0, 1, 0, 1}));
  REQUIRE(r.cells.at("StreamAudio").positives == 2);
}

TEST_CASE("slots without positives are reported absent, not zero", "[metrics]") {
  Dataset d;
  d.feature_dim = 1;
  for (int i = 0; i < 6; ++i) {
    Impression imp;
    imp.slot = i < 3 ? AdSlot::Podcast : AdSlot::StreamAudio;
    imp.label = (i >= 3 && i % 2) ? 1 : 0;  // Podcast slot: no positives
    imp.features = {0.0};
    d.impressions.push_back(imp);
  }
  SlotReport r = evaluate_scores({0.1, 0.5, 0.3, 0.8, 0.2, 0.9}, d);
  REQUIRE_FALSE(r.cells.at("Podcast").auc_pr.has_value());
  REQUIRE(r.cells.at("Podcast").count == 3);
  REQUIRE(r.cells.at("StreamAudio").auc_pr.has_value());
}

TEST_CASE("evaluate rejects a baseline with different slot coverage", "[metrics]") {
  Dataset d1;
  d1.feature_dim = 1;
  Dataset d2;
  d2.feature_dim = 1;
  for (int i = 0; i < 4; ++i) {
    Impression imp;
    imp.slot = AdSlot::StreamAudio;
    imp.label = i % 2;
    imp.features = {0.0};
    d1.impressions.push_back(imp);
    imp.slot = i < 2 ? AdSlot::StreamAudio : AdSlot::Podcast;
    d2.impressions.push_back(imp);
  }
  SlotReport base = evaluate_scores({0.1, 0.9, 0.4, 0.6}, d1);
  REQUIRE_THROWS_AS(evaluate_scores({0.1, 0.9, 0.4, 0.6}, d2, &base), std::invalid_argument);
}

TEST_CASE("json round trip preserves the slot report", "[metrics]") {
  GeneratorConfig cfg;
  cfg.n = 1000;
  cfg.seed = 21;
  cfg.base_ctr = {0.2, 0.2, 0.3, 0.3, 0.3, 0.25, 0.25};
  Dataset d = generate(cfg);
  std::vector<double> scores;
  Rng rng(23);
  for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(rng.uniform());
  SlotReport r = evaluate_scores(scores, d, nullptr, "trip");
  SlotReport back = SlotReport::from_json(r.to_json());
  REQUIRE(back.name == r.name);
  REQUIRE(back.cells.size() == r.cells.size());
  for (const auto& [slot, cell] : r.cells) {
    REQUIRE(back.cells.at(slot).count == cell.count);
    if (cell.auc_pr) REQUIRE(*back.cells.at(slot).auc_pr == *cell.auc_pr);
    if (cell.ece) REQUIRE(*back.cells.at(slot).ece == *cell.ece);
  }
}

TEST_CASE("pareto front of a single point is that point", "[metrics]") {
  ParetoResult r = pareto_front({{"only", {{"x", 1.0}, {"y", 2.0}}}});
  REQUIRE(r.front == std::vector<std::string>{"only"});
  REQUIRE(r.dominated_by.empty());
}

TEST_CASE("mutually non-dominating points all sit on the front", "[metrics]") {
  ParetoResult r = pareto_front({{"a", {{"x", 1.0}, {"y", 0.0}}},
                                 {"b", {{"x", 0.0}, {"y", 1.0}}},
                                 {"c", {{"x", 0.5}, {"y", 0.5}}}});
  REQUIRE(r.front.size() == 3);
}

TEST_CASE("pareto hand case with dominated points", "[metrics]") {
  ParetoResult r = pareto_front({{"p22", {{"x", 2.0}, {"y", 2.0}}},
                                 {"p11", {{"x", 1.0}, {"y", 1.0}}},
                                 {"p21", {{"x", 2.0}, {"y", 1.0}}}});
  REQUIRE(r.front == std::vector<std::string>{"p22"});
  REQUIRE(r.dominated_by.at("p21") == std::vector<std::string>{"p22"});
  REQUIRE(r.dominated_by.at("p11").size() == 2);
}

TEST_CASE("pareto front agrees with brute-force dominance on random sets", "[metrics]") {
  Rng rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    const std::size_t axes = 2 + rng.index(3);
    std::vector<ObjectivePoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
      ObjectivePoint p;
      p.label = "p" + std::to_string(i);
      for (std::size_t a = 0; a < axes; ++a) {
        // Quantized coordinates so exact ties and duplicates occur.
        p.coordinates["axis" + std::to_string(a)] = rng.index(5);
      }
      pts.push_back(std::move(p));
    }
    ParetoResult r = pareto_front(pts);
    std::set<std::string> front(r.front.begin(), r.front.end());
    for (std::size_t i = 0; i < n; ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < n && !dominated; ++j) {
        if (i == j) continue;
        bool geq = true, strict = false;
        for (const auto& [axis, v] : pts[i].coordinates) {
          const double w = pts[j].coordinates.at(axis);
          geq &= w >= v;
          strict |= w > v;
        }
        dominated = geq && strict;
      }
      REQUIRE(front.count(pts[i].label) == (dominated ? 0u : 1u));
    }
    // No front member dominates another.
    for (const std::string& a : r.front) {
      for (const std::string& b : r.front) {
        if (a == b) continue;
        const auto& pa = *std::find_if(pts.begin(), pts.end(),
                                       [&](const ObjectivePoint& p) { return p.label == a; });
        const auto& pb = *std::find_if(pts.begin(), pts.end(),
                                       [&](const ObjectivePoint& p) { return p.label == b; });
        REQUIRE_FALSE(dominates(pa, pb));
      }
    }
  }
}

TEST_CASE("pareto front rejects inconsistent axes", "[metrics]") {
  REQUIRE_THROWS_AS(
      pareto_front({{"a", {{"x", 1.0}, {"y", 2.0}}}, {"b", {{"x", 1.0}, {"z", 2.0}}}}),
      std::invalid_argument);
  REQUIRE_THROWS_AS(pareto_front({{"a", {{"x", 1.0}}}, {"b", {{"x", 1.0}, {"y", 2.0}}}}),
                    std::invalid_argument);
}
