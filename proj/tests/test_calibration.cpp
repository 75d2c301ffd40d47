// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "camoe/calibration.hpp"
#include "camoe/losses.hpp"
#include "camoe/metrics.hpp"

using namespace camoe;

namespace {

// Self-consistent calibration data: labels drawn from the logits' own
// probabilities, so the NLL optimum sits near T = 1.
void self_consistent_sample(std::size_t n, std::uint64_t seed, std::vector<double>& logits,
                            std::vector<int>& labels) {
  Rng rng(seed);
  logits.resize(n);
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = rng.normal(0.0, 2.0);
    labels[i] = rng.bernoulli(ValueGraph::stable_sigmoid(logits[i])) ? 1 : 0;
  }
}

}  // namespace

TEST_CASE("temperature one is the plain sigmoid", "[calibration]") {
  for (double z : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
    REQUIRE(apply_temperature(z, 1.0) == ValueGraph::stable_sigmoid(z));
  }
}

TEST_CASE("zero logit maps to one half under any temperature", "[calibration]") {
  for (double t : {0.1, 1.0, 7.0, 1000.0}) {
    REQUIRE(apply_temperature(0.0, t) == 0.5);
  }
}

TEST_CASE("infinite temperature flattens every logit to one half", "[calibration]") {
  for (double z : {-5.0, -1.0, 2.0, 9.0}) {
    REQUIRE(apply_temperature(z, 1e12) == Catch::Approx(0.5).margin(1e-9));
  }
}

TEST_CASE("non-positive temperatures are rejected", "[calibration]") {
  REQUIRE_THROWS_AS(apply_temperature(1.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(apply_temperature(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("temperature scaling is strictly monotone in the logit", "[calibration]") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = std::exp(rng.uniform(-2.0, 2.0));
    const double a = rng.normal(0.0, 3.0);
    const double b = a + rng.uniform(1e-6, 2.0);
    REQUIRE(apply_temperature(a, t) < apply_temperature(b, t));
  }
}

TEST_CASE("fit recovers T near one on self-consistent data", "[calibration]") {
  std::vector<double> logits;
  std::vector<int> labels;
  self_consistent_sample(50000, 11, logits, labels);
  CalibrationHead head = fit_temperature(logits, labels);
  REQUIRE(head.temperature >= 0.9);
  REQUIRE(head.temperature <= 1.1);
}

TEST_CASE("doubling the logits roughly doubles the fitted temperature", "[calibration]") {
  std::vector<double> logits;
  std::vector<int> labels;
  self_consistent_sample(50000, 13, logits, labels);
  CalibrationHead base = fit_temperature(logits, labels);
  std::vector<double> doubled = logits;
  for (double& z : doubled) z *= 2.0;
  CalibrationHead scaled = fit_temperature(doubled, labels);
  const double ratio = scaled.temperature / base.temperature;
  REQUIRE(ratio >= 1.8);
  REQUIRE(ratio <= 2.2);
}

TEST_CASE("fitted temperature is always positive", "[calibration]") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> logits;
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (int i = 0; i < 200; ++i) {
      logits.push_back(rng.normal(0.0, 3.0));
      labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
      (labels.back() ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    REQUIRE(fit_temperature(logits, labels).temperature > 0.0);
  }
}

TEST_CASE("single-class labels are rejected", "[calibration]") {
  std::vector<double> logits = {0.1, 0.5, -1.0};
  REQUIRE_THROWS_AS(fit_temperature(logits, {1, 1, 1}), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_temperature(logits, {0, 0, 0}), std::invalid_argument);
}

TEST_CASE("refinement lands within the bracketed grid optimum", "[calibration]") {
  std::vector<double> logits;
  std::vector<int> labels;
  self_consistent_sample(5000, 19, logits, labels);
  for (double& z : logits) z *= 3.0;
  CalibrationHead head = fit_temperature(logits, labels);

  // Dense grid sweep as the bracketing oracle.
  double best_nll = std::numeric_limits<double>::infinity();
  double best_log = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double lg = -5.0 + 10.0 * double(i) / 4000.0;
    const double nll = temperature_nll(logits, labels, std::exp(lg));
    if (nll < best_nll) {
      best_nll = nll;
      best_log = lg;
    }
  }
  REQUIRE(std::abs(std::log(head.temperature) - best_log) < 1e-2);
  REQUIRE(head.final_nll <= best_nll + 1e-8);
}

TEST_CASE("ece of perfectly confident correct predictions is zero", "[calibration]") {
  EceResult r = ece({1.0, 1.0, 1.0, 1.0}, {1, 1, 1, 1}, BinScheme::EqualWidth, 10);
  REQUIRE(r.value == 0.0);
}

TEST_CASE("ece hand case with a single bin", "[calibration]") {
  EceResult r = ece({0.8, 0.8, 0.8, 0.8}, {1, 1, 1, 0}, BinScheme::EqualWidth, 1);
  REQUIRE(r.value == Catch::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("ece of a constant half prediction equals the rate offset", "[calibration]") {
  Rng rng(23);
  std::vector<double> probs(500, 0.5);
  std::vector<int> labels;
  std::size_t pos = 0;
  for (int i = 0; i < 500; ++i) {
    labels.push_back(rng.bernoulli(0.37) ? 1 : 0);
    pos += labels.back();
  }
  const double rate = double(pos) / 500.0;
  for (BinScheme scheme : {BinScheme::EqualWidth, BinScheme::EqualMass}) {
    EceResult r = ece(probs, labels, scheme, 15);
    REQUIRE(r.value == Catch::Approx(std::abs(rate - 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("ece is invariant under permutations", "[calibration]") {
  Rng rng(29);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) {
    probs.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(probs.back()) ? 1 : 0);
  }
  const double base_w = ece(probs, labels, BinScheme::EqualWidth, 15).value;
  const double base_m = ece(probs, labels, BinScheme::EqualMass, 15).value;
  std::vector<std::size_t> perm(probs.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<double> p2;
  std::vector<int> y2;
  for (std::size_t i : perm) {
    p2.push_back(probs[i]);
    y2.push_back(labels[i]);
  }
  REQUIRE(ece(p2, y2, BinScheme::EqualWidth, 15).value == Catch::Approx(base_w).epsilon(1e-12));
  REQUIRE(ece(p2, y2, BinScheme::EqualMass, 15).value == Catch::Approx(base_m).epsilon(1e-12));
}

TEST_CASE("ece with one bin is the absolute mean gap", "[calibration]") {
  Rng rng(31);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    probs.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
  }
  double mp = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    mp += probs[i];
    ml += labels[i];
  }
  mp /= probs.size();
  ml /= labels.size();
  for (BinScheme scheme : {BinScheme::EqualWidth, BinScheme::EqualMass}) {
    REQUIRE(ece(probs, labels, scheme, 1).value == Catch::Approx(std::abs(ml - mp)).epsilon(1e-12));
  }
}

TEST_CASE("bin populations account for every example", "[calibration]") {
  Rng rng(37);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 433; ++i) {
    probs.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(0.2) ? 1 : 0);
  }
  for (BinScheme scheme : {BinScheme::EqualWidth, BinScheme::EqualMass}) {
    EceResult r = ece(probs, labels, scheme, 15);
    REQUIRE(r.bins.total() == probs.size());
  }
}

TEST_CASE("calibrate_model fits one temperature per task and preserves ranking",
          "[calibration]") {
  ModelHyper h;
  h.feature_dim = 8;
  h.embedding_dim = 8;
  h.expert_dim = 8;
  h.num_experts = 2;
  h.branches = 2;
  h.cross_layers = 1;
  h.cross_rank = 3;
  h.deep = {8};
  h.tower = {4};
  CamoeModel model =
      CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), h, ExpertKind::Dcn, 3);

  GeneratorConfig gcfg;
  gcfg.n = 4000;
  gcfg.feature_dim = 8;
  gcfg.seed = 5;
  gcfg.base_ctr = {0.10, 0.10, 0.30, 0.30, 0.30, 0.20, 0.20};  // plenty of positives
  Dataset d = generate(gcfg);
  auto [train_set, val_set] = split(d, 0.7, 7);

  LossConfig lcfg;
  lcfg.optimizer.max_epochs = 8;
  lcfg.optimizer.patience = 8;
  lcfg.optimizer.seed = 9;
  train(model, train_set, lcfg, &val_set);

  SlotReport before = evaluate(model, val_set);
  std::vector<CalibrationHead> heads = calibrate_model(model, val_set);
  REQUIRE(heads.size() == 2);
  for (const CalibrationHead& head : heads) REQUIRE(head.temperature > 0.0);
  REQUIRE(model.temperature(0) == heads[0].temperature);
  REQUIRE(model.temperature(1) == heads[1].temperature);

  // Monotone transform: per-slot AUC-PR identical.
  SlotReport after = evaluate(model, val_set);
  for (const auto& [slot, cell] : before.cells) {
    if (!cell.auc_pr) continue;
    REQUIRE(std::abs(*after.cells.at(slot).auc_pr - *cell.auc_pr) < 1e-12);
  }
}

TEST_CASE("temperature fit reduces ece of an overconfident scorer", "[calibration]") {
  // Overconfidence simulated by tripling calibrated logits.
  std::vector<double> logits;
  std::vector<int> labels;
  self_consistent_sample(20000, 41, logits, labels);
  for (double& z : logits) z *= 3.0;
  CalibrationHead head = fit_temperature(logits, labels);
  REQUIRE(head.temperature > 1.5);

  std::vector<double> raw, scaled;
  for (double z : logits) {
    raw.push_back(ValueGraph::stable_sigmoid(z));
    scaled.push_back(apply_temperature(z, head.temperature));
  }
  const double before = ece(raw, labels, BinScheme::EqualMass, 15).value;
  const double after = ece(scaled, labels, BinScheme::EqualMass, 15).value;
  REQUIRE(after < before);
  REQUIRE((before - after) / before > 0.2);
}

TEST_CASE("calibrate_model names the task when labels are single-class", "[calibration]") {
  ModelHyper h;
  h.feature_dim = 4;
  h.embedding_dim = 4;
  h.expert_dim = 4;
  h.num_experts = 1;
  h.branches = 1;
  h.cross_layers = 1;
  h.cross_rank = 2;
  h.deep = {4};
  h.tower = {2};
  CamoeModel model =
      CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), h, ExpertKind::Dcn, 1);
  Dataset d;
  d.feature_dim = 4;
  Rng rng(43);
  for (int i = 0; i < 40; ++i) {
    Impression imp;
    imp.slot = i % 2 ? AdSlot::StreamAudio : AdSlot::StreamVideo;
    imp.features = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    imp.label = i % 2 ? (i % 4 == 1 ? 1 : 0) : 1;  // video side all ones
    d.impressions.push_back(imp);
  }
  REQUIRE_THROWS_WITH(calibrate_model(model, d), Catch::Matchers::ContainsSubstring("video"));
}

TEST_CASE("reliability csv has one row per bin", "[calibration]") {
  Rng rng(47);
  std::vector<double> probs;
  std::vector<int> labels;
  for (int i = 0; i < 500; ++i) {
    probs.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(probs.back()) ? 1 : 0);
  }
  const std::string path =
      (std::filesystem::temp_directory_path() / "camoe_reliability.csv").string();
  save_reliability_csv(probs, labels, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "bin,lo,hi,count,mean_confidence,empirical_ctr");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  REQUIRE(rows == 20);
  std::filesystem::remove(path);
}
