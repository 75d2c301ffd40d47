// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "camoe/model.hpp"

using namespace camoe;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, scale);
  return t;
}

// Independent straight-line evaluation of one cross layer in column-vector
// form: out = xl + x0 (.) (W2 . relu(W1 . xl + b)), W1 r x d, W2 d x r.
std::vector<double> cross_reference(const std::vector<double>& x0, const std::vector<double>& xl,
                                    const std::vector<std::vector<double>>& w1,
                                    const std::vector<std::vector<double>>& w2,
                                    const std::vector<double>& b) {
  const std::size_t d = x0.size(), r = b.size();
  std::vector<double> h(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < d; ++j) s += w1[i][j] * xl[j];
    h[i] = s > 0.0 ? s : 0.0;
  }
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) s += w2[i][j] * h[j];
    out[i] = xl[i] + x0[i] * s;
  }
  return out;
}

ModelHyper small_hyper() {
  ModelHyper h;
  h.feature_dim = 6;
  h.embedding_dim = 8;
  h.expert_dim = 8;
  h.num_experts = 2;
  h.branches = 2;
  h.cross_layers = 2;
  h.cross_rank = 3;
  h.deep = {8};
  h.tower = {4};
  return h;
}

Dataset tiny_dataset(std::size_t n, std::size_t feature_dim, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n = n;
  cfg.feature_dim = feature_dim;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("task groupings partition the seven slots", "[model]") {
  for (GroupingKind k : {GroupingKind::Single, GroupingKind::Modality, GroupingKind::Content,
                         GroupingKind::PerSlot}) {
    TaskGrouping g = TaskGrouping::make(k);
    g.validate();
    std::size_t total = 0;
    for (const auto& t : g.tasks) total += t.slots.size();
    REQUIRE(total == kSlotCount);
  }
  TaskGrouping modality = TaskGrouping::make(GroupingKind::Modality);
  REQUIRE(modality.size() == 2);
  // Audio head also owns both leavebehind display slots.
  REQUIRE(modality.task_of(AdSlot::StreamAudioLeavebehind) ==
          modality.task_of(AdSlot::StreamAudio));
  REQUIRE(modality.task_of(AdSlot::PodcastLeavebehind) == modality.task_of(AdSlot::Podcast));
  REQUIRE(modality.task_of(AdSlot::StreamVideo) == modality.task_of(AdSlot::EmbeddedMusic));
  REQUIRE(modality.task_of(AdSlot::StreamVideo) != modality.task_of(AdSlot::StreamAudio));

  TaskGrouping content = TaskGrouping::make(GroupingKind::Content);
  REQUIRE(content.size() == 2);
  REQUIRE(content.task_of(AdSlot::StreamVideo) == content.task_of(AdSlot::StreamAudio));
  REQUIRE(content.task_of(AdSlot::PodcastVideo) == content.task_of(AdSlot::Podcast));

  REQUIRE(TaskGrouping::make(GroupingKind::PerSlot).size() == 7);
  REQUIRE(TaskGrouping::make(GroupingKind::Single).size() == 1);
}

TEST_CASE("cross layer is identity when w2 is zero", "[model]") {
  Rng rng(3);
  for (std::size_t depth = 1; depth <= 5; ++depth) {
    ValueGraph g;
    Value x0 = g.leaf(random_matrix(rng, 2, 4));
    Value w1 = g.leaf(random_matrix(rng, 4, 3));
    Value w2 = g.leaf(Tensor({3, 4}));
    Value b = g.leaf(random_matrix(rng, 1, 3).values().size() == 3 ? Tensor::vector({0.1, -0.2, 0.3})
                                                                   : Tensor({3}));
    Value xl = x0;
    for (std::size_t l = 0; l < depth; ++l) xl = cross_layer(g, x0, xl, w1, w2, b);
    const Tensor& out = g.value(xl);
    const Tensor& in = g.value(x0);
    for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == in[i]);
  }
}

TEST_CASE("cross layer with zero x0 returns xl", "[model]") {
  Rng rng(5);
  ValueGraph g;
  Value x0 = g.leaf(Tensor({2, 4}));
  Value xl = g.leaf(random_matrix(rng, 2, 4));
  Value w1 = g.leaf(random_matrix(rng, 4, 3));
  Value w2 = g.leaf(random_matrix(rng, 3, 4));
  Value b = g.leaf(Tensor::vector({0.5, 0.5, 0.5}));
  const Tensor& out = g.value(cross_layer(g, x0, xl, w1, w2, b));
  for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == g.value(xl)[i]);
}

TEST_CASE("cross layer matches the documented hand computation", "[model]") {
  ValueGraph g;
  // Column-vector data: x0=[1,2], xl=[1,1], W1=[[1,0]], b=[0], W2=[[1],[1]].
  Value x0 = g.leaf(Tensor::matrix(1, 2, {1, 2}));
  Value xl = g.leaf(Tensor::matrix(1, 2, {1, 1}));
  Value w1 = g.leaf(Tensor::matrix(2, 1, {1, 0}));   // transpose of W1
  Value w2 = g.leaf(Tensor::matrix(1, 2, {1, 1}));   // transpose of W2
  Value b = g.leaf(Tensor::vector({0}));
  const Tensor& out = g.value(cross_layer(g, x0, xl, w1, w2, b));
  REQUIRE(out[0] == 2.0);
  REQUIRE(out[1] == 3.0);
}

TEST_CASE("cross layer agrees with an independent reimplementation", "[model]") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.index(5);
    const std::size_t r = 1 + rng.index(4);
    std::vector<double> x0(d), xl(d), b(r);
    std::vector<std::vector<double>> w1(r, std::vector<double>(d));
    std::vector<std::vector<double>> w2(d, std::vector<double>(r));
    for (auto& v : x0) v = rng.normal();
    for (auto& v : xl) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& row : w1)
      for (auto& v : row) v = rng.normal();
    for (auto& row : w2)
      for (auto& v : row) v = rng.normal();

    ValueGraph g;
    Tensor w1t({d, r}), w2t({r, d});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < d; ++j) w1t.at(j, i) = w1[i][j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < r; ++j) w2t.at(j, i) = w2[i][j];
    Value out = cross_layer(g, g.leaf(Tensor({1, d}, x0)), g.leaf(Tensor({1, d}, xl)),
                            g.leaf(w1t), g.leaf(w2t), g.leaf(Tensor({r}, b)));
    const std::vector<double> ref = cross_reference(x0, xl, w1, w2, b);
    for (std::size_t i = 0; i < d; ++i) {
      REQUIRE(std::abs(g.value(out)[i] - ref[i]) < 1e-12);
    }
  }
}

TEST_CASE("build is deterministic and structurally correct", "[model]") {
  const TaskGrouping grouping = TaskGrouping::make(GroupingKind::Modality);
  CamoeModel a = CamoeModel::build(grouping, small_hyper(), ExpertKind::Dcn, 11);
  CamoeModel b = CamoeModel::build(grouping, small_hyper(), ExpertKind::Dcn, 11);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->name == pb[i]->name);
    REQUIRE(pa[i]->value.values() == pb[i]->value.values());
  }
  REQUIRE(a.parameter_count() > 0);

  // One gate and one tower per task.
  REQUIRE(a.parameter("task.audio.gate.w") != nullptr);
  REQUIRE(a.parameter("task.video.gate.w") != nullptr);
  REQUIRE(a.parameter("task.audio.logit.w") != nullptr);
  REQUIRE(a.parameter("task.video.logit.w") != nullptr);

  CamoeModel seven =
      CamoeModel::build(TaskGrouping::make(GroupingKind::PerSlot), small_hyper(), ExpertKind::Dcn, 1);
  for (AdSlot s : kAllSlots) {
    REQUIRE(seven.parameter("task." + slot_name(s) + ".gate.w") != nullptr);
    REQUIRE(seven.parameter("task." + slot_name(s) + ".logit.w") != nullptr);
  }

  ModelHyper bad = small_hyper();
  bad.num_experts = 0;
  REQUIRE_THROWS_AS(CamoeModel::build(grouping, bad, ExpertKind::Dcn, 1), std::invalid_argument);
}

TEST_CASE("expert with zero projection weights outputs zeros", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 3);
  Parameter* w = m.parameter("expert0.proj.w");
  Parameter* b = m.parameter("expert0.proj.b");
  REQUIRE(w != nullptr);
  w->value = Tensor(w->value.shape());
  b->value = Tensor(b->value.shape());
  Rng rng(9);
  ValueGraph g;
  Value emb = g.leaf(random_matrix(rng, 3, small_hyper().embedding_dim));
  const Tensor& out = g.value(m.expert_forward(g, 0, emb));
  REQUIRE(out.rows() == 3);
  REQUIRE(out.cols() == small_hyper().expert_dim);
  for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == 0.0);
}

TEST_CASE("single cross layer expert equals manual composition", "[model]") {
  ModelHyper h;
  h.feature_dim = 3;
  h.embedding_dim = 3;
  h.expert_dim = 2;
  h.num_experts = 1;
  h.branches = 1;
  h.cross_layers = 1;
  h.cross_rank = 2;
  h.deep = {2};
  h.tower = {2};
  CamoeModel m =
      CamoeModel::build(TaskGrouping::make(GroupingKind::Single), h, ExpertKind::Dcn, 21);
  Rng rng(23);
  const Tensor emb_data = random_matrix(rng, 4, 3);

  ValueGraph g;
  Value emb = g.leaf(emb_data);
  const Tensor via_expert = g.value(m.expert_forward(g, 0, emb));

  ValueGraph g2;
  Value emb2 = g2.leaf(emb_data);
  Value crossed = cross_layer(g2, emb2, emb2, g2.param(*m.parameter("expert0.branch0.cross0.w1")),
                              g2.param(*m.parameter("expert0.branch0.cross0.w2")),
                              g2.param(*m.parameter("expert0.branch0.cross0.b")));
  Value deep = g2.relu(g2.add_row_bias(
      g2.matmul(emb2, g2.param(*m.parameter("expert0.branch0.deep0.w"))),
      g2.param(*m.parameter("expert0.branch0.deep0.b"))));
  Value manual = g2.add_row_bias(
      g2.matmul(g2.concat_cols({crossed, deep}), g2.param(*m.parameter("expert0.proj.w"))),
      g2.param(*m.parameter("expert0.proj.b")));
  const Tensor& ref = g2.value(manual);
  REQUIRE(via_expert.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(via_expert[i] == ref[i]);
}

TEST_CASE("forward with all-ones mask is bit-identical to no mask", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 31);
  Dataset d = tiny_dataset(1000, small_hyper().feature_dim, 33);
  ExpertMask ones = ExpertMask::all_ones(2);
  auto a = m.predict(d, nullptr, false);
  auto b = m.predict(d, &ones, false);
  for (std::size_t t = 0; t < a.probabilities.size(); ++t) {
    REQUIRE(a.probabilities[t].size() == b.probabilities[t].size());
    REQUIRE(std::memcmp(a.probabilities[t].data(), b.probabilities[t].data(),
                        a.probabilities[t].size() * sizeof(double)) == 0);
  }
}

TEST_CASE("masked expert has no influence on the output", "[model]") {
  const TaskGrouping grouping = TaskGrouping::make(GroupingKind::Modality);
  CamoeModel m = CamoeModel::build(grouping, small_hyper(), ExpertKind::Dcn, 41);
  Dataset d = tiny_dataset(64, small_hyper().feature_dim, 43);
  ExpertMask keep_first{{1.0, 0.0}};
  auto before = m.predict(d, &keep_first, false);
  // Arbitrarily rewrite every parameter of the masked (second) expert.
  Rng rng(45);
  for (Parameter* p : m.parameters()) {
    if (p->name.rfind("expert1.", 0) == 0) {
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.normal(0.0, 3.0);
    }
  }
  auto after = m.predict(d, &keep_first, false);
  for (std::size_t t = 0; t < before.probabilities.size(); ++t) {
    for (std::size_t i = 0; i < before.probabilities[t].size(); ++i) {
      REQUIRE(before.probabilities[t][i] == after.probabilities[t][i]);
    }
  }
}

TEST_CASE("forward emits one probability vector per task in (0,1)", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 51);
  Dataset d = tiny_dataset(4, small_hyper().feature_dim, 53);
  auto p = m.predict(d, nullptr, false);
  REQUIRE(p.probabilities.size() == 2);
  for (const auto& task : p.probabilities) {
    REQUIRE(task.size() == 4);
    for (double v : task) {
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
    }
  }
}

TEST_CASE("all-zero expert mask is rejected", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 61);
  Dataset d = tiny_dataset(4, small_hyper().feature_dim, 63);
  ExpertMask none{{0.0, 0.0}};
  REQUIRE_THROWS_AS(m.predict(d, &none, false), std::invalid_argument);
  ExpertMask wrong{{1.0}};
  REQUIRE_THROWS_AS(m.predict(d, &wrong, false), std::invalid_argument);
}

TEST_CASE("gate output is invariant to constant logit shifts", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 71);
  Dataset d = tiny_dataset(32, small_hyper().feature_dim, 73);
  auto before = m.predict(d, nullptr, false);
  Parameter* gate_b = m.parameter("task.audio.gate.b");
  REQUIRE(gate_b != nullptr);
  for (std::size_t i = 0; i < gate_b->value.size(); ++i) gate_b->value[i] += 7.25;
  auto after = m.predict(d, nullptr, false);
  for (std::size_t t = 0; t < before.probabilities.size(); ++t) {
    for (std::size_t i = 0; i < before.probabilities[t].size(); ++i) {
      REQUIRE(std::abs(before.probabilities[t][i] - after.probabilities[t][i]) < 1e-9);
    }
  }
}

TEST_CASE("inference is permutation equivariant over the batch", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 81);
  Dataset d = tiny_dataset(64, small_hyper().feature_dim, 83);
  // Prime the running stats with one training pass.
  {
    ValueGraph g;
    m.forward(g, m.features_tensor(d, 0, 64), /*training=*/true);
  }
  Dataset reversed = d;
  std::reverse(reversed.impressions.begin(), reversed.impressions.end());
  auto a = m.predict(d, nullptr, false);
  auto b = m.predict(reversed, nullptr, false);
  const std::size_t n = d.size();
  for (std::size_t t = 0; t < a.probabilities.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(a.probabilities[t][i] == b.probabilities[t][n - 1 - i]);
    }
  }

  // Train-mode forward: batch statistics make this equal only to rounding.
  ValueGraph g1, g2;
  auto l1 = m.forward(g1, m.features_tensor(d, 0, 16), true);
  auto l2 = m.forward(g2, m.features_tensor(reversed, n - 16, n), true);
  const Tensor& t1 = g1.value(l1[0]);
  const Tensor& t2 = g2.value(l2[0]);
  for (std::size_t i = 0; i < 16; ++i) {
    REQUIRE(std::abs(t1[i] - t2[15 - i]) < 1e-12);
  }
}

TEST_CASE("checkpoint round trip preserves parameter bits and predictions", "[model]") {
  CamoeModel m = CamoeModel::build(TaskGrouping::make(GroupingKind::Modality), small_hyper(),
                                   ExpertKind::Dcn, 91);
  Dataset d = tiny_dataset(128, small_hyper().feature_dim, 93);
  {
    ValueGraph g;
    m.forward(g, m.features_tensor(d, 0, 128), true);
  }
  m.set_temperature(0, 1.37);
  m.set_temperature(1, 0.82);
  const std::string path = (std::filesystem::temp_directory_path() / "camoe_ckpt.json").string();
  m.save(path);
  CamoeModel back = CamoeModel::load(path);
  std::filesystem::remove(path);

  auto pa = m.parameters(), pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->name == pb[i]->name);
    REQUIRE(std::memcmp(pa[i]->value.data(), pb[i]->value.data(),
                        pa[i]->value.size() * sizeof(double)) == 0);
  }
  auto probs_a = m.predict(d);
  auto probs_b = back.predict(d);
  for (std::size_t t = 0; t < probs_a.probabilities.size(); ++t) {
    REQUIRE(std::memcmp(probs_a.probabilities[t].data(), probs_b.probabilities[t].data(),
                        probs_a.probabilities[t].size() * sizeof(double)) == 0);
  }
}
