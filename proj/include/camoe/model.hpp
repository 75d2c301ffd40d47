// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// CAMoE: a multi-gate mixture-of-experts CTR model. Shared linear+batchnorm
// featurization, per-task softmax gates over K shared experts, DCNv2 experts
// (parallel cross/deep branches, concatenated and projected), and one small
// tower per task emitting a logit. Expert outputs can be masked at inference
// to probe specialization; an all-ones mask is the plain forward pass.

#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoe/datagen.hpp"
#include "camoe/graph.hpp"
#include "camoe/rng.hpp"
#include "camoe/slots.hpp"
#include "camoe/tensor.hpp"

namespace camoe {

enum class GroupingKind { Single, Modality, Content, PerSlot };

inline std::string grouping_name(GroupingKind k) {
  switch (k) {
    case GroupingKind::Single: return "single";
    case GroupingKind::Modality: return "modality";
    case GroupingKind::Content: return "content";
    case GroupingKind::PerSlot: return "per-slot";
  }
  throw std::logic_error("grouping_name: bad kind");
}

inline GroupingKind parse_grouping(const std::string& s) {
  for (GroupingKind k : {GroupingKind::Single, GroupingKind::Modality, GroupingKind::Content,
                         GroupingKind::PerSlot}) {
    if (grouping_name(k) == s) return k;
  }
  throw std::invalid_argument("unknown task grouping \"" + s + "\"");
}

// Partition of the seven slots into prediction tasks.
struct TaskGrouping {
  struct Task {
    std::string name;
    std::vector<AdSlot> slots;
  };

  GroupingKind kind = GroupingKind::Modality;
  std::vector<Task> tasks;

  static TaskGrouping make(GroupingKind kind) {
    TaskGrouping g;
    g.kind = kind;
    switch (kind) {
      case GroupingKind::Single:
        g.tasks.push_back({"all", {kAllSlots.begin(), kAllSlots.end()}});
        break;
      case GroupingKind::Modality: {
        Task audio{"audio", {}}, video{"video", {}};
        for (AdSlot s : kAllSlots) {
          (modality_of(s) == Modality::Audio ? audio : video).slots.push_back(s);
        }
        g.tasks = {audio, video};
        break;
      }
      case GroupingKind::Content: {
        Task music{"music", {}}, podcast{"podcast", {}};
        for (AdSlot s : kAllSlots) {
          (content_of(s) == Content::Music ? music : podcast).slots.push_back(s);
        }
        g.tasks = {music, podcast};
        break;
      }
      case GroupingKind::PerSlot:
        for (AdSlot s : kAllSlots) g.tasks.push_back({slot_name(s), {s}});
        break;
    }
    g.validate();
    return g;
  }

  std::size_t size() const { return tasks.size(); }

  // Index of the task owning the slot.
  std::size_t task_of(AdSlot s) const {
    for (std::size_t m = 0; m < tasks.size(); ++m) {
      for (AdSlot t : tasks[m].slots) {
        if (t == s) return m;
      }
    }
    throw std::invalid_argument("grouping: slot " + slot_name(s) + " maps to no task");
  }

  void validate() const {
    std::array<int, kSlotCount> seen{};
    for (const Task& t : tasks) {
      for (AdSlot s : t.slots) seen[std::size_t(s)]++;
    }
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      if (seen[s] != 1) {
        throw std::invalid_argument("grouping: tasks do not partition the slots (" +
                                    slot_name(kAllSlots[s]) + " appears " +
                                    std::to_string(seen[s]) + " times)");
      }
    }
  }
};

enum class ExpertKind { Dcn, Mlp };

inline std::string expert_kind_name(ExpertKind k) { return k == ExpertKind::Dcn ? "dcn" : "mlp"; }

inline ExpertKind parse_expert_kind(const std::string& s) {
  if (s == "dcn") return ExpertKind::Dcn;
  if (s == "mlp") return ExpertKind::Mlp;
  throw std::invalid_argument("unknown expert kind \"" + s + "\"");
}

struct ModelHyper {
  std::size_t feature_dim = 16;
  std::size_t embedding_dim = 32;
  std::size_t expert_dim = 32;
  std::size_t num_experts = 2;
  std::size_t branches = 3;     // parallel (cross, deep) pairs per expert
  std::size_t cross_layers = 2; // L
  std::size_t cross_rank = 8;   // r
  std::vector<std::size_t> deep = {32, 32};
  std::vector<std::size_t> tower = {16};
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
};

// Inference-time expert mask; entry k zeroes expert k's output when 0.
struct ExpertMask {
  std::vector<double> m;

  static ExpertMask all_ones(std::size_t k) { return ExpertMask{std::vector<double>(k, 1.0)}; }

  void validate(std::size_t num_experts) const {
    if (m.size() != num_experts) {
      throw std::invalid_argument("expert mask length " + std::to_string(m.size()) +
                                  " does not match expert count " + std::to_string(num_experts));
    }
    bool any = false;
    for (double v : m) {
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("expert mask entries must be 0 or 1");
      any |= v == 1.0;
    }
    if (!any) throw std::invalid_argument("expert mask must keep at least one expert");
  }
};

// One cross layer: xl + x0 (.) (relu(xl . w1 + b) . w2). Row-vector batches;
// w1 is [d,r] and w2 is [r,d] (transposed relative to column-vector form).
inline Value cross_layer(ValueGraph& g, Value x0, Value xl, Value w1, Value w2, Value b) {
  Value h = g.relu(g.add_row_bias(g.matmul(xl, w1), b));
  return g.add(xl, g.hadamard(x0, g.matmul(h, w2)));
}

class CamoeModel {
public:
  CamoeModel() = default;
  CamoeModel(const CamoeModel&) = delete;
  CamoeModel& operator=(const CamoeModel&) = delete;
  CamoeModel(CamoeModel&&) = default;
  CamoeModel& operator=(CamoeModel&&) = default;

  static CamoeModel build(const TaskGrouping& grouping, const ModelHyper& hyper,
                          ExpertKind expert_kind, std::uint64_t seed) {
    grouping.validate();
    if (hyper.feature_dim == 0) throw std::invalid_argument("build: feature_dim must be > 0");
    if (hyper.num_experts < 1) throw std::invalid_argument("build: need at least one expert");
    if (hyper.cross_layers < 1 && expert_kind == ExpertKind::Dcn) {
      throw std::invalid_argument("build: dcn expert needs at least one cross layer");
    }
    if (hyper.branches < 1 && expert_kind == ExpertKind::Dcn) {
      throw std::invalid_argument("build: dcn expert needs at least one branch");
    }

    CamoeModel m;
    m.grouping_ = grouping;
    m.hyper_ = hyper;
    m.expert_kind_ = expert_kind;
    m.seed_ = seed;
    m.temperatures_.assign(grouping.size(), 1.0);
    Rng rng(detail::mix_seed(seed, 5));

    const std::size_t f = hyper.feature_dim, e = hyper.embedding_dim;
    m.embedding_ = m.add_linear(rng, "embedding", f, e);
    m.bn_gamma_ = &m.add_param("bn.gamma", Tensor::filled({e}, 1.0));
    m.bn_beta_ = &m.add_param("bn.beta", Tensor({e}));
    m.bn_state_ = BatchNormState(e);

    for (std::size_t k = 0; k < hyper.num_experts; ++k) {
      Expert ex;
      const std::string base = "expert" + std::to_string(k);
      std::size_t concat_dim = 0;
      if (expert_kind == ExpertKind::Dcn) {
        for (std::size_t br = 0; br < hyper.branches; ++br) {
          Branch branch;
          const std::string bb = base + ".branch" + std::to_string(br);
          for (std::size_t l = 0; l < hyper.cross_layers; ++l) {
            CrossParams cp;
            const std::string cb = bb + ".cross" + std::to_string(l);
            cp.w1 = &m.add_param(cb + ".w1", m.gaussian(rng, {e, hyper.cross_rank}, e));
            cp.w2 = &m.add_param(cb + ".w2", m.gaussian(rng, {hyper.cross_rank, e}, hyper.cross_rank));
            cp.b = &m.add_param(cb + ".b", Tensor({hyper.cross_rank}));
            branch.cross.push_back(cp);
          }
          std::size_t in = e;
          for (std::size_t l = 0; l < hyper.deep.size(); ++l) {
            branch.deep.push_back(
                m.add_linear(rng, bb + ".deep" + std::to_string(l), in, hyper.deep[l]));
            in = hyper.deep[l];
          }
          concat_dim += e + in;
          ex.branches.push_back(std::move(branch));
        }
      } else {
        std::size_t in = e;
        for (std::size_t l = 0; l < hyper.deep.size(); ++l) {
          ex.mlp.push_back(m.add_linear(rng, base + ".deep" + std::to_string(l), in, hyper.deep[l]));
          in = hyper.deep[l];
        }
        concat_dim = in;
      }
      ex.proj = m.add_linear(rng, base + ".proj", concat_dim, hyper.expert_dim);
      m.experts_.push_back(std::move(ex));
    }

    for (std::size_t t = 0; t < grouping.size(); ++t) {
      const std::string base = "task." + grouping.tasks[t].name;
      m.gates_.push_back(m.add_linear(rng, base + ".gate", e, hyper.num_experts));
      Tower tower;
      std::size_t in = hyper.expert_dim;
      for (std::size_t l = 0; l < hyper.tower.size(); ++l) {
        tower.hidden.push_back(
            m.add_linear(rng, base + ".tower" + std::to_string(l), in, hyper.tower[l]));
        in = hyper.tower[l];
      }
      tower.out = m.add_linear(rng, base + ".logit", in, 1);
      m.towers_.push_back(std::move(tower));
    }
    return m;
  }

  const TaskGrouping& grouping() const { return grouping_; }
  const ModelHyper& hyper() const { return hyper_; }
  ExpertKind expert_kind() const { return expert_kind_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t num_tasks() const { return grouping_.size(); }
  std::size_t num_experts() const { return hyper_.num_experts; }

  double temperature(std::size_t task) const { return temperatures_.at(task); }
  void set_temperature(std::size_t task, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("temperature must be > 0");
    temperatures_.at(task) = t;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (Parameter& p : params_) out.push_back(&p);
    return out;
  }

  Parameter* parameter(const std::string& name) {
    for (Parameter& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.value.size();
    return n;
  }

  BatchNormState& bn_state() { return bn_state_; }

  // Per-task logit columns [B,1] for a feature matrix [B, feature_dim].
  // The mask is applied inside the expert combination; all-ones reproduces
  // the plain forward pass op for op.
  std::vector<Value> forward(ValueGraph& g, const Tensor& features, const ExpertMask& mask,
                             bool training) {
    if (features.rank() != 2 || features.cols() != hyper_.feature_dim) {
      throw std::invalid_argument("forward: expected [batch," +
                                  std::to_string(hyper_.feature_dim) + "] features, got " +
                                  features.shape_str());
    }
    mask.validate(hyper_.num_experts);
    Value x = g.leaf(features);
    Value emb = g.batchnorm(linear(g, embedding_, x), g.param(*bn_gamma_), g.param(*bn_beta_),
                            bn_state_, training, hyper_.bn_momentum, hyper_.bn_eps);

    std::vector<Value> expert_out;
    expert_out.reserve(experts_.size());
    for (std::size_t k = 0; k < experts_.size(); ++k) {
      expert_out.push_back(g.scale(expert_forward(g, k, emb), mask.m[k]));
    }

    std::vector<Value> logits;
    logits.reserve(grouping_.size());
    for (std::size_t t = 0; t < grouping_.size(); ++t) {
      Value gate = g.softmax_rows(linear(g, gates_[t], emb));
      Value combined = g.row_scale(expert_out[0], g.column(gate, 0));
      for (std::size_t k = 1; k < expert_out.size(); ++k) {
        combined = g.add(combined, g.row_scale(expert_out[k], g.column(gate, k)));
      }
      Value h = combined;
      for (const Linear& lin : towers_[t].hidden) h = g.relu(linear(g, lin, h));
      logits.push_back(linear(g, towers_[t].out, h));
    }
    return logits;
  }

  std::vector<Value> forward(ValueGraph& g, const Tensor& features, bool training) {
    return forward(g, features, ExpertMask::all_ones(hyper_.num_experts), training);
  }

  // Expert k on the embedded batch: parallel (cross stack, deep mlp) branches
  // concatenated, then a linear projection to expert_dim.
  Value expert_forward(ValueGraph& g, std::size_t k, Value emb) {
    const Expert& ex = experts_.at(k);
    if (expert_kind_ == ExpertKind::Mlp) {
      Value h = emb;
      for (const Linear& lin : ex.mlp) h = g.relu(linear(g, lin, h));
      return linear(g, ex.proj, h);
    }
    std::vector<Value> parts;
    for (const Branch& br : ex.branches) {
      Value xl = emb;
      for (const CrossParams& cp : br.cross) {
        xl = cross_layer(g, emb, xl, g.param(*cp.w1), g.param(*cp.w2), g.param(*cp.b));
      }
      Value h = emb;
      for (const Linear& lin : br.deep) h = g.relu(linear(g, lin, h));
      parts.push_back(g.concat_cols({xl, h}));
    }
    Value cat = parts.size() == 1 ? parts[0] : g.concat_cols(parts);
    return linear(g, ex.proj, cat);
  }

  struct Predictions {
    // [task][example]
    std::vector<std::vector<double>> logits;
    std::vector<std::vector<double>> probabilities;
  };

  // Inference over a dataset (running-stat batchnorm, chunked; results are
  // independent of chunking). Probabilities pass through the fitted per-task
  // temperature when with_temperature is set.
  Predictions predict(const Dataset& data, const ExpertMask* mask = nullptr,
                      bool with_temperature = true, std::size_t chunk = 2048) {
    Predictions out;
    out.logits.assign(num_tasks(), {});
    out.probabilities.assign(num_tasks(), {});
    const ExpertMask m = mask ? *mask : ExpertMask::all_ones(hyper_.num_experts);
    for (std::size_t start = 0; start < data.size(); start += chunk) {
      const std::size_t stop = std::min(data.size(), start + chunk);
      Tensor x = features_tensor(data, start, stop);
      ValueGraph g;
      std::vector<Value> logits = forward(g, x, m, /*training=*/false);
      for (std::size_t t = 0; t < num_tasks(); ++t) {
        const Tensor& z = g.value(logits[t]);
        const double temp = with_temperature ? temperatures_[t] : 1.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          out.logits[t].push_back(z[i]);
          out.probabilities[t].push_back(ValueGraph::stable_sigmoid(z[i] / temp));
        }
      }
    }
    return out;
  }

  Tensor features_tensor(const Dataset& data, std::size_t start, std::size_t stop) const {
    if (stop <= start) throw std::invalid_argument("features_tensor: empty range");
    Tensor x({stop - start, hyper_.feature_dim});
    for (std::size_t i = start; i < stop; ++i) {
      const Impression& imp = data.impressions[i];
      if (imp.features.size() != hyper_.feature_dim) {
        throw std::invalid_argument("features_tensor: impression feature dim " +
                                    std::to_string(imp.features.size()) + " != model dim " +
                                    std::to_string(hyper_.feature_dim));
      }
      for (std::size_t j = 0; j < hyper_.feature_dim; ++j) x.at(i - start, j) = imp.features[j];
    }
    return x;
  }

  // -- checkpointing ---------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "camoe-checkpoint-v1";
    j["grouping"] = grouping_name(grouping_.kind);
    j["expert_kind"] = expert_kind_name(expert_kind_);
    j["seed"] = seed_;
    j["hyper"] = {{"feature_dim", hyper_.feature_dim},
                  {"embedding_dim", hyper_.embedding_dim},
                  {"expert_dim", hyper_.expert_dim},
                  {"num_experts", hyper_.num_experts},
                  {"branches", hyper_.branches},
                  {"cross_layers", hyper_.cross_layers},
                  {"cross_rank", hyper_.cross_rank},
                  {"deep", hyper_.deep},
                  {"tower", hyper_.tower},
                  {"bn_momentum", hyper_.bn_momentum},
                  {"bn_eps", hyper_.bn_eps}};
    nlohmann::json temps;
    for (std::size_t t = 0; t < grouping_.size(); ++t) {
      temps[grouping_.tasks[t].name] = temperatures_[t];
    }
    j["temperatures"] = temps;
    j["bn"] = {{"running_mean", bn_state_.running_mean.values()},
               {"running_var", bn_state_.running_var.values()}};
    nlohmann::json params;
    for (const Parameter& p : params_) {
      params[p.name] = {{"shape", p.value.shape()}, {"data", p.value.values()}};
    }
    j["parameters"] = params;
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
    out << to_json().dump(1) << "\n";
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
  }

  static CamoeModel from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "camoe-checkpoint-v1") {
      throw std::runtime_error("checkpoint: unrecognized format");
    }
    ModelHyper h;
    const auto& jh = j.at("hyper");
    h.feature_dim = jh.at("feature_dim").get<std::size_t>();
    h.embedding_dim = jh.at("embedding_dim").get<std::size_t>();
    h.expert_dim = jh.at("expert_dim").get<std::size_t>();
    h.num_experts = jh.at("num_experts").get<std::size_t>();
    h.branches = jh.at("branches").get<std::size_t>();
    h.cross_layers = jh.at("cross_layers").get<std::size_t>();
    h.cross_rank = jh.at("cross_rank").get<std::size_t>();
    h.deep = jh.at("deep").get<std::vector<std::size_t>>();
    h.tower = jh.at("tower").get<std::vector<std::size_t>>();
    h.bn_momentum = jh.at("bn_momentum").get<double>();
    h.bn_eps = jh.at("bn_eps").get<double>();

    CamoeModel m = build(TaskGrouping::make(parse_grouping(j.at("grouping").get<std::string>())),
                         h, parse_expert_kind(j.at("expert_kind").get<std::string>()),
                         j.value("seed", std::uint64_t{0}));
    for (std::size_t t = 0; t < m.grouping_.size(); ++t) {
      m.temperatures_[t] = j.at("temperatures").at(m.grouping_.tasks[t].name).get<double>();
    }
    m.bn_state_.running_mean =
        Tensor({h.embedding_dim}, j.at("bn").at("running_mean").get<std::vector<double>>());
    m.bn_state_.running_var =
        Tensor({h.embedding_dim}, j.at("bn").at("running_var").get<std::vector<double>>());
    const auto& params = j.at("parameters");
    for (Parameter& p : m.params_) {
      const auto& jp = params.at(p.name);
      Tensor v(jp.at("shape").get<std::vector<std::size_t>>(),
               jp.at("data").get<std::vector<double>>());
      if (!v.same_shape(p.value)) {
        throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
      }
      p.value = std::move(v);
      p.gradient = Tensor(p.value.shape());
    }
    return m;
  }

  static CamoeModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

private:
  struct Linear {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
  };
  struct CrossParams {
    Parameter* w1 = nullptr;  // [d,r]
    Parameter* w2 = nullptr;  // [r,d]
    Parameter* b = nullptr;   // [r]
  };
  struct Branch {
    std::vector<CrossParams> cross;
    std::vector<Linear> deep;
  };
  struct Expert {
    std::vector<Branch> branches;
    std::vector<Linear> mlp;
    Linear proj;
  };
  struct Tower {
    std::vector<Linear> hidden;
    Linear out;
  };

  Parameter& add_param(const std::string& name, Tensor value) {
    params_.emplace_back(name, std::move(value));
    return params_.back();
  }

  Tensor gaussian(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, s);
    return t;
  }

  Linear add_linear(Rng& rng, const std::string& name, std::size_t in, std::size_t out) {
    Linear lin;
    lin.w = &add_param(name + ".w", gaussian(rng, {in, out}, in));
    lin.b = &add_param(name + ".b", Tensor({out}));
    return lin;
  }

  static Value linear(ValueGraph& g, const Linear& lin, Value x) {
    return g.add_row_bias(g.matmul(x, g.param(*lin.w)), g.param(*lin.b));
  }

  TaskGrouping grouping_;
  ModelHyper hyper_;
  ExpertKind expert_kind_ = ExpertKind::Dcn;
  std::uint64_t seed_ = 0;
  std::deque<Parameter> params_;  // stable addresses
  Linear embedding_;
  Parameter* bn_gamma_ = nullptr;
  Parameter* bn_beta_ = nullptr;
  BatchNormState bn_state_;
  std::vector<Expert> experts_;
  std::vector<Linear> gates_;
  std::vector<Tower> towers_;
  std::vector<double> temperatures_;
};

}  // namespace camoe
