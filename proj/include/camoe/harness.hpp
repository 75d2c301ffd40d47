// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Configuration-driven experiment runner: generate -> split -> train each arm
// -> calibrate -> evaluate on the shared held-out split -> masked-inference
// study -> auction simulation -> comparison tables. Every seed is derived
// from the config, so a rerun reproduces every artifact byte for byte
// (timings are kept out of the compared files).

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoe/auction.hpp"
#include "camoe/calibration.hpp"
#include "camoe/datagen.hpp"
#include "camoe/losses.hpp"
#include "camoe/metrics.hpp"
#include "camoe/model.hpp"

namespace camoe {

// Configuration problems exit with a distinct code from run failures.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- flat key = value config files ---------------------------------------------

struct IniSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return true;
    }
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return v;
    }
    throw ConfigError("config: section [" + name + "] is missing key \"" + key + "\"");
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }
};

struct IniFile {
  std::vector<IniSection> sections;

  static IniFile parse_string(const std::string& text) {
    IniFile f;
    IniSection* current = nullptr;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("config: line " + std::to_string(lineno) + ": unterminated section");
        }
        f.sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
        current = &f.sections.back();
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos || current == nullptr) {
        throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
      }
      current->entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return f;
  }

  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    IniFile f = parse_string(buf.str());
    f.text = buf.str();
    return f;
  }

  const IniSection* find(const std::string& name) const {
    for (const IniSection& s : sections) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  std::vector<const IniSection*> find_prefixed(const std::string& prefix) const {
    std::vector<const IniSection*> out;
    for (const IniSection& s : sections) {
      if (s.name.rfind(prefix, 0) == 0) out.push_back(&s);
    }
    return out;
  }

  std::string text;  // original file contents, for the snapshot
};

namespace cfgdetail {

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number \"" + s + "\" for " + what);
  }
}

inline std::size_t to_size(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  if (v < 0 || v != std::floor(v)) throw ConfigError("config: expected integer for " + what);
  return static_cast<std::size_t>(v);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

// "StreamAudio:0.7,Podcast:0.1,..." onto a per-slot array.
inline void parse_slot_map(const std::string& s, std::array<double, kSlotCount>& out,
                           const std::string& what) {
  for (const std::string& item : split_list(s)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("config: expected Slot:value pairs for " + what);
    }
    AdSlot slot;
    try {
      slot = parse_slot(item.substr(0, colon));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what() + " in " + what);
    }
    out[static_cast<std::size_t>(slot)] = to_double(item.substr(colon + 1), what);
  }
}

}  // namespace cfgdetail

struct ArmConfig {
  std::string name;
  GroupingKind grouping = GroupingKind::Modality;
  ExpertKind experts = ExpertKind::Dcn;
  bool masking = true;
  LossKind base_loss = LossKind::Bce;  // combined with masking into the LossKind
  std::vector<double> lambdas;         // empty = uniform
  double focal_gamma = 2.0;
  double weight_positive = 1.0;
  double weight_negative = 1.0;

  LossKind effective_loss() const {
    switch (base_loss) {
      case LossKind::Bce:
      case LossKind::Alm:
        return masking ? LossKind::Alm : LossKind::Bce;
      case LossKind::Focal:
        return LossKind::Focal;
      case LossKind::WeightedBce:
        return LossKind::WeightedBce;
    }
    throw std::logic_error("arm: bad loss kind");
  }
};

struct TableConfig {
  std::string name;
  std::vector<std::string> arms;
  bool with_ece = false;
};

struct SimArmSpec {
  enum class Kind { Oracle, Constant, Model } kind = Kind::Oracle;
  std::string model_arm;  // for Kind::Model

  std::string label() const {
    switch (kind) {
      case Kind::Oracle: return "oracle";
      case Kind::Constant: return "constant";
      case Kind::Model: return "model:" + model_arm;
    }
    return {};
  }
};

struct SimSection {
  std::size_t steps = 50000;
  std::vector<SimArmSpec> arms;
  RosterConfig roster;
  bool event_log = false;
};

struct ExperimentConfig {
  GeneratorConfig data;
  std::vector<std::uint64_t> seeds;
  double train_fraction = 0.8;
  double calibration_fraction = 0.15;
  double downsample_ratio = 0.0;  // 0 disables down-sampling
  std::string baseline;
  OptimizerConfig optimizer;
  ModelHyper hyper;
  std::vector<ArmConfig> arms;
  std::vector<TableConfig> tables;
  std::string masked_eval_arm;
  std::optional<SimSection> sim;
  std::string snapshot;  // original config text

  const ArmConfig& arm(const std::string& name) const {
    for (const ArmConfig& a : arms) {
      if (a.name == name) return a;
    }
    throw ConfigError("config: unknown arm \"" + name + "\"");
  }

  static ExperimentConfig parse(const IniFile& f);
  void validate() const;
};

inline ExperimentConfig ExperimentConfig::parse(const IniFile& f) {
  using namespace cfgdetail;
  ExperimentConfig cfg;
  cfg.snapshot = f.text;

  if (const IniSection* s = f.find("data")) {
    if (s->has("n")) cfg.data.n = to_size(s->get("n"), "data.n");
    if (s->has("feature_dim")) cfg.data.feature_dim = to_size(s->get("feature_dim"), "feature_dim");
    if (s->has("signal_strength"))
      cfg.data.signal_strength = to_double(s->get("signal_strength"), "signal_strength");
    if (s->has("interaction_ratio"))
      cfg.data.interaction_ratio = to_double(s->get("interaction_ratio"), "interaction_ratio");
    if (s->has("cross_pairs")) cfg.data.cross_pairs = to_size(s->get("cross_pairs"), "cross_pairs");
    if (s->has("focus_ctr_multiplier"))
      cfg.data.focus_ctr_multiplier =
          to_double(s->get("focus_ctr_multiplier"), "focus_ctr_multiplier");
    if (s->has("out_of_focus_fraction"))
      cfg.data.out_of_focus_fraction =
          to_double(s->get("out_of_focus_fraction"), "out_of_focus_fraction");
    if (s->has("slot_mix")) parse_slot_map(s->get("slot_mix"), cfg.data.slot_mix, "slot_mix");
    if (s->has("base_ctr")) parse_slot_map(s->get("base_ctr"), cfg.data.base_ctr, "base_ctr");
    if (s->has("seed")) cfg.data.seed = to_size(s->get("seed"), "data.seed");
  }

  if (const IniSection* s = f.find("experiment")) {
    if (s->has("seeds")) {
      cfg.seeds.clear();
      for (const std::string& v : split_list(s->get("seeds"))) {
        cfg.seeds.push_back(to_size(v, "seeds"));
      }
    }
    if (s->has("train_fraction"))
      cfg.train_fraction = to_double(s->get("train_fraction"), "train_fraction");
    if (s->has("calibration_fraction"))
      cfg.calibration_fraction =
          to_double(s->get("calibration_fraction"), "calibration_fraction");
    if (s->has("downsample_ratio"))
      cfg.downsample_ratio = to_double(s->get("downsample_ratio"), "downsample_ratio");
    if (s->has("baseline")) cfg.baseline = s->get("baseline");
  }
  if (cfg.seeds.empty()) cfg.seeds = {1};

  if (const IniSection* s = f.find("train")) {
    if (s->has("learning_rate"))
      cfg.optimizer.learning_rate = to_double(s->get("learning_rate"), "learning_rate");
    if (s->has("batch_size")) cfg.optimizer.batch_size = to_size(s->get("batch_size"), "batch_size");
    if (s->has("max_epochs")) cfg.optimizer.max_epochs = to_size(s->get("max_epochs"), "max_epochs");
    if (s->has("patience")) cfg.optimizer.patience = to_size(s->get("patience"), "patience");
  }

  if (const IniSection* s = f.find("model")) {
    if (s->has("embedding_dim"))
      cfg.hyper.embedding_dim = to_size(s->get("embedding_dim"), "embedding_dim");
    if (s->has("expert_dim")) cfg.hyper.expert_dim = to_size(s->get("expert_dim"), "expert_dim");
    if (s->has("experts")) cfg.hyper.num_experts = to_size(s->get("experts"), "experts");
    if (s->has("branches")) cfg.hyper.branches = to_size(s->get("branches"), "branches");
    if (s->has("cross_layers"))
      cfg.hyper.cross_layers = to_size(s->get("cross_layers"), "cross_layers");
    if (s->has("cross_rank")) cfg.hyper.cross_rank = to_size(s->get("cross_rank"), "cross_rank");
    if (s->has("deep")) {
      cfg.hyper.deep.clear();
      for (const std::string& v : split_list(s->get("deep"))) {
        cfg.hyper.deep.push_back(to_size(v, "deep"));
      }
    }
    if (s->has("tower")) {
      cfg.hyper.tower.clear();
      for (const std::string& v : split_list(s->get("tower"))) {
        cfg.hyper.tower.push_back(to_size(v, "tower"));
      }
    }
  }
  cfg.hyper.feature_dim = cfg.data.feature_dim;

  for (const IniSection* s : f.find_prefixed("arm ")) {
    ArmConfig arm;
    arm.name = s->name.substr(4);
    try {
      arm.grouping = parse_grouping(s->get_or("grouping", "modality"));
      arm.experts = parse_expert_kind(s->get_or("experts", "dcn"));
    } catch (const std::exception& e) {
      throw ConfigError("config: arm " + arm.name + ": " + e.what());
    }
    const std::string masking = s->get_or("masking", "on");
    if (masking != "on" && masking != "off") {
      throw ConfigError("config: arm " + arm.name + ": masking must be on|off");
    }
    arm.masking = masking == "on";
    const std::string loss = s->get_or("loss", "bce");
    if (loss == "bce") {
      arm.base_loss = LossKind::Bce;
    } else if (loss == "focal") {
      arm.base_loss = LossKind::Focal;
      if (!arm.masking) {
        throw ConfigError("config: arm " + arm.name + ": focal loss is always task-masked");
      }
    } else if (loss == "weighted-bce") {
      arm.base_loss = LossKind::WeightedBce;
      if (!arm.masking) {
        throw ConfigError("config: arm " + arm.name + ": weighted-bce is always task-masked");
      }
    } else {
      throw ConfigError("config: arm " + arm.name + ": unknown loss \"" + loss + "\"");
    }
    if (s->has("lambdas")) {
      for (const std::string& v : cfgdetail::split_list(s->get("lambdas"))) {
        arm.lambdas.push_back(to_double(v, "lambdas"));
      }
    }
    if (s->has("focal_gamma")) arm.focal_gamma = to_double(s->get("focal_gamma"), "focal_gamma");
    if (s->has("weight_positive"))
      arm.weight_positive = to_double(s->get("weight_positive"), "weight_positive");
    if (s->has("weight_negative"))
      arm.weight_negative = to_double(s->get("weight_negative"), "weight_negative");
    cfg.arms.push_back(std::move(arm));
  }

  for (const IniSection* s : f.find_prefixed("table ")) {
    TableConfig t;
    t.name = s->name.substr(6);
    t.arms = cfgdetail::split_list(s->get("arms"));
    for (const std::string& m : cfgdetail::split_list(s->get_or("metric", "auc_pr"))) {
      if (m == "ece") {
        t.with_ece = true;
      } else if (m != "auc_pr") {
        throw ConfigError("config: table " + t.name + ": unknown metric \"" + m + "\"");
      }
    }
    cfg.tables.push_back(std::move(t));
  }

  if (const IniSection* s = f.find("masked_eval")) {
    cfg.masked_eval_arm = s->get("arm");
  }

  if (const IniSection* s = f.find("simulate")) {
    SimSection sim;
    if (s->has("steps")) sim.steps = to_size(s->get("steps"), "simulate.steps");
    if (s->has("audio_campaigns"))
      sim.roster.audio_campaigns = to_size(s->get("audio_campaigns"), "audio_campaigns");
    if (s->has("video_campaigns"))
      sim.roster.video_campaigns = to_size(s->get("video_campaigns"), "video_campaigns");
    if (s->has("quality_sd")) sim.roster.quality_sd = to_double(s->get("quality_sd"), "quality_sd");
    if (s->has("budget")) sim.roster.budget = std::int64_t(to_size(s->get("budget"), "budget"));
    if (s->has("event_log")) sim.event_log = s->get("event_log") == "on";
    for (const std::string& a : cfgdetail::split_list(s->get_or("arms", "oracle,constant"))) {
      SimArmSpec spec;
      if (a == "oracle") {
        spec.kind = SimArmSpec::Kind::Oracle;
      } else if (a == "constant") {
        spec.kind = SimArmSpec::Kind::Constant;
      } else if (a.rfind("model:", 0) == 0) {
        spec.kind = SimArmSpec::Kind::Model;
        spec.model_arm = a.substr(6);
      } else {
        throw ConfigError("config: simulate: unknown arm \"" + a + "\"");
      }
      sim.arms.push_back(std::move(spec));
    }
    cfg.sim = std::move(sim);
  }

  cfg.validate();
  return cfg;
}

inline void ExperimentConfig::validate() const {
  data.validate();
  if (seeds.empty()) throw ConfigError("config: need at least one seed");
  if (arms.empty()) throw ConfigError("config: need at least one [arm ...] section");
  std::set<std::string> names;
  for (const ArmConfig& a : arms) {
    if (!names.insert(a.name).second) {
      throw ConfigError("config: duplicate arm name \"" + a.name + "\"");
    }
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("config: train_fraction must be in (0,1)");
  }
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ConfigError("config: calibration_fraction must be in (0,1)");
  }
  if (!baseline.empty() && names.count(baseline) == 0) {
    throw ConfigError("config: baseline arm \"" + baseline + "\" is not defined");
  }
  for (const TableConfig& t : tables) {
    for (const std::string& a : t.arms) {
      if (names.count(a) == 0) {
        throw ConfigError("config: table " + t.name + " references unknown arm \"" + a + "\"");
      }
    }
  }
  if (!masked_eval_arm.empty() && names.count(masked_eval_arm) == 0) {
    throw ConfigError("config: masked_eval arm \"" + masked_eval_arm + "\" is not defined");
  }
  if (sim) {
    for (const SimArmSpec& a : sim->arms) {
      if (a.kind == SimArmSpec::Kind::Model && names.count(a.model_arm) == 0) {
        throw ConfigError("config: simulate references unknown arm \"" + a.model_arm + "\"");
      }
    }
  }
}

// -- masked inference study -----------------------------------------------------

struct MaskedEvalRow {
  std::string mask;                           // "none", "left", "right", ...
  std::map<std::string, double> video_delta;  // per video slot, % change vs none
};

// Evaluates the model once per mask configuration and reports the relative
// AUC-PR change on the video slots against the unmasked run. For two experts
// the rows are none, left (expert 0 zeroed) and right (expert 1 zeroed).
inline std::vector<MaskedEvalRow> masked_eval(CamoeModel& model, const Dataset& data,
                                              const std::vector<ExpertMask>& masks) {
  const std::size_t k = model.num_experts();
  for (const ExpertMask& m : masks) m.validate(k);
  SlotReport none = evaluate(model, data);

  auto video_deltas = [&](const SlotReport& r) {
    std::map<std::string, double> out;
    for (AdSlot s : kAllSlots) {
      if (modality_of(s) != Modality::Video) continue;
      const auto it = r.cells.find(slot_name(s));
      const auto base = none.cells.find(slot_name(s));
      if (it == r.cells.end() || base == none.cells.end()) continue;
      if (it->second.auc_pr && base->second.auc_pr) {
        out[slot_name(s)] = pct_change(*it->second.auc_pr, *base->second.auc_pr);
      }
    }
    return out;
  };

  std::vector<MaskedEvalRow> rows;
  MaskedEvalRow none_row;
  none_row.mask = "none";
  for (const auto& [slot, delta] : video_deltas(none)) none_row.video_delta[slot] = 0.0;
  rows.push_back(std::move(none_row));

  for (std::size_t i = 0; i < masks.size(); ++i) {
    MaskedEvalRow row;
    if (k == 2 && masks.size() == 2) {
      row.mask = i == 0 ? "left" : "right";
    } else {
      row.mask = "mask" + std::to_string(i);
    }
    SlotReport r = evaluate(model, data, nullptr, "", &masks[i]);
    row.video_delta = video_deltas(r);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Default single-expert-off masks: mask i zeroes expert i.
inline std::vector<ExpertMask> single_expert_masks(std::size_t num_experts) {
  std::vector<ExpertMask> masks;
  for (std::size_t i = 0; i < num_experts; ++i) {
    ExpertMask m = ExpertMask::all_ones(num_experts);
    m.m[i] = 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

}  // namespace camoe
