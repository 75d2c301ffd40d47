// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Executes an ExperimentConfig end to end and materializes every artifact
// under the output directory:
//
//   out/
//     config_snapshot.cfg
//     arms/<arm>/<seed>/{checkpoint.json, slot_report.json, train_report.jsonl,
//                        reliability_<task>.csv, masked_eval.json, timing.txt}
//     sim/<seed>/{sim_report.json, events.jsonl}
//     tables/<table>.csv, tables/table7.csv
//     ablation_summary.json
//     pareto.json
//
// timing.txt holds wall-clock numbers and is the only file expected to differ
// between reruns of an identical config.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "camoe/harness.hpp"

namespace camoe {

inline constexpr std::array<AdSlot, kSlotCount> kTableSlotOrder = {
    AdSlot::StreamVideo,           AdSlot::PodcastVideo, AdSlot::EmbeddedMusic,
    AdSlot::StreamAudio,           AdSlot::StreamAudioLeavebehind,
    AdSlot::Podcast,               AdSlot::PodcastLeavebehind,
};

namespace runfs {

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create directory " + p.string());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  write_text(p, j.dump(1) + "\n");
}

}  // namespace runfs

// Per-seed data pipeline shared by every arm: generate, hold out the shared
// evaluation split, carve a calibration set, optionally rebalance the fit set.
struct SeedData {
  Dataset fit;
  Dataset calibration;
  Dataset heldout;
  std::uint64_t data_seed = 0;
};

inline SeedData prepare_seed_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  SeedData sd;
  GeneratorConfig gen = cfg.data;
  gen.seed = detail::mix_seed(cfg.data.seed, run_seed);
  sd.data_seed = gen.seed;
  Dataset all = generate(gen);
  auto [train_full, heldout] = split(all, cfg.train_fraction, detail::mix_seed(run_seed, 20));
  sd.heldout = std::move(heldout);
  auto [fit, cal] =
      split(train_full, 1.0 - cfg.calibration_fraction, detail::mix_seed(run_seed, 21));
  sd.calibration = std::move(cal);
  if (cfg.downsample_ratio > 0.0) {
    sd.fit = downsample_majority(fit, cfg.downsample_ratio, detail::mix_seed(run_seed, 22));
  } else {
    sd.fit = std::move(fit);
  }
  return sd;
}

inline std::uint64_t arm_tag(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

struct ArmSeedResult {
  SlotReport report;
  double train_seconds = 0.0;
};

// Train, calibrate, persist and evaluate one (arm, seed) cell.
inline ArmSeedResult run_arm_seed(const ExperimentConfig& cfg, const ArmConfig& arm,
                                  std::uint64_t run_seed, const SeedData& data,
                                  const std::filesystem::path& dir) {
  runfs::ensure_dir(dir);
  CamoeModel model = CamoeModel::build(TaskGrouping::make(arm.grouping), cfg.hyper, arm.experts,
                                       detail::mix_seed(run_seed, arm_tag(arm.name)));
  LossConfig loss;
  loss.kind = arm.effective_loss();
  loss.lambdas = arm.lambdas;
  loss.focal_gamma = arm.focal_gamma;
  loss.weight_positive = arm.weight_positive;
  loss.weight_negative = arm.weight_negative;
  loss.optimizer = cfg.optimizer;
  loss.optimizer.seed = detail::mix_seed(run_seed, 23);

  TrainReport report = train(model, data.fit, loss, &data.calibration);
  calibrate_model(model, data.calibration);
  model.save((dir / "checkpoint.json").string());
  {
    std::ofstream out(dir / "train_report.jsonl");
    report.to_jsonl(out);
  }
  runfs::write_text(dir / "timing.txt",
                    "train_wall_seconds = " + std::to_string(report.wall_seconds) + "\n");

  // Reliability data on the calibration (fitting) set, per task.
  auto preds = model.predict(data.calibration);
  for (std::size_t t = 0; t < model.num_tasks(); ++t) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (std::size_t i = 0; i < data.calibration.size(); ++i) {
      if (model.grouping().task_of(data.calibration.impressions[i].slot) != t) continue;
      probs.push_back(preds.probabilities[t][i]);
      labels.push_back(data.calibration.impressions[i].label);
    }
    if (!probs.empty()) {
      save_reliability_csv(probs, labels,
                           (dir / ("reliability_" + model.grouping().tasks[t].name + ".csv"))
                               .string());
    }
  }

  ArmSeedResult result;
  result.report =
      evaluate(model, data.heldout, nullptr, arm.name + "/" + std::to_string(run_seed));
  runfs::write_json(dir / "slot_report.json", result.report.to_json());

  if (cfg.masked_eval_arm == arm.name) {
    auto rows = masked_eval(model, data.heldout, single_expert_masks(model.num_experts()));
    nlohmann::json j = nlohmann::json::array();
    for (const MaskedEvalRow& row : rows) {
      nlohmann::json r;
      r["mask"] = row.mask;
      r["video_auc_pr_pct_change"] = row.video_delta;
      j.push_back(r);
    }
    runfs::write_json(dir / "masked_eval.json", j);
  }
  result.train_seconds = report.wall_seconds;
  return result;
}

// -- tables and summaries -------------------------------------------------------

struct CellSeries {
  std::vector<double> per_seed;

  std::optional<double> mean() const {
    if (per_seed.empty()) return std::nullopt;
    double s = 0.0;
    for (double v : per_seed) s += v;
    return s / static_cast<double>(per_seed.size());
  }
};

// arm -> slot -> metric series across seeds.
struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::string baseline;
  std::map<std::string, std::map<std::string, CellSeries>> auc_pr;
  std::map<std::string, std::map<std::string, CellSeries>> auc_pr_pct;
  std::map<std::string, std::map<std::string, CellSeries>> ece;
  std::map<std::string, std::map<std::string, CellSeries>> ece_pct;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["baseline"] = baseline;
    j["seeds"] = seeds;
    auto dump = [](const std::map<std::string, std::map<std::string, CellSeries>>& metric) {
      nlohmann::json out;
      for (const auto& [arm, slots] : metric) {
        for (const auto& [slot, series] : slots) {
          nlohmann::json cell;
          cell["per_seed"] = series.per_seed;
          if (auto m = series.mean()) cell["mean"] = *m;
          out[arm][slot] = cell;
        }
      }
      return out;
    };
    j["auc_pr"] = dump(auc_pr);
    j["auc_pr_pct_change"] = dump(auc_pr_pct);
    j["ece"] = dump(ece);
    j["ece_pct_change"] = dump(ece_pct);
    return j;
  }
};

inline AblationTable collect_ablation(
    const ExperimentConfig& cfg,
    const std::map<std::string, std::map<std::uint64_t, SlotReport>>& reports) {
  AblationTable table;
  table.seeds = cfg.seeds;
  table.baseline = cfg.baseline;
  for (const ArmConfig& arm : cfg.arms) {
    auto arm_it = reports.find(arm.name);
    if (arm_it == reports.end()) continue;
    for (std::uint64_t seed : cfg.seeds) {
      auto seed_it = arm_it->second.find(seed);
      if (seed_it == arm_it->second.end()) continue;
      const SlotReport& r = seed_it->second;
      const SlotReport* base = nullptr;
      if (!cfg.baseline.empty()) {
        auto base_arm = reports.find(cfg.baseline);
        if (base_arm != reports.end()) {
          auto base_seed = base_arm->second.find(seed);
          if (base_seed != base_arm->second.end()) base = &base_seed->second;
        }
      }
      for (const auto& [slot, cell] : r.cells) {
        if (cell.auc_pr) {
          table.auc_pr[arm.name][slot].per_seed.push_back(*cell.auc_pr);
          if (base) {
            auto bit = base->cells.find(slot);
            if (bit != base->cells.end() && bit->second.auc_pr) {
              table.auc_pr_pct[arm.name][slot].per_seed.push_back(
                  pct_change(*cell.auc_pr, *bit->second.auc_pr));
            }
          }
        }
        if (cell.ece) {
          table.ece[arm.name][slot].per_seed.push_back(*cell.ece);
          if (base) {
            auto bit = base->cells.find(slot);
            if (bit != base->cells.end() && bit->second.ece && *bit->second.ece > 0.0) {
              table.ece_pct[arm.name][slot].per_seed.push_back(
                  pct_change(*cell.ece, *bit->second.ece));
            }
          }
        }
      }
    }
  }
  return table;
}

// CSV mirroring the comparison-table layout: one row per (metric, arm), one
// column per slot, cells holding the mean %-change against the baseline arm.
inline void write_table_csv(const std::filesystem::path& path, const TableConfig& tcfg,
                            const AblationTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "metric,arm";
  for (AdSlot s : kTableSlotOrder) out << ',' << slot_name(s);
  out << "\n";
  auto emit = [&](const char* metric,
                  const std::map<std::string, std::map<std::string, CellSeries>>& data) {
    for (const std::string& arm : tcfg.arms) {
      out << metric << ',' << arm;
      for (AdSlot s : kTableSlotOrder) {
        out << ',';
        auto arm_it = data.find(arm);
        if (arm_it == data.end()) continue;
        auto slot_it = arm_it->second.find(slot_name(s));
        if (slot_it == arm_it->second.end()) continue;
        if (auto m = slot_it->second.mean()) out << format_real(*m);
      }
      out << "\n";
    }
  };
  emit("auc_pr_pct_change", table.auc_pr_pct);
  if (tcfg.with_ece) emit("ece_pct_change", table.ece_pct);
}

// Fig. of merit for the Pareto report: mean %-change in AUC-PR on the two
// headline slots, against the baseline arm.
inline std::vector<ObjectivePoint> ablation_objective_points(const AblationTable& table,
                                                             const ExperimentConfig& cfg) {
  std::vector<ObjectivePoint> points;
  for (const ArmConfig& arm : cfg.arms) {
    ObjectivePoint p;
    p.label = arm.name;
    auto arm_it = table.auc_pr_pct.find(arm.name);
    if (arm_it == table.auc_pr_pct.end()) continue;
    auto sa = arm_it->second.find(slot_name(AdSlot::StreamAudio));
    auto sv = arm_it->second.find(slot_name(AdSlot::StreamVideo));
    if (sa == arm_it->second.end() || sv == arm_it->second.end()) continue;
    auto ma = sa->second.mean(), mv = sv->second.mean();
    if (!ma || !mv) continue;
    p.coordinates["delta_auc_pr_stream_audio"] = *ma;
    p.coordinates["delta_auc_pr_stream_video"] = *mv;
    points.push_back(std::move(p));
  }
  return points;
}

inline nlohmann::json pareto_report(const std::vector<ObjectivePoint>& points) {
  ParetoResult front = pareto_front(points);
  nlohmann::json j;
  nlohmann::json pts = nlohmann::json::array();
  for (const ObjectivePoint& p : points) {
    nlohmann::json e;
    e["label"] = p.label;
    e["coordinates"] = p.coordinates;
    pts.push_back(e);
  }
  j["points"] = pts;
  j["front"] = front.front;
  j["dominated_by"] = front.dominated_by;
  return j;
}

// -- the auction-simulation leg ---------------------------------------------------

inline ArmScorer make_sim_scorer(const SimArmSpec& spec, const ImpressionSampler& sampler,
                                 double mean_ctr, std::shared_ptr<CamoeModel> model) {
  switch (spec.kind) {
    case SimArmSpec::Kind::Oracle:
      return oracle_scorer(sampler);
    case SimArmSpec::Kind::Constant:
      return constant_scorer(mean_ctr);
    case SimArmSpec::Kind::Model:
      return [model](const ServingRequest& req, const std::vector<Campaign>& roster,
                     const std::vector<std::size_t>& eligible, std::vector<double>& out) {
        Tensor x({1, model->hyper().feature_dim}, req.features);
        ValueGraph g;
        std::vector<Value> logits = model->forward(g, x, /*training=*/false);
        std::vector<double> task_prob(model->num_tasks());
        for (std::size_t t = 0; t < model->num_tasks(); ++t) {
          task_prob[t] =
              ValueGraph::stable_sigmoid(g.value(logits[t])[0] / model->temperature(t));
        }
        out.resize(eligible.size());
        for (std::size_t k = 0; k < eligible.size(); ++k) {
          out[k] = task_prob[model->grouping().task_of(roster[eligible[k]].slot)];
        }
      };
  }
  throw std::logic_error("make_sim_scorer: bad arm kind");
}

// Deterministic estimate of the traffic's mean CTR for the constant scorer.
inline double estimate_mean_ctr(const GeneratorConfig& traffic, std::uint64_t seed) {
  GeneratorConfig probe = traffic;
  probe.n = 5000;
  probe.seed = seed;
  Dataset d = generate(probe);
  double s = 0.0;
  for (const Impression& i : d.impressions) s += i.true_ctr;
  return d.empty() ? 0.0 : s / static_cast<double>(d.size());
}

inline void run_simulation_seed(const ExperimentConfig& cfg, std::uint64_t run_seed,
                                const std::filesystem::path& out_root) {
  const SimSection& sim = *cfg.sim;
  SimConfig scfg;
  scfg.traffic = cfg.data;
  scfg.traffic.seed = detail::mix_seed(cfg.data.seed, run_seed);
  scfg.roster = sim.roster;
  scfg.steps = sim.steps;
  scfg.seed = detail::mix_seed(run_seed, 24);

  ImpressionSampler sampler(scfg.traffic);
  const double mean_ctr = estimate_mean_ctr(scfg.traffic, detail::mix_seed(run_seed, 25));

  std::vector<SimArm> arms;
  std::vector<std::shared_ptr<CamoeModel>> keep_alive;
  for (const SimArmSpec& spec : sim.arms) {
    std::shared_ptr<CamoeModel> model;
    if (spec.kind == SimArmSpec::Kind::Model) {
      const auto ckpt = out_root / "arms" / spec.model_arm / std::to_string(run_seed) /
                        "checkpoint.json";
      if (!std::filesystem::exists(ckpt)) {
        throw std::runtime_error("simulate: missing checkpoint " + ckpt.string() +
                                 " (train the arm first)");
      }
      model = std::make_shared<CamoeModel>(CamoeModel::load(ckpt.string()));
      keep_alive.push_back(model);
    }
    arms.push_back({spec.label(), make_sim_scorer(spec, sampler, mean_ctr, model)});
  }

  const auto dir = out_root / "sim" / std::to_string(run_seed);
  runfs::ensure_dir(dir);
  std::optional<std::ofstream> events;
  if (sim.event_log) events.emplace(dir / "events.jsonl");
  std::vector<SimReport> reports = simulate(arms, scfg, events ? &*events : nullptr);
  nlohmann::json j = nlohmann::json::array();
  for (const SimReport& r : reports) j.push_back(r.to_json());
  runfs::write_json(dir / "sim_report.json", j);
}

// -- end-to-end run ----------------------------------------------------------------

struct RunOutcome {
  std::vector<std::string> failures;  // "arm/seed: reason"
  AblationTable table;

  bool ok() const { return failures.empty(); }
};

inline RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::ostream& log = std::cerr) {
  const std::filesystem::path root(out_dir);
  runfs::ensure_dir(root);
  runfs::write_text(root / "config_snapshot.cfg", cfg.snapshot);

  RunOutcome outcome;
  std::map<std::string, std::map<std::uint64_t, SlotReport>> reports;

  for (std::uint64_t seed : cfg.seeds) {
    SeedData data = prepare_seed_data(cfg, seed);
    for (const ArmConfig& arm : cfg.arms) {
      const auto dir = root / "arms" / arm.name / std::to_string(seed);
      try {
        ArmSeedResult r = run_arm_seed(cfg, arm, seed, data, dir);
        reports[arm.name][seed] = std::move(r.report);
        log << "[camoe] arm " << arm.name << " seed " << seed << " done (train "
            << r.train_seconds << "s)\n";
      } catch (const std::exception& e) {
        outcome.failures.push_back(arm.name + "/" + std::to_string(seed) + ": " + e.what());
        log << "[camoe] arm " << arm.name << " seed " << seed << " FAILED: " << e.what() << "\n";
      }
    }
    if (cfg.sim) {
      try {
        run_simulation_seed(cfg, seed, root);
      } catch (const std::exception& e) {
        outcome.failures.push_back("sim/" + std::to_string(seed) + ": " + e.what());
        log << "[camoe] sim seed " << seed << " FAILED: " << e.what() << "\n";
      }
    }
  }

  outcome.table = collect_ablation(cfg, reports);
  runfs::write_json(root / "ablation_summary.json", outcome.table.to_json());

  runfs::ensure_dir(root / "tables");
  for (const TableConfig& t : cfg.tables) {
    write_table_csv(root / "tables" / (t.name + ".csv"), t, outcome.table);
  }

  // Masked-inference table: mean per-mask video deltas across seeds.
  if (!cfg.masked_eval_arm.empty()) {
    std::map<std::string, std::map<std::string, CellSeries>> rows;  // mask -> slot -> series
    std::vector<std::string> mask_order;
    for (std::uint64_t seed : cfg.seeds) {
      const auto path =
          root / "arms" / cfg.masked_eval_arm / std::to_string(seed) / "masked_eval.json";
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path);
      nlohmann::json j;
      in >> j;
      for (const auto& row : j) {
        const std::string mask = row.at("mask").get<std::string>();
        if (rows.find(mask) == rows.end()) mask_order.push_back(mask);
        for (const auto& [slot, delta] : row.at("video_auc_pr_pct_change").items()) {
          rows[mask][slot].per_seed.push_back(delta.get<double>());
        }
      }
    }
    if (!rows.empty()) {
      std::ofstream out(root / "tables" / "table7.csv");
      out << "mask";
      for (AdSlot s : kTableSlotOrder) {
        if (modality_of(s) == Modality::Video) out << ',' << slot_name(s);
      }
      out << "\n";
      for (const std::string& mask : mask_order) {
        out << mask;
        for (AdSlot s : kTableSlotOrder) {
          if (modality_of(s) != Modality::Video) continue;
          out << ',';
          auto it = rows[mask].find(slot_name(s));
          if (it != rows[mask].end()) {
            if (auto m = it->second.mean()) out << format_real(*m);
          }
        }
        out << "\n";
      }
    }
  }

  const std::vector<ObjectivePoint> points = ablation_objective_points(outcome.table, cfg);
  if (points.size() >= 1) {
    runfs::write_json(root / "pareto.json", pareto_report(points));
  }

  if (!outcome.failures.empty()) {
    std::string text;
    for (const std::string& f : outcome.failures) text += f + "\n";
    runfs::write_text(root / "failures.txt", text);
  }
  return outcome;
}

}  // namespace camoe
