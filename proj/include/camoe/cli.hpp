// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Subcommands compose the library operations:
//
//   generate   write a synthetic impression CSV
//   train      train one arm for one seed, save the checkpoint
//   calibrate  fit per-task temperatures on an existing checkpoint
//   evaluate   per-slot report card for a checkpoint on the held-out split
//   simulate   auction simulation for the configured scorer arms
//   ablate     the full arms x seeds matrix with tables and Pareto report
//   pareto     Pareto front over an existing ablation summary
//
// Exit codes: 0 success, 2 configuration/usage error, 1 run failure.

#pragma once

#include <CLI11.hpp>
#include <iostream>

#include "camoe/runner.hpp"

namespace camoe {

namespace clidetail {

inline ExperimentConfig load_config(const std::string& path) {
  return ExperimentConfig::parse(IniFile::parse_file(path));
}

inline const ArmConfig& pick_arm(const ExperimentConfig& cfg, const std::string& name) {
  return name.empty() ? cfg.arms.front() : cfg.arm(name);
}

inline std::uint64_t pick_seed(const ExperimentConfig& cfg, std::int64_t seed_flag) {
  return seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : cfg.seeds.front();
}

inline void print_slot_report(const SlotReport& r, std::ostream& out) {
  out << "slot,count,positives,auc_pr,ece,auc_pr_pct_change\n";
  for (AdSlot s : kTableSlotOrder) {
    auto it = r.cells.find(slot_name(s));
    if (it == r.cells.end()) continue;
    const SlotCell& c = it->second;
    out << slot_name(s) << ',' << c.count << ',' << c.positives << ','
        << (c.auc_pr ? format_real(*c.auc_pr) : "") << ','
        << (c.ece ? format_real(*c.ece) : "") << ','
        << (c.auc_pr_pct_change ? format_real(*c.auc_pr_pct_change) : "") << "\n";
  }
}

}  // namespace clidetail

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"CAMoE lab: multi-task CTR models, calibration and auction simulation"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", arm_name, checkpoint, baseline_path, reports_dir,
              out_file;
  std::int64_t seed_flag = -1;
  bool events = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config file (key = value)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", seed_flag, "seed override (default: first of [experiment] seeds)");
    cmd->add_option("--out", out_dir, "output directory (default: out)");
  };

  CLI::App* c_generate = app.add_subcommand("generate", "write a synthetic impression CSV");
  add_common(c_generate, true);

  CLI::App* c_train = app.add_subcommand("train", "train one arm for one seed");
  add_common(c_train, true);
  c_train->add_option("--arm", arm_name, "arm name (default: first configured arm)");

  CLI::App* c_calibrate =
      app.add_subcommand("calibrate", "fit per-task temperatures on a checkpoint");
  add_common(c_calibrate, true);
  c_calibrate->add_option("--checkpoint", checkpoint, "checkpoint to calibrate")->required();

  CLI::App* c_evaluate = app.add_subcommand("evaluate", "per-slot report for a checkpoint");
  add_common(c_evaluate, true);
  c_evaluate->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
  c_evaluate->add_option("--baseline", baseline_path,
                         "slot_report.json to compute %-changes against");

  CLI::App* c_simulate = app.add_subcommand("simulate", "run the configured auction simulation");
  add_common(c_simulate, true);
  c_simulate->add_flag("--events", events, "also write a per-impression events.jsonl");

  CLI::App* c_ablate = app.add_subcommand("ablate", "run the full ablation matrix");
  add_common(c_ablate, true);

  CLI::App* c_pareto = app.add_subcommand("pareto", "Pareto front from an ablation summary");
  c_pareto->add_option("--reports", reports_dir, "ablation output directory")->required();
  c_pareto->add_option("--out", out_file, "output JSON path (default: <reports>/pareto.json)");

  std::vector<const char*> argv;
  argv.push_back("camoe");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, returns 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and usage hint
    return 2;
  }

  try {
    if (app.got_subcommand(c_generate)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      GeneratorConfig gen = cfg.data;
      if (seed_flag >= 0) gen.seed = static_cast<std::uint64_t>(seed_flag);
      Dataset d = generate(gen);
      runfs::ensure_dir(out_dir);
      const std::string path = (std::filesystem::path(out_dir) / "dataset.csv").string();
      save_csv(d, path);
      std::cout << "wrote " << d.size() << " impressions to " << path << "\n";
      return 0;
    }

    if (app.got_subcommand(c_train)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      const ArmConfig& arm = clidetail::pick_arm(cfg, arm_name);
      const std::uint64_t seed = clidetail::pick_seed(cfg, seed_flag);
      SeedData data = prepare_seed_data(cfg, seed);
      CamoeModel model =
          CamoeModel::build(TaskGrouping::make(arm.grouping), cfg.hyper, arm.experts,
                            detail::mix_seed(seed, arm_tag(arm.name)));
      LossConfig loss;
      loss.kind = arm.effective_loss();
      loss.lambdas = arm.lambdas;
      loss.focal_gamma = arm.focal_gamma;
      loss.weight_positive = arm.weight_positive;
      loss.weight_negative = arm.weight_negative;
      loss.optimizer = cfg.optimizer;
      loss.optimizer.seed = detail::mix_seed(seed, 23);
      std::cout << "training arm " << arm.name << " seed " << seed << " ("
                << model.parameter_count() << " parameters, " << data.fit.size()
                << " fit impressions)\n";
      TrainReport report = train(model, data.fit, loss, &data.calibration);
      const auto dir =
          std::filesystem::path(out_dir) / "arms" / arm.name / std::to_string(seed);
      runfs::ensure_dir(dir);
      model.save((dir / "checkpoint.json").string());
      {
        std::ofstream trout(dir / "train_report.jsonl");
        report.to_jsonl(trout);
      }
      std::cout << "best epoch " << report.best_epoch << ", wall " << report.wall_seconds
                << "s, checkpoint at " << (dir / "checkpoint.json").string() << "\n";
      return 0;
    }

    if (app.got_subcommand(c_calibrate)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      const std::uint64_t seed = clidetail::pick_seed(cfg, seed_flag);
      CamoeModel model = CamoeModel::load(checkpoint);
      SeedData data = prepare_seed_data(cfg, seed);
      std::vector<CalibrationHead> heads = calibrate_model(model, data.calibration);
      model.save(checkpoint);
      runfs::ensure_dir(out_dir);
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
          save_reliability_csv(
              probs, labels,
              (std::filesystem::path(out_dir) /
               ("reliability_" + model.grouping().tasks[t].name + ".csv"))
                  .string());
        }
        std::cout << "task " << model.grouping().tasks[t].name << ": T = "
                  << heads[t].temperature << " (nll " << heads[t].final_nll << ")\n";
      }
      return 0;
    }

    if (app.got_subcommand(c_evaluate)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      const std::uint64_t seed = clidetail::pick_seed(cfg, seed_flag);
      CamoeModel model = CamoeModel::load(checkpoint);
      SeedData data = prepare_seed_data(cfg, seed);
      std::optional<SlotReport> baseline;
      if (!baseline_path.empty()) {
        std::ifstream in(baseline_path);
        if (!in) throw ConfigError("config: cannot open baseline report " + baseline_path);
        nlohmann::json j;
        in >> j;
        baseline = SlotReport::from_json(j);
      }
      SlotReport report = evaluate(model, data.heldout, baseline ? &*baseline : nullptr,
                                   checkpoint + "@" + std::to_string(seed));
      runfs::ensure_dir(out_dir);
      runfs::write_json(std::filesystem::path(out_dir) / "slot_report.json", report.to_json());
      clidetail::print_slot_report(report, std::cout);
      return 0;
    }

    if (app.got_subcommand(c_simulate)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      if (!cfg.sim) throw ConfigError("config: simulate requires a [simulate] section");
      if (events) cfg.sim->event_log = true;
      const std::uint64_t seed = clidetail::pick_seed(cfg, seed_flag);
      run_simulation_seed(cfg, seed, std::filesystem::path(out_dir));
      const auto path =
          std::filesystem::path(out_dir) / "sim" / std::to_string(seed) / "sim_report.json";
      std::ifstream in(path);
      std::cout << in.rdbuf();
      return 0;
    }

    if (app.got_subcommand(c_ablate)) {
      ExperimentConfig cfg = clidetail::load_config(config_path);
      if (seed_flag >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_flag)};
      RunOutcome outcome = run_experiment(cfg, out_dir);
      std::cout << "ablation complete: " << cfg.arms.size() << " arms x " << cfg.seeds.size()
                << " seeds, artifacts under " << out_dir << "\n";
      if (!outcome.ok()) {
        for (const std::string& f : outcome.failures) std::cerr << "failed: " << f << "\n";
        return 1;
      }
      return 0;
    }

    if (app.got_subcommand(c_pareto)) {
      const auto summary_path =
          std::filesystem::path(reports_dir) / "ablation_summary.json";
      std::ifstream in(summary_path);
      if (!in) throw ConfigError("config: cannot open " + summary_path.string());
      nlohmann::json j;
      in >> j;
      std::vector<ObjectivePoint> points;
      if (j.contains("auc_pr_pct_change")) {
        for (const auto& [armname, slots] : j.at("auc_pr_pct_change").items()) {
          if (!slots.contains("StreamAudio") || !slots.contains("StreamVideo")) continue;
          if (!slots.at("StreamAudio").contains("mean") ||
              !slots.at("StreamVideo").contains("mean")) {
            continue;
          }
          ObjectivePoint p;
          p.label = armname;
          p.coordinates["delta_auc_pr_stream_audio"] =
              slots.at("StreamAudio").at("mean").get<double>();
          p.coordinates["delta_auc_pr_stream_video"] =
              slots.at("StreamVideo").at("mean").get<double>();
          points.push_back(std::move(p));
        }
      }
      if (points.empty()) {
        throw std::runtime_error("pareto: no arms with StreamAudio/StreamVideo deltas in " +
                                 summary_path.string());
      }
      nlohmann::json report = pareto_report(points);
      const std::string out_path =
          out_file.empty() ? (std::filesystem::path(reports_dir) / "pareto.json").string()
                           : out_file;
      runfs::write_json(out_path, report);
      std::cout << report.dump(1) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace camoe
