// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-modal impression generator. The regime it reproduces:
// audio-dominant slot inventory, a ~10x click-through gap between in-focus
// and out-of-focus impressions, and per-modality feature structure (linear
// plus a few pairwise crosses) for the model to discover.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "camoe/rng.hpp"
#include "camoe/slots.hpp"

namespace camoe {

struct Impression {
  std::vector<double> features;  // features[0] is the focus indicator
  AdSlot slot = AdSlot::StreamAudio;
  bool in_focus = false;
  int label = 0;
  double true_ctr = 0.0;  // generator-side ground truth, hidden from training
};

struct GeneratorConfig {
  std::size_t n = 100000;
  // Inventory shares; heavily favors StreamAudio.
  std::array<double, kSlotCount> slot_mix = {0.70, 0.10, 0.08, 0.04, 0.02, 0.04, 0.02};
  // Marginal CTR per slot (averaged over the slot's focus distribution).
  // Video slots run an order of magnitude above audio; leavebehind cards sit
  // above the in-focus audio level since they are always on screen.
  std::array<double, kSlotCount> base_ctr = {0.010, 0.010, 0.070, 0.070, 0.070, 0.060, 0.060};
  double focus_ctr_multiplier = 10.0;
  double out_of_focus_fraction = 0.7;
  std::size_t feature_dim = 16;
  // Standard deviation of the linear feature contribution to the CTR logit.
  double signal_strength = 0.5;
  // Pairwise feature crosses, as a fraction of signal_strength. Zeroing
  // signal_strength removes all feature influence.
  double interaction_ratio = 0.5;
  // Number of crossed feature pairs per modality.
  std::size_t cross_pairs = 4;
  double ctr_floor = 1e-5;
  double ctr_ceiling = 0.9;
  std::uint64_t seed = 1;

  void validate() const {
    double mix = 0.0;
    for (double p : slot_mix) {
      if (p < 0.0) throw std::invalid_argument("generator: negative slot_mix entry");
      mix += p;
    }
    if (std::abs(mix - 1.0) > 1e-9) {
      throw std::invalid_argument("generator: slot_mix sums to " + std::to_string(mix) +
                                  ", expected 1");
    }
    for (double c : base_ctr) {
      if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("generator: base_ctr outside (0,1)");
    }
    if (!(focus_ctr_multiplier > 0.0)) {
      throw std::invalid_argument("generator: focus_ctr_multiplier must be > 0");
    }
    if (out_of_focus_fraction < 0.0 || out_of_focus_fraction > 1.0) {
      throw std::invalid_argument("generator: out_of_focus_fraction outside [0,1]");
    }
    if (feature_dim < 1) throw std::invalid_argument("generator: feature_dim must be >= 1");
    if (!(ctr_floor > 0.0 && ctr_ceiling < 1.0 && ctr_floor < ctr_ceiling)) {
      throw std::invalid_argument("generator: bad ctr clamp bounds");
    }
  }
};

struct Dataset {
  std::vector<Impression> impressions;
  std::size_t feature_dim = 0;
  std::string provenance;

  std::size_t size() const { return impressions.size(); }
  bool empty() const { return impressions.empty(); }
};

namespace detail {
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t x = seed * 6364136223846793005ULL + tag * 1442695040888963407ULL +
                    0x9E3779B97F4A7C15ULL;
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  return x;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace detail

// The ground-truth click model shared by the dataset generator and the
// auction simulator. Structure (per-modality weights and feature crosses) is
// a deterministic function of the config seed.
class ImpressionSampler {
public:
  explicit ImpressionSampler(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(detail::mix_seed(cfg_.seed, 1));
    const std::size_t d = cfg_.feature_dim > 1 ? cfg_.feature_dim - 1 : 0;
    for (auto* w : {&w_audio_, &w_video_}) {
      w->assign(d, 0.0);
      double norm = 0.0;
      for (double& x : *w) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (double& x : *w) x *= cfg_.signal_strength / norm;
      }
    }
    // A handful of pairwise crosses per modality over the non-indicator dims.
    const std::size_t npairs = d >= 2 ? std::min(cfg_.cross_pairs, d * (d - 1) / 2) : 0;
    const double cross_scale =
        npairs > 0 ? cfg_.signal_strength * cfg_.interaction_ratio / std::sqrt(double(npairs)) : 0.0;
    for (auto* pairs : {&pairs_audio_, &pairs_video_}) {
      while (pairs->size() < npairs) {
        std::size_t i = rng.index(d), j = rng.index(d);
        if (i == j) continue;
        pairs->push_back({i, j, rng.bernoulli(0.5) ? cross_scale : -cross_scale});
      }
    }
    // Per-slot focus logits, chosen so that the slot's marginal CTR over its
    // focus distribution equals base_ctr and the in/out CTR ratio equals
    // focus_ctr_multiplier exactly (an additive log-odds shift would only
    // approximate the ratio at small CTRs).
    for (std::size_t s = 0; s < kSlotCount; ++s) {
      const double phi = in_focus_fraction(kAllSlots[s]);
      const double out_ctr =
          cfg_.base_ctr[s] / ((1.0 - phi) + phi * cfg_.focus_ctr_multiplier);
      const double in_ctr =
          std::min(out_ctr * cfg_.focus_ctr_multiplier, cfg_.ctr_ceiling);
      out_logit_[s] = detail::logit(std::min(out_ctr, cfg_.ctr_ceiling));
      in_logit_[s] = detail::logit(in_ctr);
    }
  }

  const GeneratorConfig& config() const { return cfg_; }

  double in_focus_fraction(AdSlot s) const {
    return is_leavebehind(s) ? 1.0 : 1.0 - cfg_.out_of_focus_fraction;
  }

  AdSlot sample_slot(Rng& rng) const {
    double u = rng.uniform();
    for (std::size_t s = 0; s + 1 < kSlotCount; ++s) {
      if (u < cfg_.slot_mix[s]) return kAllSlots[s];
      u -= cfg_.slot_mix[s];
    }
    return kAllSlots[kSlotCount - 1];
  }

  bool sample_focus(Rng& rng, AdSlot s) const {
    return is_leavebehind(s) || !rng.bernoulli(cfg_.out_of_focus_fraction);
  }

  std::vector<double> sample_features(Rng& rng, bool in_focus) const {
    std::vector<double> f(cfg_.feature_dim);
    f[0] = in_focus ? 1.0 : 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = rng.normal();
    return f;
  }

  // extra_logit carries per-campaign quality in the auction simulator.
  double true_ctr(AdSlot slot, bool in_focus, const std::vector<double>& features,
                  double extra_logit = 0.0) const {
    const std::size_t s = static_cast<std::size_t>(slot);
    double z = (in_focus ? in_logit_[s] : out_logit_[s]) + extra_logit;
    const bool video = modality_of(slot) == Modality::Video;
    const auto& w = video ? w_video_ : w_audio_;
    const auto& pairs = video ? pairs_video_ : pairs_audio_;
    for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * features[i + 1];
    for (const Cross& c : pairs) z += c.coef * features[c.i + 1] * features[c.j + 1];
    return std::min(std::max(detail::logistic(z), cfg_.ctr_floor), cfg_.ctr_ceiling);
  }

  Impression sample(Rng& rng) const {
    Impression imp;
    imp.slot = sample_slot(rng);
    imp.in_focus = sample_focus(rng, imp.slot);
    imp.features = sample_features(rng, imp.in_focus);
    imp.true_ctr = true_ctr(imp.slot, imp.in_focus, imp.features);
    imp.label = rng.bernoulli(imp.true_ctr) ? 1 : 0;
    return imp;
  }

private:
  struct Cross {
    std::size_t i, j;
    double coef;
  };

  GeneratorConfig cfg_;
  std::array<double, kSlotCount> out_logit_{};
  std::array<double, kSlotCount> in_logit_{};
  std::vector<double> w_audio_, w_video_;
  std::vector<Cross> pairs_audio_, pairs_video_;
};

inline Dataset generate(const GeneratorConfig& cfg) {
  ImpressionSampler sampler(cfg);
  Rng rng(detail::mix_seed(cfg.seed, 2));
  Dataset d;
  d.feature_dim = cfg.feature_dim;
  d.provenance = "generated(seed=" + std::to_string(cfg.seed) + ")";
  d.impressions.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) d.impressions.push_back(sampler.sample(rng));
  return d;
}

// Uniformly subsample the majority modality (without replacement) until the
// audio:video count ratio is at most target_ratio. Retained impressions are
// untouched and keep their original order.
inline Dataset downsample_majority(const Dataset& d, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio > 0.0)) {
    throw std::invalid_argument("downsample_majority: target_ratio must be > 0");
  }
  std::size_t n_audio = 0, n_video = 0;
  for (const Impression& imp : d.impressions) {
    (modality_of(imp.slot) == Modality::Audio ? n_audio : n_video)++;
  }
  if (n_video == 0) {
    throw std::invalid_argument(
        "downsample_majority: dataset has no video impressions; ratio undefined");
  }
  if (static_cast<double>(n_audio) <= target_ratio * static_cast<double>(n_video)) {
    return d;
  }
  const std::size_t keep =
      static_cast<std::size_t>(std::floor(target_ratio * static_cast<double>(n_video)));
  std::vector<std::size_t> audio_idx;
  audio_idx.reserve(n_audio);
  for (std::size_t i = 0; i < d.impressions.size(); ++i) {
    if (modality_of(d.impressions[i].slot) == Modality::Audio) audio_idx.push_back(i);
  }
  Rng rng(detail::mix_seed(seed, 3));
  std::vector<std::size_t> chosen = rng.sample_without_replacement(audio_idx.size(), keep);
  std::vector<char> keep_flag(d.impressions.size(), 0);
  for (std::size_t i = 0; i < d.impressions.size(); ++i) {
    if (modality_of(d.impressions[i].slot) == Modality::Video) keep_flag[i] = 1;
  }
  for (std::size_t c : chosen) keep_flag[audio_idx[c]] = 1;
  Dataset out;
  out.feature_dim = d.feature_dim;
  out.provenance = d.provenance + "+downsampled";
  for (std::size_t i = 0; i < d.impressions.size(); ++i) {
    if (keep_flag[i]) out.impressions.push_back(d.impressions[i]);
  }
  return out;
}

// Stratified-by-slot split into (train, heldout). Every slot present in the
// input contributes at least one impression to each side.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in (0,1)");
  }
  std::array<std::vector<std::size_t>, kSlotCount> by_slot;
  for (std::size_t i = 0; i < d.impressions.size(); ++i) {
    by_slot[static_cast<std::size_t>(d.impressions[i].slot)].push_back(i);
  }
  Rng rng(detail::mix_seed(seed, 4));
  std::vector<char> to_train(d.impressions.size(), 0);
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    auto& idx = by_slot[s];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw std::invalid_argument("split: slot " + slot_name(kAllSlots[s]) +
                                  " has fewer than 2 impressions");
    }
    rng.shuffle(idx);
    std::size_t take = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(idx.size())));
    take = std::min(std::max<std::size_t>(take, 1), idx.size() - 1);
    for (std::size_t k = 0; k < take; ++k) to_train[idx[k]] = 1;
  }
  Dataset train, heldout;
  train.feature_dim = heldout.feature_dim = d.feature_dim;
  train.provenance = d.provenance + "+train";
  heldout.provenance = d.provenance + "+heldout";
  for (std::size_t i = 0; i < d.impressions.size(); ++i) {
    (to_train[i] ? train : heldout).impressions.push_back(d.impressions[i]);
  }
  return {std::move(train), std::move(heldout)};
}

// -- CSV io -----------------------------------------------------------------
// Header: slot,focus,label,true_ctr,f0,...,f{d-1}. Reals carry 17 significant
// digits so a round trip is value-exact.

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << "slot,focus,label,true_ctr";
  for (std::size_t i = 0; i < d.feature_dim; ++i) out << ",f" << i;
  out << "\n";
  for (const Impression& imp : d.impressions) {
    out << slot_name(imp.slot) << ',' << (imp.in_focus ? "in" : "out") << ',' << imp.label << ','
        << format_real(imp.true_ctr);
    for (double f : imp.features) out << ',' << format_real(f);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

namespace detail {
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_real(const std::string& s, std::size_t lineno, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": bad " + what + " \"" +
                             s + "\"");
  }
}
}  // namespace detail

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = detail::split_line(line);
  if (header.size() < 4 || header[0] != "slot" || header[1] != "focus" || header[2] != "label" ||
      header[3] != "true_ctr") {
    throw std::runtime_error("load_csv: line 1: unexpected header");
  }
  const std::size_t d = header.size() - 4;
  for (std::size_t i = 0; i < d; ++i) {
    if (header[4 + i] != "f" + std::to_string(i)) {
      throw std::runtime_error("load_csv: line 1: unexpected feature column " + header[4 + i]);
    }
  }
  Dataset ds;
  ds.feature_dim = d;
  ds.provenance = path;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_line(line);
    if (f.size() != 4 + d) {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": expected " +
                               std::to_string(4 + d) + " fields, got " + std::to_string(f.size()));
    }
    Impression imp;
    try {
      imp.slot = parse_slot(f[0]);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": " + e.what());
    }
    if (f[1] == "in") {
      imp.in_focus = true;
    } else if (f[1] == "out") {
      imp.in_focus = false;
    } else {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": bad focus \"" +
                               f[1] + "\"");
    }
    if (f[2] == "0") {
      imp.label = 0;
    } else if (f[2] == "1") {
      imp.label = 1;
    } else {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": bad label \"" +
                               f[2] + "\"");
    }
    imp.true_ctr = detail::parse_real(f[3], lineno, "true_ctr");
    imp.features.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
      imp.features.push_back(detail::parse_real(f[4 + i], lineno, "feature"));
    }
    ds.impressions.push_back(std::move(imp));
  }
  return ds;
}

}  // namespace camoe
