// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale ad ranking pipeline: final-bid computation from pCTR, pacing and
// trailing performance; generalized second-price ranking per modality; focus
// routed pod serving (in-focus -> video, out-of-focus -> audio); and a traffic
// simulator measuring CTR and eCPC per arm under identical request streams
// with fully independent per-arm state.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoe/datagen.hpp"
#include "camoe/rng.hpp"
#include "camoe/slots.hpp"

namespace camoe {

inline constexpr std::int64_t kUnlimitedBudget = std::numeric_limits<std::int64_t>::max() / 4;

struct Campaign {
  std::string id;
  AdSlot slot = AdSlot::StreamAudio;  // creative placement; modality derives from it
  std::int64_t max_bid = 0;           // micro-currency
  double pacing = 0.0;                // p >= 0
  double trailing_ctr = 0.0;          // b in (0,1], EMA over served impressions
  std::int64_t budget = kUnlimitedBudget;
  double quality_logit = 0.0;  // ground-truth creative quality, visible to the oracle only

  Modality modality() const { return modality_of(slot); }
};

// Final bid = min(ceil((o / (1+p)) * (c / b)), o), integer micro-currency.
inline std::int64_t compute_bid(std::int64_t max_bid, double pacing, double pctr,
                                double trailing_ctr) {
  if (max_bid <= 0) throw std::invalid_argument("compute_bid: max bid must be > 0");
  if (pacing < 0.0) throw std::invalid_argument("compute_bid: pacing must be >= 0");
  if (!(trailing_ctr > 0.0)) {
    throw std::invalid_argument("compute_bid: trailing CTR must be > 0 (seed it with a prior)");
  }
  if (!(pctr >= 0.0 && pctr <= 1.0)) {
    throw std::invalid_argument("compute_bid: pCTR outside [0,1]");
  }
  const double raw =
      (static_cast<double>(max_bid) / (1.0 + pacing)) * (pctr / trailing_ctr);
  const double ceiled = std::ceil(raw);
  if (ceiled >= static_cast<double>(max_bid)) return max_bid;
  return static_cast<std::int64_t>(ceiled);
}

struct RankedBid {
  std::string campaign;
  std::int64_t bid = 0;
};

struct AuctionOutcome {
  std::vector<RankedBid> ranked;  // non-increasing bid, ties by campaign id
  std::string winner;
  std::int64_t price = 0;  // GSP: second-highest bid, or the reserve when alone
};

inline AuctionOutcome run_auction(std::vector<RankedBid> bids, std::int64_t reserve_price = 1) {
  if (bids.empty()) throw std::invalid_argument("run_auction: no bids");
  std::sort(bids.begin(), bids.end(), [](const RankedBid& a, const RankedBid& b) {
    if (a.bid != b.bid) return a.bid > b.bid;
    return a.campaign < b.campaign;
  });
  AuctionOutcome out;
  out.winner = bids[0].campaign;
  // The reserve never charges past the winner's own bid.
  out.price = bids.size() > 1 ? bids[1].bid : std::min(reserve_price, bids[0].bid);
  out.ranked = std::move(bids);
  return out;
}

struct ServingRequest {
  std::vector<double> features;
  bool in_focus = false;
  std::vector<std::size_t> eligible;  // roster indices that passed targeting
};

struct ServeDecision {
  bool filled = false;
  Modality modality = Modality::Audio;
  const AuctionOutcome* pod = nullptr;
};

// In-focus requests take the video pod (the superpod); out-of-focus requests
// take the audio pod. A missing required pod is a counted no-fill, not an
// error.
inline ServeDecision serve(const ServingRequest& request, const AuctionOutcome* audio_pod,
                           const AuctionOutcome* video_pod) {
  ServeDecision d;
  d.modality = request.in_focus ? Modality::Video : Modality::Audio;
  d.pod = request.in_focus ? video_pod : audio_pod;
  d.filled = d.pod != nullptr;
  return d;
}

// -- simulation ---------------------------------------------------------------

// Scores every listed campaign for one request; out_pctr is index-aligned
// with the campaigns argument.
using ArmScorer = std::function<void(const ServingRequest&, const std::vector<Campaign>&,
                                     const std::vector<std::size_t>&, std::vector<double>&)>;

struct SimArm {
  std::string name;
  ArmScorer score;
};

struct RosterConfig {
  std::size_t audio_campaigns = 8;
  std::size_t video_campaigns = 6;
  std::int64_t min_max_bid = 100;
  std::int64_t max_max_bid = 1000;
  double min_pacing = 0.0;
  double max_pacing = 1.0;
  double quality_sd = 0.7;
  std::int64_t budget = kUnlimitedBudget;
};

struct SimConfig {
  GeneratorConfig traffic;
  RosterConfig roster;
  std::size_t steps = 10000;
  std::uint64_t seed = 1;
  std::int64_t reserve_price = 1;
  double ema_half_life = 500.0;  // in served impressions per campaign
};

// Deterministic roster; trailing CTRs are seeded with the slot's configured
// marginal CTR so the bid formula never divides by zero at cold start.
inline std::vector<Campaign> make_roster(const SimConfig& cfg) {
  Rng rng(detail::mix_seed(cfg.seed, 10));
  std::vector<Campaign> roster;
  const std::array<AdSlot, 2> audio_slots = {AdSlot::StreamAudio, AdSlot::Podcast};
  const std::array<AdSlot, 2> video_slots = {AdSlot::StreamVideo, AdSlot::PodcastVideo};
  auto add = [&](AdSlot slot, std::size_t i, char tag) {
    Campaign c;
    c.id = std::string(1, tag) + (i < 10 ? "0" : "") + std::to_string(i);
    c.slot = slot;
    c.max_bid = cfg.roster.min_max_bid +
                static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(
                    cfg.roster.max_max_bid - cfg.roster.min_max_bid + 1)));
    c.pacing = rng.uniform(cfg.roster.min_pacing, cfg.roster.max_pacing);
    c.quality_logit = rng.normal(0.0, cfg.roster.quality_sd);
    c.trailing_ctr = cfg.traffic.base_ctr[static_cast<std::size_t>(slot)];
    c.budget = cfg.roster.budget;
    roster.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < cfg.roster.audio_campaigns; ++i) {
    add(audio_slots[i % audio_slots.size()], i, 'a');
  }
  for (std::size_t i = 0; i < cfg.roster.video_campaigns; ++i) {
    add(video_slots[i % video_slots.size()], i, 'v');
  }
  return roster;
}

struct ModalityStats {
  std::size_t impressions = 0;
  std::size_t clicks = 0;
  std::int64_t spend = 0;
  std::size_t no_fill = 0;
  double true_ctr_sum = 0.0;  // of served impressions

  double ctr() const {
    return impressions ? static_cast<double>(clicks) / static_cast<double>(impressions) : 0.0;
  }
  std::optional<double> ecpc() const {
    if (clicks == 0) return std::nullopt;
    return static_cast<double>(spend) / static_cast<double>(clicks);
  }
};

struct SimReport {
  std::string arm;
  ModalityStats audio;
  ModalityStats video;

  const ModalityStats& of(Modality m) const { return m == Modality::Audio ? audio : video; }
  ModalityStats& of(Modality m) { return m == Modality::Audio ? audio : video; }

  nlohmann::json to_json() const {
    auto stats = [](const ModalityStats& s) {
      nlohmann::json j;
      j["impressions"] = s.impressions;
      j["clicks"] = s.clicks;
      j["spend"] = s.spend;
      j["no_fill"] = s.no_fill;
      j["ctr"] = s.ctr();
      if (auto e = s.ecpc()) j["ecpc"] = *e;
      j["mean_true_ctr"] =
          s.impressions ? s.true_ctr_sum / static_cast<double>(s.impressions) : 0.0;
      return j;
    };
    nlohmann::json j;
    j["arm"] = arm;
    j["audio"] = stats(audio);
    j["video"] = stats(video);
    return j;
  }
};

// Built-in scorers.
inline ArmScorer oracle_scorer(const ImpressionSampler& sampler) {
  return [&sampler](const ServingRequest& req, const std::vector<Campaign>& roster,
                    const std::vector<std::size_t>& eligible, std::vector<double>& out) {
    out.resize(eligible.size());
    for (std::size_t k = 0; k < eligible.size(); ++k) {
      const Campaign& c = roster[eligible[k]];
      out[k] = sampler.true_ctr(c.slot, req.in_focus, req.features, c.quality_logit);
    }
  };
}

inline ArmScorer constant_scorer(double pctr) {
  return [pctr](const ServingRequest&, const std::vector<Campaign>&,
                const std::vector<std::size_t>& eligible, std::vector<double>& out) {
    out.assign(eligible.size(), pctr);
  };
}

// Shared-traffic simulation: each step draws one request plus one click coin
// from the common stream, then every arm runs its own auctions against its own
// roster copy. Arms cannot influence each other; the only coupling is the
// shared request sequence.
inline std::vector<SimReport> simulate(const std::vector<SimArm>& arms, const SimConfig& cfg,
                                       std::ostream* event_log = nullptr) {
  if (arms.empty()) throw std::invalid_argument("simulate: need at least one arm");
  ImpressionSampler sampler(cfg.traffic);
  const std::vector<Campaign> base_roster = make_roster(cfg);

  std::vector<std::vector<Campaign>> rosters(arms.size(), base_roster);
  std::vector<SimReport> reports(arms.size());
  for (std::size_t a = 0; a < arms.size(); ++a) reports[a].arm = arms[a].name;

  const double ema_alpha = 1.0 - std::pow(0.5, 1.0 / cfg.ema_half_life);
  Rng traffic(detail::mix_seed(cfg.seed, 11));
  std::vector<double> pctr;
  std::vector<RankedBid> audio_bids, video_bids;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ServingRequest req;
    req.in_focus = !traffic.bernoulli(cfg.traffic.out_of_focus_fraction);
    req.features = sampler.sample_features(traffic, req.in_focus);
    const double click_coin = traffic.uniform();

    for (std::size_t a = 0; a < arms.size(); ++a) {
      std::vector<Campaign>& roster = rosters[a];
      req.eligible.clear();
      for (std::size_t i = 0; i < roster.size(); ++i) {
        if (roster[i].budget > 0) req.eligible.push_back(i);
      }
      arms[a].score(req, roster, req.eligible, pctr);
      if (pctr.size() != req.eligible.size()) {
        throw std::runtime_error("simulate: arm " + arms[a].name +
                                 " returned a short score vector at step " + std::to_string(step));
      }

      audio_bids.clear();
      video_bids.clear();
      for (std::size_t k = 0; k < req.eligible.size(); ++k) {
        const Campaign& c = roster[req.eligible[k]];
        if (!std::isfinite(pctr[k])) {
          throw std::runtime_error("simulate: non-finite pCTR from arm " + arms[a].name +
                                   " at step " + std::to_string(step));
        }
        const double clamped = std::min(std::max(pctr[k], 0.0), 1.0);
        const RankedBid bid{c.id, compute_bid(c.max_bid, c.pacing, clamped, c.trailing_ctr)};
        (c.modality() == Modality::Audio ? audio_bids : video_bids).push_back(bid);
      }

      std::optional<AuctionOutcome> audio_pod, video_pod;
      if (!audio_bids.empty()) audio_pod = run_auction(audio_bids, cfg.reserve_price);
      if (!video_bids.empty()) video_pod = run_auction(video_bids, cfg.reserve_price);

      const ServeDecision decision =
          serve(req, audio_pod ? &*audio_pod : nullptr, video_pod ? &*video_pod : nullptr);
      ModalityStats& stats = reports[a].of(decision.modality);
      if (!decision.filled) {
        stats.no_fill++;
        continue;
      }

      Campaign* winner = nullptr;
      for (Campaign& c : roster) {
        if (c.id == decision.pod->winner) {
          winner = &c;
          break;
        }
      }
      const double p = sampler.true_ctr(winner->slot, req.in_focus, req.features,
                                        winner->quality_logit);
      const bool click = click_coin < p;
      stats.impressions++;
      stats.true_ctr_sum += p;
      if (click) {
        stats.clicks++;
        stats.spend += decision.pod->price;
        winner->budget -= decision.pod->price;  // click-billed campaigns only
      }
      winner->trailing_ctr =
          (1.0 - ema_alpha) * winner->trailing_ctr + ema_alpha * (click ? 1.0 : 0.0);

      if (event_log) {
        nlohmann::json e;
        e["step"] = step;
        e["arm"] = arms[a].name;
        e["focus"] = req.in_focus ? "in" : "out";
        e["slot"] = slot_name(winner->slot);
        e["winner"] = winner->id;
        e["bid"] = decision.pod->ranked[0].bid;
        e["price"] = decision.pod->price;
        e["click"] = click ? 1 : 0;
        (*event_log) << e.dump() << "\n";
      }
    }
  }
  return reports;
}

}  // namespace camoe
