// Copyright (c) 2026 the camoe-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace camoe {

// The seven ad placements. Display leavebehind cards fold into the audio
// modality because they accompany an already-served audio ad and are not
// billed as separate impressions.
enum class AdSlot {
  StreamAudio = 0,
  Podcast,
  StreamVideo,
  EmbeddedMusic,
  PodcastVideo,
  StreamAudioLeavebehind,
  PodcastLeavebehind,
};

inline constexpr std::size_t kSlotCount = 7;

inline constexpr std::array<AdSlot, kSlotCount> kAllSlots = {
    AdSlot::StreamAudio,           AdSlot::Podcast,
    AdSlot::StreamVideo,           AdSlot::EmbeddedMusic,
    AdSlot::PodcastVideo,          AdSlot::StreamAudioLeavebehind,
    AdSlot::PodcastLeavebehind,
};

enum class Modality { Audio = 0, Video = 1 };
enum class Content { Music = 0, Podcast = 1 };

inline Modality modality_of(AdSlot s) {
  switch (s) {
    case AdSlot::StreamVideo:
    case AdSlot::EmbeddedMusic:
    case AdSlot::PodcastVideo:
      return Modality::Video;
    default:
      return Modality::Audio;
  }
}

inline Content content_of(AdSlot s) {
  switch (s) {
    case AdSlot::StreamAudio:
    case AdSlot::StreamVideo:
    case AdSlot::EmbeddedMusic:
    case AdSlot::StreamAudioLeavebehind:
      return Content::Music;
    default:
      return Content::Podcast;
  }
}

// Leavebehind cards are on-screen by construction.
inline bool is_leavebehind(AdSlot s) {
  return s == AdSlot::StreamAudioLeavebehind || s == AdSlot::PodcastLeavebehind;
}

inline const std::string& slot_name(AdSlot s) {
  static const std::array<std::string, kSlotCount> names = {
      "StreamAudio",   "Podcast",        "StreamVideo",           "EmbeddedMusic",
      "PodcastVideo",  "StreamAudioLeavebehind",                  "PodcastLeavebehind"};
  return names[static_cast<std::size_t>(s)];
}

inline AdSlot parse_slot(const std::string& name) {
  for (AdSlot s : kAllSlots) {
    if (slot_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown slot \"" + name + "\"");
}

inline const std::string& modality_name(Modality m) {
  static const std::array<std::string, 2> names = {"audio", "video"};
  return names[static_cast<std::size_t>(m)];
}

}  // namespace camoe
