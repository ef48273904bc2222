#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace slu {

// Canonical orders below double as tie-break orders: the lowest index wins.

enum class IntentType : std::uint8_t {
  kSetDestination,
  kSetRoute,
  kGoFaster,
  kGoSlower,
  kStop,
  kPark,
  kPullOver,
  kDropOff,
  kOpenDoor,
  kOther,
};
inline constexpr std::size_t kIntentCount = 10;

enum class SlotLabel : std::uint8_t {
  kLocation,
  kPositionDirection,
  kObject,
  kTimeGuidance,
  kPerson,
  kGestureGaze,
  kNone,
};
inline constexpr std::size_t kSlotCount = 7;

enum class KeywordLabel : std::uint8_t { kIntent, kNonIntent };
inline constexpr std::size_t kKeywordCount = 2;

inline constexpr std::array<std::string_view, kIntentCount> kIntentNames = {
    "SetDestination", "SetRoute", "GoFaster", "GoSlower", "Stop",
    "Park",           "PullOver", "DropOff",  "OpenDoor", "Other"};
inline constexpr std::array<std::string_view, kSlotCount> kSlotNames = {
    "Location", "PositionDirection", "Object", "TimeGuidance",
    "Person",   "GestureGaze",       "None"};
inline constexpr std::array<std::string_view, kKeywordCount> kKeywordNames = {"Intent",
                                                                               "NonIntent"};

inline std::string_view name(IntentType v) { return kIntentNames[static_cast<std::size_t>(v)]; }
inline std::string_view name(SlotLabel v) { return kSlotNames[static_cast<std::size_t>(v)]; }
inline std::string_view name(KeywordLabel v) {
  return kKeywordNames[static_cast<std::size_t>(v)];
}

inline std::size_t index_of(IntentType v) { return static_cast<std::size_t>(v); }
inline std::size_t index_of(SlotLabel v) { return static_cast<std::size_t>(v); }
inline std::size_t index_of(KeywordLabel v) { return static_cast<std::size_t>(v); }

inline IntentType intent_at(std::size_t i) { return static_cast<IntentType>(i); }
inline SlotLabel slot_at(std::size_t i) { return static_cast<SlotLabel>(i); }
inline KeywordLabel keyword_at(std::size_t i) { return static_cast<KeywordLabel>(i); }

template <std::size_t N>
std::optional<std::size_t> find_name(const std::array<std::string_view, N>& names,
                                     std::string_view text) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return i;
  }
  return std::nullopt;
}

inline std::optional<IntentType> parse_intent(std::string_view text) {
  if (auto i = find_name(kIntentNames, text)) return intent_at(*i);
  return std::nullopt;
}
inline std::optional<SlotLabel> parse_slot(std::string_view text) {
  if (auto i = find_name(kSlotNames, text)) return slot_at(*i);
  return std::nullopt;
}
inline std::optional<KeywordLabel> parse_keyword(std::string_view text) {
  if (auto i = find_name(kKeywordNames, text)) return keyword_at(*i);
  return std::nullopt;
}

inline bool is_salient(SlotLabel slot, KeywordLabel keyword) {
  return keyword == KeywordLabel::kIntent || slot != SlotLabel::kNone;
}

}  // namespace slu
