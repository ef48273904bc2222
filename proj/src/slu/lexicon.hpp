#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slu/taxonomy.hpp"

namespace slu {

// Which evidence the rule mapper may use.
//   0, 1: intent keywords only
//   2:    keywords plus PositionDirection slot rules
//   3:    keywords plus every slot rule
enum class RuleVariant { kKeywordsOnly, kKeywordsAndDirection, kKeywordsAndSlots };

struct SlotRule {
  SlotLabel slot = SlotLabel::kNone;
  std::optional<std::string> token;  // restricts the rule to one slot word
  IntentType intent = IntentType::kOther;
  double weight = 1.0;
};

struct RuleLexicon {
  std::vector<IntentType> priority;  // tie-break order, all ten intents
  std::map<std::string, std::vector<std::pair<IntentType, double>>> keyword_votes;
  std::vector<SlotRule> slot_rules;

  // Config error unless priority is a permutation of all intents, weights are
  // finite and positive, and every intent can receive a vote.
  void validate(const std::string& source) const;
};

RuleLexicon parse_lexicon(std::string_view json_text, const std::string& source);
RuleLexicon load_lexicon(const std::string& path);
std::string lexicon_to_json(const RuleLexicon& lexicon);
const RuleLexicon& default_lexicon();

using SlotMention = std::pair<std::string, SlotLabel>;

// Every keyword occurrence casts its votes; each applicable slot rule fires at
// most once when a matching mention is present. Highest total wins, ties go to
// the earliest intent in `priority`, and no votes at all means Other.
IntentType rule_map(const RuleLexicon& lexicon, std::span<const std::string> keywords,
                    std::span<const SlotMention> slots, RuleVariant variant);

}  // namespace slu
