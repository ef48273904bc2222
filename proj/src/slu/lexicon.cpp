#include "slu/lexicon.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slu/error.hpp"
#include "slu/resources.hpp"

namespace slu {
namespace {

[[noreturn]] void config_error(const std::string& source, const std::string& what) {
  fail(ErrorKind::kConfig, source + ": " + what);
}

IntentType intent_field(const nlohmann::json& value, const std::string& source) {
  if (!value.is_string()) config_error(source, "intent names must be strings");
  auto intent = parse_intent(value.get<std::string>());
  if (!intent) config_error(source, "unknown intent '" + value.get<std::string>() + "'");
  return *intent;
}

double weight_field(const nlohmann::json& value, const std::string& source) {
  if (!value.is_number()) config_error(source, "weights must be numbers");
  return value.get<double>();
}

}  // namespace

void RuleLexicon::validate(const std::string& source) const {
  std::array<bool, kIntentCount> listed{};
  for (IntentType t : priority) {
    if (listed[index_of(t)]) config_error(source, "intent listed twice in priority");
    listed[index_of(t)] = true;
  }
  if (priority.size() != kIntentCount) {
    config_error(source, "priority must list all " + std::to_string(kIntentCount) + " intents");
  }
  std::array<bool, kIntentCount> reachable{};
  reachable[index_of(IntentType::kOther)] = true;
  auto check_weight = [&](double w) {
    if (!std::isfinite(w) || w <= 0.0) config_error(source, "weights must be finite and positive");
  };
  for (const auto& [word, votes] : keyword_votes) {
    for (const auto& [intent, w] : votes) {
      check_weight(w);
      reachable[index_of(intent)] = true;
    }
  }
  for (const auto& rule : slot_rules) {
    check_weight(rule.weight);
    if (rule.slot == SlotLabel::kNone) config_error(source, "slot rules cannot target None");
    reachable[index_of(rule.intent)] = true;
  }
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    if (!reachable[i]) {
      config_error(source, "no rule votes for intent " + std::string(kIntentNames[i]));
    }
  }
}

RuleLexicon parse_lexicon(std::string_view json_text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    config_error(source, std::string("malformed lexicon: ") + e.what());
  }
  if (!doc.is_object()) config_error(source, "lexicon must be an object");
  RuleLexicon lex;
  if (!doc.contains("priority") || !doc["priority"].is_array()) {
    config_error(source, "missing 'priority' array");
  }
  for (const auto& item : doc["priority"]) lex.priority.push_back(intent_field(item, source));
  if (doc.contains("keywords")) {
    for (const auto& [word, votes] : doc["keywords"].items()) {
      if (!votes.is_object()) config_error(source, "keywords." + word + " must be an object");
      auto& list = lex.keyword_votes[word];
      for (const auto& [intent, weight] : votes.items()) {
        list.emplace_back(intent_field(intent, source), weight_field(weight, source));
      }
      std::sort(list.begin(), list.end());
    }
  }
  if (doc.contains("slot_rules")) {
    for (const auto& item : doc["slot_rules"]) {
      if (!item.is_object() || !item.contains("slot") || !item.contains("intent")) {
        config_error(source, "slot rules need 'slot' and 'intent'");
      }
      SlotRule rule;
      auto slot = parse_slot(item["slot"].get<std::string>());
      if (!slot) config_error(source, "unknown slot '" + item["slot"].get<std::string>() + "'");
      rule.slot = *slot;
      rule.intent = intent_field(item["intent"], source);
      if (item.contains("token")) rule.token = item["token"].get<std::string>();
      if (item.contains("weight")) rule.weight = weight_field(item["weight"], source);
      lex.slot_rules.push_back(std::move(rule));
    }
  }
  lex.validate(source);
  return lex;
}

RuleLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open lexicon: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_lexicon(buffer.str(), path);
}

std::string lexicon_to_json(const RuleLexicon& lexicon) {
  nlohmann::json doc;
  doc["priority"] = nlohmann::json::array();
  for (IntentType t : lexicon.priority) doc["priority"].push_back(name(t));
  doc["keywords"] = nlohmann::json::object();
  for (const auto& [word, votes] : lexicon.keyword_votes) {
    auto& entry = doc["keywords"][word] = nlohmann::json::object();
    for (const auto& [intent, w] : votes) entry[std::string(name(intent))] = w;
  }
  doc["slot_rules"] = nlohmann::json::array();
  for (const auto& rule : lexicon.slot_rules) {
    nlohmann::json r;
    r["slot"] = name(rule.slot);
    if (rule.token) r["token"] = *rule.token;
    r["intent"] = name(rule.intent);
    r["weight"] = rule.weight;
    doc["slot_rules"].push_back(std::move(r));
  }
  return doc.dump();
}

const RuleLexicon& default_lexicon() {
  static const RuleLexicon lex = parse_lexicon(resources::kDefaultLexicon, "<built-in lexicon>");
  return lex;
}

IntentType rule_map(const RuleLexicon& lexicon, std::span<const std::string> keywords,
                    std::span<const SlotMention> slots, RuleVariant variant) {
  std::array<double, kIntentCount> votes{};
  bool any = false;
  for (const auto& word : keywords) {
    auto it = lexicon.keyword_votes.find(word);
    if (it == lexicon.keyword_votes.end()) continue;
    for (const auto& [intent, w] : it->second) {
      votes[index_of(intent)] += w;
      any = true;
    }
  }
  if (variant != RuleVariant::kKeywordsOnly) {
    for (const auto& rule : lexicon.slot_rules) {
      if (variant == RuleVariant::kKeywordsAndDirection &&
          rule.slot != SlotLabel::kPositionDirection) {
        continue;
      }
      const bool present = std::any_of(slots.begin(), slots.end(), [&](const SlotMention& m) {
        return m.second == rule.slot && (!rule.token || m.first == *rule.token);
      });
      if (present) {
        votes[index_of(rule.intent)] += rule.weight;
        any = true;
      }
    }
  }
  if (!any) return IntentType::kOther;
  IntentType best = lexicon.priority.front();
  for (IntentType t : lexicon.priority) {
    if (votes[index_of(t)] > votes[index_of(best)]) best = t;
  }
  return best;
}

}  // namespace slu
