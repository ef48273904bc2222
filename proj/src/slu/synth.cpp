#include "slu/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "slu/embeddings.hpp"
#include "slu/error.hpp"
#include "slu/numerics.hpp"
#include "slu/resources.hpp"

namespace slu {
namespace {

struct SlotTag {
  std::string_view tag;
  SlotLabel slot;
};

constexpr std::array<SlotTag, 6> kSlotTags = {{
    {"LOC", SlotLabel::kLocation},
    {"POS", SlotLabel::kPositionDirection},
    {"OBJ", SlotLabel::kObject},
    {"TIME", SlotLabel::kTimeGuidance},
    {"PERSON", SlotLabel::kPerson},
    {"GESTURE", SlotLabel::kGestureGaze},
}};

[[noreturn]] void config_error(const std::string& source, const std::string& what) {
  fail(ErrorKind::kConfig, source + ": " + what);
}

PhraseList parse_phrases(const nlohmann::json& value, const std::string& source,
                         const std::string& what) {
  if (!value.is_array()) config_error(source, what + " must be an array of strings");
  PhraseList out;
  for (const auto& item : value) {
    if (!item.is_string()) config_error(source, what + " must be an array of strings");
    auto tokens = tokenize(item.get<std::string>());
    if (tokens.empty()) config_error(source, what + " contains an empty phrase");
    out.push_back(std::move(tokens));
  }
  return out;
}

UtteranceTemplate parse_template(const std::string& text, const std::string& source) {
  UtteranceTemplate t;
  t.source = text;
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    if (word.size() > 2 && word.front() == '<' && word.back() == '>') {
      const std::string inner = word.substr(1, word.size() - 2);
      const auto colon = inner.find(':');
      const std::string tag = inner.substr(0, colon);
      if (tag == "INTENT") {
        if (colon == std::string::npos || colon + 1 == inner.size()) {
          config_error(source, "keyword placeholder without a word in '" + text + "'");
        }
        for (auto& token : tokenize(inner.substr(colon + 1))) {
          t.pieces.push_back({TemplatePiece::Kind::kKeyword, std::move(token), SlotLabel::kNone});
        }
        continue;
      }
      bool matched = false;
      for (const auto& st : kSlotTags) {
        if (tag == st.tag) {
          t.pieces.push_back({TemplatePiece::Kind::kSlot, inner, st.slot});
          matched = true;
        }
      }
      if (!matched) config_error(source, "unknown placeholder <" + inner + "> in '" + text + "'");
      continue;
    }
    for (auto& token : tokenize(word)) {
      t.pieces.push_back({TemplatePiece::Kind::kWord, std::move(token), SlotLabel::kNone});
    }
  }
  if (t.pieces.empty()) config_error(source, "empty template");
  return t;
}

const std::vector<std::string>& pick(const PhraseList& list, SeededRng& rng) {
  return list[rng.index(list.size())];
}

}  // namespace

bool TemplateSet::covers_all_labels() const {
  std::array<bool, kSlotCount> seen{};
  seen[index_of(SlotLabel::kNone)] = true;
  for (const auto& per_intent : templates) {
    if (per_intent.empty()) return false;
    for (const auto& t : per_intent) {
      for (const auto& piece : t.pieces) {
        if (piece.kind == TemplatePiece::Kind::kSlot) seen[index_of(piece.slot)] = true;
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

TemplateSet parse_templates(std::string_view json_text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    config_error(source, std::string("malformed template config: ") + e.what());
  }
  if (!doc.is_object()) config_error(source, "template config must be an object");
  TemplateSet set;
  if (doc.contains("nonsalient_fraction")) {
    set.nonsalient_fraction = doc["nonsalient_fraction"].get<double>();
    if (!(set.nonsalient_fraction >= 0.0 && set.nonsalient_fraction < 1.0)) {
      config_error(source, "nonsalient_fraction must lie in [0, 1)");
    }
  }
  if (doc.contains("sessions")) {
    set.sessions = doc["sessions"].get<std::size_t>();
    if (set.sessions == 0) config_error(source, "sessions must be positive");
  }
  if (doc.contains("fillers")) {
    const auto& fillers = doc["fillers"];
    if (fillers.contains("prefix")) {
      set.prefix_fillers = parse_phrases(fillers["prefix"], source, "fillers.prefix");
    }
    if (fillers.contains("suffix")) {
      set.suffix_fillers = parse_phrases(fillers["suffix"], source, "fillers.suffix");
    }
  }
  if (doc.contains("lists")) {
    for (const auto& [key, value] : doc["lists"].items()) {
      set.word_lists[key] = parse_phrases(value, source, "lists." + key);
      if (set.word_lists[key].empty()) config_error(source, "word list " + key + " is empty");
    }
  }
  if (!doc.contains("intents") || !doc["intents"].is_object()) {
    config_error(source, "missing 'intents' object");
  }
  for (const auto& [key, value] : doc["intents"].items()) {
    auto intent = parse_intent(key);
    if (!intent) config_error(source, "unknown intent '" + key + "'");
    if (!value.is_array()) config_error(source, "intents." + key + " must be an array");
    for (const auto& item : value) {
      if (!item.is_string()) config_error(source, "intents." + key + " must hold strings");
      UtteranceTemplate t = parse_template(item.get<std::string>(), source);
      for (const auto& piece : t.pieces) {
        if (piece.kind == TemplatePiece::Kind::kSlot && !set.word_lists.count(piece.text)) {
          config_error(source, "template '" + t.source + "' uses undefined word list " +
                                   piece.text);
        }
      }
      set.templates[index_of(*intent)].push_back(std::move(t));
    }
  }
  return set;
}

TemplateSet load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open template config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_templates(buffer.str(), path);
}

const TemplateSet& default_templates() {
  static const TemplateSet set = parse_templates(resources::kDefaultTemplates, "<built-in templates>");
  return set;
}

IntentCounts default_intent_counts() {
  IntentCounts c{};
  c[index_of(IntentType::kStop)] = 317;
  c[index_of(IntentType::kPark)] = 450;
  c[index_of(IntentType::kPullOver)] = 295;
  c[index_of(IntentType::kDropOff)] = 281;
  c[index_of(IntentType::kSetDestination)] = 552;
  c[index_of(IntentType::kSetRoute)] = 676;
  c[index_of(IntentType::kGoFaster)] = 265;
  c[index_of(IntentType::kGoSlower)] = 238;
  c[index_of(IntentType::kOpenDoor)] = 142;
  c[index_of(IntentType::kOther)] = 202;
  return c;
}

IntentCounts scaled_intent_counts(std::size_t total) {
  const IntentCounts base = default_intent_counts();
  const double base_total = std::accumulate(base.begin(), base.end(), 0.0);
  IntentCounts out{};
  std::array<double, kIntentCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    const double exact = static_cast<double>(total) * static_cast<double>(base[i]) / base_total;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - std::floor(exact);
    assigned += out[i];
  }
  while (assigned < total) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kIntentCount; ++i) {
      if (remainder[i] > remainder[best]) best = i;
    }
    ++out[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return out;
}

Corpus synth_generate(const TemplateSet& templates, const IntentCounts& counts,
                      std::uint64_t seed) {
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    if (counts[i] > 0 && templates.templates[i].empty()) {
      fail(ErrorKind::kConfig, "no template for intent " + std::string(kIntentNames[i]));
    }
  }
  SeededRng rng(seed);
  const double q = templates.nonsalient_fraction;
  const double ratio = q / (1.0 - q);
  double carry = 0.0;
  Corpus corpus;
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    for (std::size_t n = 0; n < counts[i]; ++n) {
      const auto& tmpl = templates.templates[i][rng.index(templates.templates[i].size())];
      AnnotatedUtterance u;
      u.intent = intent_at(i);
      auto emit = [&u](const std::string& token, SlotLabel slot, KeywordLabel keyword) {
        u.tokens.push_back(token);
        u.slots.push_back(slot);
        u.keywords.push_back(keyword);
      };
      for (const auto& piece : tmpl.pieces) {
        switch (piece.kind) {
          case TemplatePiece::Kind::kWord:
            emit(piece.text, SlotLabel::kNone, KeywordLabel::kNonIntent);
            break;
          case TemplatePiece::Kind::kKeyword:
            emit(piece.text, SlotLabel::kNone, KeywordLabel::kIntent);
            break;
          case TemplatePiece::Kind::kSlot:
            for (const auto& token : pick(templates.word_lists.at(piece.text), rng)) {
              emit(token, piece.slot, KeywordLabel::kNonIntent);
            }
            break;
        }
      }
      std::size_t salient = 0;
      for (std::size_t t = 0; t < u.tokens.size(); ++t) {
        if (is_salient(u.slots[t], u.keywords[t])) ++salient;
      }
      const double want = ratio * static_cast<double>(salient) -
                          static_cast<double>(u.tokens.size() - salient) + carry;
      const auto fillers = static_cast<std::size_t>(std::max(0.0, std::round(want)));
      carry = want - static_cast<double>(fillers);
      std::vector<std::string> prefix, suffix;
      std::size_t added = 0;
      while (added < fillers) {
        const bool front = templates.suffix_fillers.empty() ||
                           (!templates.prefix_fillers.empty() && rng.bernoulli(0.6));
        const PhraseList& list = front ? templates.prefix_fillers : templates.suffix_fillers;
        if (list.empty()) break;
        const auto& phrase = pick(list, rng);
        if (phrase.size() > fillers - added) {
          // Too long for the remaining budget; fall back to its first word.
          (front ? prefix : suffix).push_back(phrase.front());
          ++added;
          continue;
        }
        auto& side = front ? prefix : suffix;
        side.insert(side.end(), phrase.begin(), phrase.end());
        added += phrase.size();
      }
      AnnotatedUtterance full;
      full.intent = u.intent;
      for (const auto& w : prefix) {
        full.tokens.push_back(w);
        full.slots.push_back(SlotLabel::kNone);
        full.keywords.push_back(KeywordLabel::kNonIntent);
      }
      full.tokens.insert(full.tokens.end(), u.tokens.begin(), u.tokens.end());
      full.slots.insert(full.slots.end(), u.slots.begin(), u.slots.end());
      full.keywords.insert(full.keywords.end(), u.keywords.begin(), u.keywords.end());
      for (const auto& w : suffix) {
        full.tokens.push_back(w);
        full.slots.push_back(SlotLabel::kNone);
        full.keywords.push_back(KeywordLabel::kNonIntent);
      }
      const std::size_t session = rng.index(templates.sessions);
      char id[16];
      std::snprintf(id, sizeof(id), "s%02zu", session + 1);
      full.session_id = id;
      full.passenger_mode =
          session < templates.sessions / 2 ? PassengerMode::kSingleton : PassengerMode::kDyad;
      full.channel = Channel::kTranscript;
      corpus.push_back(std::move(full));
    }
  }
  rng.shuffle(corpus);
  return corpus;
}

}  // namespace slu
