#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "slu/corpus.hpp"

namespace slu {

// Template grammar, one template per string:
//   plain words           -> slot None, keyword NonIntent
//   <INTENT:word>         -> the word, slot None, keyword Intent
//   <LOC> <POS> <OBJ> <TIME> <PERSON> <GESTURE>
//                         -> a phrase drawn from the word list of that name,
//                            every token tagged with the slot, NonIntent
//   <OBJ:door>            -> same, drawing from the list named "OBJ:door"
struct TemplatePiece {
  enum class Kind { kWord, kKeyword, kSlot };
  Kind kind = Kind::kWord;
  std::string text;  // word, keyword, or word-list name
  SlotLabel slot = SlotLabel::kNone;
};

struct UtteranceTemplate {
  std::string source;
  std::vector<TemplatePiece> pieces;
};

using PhraseList = std::vector<std::vector<std::string>>;

struct TemplateSet {
  std::map<std::string, PhraseList> word_lists;
  std::array<std::vector<UtteranceTemplate>, kIntentCount> templates;
  PhraseList prefix_fillers;
  PhraseList suffix_fillers;
  double nonsalient_fraction = 0.45;
  std::size_t sessions = 20;  // first half singleton, second half dyad

  // True when every intent has a template and every slot type except None
  // appears in some template.
  bool covers_all_labels() const;
};

TemplateSet parse_templates(std::string_view json_text, const std::string& source);
TemplateSet load_templates(const std::string& path);
const TemplateSet& default_templates();

using IntentCounts = std::array<std::size_t, kIntentCount>;

// Default per-intent utterance counts (3418 total).
IntentCounts default_intent_counts();
// The default proportions rescaled to `total` by largest remainder.
IntentCounts scaled_intent_counts(std::size_t total);

// Emits exactly counts[i] utterances of each intent. Filler words are added
// with error diffusion so the share of tokens that are neither slots nor
// intent keywords tracks `nonsalient_fraction` both per utterance and over
// the corpus. Output order is shuffled; deterministic per seed.
Corpus synth_generate(const TemplateSet& templates, const IntentCounts& counts,
                      std::uint64_t seed);

}  // namespace slu
