#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "slu/taxonomy.hpp"

namespace slu {

enum class PassengerMode : std::uint8_t { kSingleton, kDyad };
enum class Channel : std::uint8_t { kTranscript, kAsr };

std::string_view name(PassengerMode mode);
std::string_view name(Channel channel);

struct AnnotatedUtterance {
  std::vector<std::string> tokens;
  std::vector<SlotLabel> slots;
  std::vector<KeywordLabel> keywords;
  IntentType intent = IntentType::kOther;
  std::string session_id;
  PassengerMode passenger_mode = PassengerMode::kSingleton;
  Channel channel = Channel::kTranscript;

  friend bool operator==(const AnnotatedUtterance&, const AnnotatedUtterance&) = default;
};

using Corpus = std::vector<AnnotatedUtterance>;

// Throws a format error unless |tokens| = |slots| = |keywords| >= 1.
void validate_alignment(const AnnotatedUtterance& utterance);

// One JSON object per line with fields tokens, slots, keywords, intent,
// session_id, passenger_mode, channel (in that order when written).
std::string to_record(const AnnotatedUtterance& utterance);
AnnotatedUtterance parse_record(std::string_view line);

// Blank lines are skipped; the first bad record aborts with
// "<source>:<line>: ..." diagnostics.
Corpus read_corpus(std::istream& in, const std::string& source);
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per utterance
  std::vector<std::string> warnings;

  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> complement(std::size_t fold) const;
};

// Per intent class (canonical order) the members are shuffled and dealt
// round-robin; the dealing position carries over between classes so overall
// fold sizes also differ by at most one.
FoldAssignment stratified_kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed);

struct CorpusStats {
  std::size_t utterances = 0;
  std::size_t tokens = 0;
  std::array<std::size_t, kIntentCount> intents{};
  std::array<std::size_t, kSlotCount> slots{};
  std::array<std::size_t, kKeywordCount> keywords{};
  std::size_t valid_slot = 0;
  std::size_t non_slot = 0;
  std::size_t intent_or_valid_slot = 0;
  std::size_t nonintent_and_nonslot = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string format_stats_tsv(const CorpusStats& stats);

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices);

}  // namespace slu
