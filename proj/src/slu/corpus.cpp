#include "slu/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slu/error.hpp"
#include "slu/numerics.hpp"

namespace slu {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 2> kModeNames = {"singleton", "dyad"};
constexpr std::array<std::string_view, 2> kChannelNames = {"transcript", "asr"};

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  fail(ErrorKind::kFormat, "field '" + field + "': " + what);
}

const nlohmann::json& field(const nlohmann::json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) field_error(key, "missing");
  return *it;
}

std::string string_field(const nlohmann::json& record, const char* key) {
  const auto& value = field(record, key);
  if (!value.is_string()) field_error(key, "expected a string");
  return value.get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& record, const char* key) {
  const auto& value = field(record, key);
  if (!value.is_array()) field_error(key, "expected an array of strings");
  std::vector<std::string> out;
  out.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_string()) field_error(key, "expected an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

template <class Label, class Parse>
std::vector<Label> label_list(const nlohmann::json& record, const char* key, Parse parse) {
  std::vector<Label> out;
  for (const std::string& text : string_list(record, key)) {
    auto label = parse(text);
    if (!label) field_error(key, "unknown label '" + text + "'");
    out.push_back(*label);
  }
  return out;
}

}  // namespace

std::string_view name(PassengerMode mode) { return kModeNames[static_cast<std::size_t>(mode)]; }
std::string_view name(Channel channel) { return kChannelNames[static_cast<std::size_t>(channel)]; }

void validate_alignment(const AnnotatedUtterance& u) {
  if (u.tokens.empty()) fail(ErrorKind::kFormat, "field 'tokens': utterance has no tokens");
  if (u.slots.size() != u.tokens.size()) {
    fail(ErrorKind::kFormat, "field 'slots': " + std::to_string(u.slots.size()) +
                                 " labels for " + std::to_string(u.tokens.size()) + " tokens");
  }
  if (u.keywords.size() != u.tokens.size()) {
    fail(ErrorKind::kFormat, "field 'keywords': " + std::to_string(u.keywords.size()) +
                                 " labels for " + std::to_string(u.tokens.size()) + " tokens");
  }
}

std::string to_record(const AnnotatedUtterance& u) {
  ordered_json record;
  record["tokens"] = u.tokens;
  auto& slots = record["slots"] = ordered_json::array();
  for (SlotLabel s : u.slots) slots.push_back(name(s));
  auto& keywords = record["keywords"] = ordered_json::array();
  for (KeywordLabel k : u.keywords) keywords.push_back(name(k));
  record["intent"] = name(u.intent);
  record["session_id"] = u.session_id;
  record["passenger_mode"] = name(u.passenger_mode);
  record["channel"] = name(u.channel);
  return record.dump();
}

AnnotatedUtterance parse_record(std::string_view line) {
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kFormat, std::string("malformed record: ") + e.what());
  }
  if (!record.is_object()) fail(ErrorKind::kFormat, "malformed record: expected an object");
  AnnotatedUtterance u;
  u.tokens = string_list(record, "tokens");
  u.slots = label_list<SlotLabel>(record, "slots", parse_slot);
  u.keywords = label_list<KeywordLabel>(record, "keywords", parse_keyword);
  const std::string intent = string_field(record, "intent");
  auto parsed = parse_intent(intent);
  if (!parsed) field_error("intent", "unknown label '" + intent + "'");
  u.intent = *parsed;
  u.session_id = string_field(record, "session_id");
  const std::string mode = string_field(record, "passenger_mode");
  auto mode_index = find_name(kModeNames, mode);
  if (!mode_index) field_error("passenger_mode", "unknown value '" + mode + "'");
  u.passenger_mode = static_cast<PassengerMode>(*mode_index);
  const std::string channel = string_field(record, "channel");
  auto channel_index = find_name(kChannelNames, channel);
  if (!channel_index) field_error("channel", "unknown value '" + channel + "'");
  u.channel = static_cast<Channel>(*channel_index);
  validate_alignment(u);
  return u;
}

Corpus read_corpus(std::istream& in, const std::string& source) {
  Corpus corpus;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(parse_record(line));
    } catch (const Error& e) {
      fail(e.kind(), source + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open corpus file: " + path);
  return read_corpus(in, path);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& u : corpus) out << to_record(u) << '\n';
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write corpus file: " + path);
  write_corpus(corpus, out);
  if (!out) fail(ErrorKind::kIo, "failed writing corpus file: " + path);
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldAssignment stratified_kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  require(k >= 2, "stratified_kfold: k must be at least 2");
  require(corpus.size() >= k, "stratified_kfold: " + std::to_string(corpus.size()) +
                                  " utterances cannot fill " + std::to_string(k) + " folds");
  FoldAssignment assignment;
  assignment.k = k;
  assignment.fold_of.assign(corpus.size(), 0);
  std::array<std::vector<std::size_t>, kIntentCount> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    by_class[index_of(corpus[i].intent)].push_back(i);
  }
  SeededRng rng(seed);
  std::size_t next_fold = 0;
  for (std::size_t c = 0; c < kIntentCount; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < k) {
      assignment.warnings.push_back("intent " + std::string(kIntentNames[c]) + " has " +
                                    std::to_string(members.size()) + " utterances for " +
                                    std::to_string(k) +
                                    " folds; per-class balance is not guaranteed");
    }
    rng.shuffle(members);
    for (std::size_t idx : members) {
      assignment.fold_of[idx] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return assignment;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.utterances = corpus.size();
  for (const auto& u : corpus) {
    ++s.intents[index_of(u.intent)];
    for (std::size_t t = 0; t < u.tokens.size(); ++t) {
      ++s.tokens;
      ++s.slots[index_of(u.slots[t])];
      ++s.keywords[index_of(u.keywords[t])];
      if (is_salient(u.slots[t], u.keywords[t])) {
        ++s.intent_or_valid_slot;
      } else {
        ++s.nonintent_and_nonslot;
      }
    }
  }
  s.non_slot = s.slots[index_of(SlotLabel::kNone)];
  s.valid_slot = s.tokens - s.non_slot;
  return s;
}

std::string format_stats_tsv(const CorpusStats& s) {
  std::ostringstream out;
  out << "section\tlabel\tcount\n";
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    out << "intent\t" << kIntentNames[i] << '\t' << s.intents[i] << '\n';
  }
  out << "intent\tTotal\t" << s.utterances << '\n';
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    out << "slot\t" << kSlotNames[i] << '\t' << s.slots[i] << '\n';
  }
  out << "slot\tTotal\t" << s.tokens << '\n';
  for (std::size_t i = 0; i < kKeywordCount; ++i) {
    out << "keyword\t" << kKeywordNames[i] << '\t' << s.keywords[i] << '\n';
  }
  out << "keyword\tTotal\t" << s.tokens << '\n';
  out << "derived\tValid-Slot\t" << s.valid_slot << '\n';
  out << "derived\tNon-Slot\t" << s.non_slot << '\n';
  out << "derived\tIntent-or-Valid-Slot\t" << s.intent_or_valid_slot << '\n';
  out << "derived\tNonIntent-and-NonSlot\t" << s.nonintent_and_nonslot << '\n';
  return out.str();
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  Corpus out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus.at(i));
  return out;
}

}  // namespace slu
