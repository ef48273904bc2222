#include <unistd.h>

#include <filesystem>
#include <functional>
#include <numeric>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"
#include "slu/corpus.hpp"
#include "slu/embeddings.hpp"
#include "slu/error.hpp"
#include "slu/lexicon.hpp"
#include "slu/synth.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("slu_corpus_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const Corpus& default_corpus() {
  static const Corpus c = synth_generate(default_templates(), default_intent_counts(), 1);
  return c;
}

}  // namespace

// ---- embeddings -----------------------------------------------------------

TEST_CASE("tokenizer lowercases and splits punctuation") {
  CHECK(tokenize("Park HERE, please!") ==
        std::vector<std::string>{"park", "here", ",", "please", "!"});
  CHECK(tokenize("  don't   stop ") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("").empty());
}

TEST_CASE("vocabulary reserves the special tokens") {
  Vocabulary v;
  CHECK(v.size() == 4);
  CHECK(v.index_of("<PAD>") == Vocabulary::kPad);
  CHECK(v.index_of("<BOU>") == Vocabulary::kBou);
  CHECK(v.add("park") == 4);
  CHECK(v.add("park") == 4);
  CHECK(v.index_of("zzzq") == Vocabulary::kUnk);
  CHECK(Vocabulary::from_tokens(v.tokens()).tokens() == v.tokens());
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), Error);
}

TEST_CASE("random embeddings keep the padding row at zero") {
  Vocabulary v;
  v.add("go");
  SeededRng rng(1);
  const EmbeddingMatrix m = random_embeddings(v, 6, rng);
  for (double x : m.table.row(Vocabulary::kPad)) CHECK(x == 0.0);
  for (std::size_t r = 1; r < v.size(); ++r)
    for (double x : m.table.row(r)) CHECK(std::fabs(x) <= kEmbeddingInitRange);
}

TEST_CASE("pretrained file rows are copied exactly") {
  const fs::path dir = scratch_dir();
  Vocabulary v;
  v.add("park");
  v.add("here");
  write_text(dir / "full.txt", "park 0.25 -1.5 3\nhere 1e-3 2 -0.125\n<UNK> 9 9 9\n");
  SeededRng rng(2);
  const EmbeddingMatrix m = load_pretrained((dir / "full.txt").string(), v, rng, 3);
  CHECK(std::vector<double>(m.table.row(v.index_of("park")).begin(),
                            m.table.row(v.index_of("park")).end()) ==
        std::vector<double>{0.25, -1.5, 3});
  CHECK(m.table(v.index_of("here"), 1) == 2.0);
  CHECK(m.table(Vocabulary::kUnk, 0) == 9.0);
  for (double x : m.table.row(Vocabulary::kPad)) CHECK(x == 0.0);
}

TEST_CASE("empty pretrained file falls back to the seeded initialization") {
  const fs::path dir = scratch_dir();
  write_text(dir / "empty.txt", "");
  Vocabulary v;
  v.add("go");
  SeededRng a(5), b(5);
  const EmbeddingMatrix loaded = load_pretrained((dir / "empty.txt").string(), v, a, 4);
  const EmbeddingMatrix fresh = random_embeddings(v, 4, b);
  CHECK(loaded.table == fresh.table);
}

TEST_CASE("a short embedding line is a format error naming the line") {
  const fs::path dir = scratch_dir();
  std::ostringstream text;
  for (int line = 0; line < 5; ++line) {
    text << "w" << line;
    for (int d = 0; d < (line == 3 ? 99 : 100); ++d) text << " 0.01";
    text << "\n";
  }
  write_text(dir / "ragged.txt", text.str());
  Vocabulary v;
  SeededRng rng(1);
  auto load = [&] { load_pretrained((dir / "ragged.txt").string(), v, rng, 100); };
  CHECK(kind_of(load) == ErrorKind::kFormat);
  CHECK(message_of(load).find(":4:") != std::string::npos);
  CHECK_THROWS_AS(load_pretrained((dir / "missing.txt").string(), v, rng, 100), Error);
}

TEST_CASE("lookup maps unknown tokens to the UNK row") {
  Vocabulary v;
  for (const char* w : {"stop", "the", "car"}) v.add(w);
  SeededRng rng(3);
  const EmbeddingMatrix m = random_embeddings(v, 4, rng);
  const std::vector<std::string> tokens{"stop", "zzzq", "car", "qqq", "the"};
  const auto rows = lookup(m, tokens, v);
  const std::size_t expect[] = {4, Vocabulary::kUnk, 6, Vocabulary::kUnk, 5};
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto row = m.table.row(expect[i]);
    CHECK(rows[i].values() == std::vector<double>(row.begin(), row.end()));
  }
}

// ---- corpus ---------------------------------------------------------------

TEST_CASE("records round-trip") {
  AnnotatedUtterance u;
  u.tokens = {"park", "by", "the", "gate"};
  u.slots = {SlotLabel::kNone, SlotLabel::kNone, SlotLabel::kLocation, SlotLabel::kLocation};
  u.keywords = {KeywordLabel::kIntent, KeywordLabel::kNonIntent, KeywordLabel::kNonIntent,
                KeywordLabel::kNonIntent};
  u.intent = IntentType::kPark;
  u.session_id = "s07";
  u.passenger_mode = PassengerMode::kDyad;
  u.channel = Channel::kAsr;
  CHECK(parse_record(to_record(u)) == u);
}

TEST_CASE("reading a two-record file") {
  std::istringstream in(
      R"({"tokens":["stop"],"slots":["None"],"keywords":["Intent"],"intent":"Stop","session_id":"s01","passenger_mode":"singleton","channel":"transcript"})"
      "\n\n"
      R"({"tokens":["go","faster"],"slots":["None","None"],"keywords":["NonIntent","Intent"],"intent":"GoFaster","session_id":"s02","passenger_mode":"dyad","channel":"asr"})"
      "\n");
  const Corpus c = read_corpus(in, "two.al");
  REQUIRE(c.size() == 2);
  CHECK(c[1].intent == IntentType::kGoFaster);
  CHECK(c[1].channel == Channel::kAsr);
}

TEST_CASE("misaligned labels are reported with the line") {
  std::istringstream in(
      R"({"tokens":["stop"],"slots":["None"],"keywords":["Intent"],"intent":"Stop","session_id":"s01","passenger_mode":"singleton","channel":"transcript"})"
      "\n"
      R"({"tokens":["a","b","c","d"],"slots":["None","None","None"],"keywords":["NonIntent","NonIntent","NonIntent","NonIntent"],"intent":"Other","session_id":"s01","passenger_mode":"singleton","channel":"transcript"})"
      "\n");
  auto read = [&] { read_corpus(in, "bad.al"); };
  const std::string msg = message_of(read);
  CHECK(msg.find("bad.al:2:") == 0);
  CHECK(msg.find("slots") != std::string::npos);
}

TEST_CASE("unknown slot labels are rejected") {
  const std::string line =
      R"({"tokens":["go"],"slots":["Speed"],"keywords":["Intent"],"intent":"GoFaster","session_id":"s01","passenger_mode":"singleton","channel":"transcript"})";
  auto parse = [&] { parse_record(line); };
  CHECK(kind_of(parse) == ErrorKind::kFormat);
  CHECK(message_of(parse).find("Speed") != std::string::npos);
  CHECK_THROWS_AS(parse_record("{not json"), Error);
}

TEST_CASE("corpus files round-trip") {
  const fs::path path = scratch_dir() / "rt.al";
  const Corpus c = synth_generate(default_templates(), scaled_intent_counts(50), 4);
  save_corpus(c, path.string());
  CHECK(load_corpus(path.string()) == c);
  CHECK(kind_of([&] { load_corpus((scratch_dir() / "none.al").string()); }) == ErrorKind::kIo);
}

TEST_CASE("one class, ten folds, two each") {
  Corpus c(20);
  for (auto& u : c) {
    u.tokens = {"stop"};
    u.slots = {SlotLabel::kNone};
    u.keywords = {KeywordLabel::kIntent};
    u.intent = IntentType::kStop;
  }
  const FoldAssignment f = stratified_kfold(c, 10, 3);
  for (std::size_t k = 0; k < 10; ++k) CHECK(f.members(k).size() == 2);
}

TEST_CASE("stratified folds track the class proportions") {
  const Corpus& c = default_corpus();
  const FoldAssignment f = stratified_kfold(c, 10, 1);
  const FoldAssignment again = stratified_kfold(c, 10, 1);
  CHECK(f.fold_of == again.fold_of);
  std::array<std::size_t, kIntentCount> total{};
  for (const auto& u : c) ++total[index_of(u.intent)];
  std::size_t covered = 0;
  for (std::size_t k = 0; k < 10; ++k) {
    const auto members = f.members(k);
    covered += members.size();
    CHECK(members.size() + f.complement(k).size() == c.size());
    std::array<std::size_t, kIntentCount> count{};
    for (auto i : members) ++count[index_of(c[i].intent)];
    for (std::size_t cls = 0; cls < kIntentCount; ++cls) {
      const double expected = static_cast<double>(total[cls]) / 10.0;
      CHECK(std::fabs(static_cast<double>(count[cls]) - expected) <= 2.0);
    }
  }
  CHECK(covered == c.size());
}

TEST_CASE("stats of an empty corpus are zero") {
  const CorpusStats s = corpus_stats({});
  CHECK(s.utterances == 0);
  CHECK(s.tokens == 0);
  CHECK(s.valid_slot == 0);
}

TEST_CASE("stats of one hand-labelled utterance") {
  AnnotatedUtterance u;
  u.tokens = {"please", "stop", "the", "car"};
  u.slots = {SlotLabel::kNone, SlotLabel::kNone, SlotLabel::kNone, SlotLabel::kObject};
  u.keywords = {KeywordLabel::kNonIntent, KeywordLabel::kIntent, KeywordLabel::kNonIntent,
                KeywordLabel::kNonIntent};
  u.intent = IntentType::kStop;
  const CorpusStats s = corpus_stats({u});
  CHECK(s.tokens == 4);
  CHECK(s.intents[index_of(IntentType::kStop)] == 1);
  CHECK(s.slots[index_of(SlotLabel::kObject)] == 1);
  CHECK(s.keywords[index_of(KeywordLabel::kIntent)] == 1);
  CHECK(s.valid_slot == 1);
  CHECK(s.non_slot == 3);
  CHECK(s.intent_or_valid_slot == 2);
  CHECK(s.nonintent_and_nonslot == 2);
}

// ---- synthetic generator --------------------------------------------------

TEST_CASE("default generation hits the per-intent counts") {
  const Corpus& c = default_corpus();
  CHECK(c.size() == 3418);
  const CorpusStats s = corpus_stats(c);
  CHECK(s.intents == default_intent_counts());
  CHECK(s.intent_or_valid_slot + s.nonintent_and_nonslot == s.tokens);
  CHECK(s.valid_slot + s.non_slot == s.tokens);
  for (const auto& u : c) CHECK_NOTHROW(validate_alignment(u));
}

TEST_CASE("non-salient token share is near 45 percent") {
  const CorpusStats s = corpus_stats(default_corpus());
  const double share = static_cast<double>(s.nonintent_and_nonslot) / static_cast<double>(s.tokens);
  CHECK(share >= 0.42);
  CHECK(share <= 0.48);
}

TEST_CASE("every label occurs in the default corpus") {
  const CorpusStats s = corpus_stats(default_corpus());
  for (auto n : s.slots) CHECK(n > 0);
  for (auto n : s.keywords) CHECK(n > 0);
  CHECK(default_templates().covers_all_labels());
}

TEST_CASE("generation is deterministic per seed") {
  const auto counts = scaled_intent_counts(120);
  CHECK(synth_generate(default_templates(), counts, 9) ==
        synth_generate(default_templates(), counts, 9));
  CHECK(synth_generate(default_templates(), counts, 9) !=
        synth_generate(default_templates(), counts, 10));
}

TEST_CASE("a single template yields a single tagged utterance") {
  const TemplateSet t =
      parse_templates(R"({"intents": {"Stop": ["<INTENT:stop> the car"]}})", "inline");
  IntentCounts counts{};
  counts[index_of(IntentType::kStop)] = 1;
  const Corpus c = synth_generate(t, counts, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0].tokens == std::vector<std::string>{"stop", "the", "car"});
  CHECK(c[0].keywords == std::vector<KeywordLabel>{KeywordLabel::kIntent,
                                                  KeywordLabel::kNonIntent,
                                                  KeywordLabel::kNonIntent});
  CHECK(c[0].intent == IntentType::kStop);
}

TEST_CASE("scaled counts keep the total") {
  for (std::size_t total : {1u, 10u, 999u, 1000u, 3418u}) {
    const auto c = scaled_intent_counts(total);
    CHECK(std::accumulate(c.begin(), c.end(), std::size_t{0}) == total);
  }
}

TEST_CASE("template config errors") {
  CHECK(kind_of([] { parse_templates("{", "t"); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { parse_templates(R"({"intents": {"Fly": ["x"]}})", "t"); }) ==
        ErrorKind::kConfig);
  CHECK(kind_of([] { parse_templates(R"({"intents": {"Park": ["<LOC>"]}})", "t"); }) ==
        ErrorKind::kConfig);
  CHECK(kind_of([] { parse_templates(R"({"intents": {"Park": ["<WHO>"]}})", "t"); }) ==
        ErrorKind::kConfig);
  IntentCounts counts{};
  counts[index_of(IntentType::kPark)] = 1;
  const TemplateSet only_stop = parse_templates(R"({"intents": {"Stop": ["stop"]}})", "t");
  CHECK(kind_of([&] { synth_generate(only_stop, counts, 1); }) == ErrorKind::kConfig);
}

// ---- rule lexicon ---------------------------------------------------------

TEST_CASE("rule mapping examples") {
  const RuleLexicon& lex = default_lexicon();
  const std::vector<std::string> park{"park"};
  CHECK(rule_map(lex, park, {}, RuleVariant::kKeywordsOnly) == IntentType::kPark);
  CHECK(rule_map(lex, {}, {}, RuleVariant::kKeywordsAndSlots) == IntentType::kOther);

  const std::vector<std::string> go{"go"};
  const std::vector<SlotMention> left{{"left", SlotLabel::kPositionDirection}};
  CHECK(rule_map(lex, go, left, RuleVariant::kKeywordsAndDirection) == IntentType::kSetRoute);
  // "go" splits its vote evenly; the tie goes to the earlier intent in priority.
  const IntentType bare = rule_map(lex, go, left, RuleVariant::kKeywordsOnly);
  CHECK(bare == IntentType::kSetDestination);
  CHECK(lex.priority.front() == IntentType::kSetDestination);
}

TEST_CASE("slot rules only fire for the variants that allow them") {
  const RuleLexicon& lex = default_lexicon();
  const std::vector<SlotMention> door{{"door", SlotLabel::kObject}};
  CHECK(rule_map(lex, {}, door, RuleVariant::kKeywordsAndSlots) == IntentType::kOpenDoor);
  CHECK(rule_map(lex, {}, door, RuleVariant::kKeywordsAndDirection) == IntentType::kOther);
  CHECK(rule_map(lex, {}, door, RuleVariant::kKeywordsOnly) == IntentType::kOther);
  const std::vector<SlotMention> right{{"right", SlotLabel::kPositionDirection}};
  CHECK(rule_map(lex, {}, right, RuleVariant::kKeywordsAndDirection) == IntentType::kSetRoute);
  CHECK(rule_map(lex, {}, right, RuleVariant::kKeywordsAndSlots) == IntentType::kSetRoute);
  CHECK(rule_map(lex, {}, right, RuleVariant::kKeywordsOnly) == IntentType::kOther);
}

TEST_CASE("lexicon JSON round-trips and validates") {
  const RuleLexicon& lex = default_lexicon();
  const RuleLexicon again = parse_lexicon(lexicon_to_json(lex), "rt");
  CHECK(again.priority == lex.priority);
  CHECK(again.keyword_votes == lex.keyword_votes);
  CHECK(again.slot_rules.size() == lex.slot_rules.size());
  CHECK(kind_of([] { parse_lexicon(R"({"priority": ["Park"]})", "x"); }) == ErrorKind::kConfig);
}
