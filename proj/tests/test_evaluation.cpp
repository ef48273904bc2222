#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "slu/asr_noise.hpp"
#include "slu/error.hpp"
#include "slu/evaluation.hpp"
#include "slu/synth.hpp"

using namespace slu;

namespace {

ConfusionMatrix two_class(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  ConfusionMatrix cm({"A", "B"});
  cm.add(0, 0, a);
  cm.add(0, 1, b);
  cm.add(1, 0, c);
  cm.add(1, 1, d);
  return cm;
}

// Plain Levenshtein distance.
std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

std::vector<std::vector<std::string>> all_strings(std::size_t max_len) {
  static const char* alphabet[] = {"a", "b", "c"};
  std::vector<std::vector<std::string>> out{{}};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (const char* s : alphabet) {
        auto next = out[i];
        next.emplace_back(s);
        out.push_back(std::move(next));
      }
    }
    begin = end;
  }
  return out;
}

const Corpus& thousand() {
  static const Corpus c = synth_generate(default_templates(), scaled_intent_counts(1000), 5);
  return c;
}

}  // namespace

TEST_CASE("two-class metrics example") {
  const MetricsReport r = class_metrics(two_class(8, 2, 3, 7));
  CHECK(r.classes[0].precision == doctest::Approx(8.0 / 11));
  CHECK(r.classes[0].recall == doctest::Approx(0.8));
  CHECK(r.classes[0].f1 == doctest::Approx(0.761905).epsilon(1e-6));
  CHECK(r.classes[0].support == 10);
  CHECK(r.classes[1].precision == doctest::Approx(7.0 / 9));
  CHECK(r.classes[1].recall == doctest::Approx(0.7));
  CHECK(r.total == 20);
}

TEST_CASE("perfect predictions score one") {
  ConfusionMatrix cm({"A", "B", "C"});
  cm.add(0, 0, 4);
  cm.add(2, 2, 1);
  const MetricsReport r = class_metrics(cm);
  CHECK(r.weighted.f1 == 1.0);
  CHECK(r.macro.f1 == 1.0);
  CHECK(r.macro.precision == 1.0);
}

TEST_CASE("an empty matrix is rejected") {
  CHECK_THROWS_AS(class_metrics(ConfusionMatrix({"A", "B"})), Error);
}

TEST_CASE("a never-predicted class has zero precision and F1") {
  const MetricsReport r = class_metrics(two_class(0, 5, 0, 5));
  CHECK(r.classes[0].precision == 0.0);
  CHECK(r.classes[0].f1 == 0.0);
  CHECK(r.classes[1].recall == 1.0);
}

TEST_CASE("metrics agree with a brute-force count") {
  SeededRng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.index(6);
    const std::size_t n = 1 + rng.index(60);
    std::vector<std::size_t> truth(n), pred(n);
    ConfusionMatrix cm(std::vector<std::string>(k, "x"));
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.index(k);
      pred[i] = rng.bernoulli(0.6) ? truth[i] : rng.index(k);
      cm.add(truth[i], pred[i]);
    }
    const MetricsReport r = class_metrics(cm);
    double wf = 0, mf = 0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (pred[i] == c && truth[i] == c) ++tp;
        if (pred[i] == c && truth[i] != c) ++fp;
        if (pred[i] != c && truth[i] == c) ++fn;
      }
      const double p = tp + fp ? double(tp) / (tp + fp) : 0.0;
      const double rc = tp + fn ? double(tp) / (tp + fn) : 0.0;
      const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
      CHECK(r.classes[c].precision == doctest::Approx(p).epsilon(1e-12));
      CHECK(r.classes[c].recall == doctest::Approx(rc).epsilon(1e-12));
      CHECK(r.classes[c].f1 == doctest::Approx(f).epsilon(1e-12));
      if (tp + fn > 0) {
        wf += f * double(tp + fn) / double(n);
        mf += f;
        ++present;
      }
    }
    CHECK(r.weighted.f1 == doctest::Approx(wf).epsilon(1e-12));
    CHECK(r.macro.f1 == doctest::Approx(mf / present).epsilon(1e-12));
  }
}

TEST_CASE("wer examples") {
  const std::vector<std::string> ref{"stop", "the", "car"};
  const std::vector<std::string> hyp{"stop", "a", "car"};
  const WerResult r = wer(ref, hyp);
  CHECK(r.substitutions == 1);
  CHECK(r.wer == doctest::Approx(1.0 / 3));
  const std::vector<std::string> go{"go", "faster", "please"};
  const std::vector<std::string> go_hyp{"go", "fast", "please"};
  const WerResult g = wer(go, go_hyp);
  CHECK(g.substitutions == 1);
  CHECK(g.deletions + g.insertions == 0);
  CHECK(g.wer == doctest::Approx(0.333333).epsilon(1e-6));
  const std::vector<std::string> stop{"stop"};
  const WerResult d = wer(stop, {});
  CHECK(d.deletions == 1);
  CHECK(d.wer == 1.0);
  CHECK(wer(ref, ref).wer == 0.0);
  CHECK_THROWS_AS(wer({}, stop), Error);
}

TEST_CASE("wer matches an exhaustive edit-distance oracle") {
  const auto strings = all_strings(4);
  SeededRng rng(2);
  std::size_t checked = 0;
  for (const auto& ref : strings) {
    if (ref.empty()) continue;
    for (const auto& hyp : strings) {
      const WerResult r = wer(ref, hyp);
      REQUIRE(r.errors() == edit_distance(ref, hyp));
      CHECK(r.reference_length == ref.size());
      CHECK(ref.size() - r.deletions + r.insertions == hyp.size());
      ++checked;
    }
  }
  // Length 5 and 6 sampled.
  const auto longer = all_strings(6);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto& ref = longer[1 + rng.index(longer.size() - 1)];
    const auto& hyp = longer[rng.index(longer.size())];
    const WerResult r = wer(ref, hyp);
    REQUIRE(r.errors() == edit_distance(ref, hyp));
    CHECK(ref.size() - r.deletions + r.insertions == hyp.size());
  }
  CHECK(checked > 10000);
}

TEST_CASE("wer prefers substitutions over a deletion-insertion pair") {
  const std::vector<std::string> ref{"a", "b"};
  const std::vector<std::string> hyp{"a", "c"};
  const WerResult r = wer(ref, hyp);
  CHECK(r.substitutions == 1);
  CHECK(r.deletions == 0);
  CHECK(r.insertions == 0);
}

TEST_CASE("noise config validation") {
  NoiseConfig c;
  CHECK_NOTHROW(c.validate());
  c.deletion = 0.5;
  CHECK_THROWS_AS(c.validate(), Error);
  const NoiseConfig p = parse_noise_config(R"({"target_wer": 0.2, "seed": 4})", "inline");
  CHECK(p.target_wer == 0.2);
  CHECK(p.seed == 4);
  CHECK(p.substitution == 0.7);
  CHECK_THROWS_AS(parse_noise_config(R"({"target_wer": 1.5})", "inline"), Error);
}

TEST_CASE("zero target leaves the corpus unchanged") {
  NoiseConfig c;
  c.target_wer = 0.0;
  const CorruptionResult r = corrupt(thousand(), c);
  CHECK(r.corpus == thousand());
  CHECK(r.achieved.wer == 0.0);
}

TEST_CASE("corruption calibrates to the target") {
  NoiseConfig c;
  c.seed = 5;
  for (double target : {0.05, 0.136, 0.3}) {
    c.target_wer = target;
    const CorruptionResult r = corrupt(thousand(), c);
    CHECK(std::fabs(r.achieved.wer - target) <= 0.01);
    CHECK(r.rounds >= 1);
    CHECK(r.rounds <= 5);
    const WerResult again = corpus_wer(thousand(), r.corpus);
    CHECK(again.wer == doctest::Approx(r.achieved.wer).epsilon(1e-12));
  }
}

TEST_CASE("corrupted utterances stay aligned and non-empty") {
  NoiseConfig c;
  c.target_wer = 0.6;
  c.substitution = 0.2;
  c.deletion = 0.7;
  c.insertion = 0.1;
  c.seed = 8;
  const CorruptionResult r = corrupt(thousand(), c);
  REQUIRE(r.corpus.size() == thousand().size());
  for (std::size_t i = 0; i < r.corpus.size(); ++i) {
    const auto& u = r.corpus[i];
    CHECK(!u.tokens.empty());
    CHECK(u.tokens.size() == u.slots.size());
    CHECK(u.tokens.size() == u.keywords.size());
    CHECK(u.intent == thousand()[i].intent);
    CHECK(u.session_id == thousand()[i].session_id);
    CHECK(u.channel == Channel::kAsr);
  }
}

TEST_CASE("corruption is deterministic per seed") {
  NoiseConfig c;
  c.seed = 3;
  const CorruptionResult a = corrupt(thousand(), c);
  const CorruptionResult b = corrupt(thousand(), c);
  CHECK(a.corpus == b.corpus);
  c.seed = 4;
  CHECK(corrupt(thousand(), c).corpus != a.corpus);
}

TEST_CASE("cross-validation on a tiny corpus") {
  Corpus data;
  for (int i = 0; i < 4; ++i) {
    AnnotatedUtterance u;
    u.tokens = {i < 2 ? "stop" : "park", "now"};
    u.slots = {SlotLabel::kNone, SlotLabel::kTimeGuidance};
    u.keywords = {KeywordLabel::kIntent, KeywordLabel::kNonIntent};
    u.intent = i < 2 ? IntentType::kStop : IntentType::kPark;
    u.session_id = "s0" + std::to_string(i);
    data.push_back(u);
  }
  ModelConfig mc = ModelConfig::for_family(Family::kHierSeparate1);
  mc.hidden_dim = 4;
  mc.embedding_dim = 4;
  TrainConfig tc;
  tc.epochs = 2;
  const CrossValidationResult r = cross_validate(mc, data, tc, 2, 1);
  CHECK(r.folds.size() == 2);
  const auto& intent = *r.pooled.matrices[static_cast<std::size_t>(Task::kIntent)];
  CHECK(intent.total() == 4);
  CHECK(r.pooled.matrices[static_cast<std::size_t>(Task::kSlots)]->total() == 8);
  CHECK_THROWS_AS(cross_validate(mc, data, tc, 1, 1), Error);
}

TEST_CASE("cross-validation does not depend on the thread count") {
  const Corpus data = synth_generate(default_templates(), scaled_intent_counts(120), 2);
  ModelConfig mc = ModelConfig::for_family(Family::kJoint2);
  mc.hidden_dim = 6;
  mc.embedding_dim = 6;
  TrainConfig tc;
  tc.epochs = 1;
  const CrossValidationResult one = cross_validate(mc, data, tc, 4, 11, 1);
  const CrossValidationResult three = cross_validate(mc, data, tc, 4, 11, 3);
  CHECK(format_report_tsv(one) == format_report_tsv(three));
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(one.folds[f].matrices == three.folds[f].matrices);
  }
}

TEST_CASE("report tsv has one row per class and a pooled block") {
  const Corpus data = synth_generate(default_templates(), scaled_intent_counts(60), 2);
  ModelConfig mc = ModelConfig::for_family(Family::kSeparate0);
  mc.hidden_dim = 4;
  mc.embedding_dim = 4;
  TrainConfig tc;
  tc.epochs = 1;
  const auto r = cross_validate(mc, data, tc, 3, 1);
  const std::string tsv = format_report_tsv(r);
  CHECK(tsv.rfind("#", 0) == 0);
  CHECK(tsv.find("separate-0\tintent\tStop\t") != std::string::npos);
  CHECK(tsv.find("\tall\n") != std::string::npos);
  CHECK(tsv.find("slots") == std::string::npos);
}
