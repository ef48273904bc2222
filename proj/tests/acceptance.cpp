// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slu/asr_noise.hpp"
#include "slu/evaluation.hpp"
#include "slu/gradcert.hpp"
#include "slu/synth.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTolerance = 1e-4;
constexpr int kGradSeeds = 5;
constexpr std::size_t kOverfitUtterances = 32;
constexpr std::size_t kOverfitEpochs = 300;
constexpr double kOverfitTokenAccuracy = 0.99;
constexpr double kIntentMargin = 0.02;
constexpr double kSalientTarget = 0.546;
constexpr double kSalientTolerance = 0.05;
constexpr double kTargetWer = 0.136;
constexpr double kWerTolerance = 0.01;
constexpr std::size_t kContractInferences = 1000;

// Cross-validation scale for the trend criteria; far smaller than the
// defaults so the whole run fits on one core.
constexpr std::size_t kTrendFolds = 10;
constexpr std::size_t kTrendHidden = 32;
constexpr std::size_t kTrendEmbedding = 50;
constexpr std::size_t kTrendEpochs = 5;
constexpr double kTrendLearningRate = 3e-3;
const std::vector<std::uint64_t> kTrendSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Corpus& default_corpus() {
  static const Corpus c = synth_generate(default_templates(), default_intent_counts(), 1);
  return c;
}

double f1(const EvaluationReport& r, Task task) {
  return class_metrics(*r.matrices[static_cast<std::size_t>(task)]).weighted.f1;
}

// Pooled CV report per (corpus tag, family, seed), computed once.
const EvaluationReport& trend_cv(const std::string& tag, const Corpus& data, Family family,
                                 std::uint64_t seed) {
  static std::map<std::string, EvaluationReport> cache;
  const std::string key = tag + "/" + std::string(name(family)) + "/" + std::to_string(seed);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  ModelConfig mc = ModelConfig::for_family(family);
  mc.hidden_dim = kTrendHidden;
  mc.embedding_dim = kTrendEmbedding;
  TrainConfig tc;
  tc.epochs = kTrendEpochs;
  tc.learning_rate = kTrendLearningRate;
  tc.seed = seed;
  auto r = cross_validate(mc, data, tc, kTrendFolds, seed);
  std::printf("  cv %-28s %s seed %llu done\n", std::string(name(family)).c_str(), tag.c_str(),
              static_cast<unsigned long long>(seed));
  std::fflush(stdout);
  return cache.emplace(key, std::move(r.pooled)).first->second;
}

Outcome gradients() {
  double worst = 0.0;
  std::string worst_at;
  std::size_t checks = 0;
  for (const auto& component : certification_components()) {
    for (int s = 1; s <= kGradSeeds; ++s) {
      const auto r = certify_component(component, static_cast<std::uint64_t>(s));
      ++checks;
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        worst_at = component + " seed " + std::to_string(s);
      }
    }
  }
  return {worst < kGradTolerance, std::to_string(checks) + " checks, worst " +
                                      fmt("%.3g", worst) + " (" + worst_at + ")"};
}

TrainedModel overfit_model() {
  static const TrainedModel model = [] {
    const Corpus small(default_corpus().begin(), default_corpus().begin() + kOverfitUtterances);
    ModelConfig mc = ModelConfig::for_family(Family::kHierJoint2);
    mc.hidden_dim = 32;
    mc.dropout = 0.0;
    TrainConfig tc;
    tc.epochs = kOverfitEpochs;
    return train(mc, small, tc).model;
  }();
  return model;
}

Outcome overfit() {
  const TrainedModel model = overfit_model();
  std::size_t intents = 0, tokens = 0, slots_ok = 0, keywords_ok = 0;
  for (std::size_t i = 0; i < kOverfitUtterances; ++i) {
    const auto& u = default_corpus()[i];
    const Prediction p = predict(model, u.tokens);
    intents += p.intent == u.intent;
    for (std::size_t t = 0; t < u.tokens.size(); ++t) {
      slots_ok += p.slots[t] == u.slots[t];
      keywords_ok += p.keywords[t] == u.keywords[t];
    }
    tokens += u.tokens.size();
  }
  const double intent_acc = double(intents) / kOverfitUtterances;
  const double slot_acc = double(slots_ok) / tokens;
  const double keyword_acc = double(keywords_ok) / tokens;
  return {intent_acc == 1.0 && slot_acc >= kOverfitTokenAccuracy &&
              keyword_acc >= kOverfitTokenAccuracy,
          "intent " + fmt("%.4f", intent_acc) + ", slot tokens " + fmt("%.4f", slot_acc) +
              ", keyword tokens " + fmt("%.4f", keyword_acc)};
}

Outcome trends() {
  double uni = 0, bi = 0, hybrid = 0, hier = 0;
  for (auto seed : kTrendSeeds) {
    uni += f1(trend_cv("clean", default_corpus(), Family::kHierSeparate0, seed), Task::kSlots);
    bi += f1(trend_cv("clean", default_corpus(), Family::kHierSeparate1, seed), Task::kSlots);
    hybrid += f1(trend_cv("clean", default_corpus(), Family::kHybrid0, seed), Task::kIntent);
    hier += f1(trend_cv("clean", default_corpus(), Family::kHierJoint2, seed), Task::kIntent);
  }
  const double n = static_cast<double>(kTrendSeeds.size());
  uni /= n;
  bi /= n;
  hybrid /= n;
  hier /= n;
  const bool a = bi >= uni;
  const bool b = hier >= hybrid + kIntentMargin;
  return {a && b, std::string("(a) slot F1 bi ") + fmt("%.4f", bi) + " vs uni " + fmt("%.4f", uni) +
                      (a ? " ok" : " violated") + "; (b) intent F1 hierarchical-joint-2 " +
                      fmt("%.4f", hier) + " vs hybrid-0 " + fmt("%.4f", hybrid) +
                      (b ? " ok" : " violated")};
}

std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::vector<std::vector<std::string>> sequences_up_to(std::size_t max_len) {
  static const char* alphabet[] = {"a", "b", "c"};
  std::vector<std::vector<std::string>> out{{}};
  for (std::size_t begin = 0, len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (const char* s : alphabet) {
        out.push_back(out[i]);
        out.back().emplace_back(s);
      }
    }
    begin = end;
  }
  return out;
}

Outcome metric_oracles() {
  SeededRng rng(4);
  std::size_t metric_failures = 0;
  constexpr std::size_t k = 10;
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionMatrix cm(std::vector<std::string>(k, "c"));
    std::vector<std::size_t> truth(1 + rng.index(200)), pred(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = rng.index(k);
      pred[i] = rng.bernoulli(0.5) ? truth[i] : rng.index(k);
      cm.add(truth[i], pred[i]);
    }
    const auto r = class_metrics(cm);
    for (std::size_t c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        tp += pred[i] == c && truth[i] == c;
        fp += pred[i] == c && truth[i] != c;
        fn += pred[i] != c && truth[i] == c;
      }
      const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
      const double rc = tp + fn > 0 ? tp / (tp + fn) : 0;
      const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0;
      metric_failures += r.classes[c].f1 != f || r.classes[c].precision != p ||
                         r.classes[c].recall != rc ||
                         r.classes[c].support != static_cast<std::size_t>(tp + fn);
    }
  }
  ConfusionMatrix example({"A", "B"});
  example.add(0, 0, 8);
  example.add(0, 1, 2);
  example.add(1, 0, 3);
  example.add(1, 1, 7);
  metric_failures += std::fabs(class_metrics(example).classes[0].f1 - 16.0 / 21.0) > 1e-12;

  const auto seqs = sequences_up_to(6);
  std::size_t pairs = 0, wer_failures = 0;
  for (const auto& ref : seqs) {
    if (ref.empty()) continue;
    for (const auto& hyp : seqs) {
      const WerResult w = wer(ref, hyp);
      wer_failures += w.errors() != levenshtein(ref, hyp) ||
                      ref.size() - w.deletions + w.insertions != hyp.size();
      ++pairs;
    }
  }
  const std::vector<std::string> r3{"go", "faster", "please"}, h3{"go", "fast", "please"};
  const WerResult w3 = wer(r3, h3);
  wer_failures += w3.substitutions != 1 || std::fabs(w3.wer - 1.0 / 3.0) > 1e-15;
  return {metric_failures + wer_failures == 0,
          "1000 ten-class vectors, " + std::to_string(metric_failures) + " metric mismatches; " +
              std::to_string(pairs) + " sequence pairs, " + std::to_string(wer_failures) +
              " WER mismatches"};
}

Outcome salient_fraction() {
  std::size_t salient = 0, tokens = 0;
  double per_utterance = 0;
  for (const auto& u : default_corpus()) {
    std::size_t s = 0;
    for (std::size_t t = 0; t < u.tokens.size(); ++t) s += is_salient(u.slots[t], u.keywords[t]);
    salient += s;
    tokens += u.tokens.size();
    per_utterance += double(s) / u.tokens.size();
  }
  const double pooled = double(salient) / tokens;
  const double mean = per_utterance / default_corpus().size();
  const bool ok = std::fabs(pooled - kSalientTarget) <= kSalientTolerance &&
                  std::fabs(mean - kSalientTarget) <= kSalientTolerance;
  return {ok, "token share " + fmt("%.4f", pooled) + ", mean per utterance " + fmt("%.4f", mean)};
}

Outcome noise() {
  const Corpus sample = synth_generate(default_templates(), scaled_intent_counts(1000), 7);
  NoiseConfig nc;
  nc.target_wer = kTargetWer;
  nc.seed = 1;
  const double achieved = corrupt(sample, nc).achieved.wer;
  const bool calibrated = std::fabs(achieved - kTargetWer) <= kWerTolerance;

  const CorruptionResult noisy = corrupt(default_corpus(), nc);
  const std::uint64_t seed = kTrendSeeds.front();
  const double slots_clean = f1(trend_cv("clean", default_corpus(), Family::kHybrid3, seed), Task::kSlots);
  const double slots_noisy = f1(trend_cv("asr", noisy.corpus, Family::kHybrid3, seed), Task::kSlots);
  const double intent_clean =
      f1(trend_cv("clean", default_corpus(), Family::kHierJoint2, seed), Task::kIntent);
  const double intent_noisy = f1(trend_cv("asr", noisy.corpus, Family::kHierJoint2, seed), Task::kIntent);
  const bool degrade = slots_clean >= slots_noisy && intent_clean >= intent_noisy;
  return {calibrated && degrade,
          "achieved WER " + fmt("%.4f", achieved) + " (corpus " + fmt("%.4f", noisy.achieved.wer) +
              "); hybrid-3 slot F1 " + fmt("%.4f", slots_clean) + " -> " + fmt("%.4f", slots_noisy) +
              "; hierarchical-joint-2 intent F1 " + fmt("%.4f", intent_clean) + " -> " +
              fmt("%.4f", intent_noisy)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_determinism(const std::string& cli, const fs::path& work) {
  const std::vector<std::pair<std::string, std::string>> steps{
      {"gen-corpus --seed 4 --size 300 --out {d}/corpus.al", "corpus.al"},
      {"train --family hierarchical-separate-3 --hidden 8 --embedding-dim 8 --epochs 2 "
       "--seed 3 --corpus {d}/corpus.al --out {d}/model.json",
       "model.json"},
      {"predict --model {d}/model.json --corpus {d}/corpus.al --out {d}/pred.jsonl", "pred.jsonl"},
      {"corrupt --corpus {d}/corpus.al --seed 2 --out {d}/asr.al", "asr.al"},
      {"cv --family joint-2 --hidden 6 --embedding-dim 6 --epochs 1 --k 3 --seed 5 "
       "--corpus {d}/corpus.al --out {d}/cv.tsv",
       "cv.tsv"},
  };
  std::vector<std::string> differing;
  for (const auto& [args, file] : steps) {
    std::string out[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = work / ("run" + std::to_string(run));
      fs::create_directories(dir);
      std::string cmd = args;
      for (auto pos = cmd.find("{d}"); pos != std::string::npos; pos = cmd.find("{d}"))
        cmd.replace(pos, 3, dir.string());
      const fs::path log = dir / (file + ".stdout");
      if (std::system(("\"" + cli + "\" " + cmd + " > \"" + log.string() + "\" 2>&1").c_str()) != 0)
        return {false, "command failed: " + cmd};
      // Logs echo the output path, which differs between the two runs.
      std::string text = slurp(dir / file) + slurp(log);
      for (auto pos = text.find(dir.string()); pos != std::string::npos;
           pos = text.find(dir.string()))
        text.replace(pos, dir.string().size(), "{d}");
      out[run] = text;
    }
    if (out[0] != out[1]) differing.push_back(file);
  }
  std::string detail = std::to_string(steps.size()) + " commands run twice";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty(), detail};
}

Outcome joint_contract() {
  const TrainedModel model = overfit_model();
  SeededRng rng(31);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < kContractInferences; ++i) {
    std::vector<std::string> tokens(rng.index(13));
    for (auto& t : tokens) t = model.vocab.token(1 + rng.index(model.vocab.size() - 1));
    const JointResult j = joint_infer(model, tokens);
    bool ok = j.labels.size() == tokens.size() + 2 &&
              joint_group(j.labels.front()) == JointGroup::kIntent &&
              joint_group(j.labels.back()) == JointGroup::kIntent;
    for (std::size_t p = 1; ok && p + 1 < j.labels.size(); ++p)
      ok = joint_group(j.labels[p]) != JointGroup::kIntent;
    double total = 0;
    for (std::size_t c = 0; c < kIntentCount; ++c) {
      total += j.distribution[c];
      ok = ok && std::fabs(j.distribution[c] - 0.5 * (j.bou[c] + j.eou[c])) <= 1e-15;
    }
    ok = ok && std::fabs(total - 1.0) <= 1e-12;
    violations += !ok;
  }
  return {violations == 0, std::to_string(kContractInferences) + " inferences, " +
                               std::to_string(violations) + " violations"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::string work = (fs::temp_directory_path() / "slu_acceptance").string();
  std::set<int> only;
  app.add_option("--cli", cli, "Path to the command-line tool")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradients},
      {2, overfit},
      {3, trends},
      {4, metric_oracles},
      {5, salient_fraction},
      {6, noise},
      {7, [&] { return cli_determinism(cli, work); }},
      {8, joint_contract},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s: %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
