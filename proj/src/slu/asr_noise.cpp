#include "slu/asr_noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "slu/error.hpp"
#include "slu/numerics.hpp"

namespace slu {
namespace {

constexpr double kWerTolerance = 0.01;
constexpr std::size_t kCalibrationRounds = 5;
constexpr double kCalibrationAim = 0.002;

class UnigramSampler {
 public:
  explicit UnigramSampler(const Corpus& corpus) {
    std::map<std::string, std::size_t> counts;
    for (const auto& u : corpus) {
      for (const auto& t : u.tokens) ++counts[t];
    }
    std::size_t running = 0;
    for (const auto& [token, n] : counts) {
      running += n;
      tokens_.push_back(token);
      cumulative_.push_back(running);
    }
  }

  const std::string& draw(SeededRng& rng) const {
    const std::size_t r = rng.index(cumulative_.back());
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return tokens_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  // A draw different from `avoid`, or `avoid` itself when no other token exists.
  const std::string& draw_other(const std::string& avoid, SeededRng& rng) const {
    if (tokens_.size() < 2) return avoid;
    while (true) {
      const std::string& t = draw(rng);
      if (t != avoid) return t;
    }
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> cumulative_;
};

struct Rates {
  double sub, del, ins;
};

AnnotatedUtterance corrupt_one(const AnnotatedUtterance& u, const Rates& r,
                               const UnigramSampler& sampler, SeededRng& rng) {
  AnnotatedUtterance out = u;
  out.tokens.clear();
  out.slots.clear();
  out.keywords.clear();
  out.channel = Channel::kAsr;
  for (std::size_t t = 0; t < u.tokens.size(); ++t) {
    const double x = rng.unit();
    if (x < r.del) {
      // dropped along with its labels
    } else if (x < r.del + r.sub) {
      out.tokens.push_back(sampler.draw_other(u.tokens[t], rng));
      out.slots.push_back(u.slots[t]);
      out.keywords.push_back(u.keywords[t]);
    } else {
      out.tokens.push_back(u.tokens[t]);
      out.slots.push_back(u.slots[t]);
      out.keywords.push_back(u.keywords[t]);
    }
    if (rng.unit() < r.ins) {
      out.tokens.push_back(sampler.draw(rng));
      out.slots.push_back(SlotLabel::kNone);
      out.keywords.push_back(KeywordLabel::kNonIntent);
    }
  }
  if (out.tokens.empty()) {
    out.tokens.push_back(u.tokens.front());
    out.slots.push_back(u.slots.front());
    out.keywords.push_back(u.keywords.front());
  }
  return out;
}

WerResult subset_wer(const Corpus& ref, const Corpus& hyp, PassengerMode mode) {
  WerResult total;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].passenger_mode == mode) total.add(wer(ref[i].tokens, hyp[i].tokens));
  }
  return total;
}

}  // namespace

void WerResult::add(const WerResult& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  reference_length += other.reference_length;
  wer = reference_length ? static_cast<double>(errors()) / static_cast<double>(reference_length)
                         : 0.0;
}

WerResult wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  require(!ref.empty(), "wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  WerResult r;
  r.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  r.wer = static_cast<double>(r.errors()) / static_cast<double>(n);
  return r;
}

WerResult corpus_wer(const Corpus& reference, const Corpus& hypothesis) {
  require(reference.size() == hypothesis.size(),
          "corpus_wer: reference has " + std::to_string(reference.size()) +
              " utterances, hypothesis " + std::to_string(hypothesis.size()));
  WerResult total;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    total.add(wer(reference[i].tokens, hypothesis[i].tokens));
  }
  return total;
}

void NoiseConfig::validate() const {
  if (!(target_wer >= 0.0 && target_wer < 1.0)) {
    fail(ErrorKind::kConfig, "target-wer: must lie in [0, 1)");
  }
  if (!(substitution >= 0.0 && deletion >= 0.0 && insertion >= 0.0)) {
    fail(ErrorKind::kConfig, "mix: proportions must be non-negative");
  }
  if (std::abs(substitution + deletion + insertion - 1.0) > 1e-9) {
    fail(ErrorKind::kConfig, "mix: proportions must sum to 1");
  }
}

NoiseConfig parse_noise_config(std::string_view json_text, const std::string& source) {
  NoiseConfig c;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.contains("target_wer")) c.target_wer = doc["target_wer"].get<double>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("mix")) {
      const auto& mix = doc["mix"];
      c.substitution = mix.value("substitution", c.substitution);
      c.deletion = mix.value("deletion", c.deletion);
      c.insertion = mix.value("insertion", c.insertion);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, source + ": malformed noise config: " + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(e.kind(), source + ": " + e.what());
  }
  return c;
}

NoiseConfig load_noise_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open noise config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_noise_config(buffer.str(), path);
}

CorruptionResult corrupt(const Corpus& corpus, const NoiseConfig& config) {
  config.validate();
  require(!corpus.empty(), "corrupt: empty corpus");
  for (const auto& u : corpus) validate_alignment(u);
  CorruptionResult result;
  if (config.target_wer == 0.0) {
    result.corpus = corpus;
    result.achieved = corpus_wer(corpus, corpus);
    result.singleton = subset_wer(corpus, corpus, PassengerMode::kSingleton);
    result.dyad = subset_wer(corpus, corpus, PassengerMode::kDyad);
    return result;
  }
  const UnigramSampler sampler(corpus);
  double scale = 1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t round = 1; round <= kCalibrationRounds; ++round) {
    Rates r{config.target_wer * config.substitution * scale,
            config.target_wer * config.deletion * scale,
            config.target_wer * config.insertion * scale};
    r.del = std::min(r.del, 1.0);
    r.sub = std::min(r.sub, 1.0 - r.del);
    r.ins = std::min(r.ins, 1.0);
    SeededRng rng(config.seed);
    Corpus noisy;
    noisy.reserve(corpus.size());
    for (const auto& u : corpus) noisy.push_back(corrupt_one(u, r, sampler, rng));
    const WerResult achieved = corpus_wer(corpus, noisy);
    const double gap = std::abs(achieved.wer - config.target_wer);
    // Keep the closest round; stop once it is well inside the tolerance.
    if (gap < best_gap) {
      best_gap = gap;
      result.rounds = round;
      result.rate_scale = scale;
      result.achieved = achieved;
      result.corpus = std::move(noisy);
    }
    if (best_gap <= kCalibrationAim || achieved.wer <= 0.0) break;
    scale *= config.target_wer / achieved.wer;
  }
  if (best_gap > kWerTolerance) {
    fail(ErrorKind::kConfig, "target-wer: " + std::to_string(config.target_wer) +
                                 " not reached within " + std::to_string(kCalibrationRounds) +
                                 " calibration rounds");
  }
  result.singleton = subset_wer(corpus, result.corpus, PassengerMode::kSingleton);
  result.dyad = subset_wer(corpus, result.corpus, PassengerMode::kDyad);
  return result;
}

}  // namespace slu
