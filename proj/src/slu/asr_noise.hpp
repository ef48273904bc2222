#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slu/corpus.hpp"

namespace slu {

struct WerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;
  double wer = 0.0;  // (S + D + I) / N, 0 when N is 0

  std::size_t errors() const { return substitutions + deletions + insertions; }
  void add(const WerResult& other);
};

// Unit-cost edit distance. Counts come from one optimal alignment, found by
// backtracking with the preference substitution (or match), deletion,
// insertion. Invalid argument on an empty reference.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

// Pools counts over aligned utterance pairs.
WerResult corpus_wer(const Corpus& reference, const Corpus& hypothesis);

struct NoiseConfig {
  double target_wer = 0.136;
  double substitution = 0.7;
  double deletion = 0.2;
  double insertion = 0.1;
  std::uint64_t seed = 1;

  // Config error unless 0 <= target < 1 and the mix is non-negative and sums to 1.
  void validate() const;
};

// {"target_wer": 0.136, "mix": {"substitution": 0.7, "deletion": 0.2,
//  "insertion": 0.1}, "seed": 1}; every field optional.
NoiseConfig parse_noise_config(std::string_view json_text, const std::string& source);
NoiseConfig load_noise_config(const std::string& path);

struct CorruptionResult {
  Corpus corpus;
  WerResult achieved;
  WerResult singleton;
  WerResult dyad;
  std::size_t rounds = 0;
  double rate_scale = 1.0;  // multiplier on target x mix in the returned round
};

// Per reference token: delete with rate d, otherwise substitute with rate s
// by a unigram draw that differs from the original; after each token insert
// a unigram draw with rate i. Rates start at target x mix and are rescaled by
// target/achieved for up to five rounds, each round restarting from the seed.
// The round closest to the target is returned; config error when even that
// one misses by more than 0.01.
// Substitutes keep their labels, insertions are (None, NonIntent), and an
// utterance is never left empty. Target 0 returns the input unchanged.
CorruptionResult corrupt(const Corpus& corpus, const NoiseConfig& config);

}  // namespace slu
