#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slu/models.hpp"

namespace slu {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string embeddings_path;  // empty: random initialization
  std::optional<RuleLexicon> lexicon;  // hybrid families; default lexicon when unset

  // Config error naming the offending field.
  void validate() const;
};

struct LossCurve {
  std::vector<double> epoch_loss;  // mean cross-entropy per supervised output
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double seconds = 0.0;
};
using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  TrainedModel model;
  LossCurve curve;
};

// Vocabulary from the corpus tokens in order of first appearance.
Vocabulary build_vocabulary(const Corpus& corpus);

// Rescales `grads` in place so their global L2 norm is at most `max_norm`;
// returns the norm before clipping.
double clip_global_norm(TensorList& grads, double max_norm);

class Adam {
 public:
  Adam(const TrainConfig& config, const TensorList& params);
  void step(TensorList& params, const TensorList& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Mini-batch training. Each epoch shuffles with the seeded generator, groups
// utterances of similar length into batches and visits the batches in random
// order. Batch loss is the summed cross-entropy divided by the number of
// supervised outputs in the batch.
TrainResult train(const ModelConfig& config, const Corpus& data, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {});

}  // namespace slu
