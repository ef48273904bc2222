#include "slu/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slu/error.hpp"

namespace slu {
namespace {

std::string parameter_norms(TensorList& tensors) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    double sq = 0.0;
    for (double v : tensors[i].values) sq += v * v;
    out << (i ? ", " : "") << tensors[i].name << '=' << std::sqrt(sq);
  }
  return out.str();
}

std::vector<std::vector<std::size_t>> make_batches(const Corpus& data, std::size_t batch_size,
                                                   SeededRng& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data[a].tokens.size() < data[b].tokens.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng.shuffle(batches);
  return batches;
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, what); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("lr: must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("beta1: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("beta2: must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) bad("adam epsilon: must be positive");
  if (batch_size == 0) bad("batch: must be positive");
  if (epochs == 0) bad("epochs: must be positive");
  if (!(clip_norm > 0.0)) bad("clip: must be positive");
}

Vocabulary build_vocabulary(const Corpus& corpus) {
  Vocabulary vocab;
  for (const auto& u : corpus) {
    for (const auto& t : u.tokens) vocab.add(t);
  }
  return vocab;
}

double clip_global_norm(TensorList& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.values) v *= scale;
    }
  }
  return norm;
}

Adam::Adam(const TrainConfig& config, const TensorList& params)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_epsilon) {
  for (const auto& p : params) {
    m_.emplace_back(p.values.size(), 0.0);
    v_.emplace_back(p.values.size(), 0.0);
  }
}

void Adam::step(TensorList& params, const TensorList& grads) {
  require(params.size() == grads.size() && params.size() == m_.size(),
          "Adam::step: parameter list changed shape");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values;
    auto g = grads[k].values;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

TrainResult train(const ModelConfig& config, const Corpus& data, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
  config.validate();
  tc.validate();
  require(!data.empty(), "train: empty corpus");
  for (const auto& u : data) validate_alignment(u);

  SeededRng root(tc.seed);
  SeededRng init_rng = root.fork();
  SeededRng shuffle_rng = root.fork();
  SeededRng dropout_rng = root.fork();

  TrainResult result;
  TrainedModel& model = result.model;
  model.config = config;
  model.vocab = build_vocabulary(data);
  model.lexicon = tc.lexicon ? *tc.lexicon : default_lexicon();
  EmbeddingMatrix table =
      tc.embeddings_path.empty()
          ? random_embeddings(model.vocab, config.embedding_dim, init_rng)
          : load_pretrained(tc.embeddings_path, model.vocab, init_rng, config.embedding_dim);
  model.params = ModelParams::create(config, std::move(table), init_rng);

  ModelParams grads = model.params.zeros_like();
  TensorList param_list = model.params.collect();
  TensorList grad_list = grads.collect();
  Adam adam(tc, param_list);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    std::size_t epoch_predictions = 0;
    const auto batches = make_batches(data, tc.batch_size, shuffle_rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      for (auto& g : grad_list) std::fill(g.values.begin(), g.values.end(), 0.0);
      LossTally batch;
      for (std::size_t idx : batches[b]) {
        const LossTally t = utterance_loss(model, data[idx], &grads, config.dropout, &dropout_rng);
        batch.loss += t.loss;
        batch.predictions += t.predictions;
      }
      if (batch.predictions == 0) continue;
      if (!std::isfinite(batch.loss)) {
        fail(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) +
                                      ", batch " + std::to_string(b + 1) +
                                      "; parameter norms: " + parameter_norms(param_list));
      }
      const double scale = 1.0 / static_cast<double>(batch.predictions);
      for (auto& g : grad_list) {
        for (double& v : g.values) v *= scale;
      }
      clip_global_norm(grad_list, tc.clip_norm);
      adam.step(param_list, grad_list);
      epoch_loss += batch.loss;
      epoch_predictions += batch.predictions;
    }
    const double mean = epoch_predictions ? epoch_loss / static_cast<double>(epoch_predictions) : 0.0;
    result.curve.epoch_loss.push_back(mean);
    if (on_epoch) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      on_epoch({epoch, mean, elapsed.count()});
    }
  }
  return result;
}

}  // namespace slu
