#include "slu/gradcert.hpp"

#include <algorithm>

#include "slu/cells.hpp"
#include "slu/embeddings.hpp"
#include "slu/error.hpp"
#include "slu/models.hpp"
#include "slu/training.hpp"

namespace slu {
namespace {

// Wider than the training initialization so gradients are well above the
// finite-difference noise floor.
constexpr double kCertRange = 0.5;

RealVector random_vector(std::size_t n, SeededRng& rng) {
  RealVector v(n);
  fill_uniform(v.span(), -kCertRange, kCertRange, rng);
  return v;
}

void randomize(TensorList& tensors, SeededRng& rng) {
  for (auto& t : tensors) fill_uniform(t.values, -kCertRange, kCertRange, rng);
}

std::vector<GradCheckTarget> targets_for(TensorList& params, TensorList& grads) {
  std::vector<GradCheckTarget> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({params[i].name, params[i].values, grads[i].values});
  }
  return out;
}

void add_input(std::vector<GradCheckTarget>& targets, const std::string& name, RealVector& value,
               const RealVector& grad) {
  targets.push_back({name, value.span(), grad.span()});
}

CertificationResult finish(const std::string& component, std::uint64_t seed,
                           std::vector<GradCheckReport> reports) {
  CertificationResult r{component, seed, std::move(reports), 0.0};
  for (const auto& rep : r.reports) {
    r.max_relative_error = std::max(r.max_relative_error, rep.max_relative_error);
  }
  return r;
}

CertificationResult certify_lstm(std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  const std::size_t d = 4, h = 4;
  LstmParams params = LstmParams::initialized(d, h, rng);
  TensorList plist;
  params.collect("", plist);
  randomize(plist, rng);
  RealVector x = random_vector(d, rng), hp = random_vector(h, rng), cp = random_vector(h, rng);
  const RealVector q = random_vector(h, rng);
  const std::size_t target = rng.index(h);
  auto loss = [&] {
    const StepTrace tr = lstm_step(params, x, hp, cp);
    return cross_entropy(softmax(tr.h), target) + dot(q, tr.c);
  };
  LstmParams grads = LstmParams::zeros(d, h);
  const StepTrace tr = lstm_step(params, x, hp, cp);
  const RealVector dh = softmax_cross_entropy_grad(softmax(tr.h), target);
  const LstmStepGrads in = lstm_step_backward(params, tr, dh, q, grads);
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  add_input(targets, "x", x, in.x);
  add_input(targets, "h_prev", hp, in.h_prev);
  add_input(targets, "c_prev", cp, in.c_prev);
  return finish("lstm_step", seed, finite_diff_check(loss, targets, eps));
}

CertificationResult certify_gru(std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  const std::size_t d = 4, h = 4;
  GruParams params = GruParams::initialized(d, h, rng);
  TensorList plist;
  params.collect("", plist);
  randomize(plist, rng);
  RealVector x = random_vector(d, rng), hp = random_vector(h, rng);
  const std::size_t target = rng.index(h);
  auto loss = [&] { return cross_entropy(softmax(gru_step(params, x, hp).h), target); };
  GruParams grads = GruParams::zeros(d, h);
  const GruTrace tr = gru_step(params, x, hp);
  const RealVector dh = softmax_cross_entropy_grad(softmax(tr.h), target);
  const GruStepGrads in = gru_step_backward(params, tr, dh, grads);
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  add_input(targets, "x", x, in.x);
  add_input(targets, "h_prev", hp, in.h_prev);
  return finish("gru_step", seed, finite_diff_check(loss, targets, eps));
}

CertificationResult certify_bidir(const std::string& component, CellKind kind,
                                  std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  const std::size_t d = 3, h = 3, steps = 4;
  Encoder enc = Encoder::create(kind, true, d, h, rng);
  TensorList plist;
  enc.collect("", plist);
  randomize(plist, rng);
  std::vector<RealVector> xs;
  std::vector<RealVector> weights;
  for (std::size_t t = 0; t < steps; ++t) {
    xs.push_back(random_vector(d, rng));
    weights.push_back(random_vector(2 * h, rng));
  }
  auto loss = [&] {
    const BidirOutput out = bidir_unroll(enc.fw, *enc.bw, xs);
    double total = 0.0;
    for (std::size_t t = 0; t < steps; ++t) total += dot(weights[t], out.states[t]);
    return total;
  };
  Encoder grads = enc.zeros_like();
  Encoder::Trace trace;
  enc.run(xs, &trace);
  const auto dxs = enc.backprop(trace, weights, grads);
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  for (std::size_t t = 0; t < steps; ++t) add_input(targets, "x" + std::to_string(t), xs[t], dxs[t]);
  return finish(component, seed, finite_diff_check(loss, targets, eps));
}

CertificationResult certify_attention(const std::string& component, bool learned,
                                      std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  const std::size_t s = 4, a = 3, steps = 4;
  AttentionParams params = AttentionParams::create(s, a, learned, rng);
  TensorList plist;
  params.collect("", plist);
  randomize(plist, rng);
  std::vector<RealVector> states;
  for (std::size_t t = 0; t < steps; ++t) states.push_back(random_vector(s, rng));
  const RealVector w = random_vector(s, rng);
  auto loss = [&] { return dot(w, attention_pool(states, params).pooled); };
  AttentionParams grads = params.zeros_like();
  AttentionTrace trace;
  attention_pool(states, params, &trace);
  const auto dstates = attention_backward(params, trace, w, grads);
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  for (std::size_t t = 0; t < steps; ++t) {
    add_input(targets, "state" + std::to_string(t), states[t], dstates[t]);
  }
  return finish(component, seed, finite_diff_check(loss, targets, eps));
}

CertificationResult certify_embedding(std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  Vocabulary vocab;
  for (const char* t : {"stop", "the", "car", "park", "here"}) vocab.add(t);
  EmbeddingMatrix table = random_embeddings(vocab, 4, rng);
  fill_uniform(table.table.span(), -kCertRange, kCertRange, rng);
  const std::vector<std::string> tokens = {"park", "the", "car", "the", "zzzq"};
  std::vector<RealVector> weights;
  for (std::size_t t = 0; t < tokens.size(); ++t) weights.push_back(random_vector(4, rng));
  auto loss = [&] {
    const auto xs = lookup(table, tokens, vocab);
    double total = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) total += dot(weights[t], xs[t]);
    return total;
  };
  RealMatrix grad(table.rows(), table.dim());
  accumulate_embedding_grad(grad, token_indices(tokens, vocab), weights);
  std::vector<GradCheckTarget> targets = {{"embedding", table.table.span(), grad.span()}};
  return finish("embedding_lookup", seed, finite_diff_check(loss, targets, eps));
}

CertificationResult certify_affine(std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  Affine head = Affine::create(5, 4, rng);
  TensorList plist;
  head.collect("", plist);
  randomize(plist, rng);
  RealVector x = random_vector(4, rng);
  const std::size_t target = rng.index(5);
  auto loss = [&] { return cross_entropy(softmax(head.apply(x)), target); };
  Affine grads = head.zeros_like();
  RealVector dx(4);
  head.backward(x, softmax_cross_entropy_grad(softmax(head.apply(x)), target), grads, dx);
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  add_input(targets, "x", x, dx);
  return finish("affine_softmax", seed, finite_diff_check(loss, targets, eps));
}

Corpus certification_corpus() {
  auto make = [](std::vector<std::string> tokens, std::vector<SlotLabel> slots,
                 std::vector<KeywordLabel> keywords, IntentType intent) {
    AnnotatedUtterance u;
    u.tokens = std::move(tokens);
    u.slots = std::move(slots);
    u.keywords = std::move(keywords);
    u.intent = intent;
    u.session_id = "s01";
    return u;
  };
  using S = SlotLabel;
  using K = KeywordLabel;
  return {
      make({"please", "park", "here"}, {S::kNone, S::kNone, S::kPositionDirection},
           {K::kNonIntent, K::kIntent, K::kNonIntent}, IntentType::kPark),
      make({"take", "me", "to", "the", "mall"},
           {S::kNone, S::kPerson, S::kNone, S::kLocation, S::kLocation},
           {K::kIntent, K::kNonIntent, K::kNonIntent, K::kNonIntent, K::kNonIntent},
           IntentType::kSetDestination),
      make({"um", "okay"}, {S::kNone, S::kNone}, {K::kNonIntent, K::kNonIntent},
           IntentType::kOther),
  };
}

// Joint output head: one affine map, softmax restricted to a label group per
// position. Positions 0 and 2 are boundaries (intent group), position 1 is
// interior (slot and keyword groups).
CertificationResult certify_joint_head(std::uint64_t seed, double eps) {
  SeededRng rng(seed);
  const std::size_t width = 4;
  Affine head = Affine::create(kJointLabelCount, width, rng);
  TensorList plist;
  head.collect("", plist);
  randomize(plist, rng);
  std::vector<RealVector> feats;
  for (int t = 0; t < 3; ++t) feats.push_back(random_vector(width, rng));
  const std::size_t intent = rng.index(kIntentCount);
  const std::size_t slot = rng.index(kSlotCount);
  const std::size_t keyword = rng.index(kKeywordCount);
  struct Group {
    std::size_t position, begin, size, target;
  };
  const std::vector<Group> groups = {{0, kJointIntentBegin, kIntentCount, intent},
                                     {1, kJointSlotBegin, kSlotCount, slot},
                                     {1, kJointKeywordBegin, kKeywordCount, keyword},
                                     {2, kJointIntentBegin, kIntentCount, intent}};
  auto group_probs = [&](const Group& g) {
    const RealVector logits = head.apply(feats[g.position]);
    return softmax(std::span<const double>(logits.values()).subspan(g.begin, g.size));
  };
  auto loss = [&] {
    double total = 0.0;
    for (const auto& g : groups) total += cross_entropy(group_probs(g), g.target);
    return total;
  };
  Affine grads = head.zeros_like();
  std::vector<RealVector> dfeats(3, RealVector(width));
  for (const auto& g : groups) {
    const RealVector dgroup = softmax_cross_entropy_grad(group_probs(g), g.target);
    RealVector dz(kJointLabelCount);
    for (std::size_t i = 0; i < g.size; ++i) dz[g.begin + i] = dgroup[i];
    head.backward(feats[g.position], dz, grads, dfeats[g.position]);
  }
  TensorList glist;
  grads.collect("", glist);
  auto targets = targets_for(plist, glist);
  for (std::size_t t = 0; t < 3; ++t) add_input(targets, "feature" + std::to_string(t), feats[t], dfeats[t]);
  return finish("joint_head", seed, finite_diff_check(loss, targets, eps));
}

// Full model, dropout on with a fixed mask sequence. Individual entries of a
// whole-model gradient can be structurally tiny (attention bias gradients
// nearly cancel across positions), so the comparison is made along random
// directions in parameter space: d/da L(theta + a v) against grad . v.
CertificationResult certify_family(const std::string& component, Family family,
                                   std::uint64_t seed, double eps) {
  constexpr std::size_t kDirections = 4;
  SeededRng rng(seed);
  const Corpus data = certification_corpus();
  ModelConfig config = ModelConfig::for_family(family);
  config.embedding_dim = 3;
  config.hidden_dim = 3;
  config.dropout = 0.5;
  TrainedModel model;
  model.config = config;
  model.vocab = build_vocabulary(data);
  model.lexicon = default_lexicon();
  model.params = ModelParams::create(config, random_embeddings(model.vocab, 3, rng), rng);
  TensorList plist = model.params.collect();
  randomize(plist, rng);
  const std::uint64_t dropout_seed = rng.next_u64();
  auto run = [&](ModelParams* grads) {
    SeededRng dropout_rng(dropout_seed);
    double total = 0.0;
    for (const auto& u : data) {
      total += utterance_loss(model, u, grads, config.dropout, &dropout_rng).loss;
    }
    return total;
  };
  ModelParams grads = model.params.zeros_like();
  run(&grads);
  TensorList glist = grads.collect();

  std::vector<std::vector<double>> origin;
  for (const auto& t : plist) origin.emplace_back(t.values.begin(), t.values.end());
  std::vector<GradCheckReport> reports;
  for (std::size_t k = 0; k < kDirections; ++k) {
    std::vector<std::vector<double>> direction;
    double analytic = 0.0;
    for (std::size_t i = 0; i < plist.size(); ++i) {
      direction.emplace_back(plist[i].values.size());
      for (std::size_t j = 0; j < direction[i].size(); ++j) {
        direction[i][j] = rng.uniform(-1.0, 1.0);
        analytic += direction[i][j] * glist[i].values[j];
      }
    }
    double alpha = 0.0;
    const RealVector analytic_v{analytic};
    auto loss = [&] {
      for (std::size_t i = 0; i < plist.size(); ++i) {
        for (std::size_t j = 0; j < direction[i].size(); ++j) {
          plist[i].values[j] = origin[i][j] + alpha * direction[i][j];
        }
      }
      return run(nullptr);
    };
    const std::vector<GradCheckTarget> targets = {
        {"direction" + std::to_string(k), std::span<double>(&alpha, 1), analytic_v.span()}};
    auto part = finite_diff_check(loss, targets, eps);
    reports.insert(reports.end(), part.begin(), part.end());
  }
  for (std::size_t i = 0; i < plist.size(); ++i) {
    std::copy(origin[i].begin(), origin[i].end(), plist[i].values.begin());
  }
  return finish(component, seed, std::move(reports));
}

}  // namespace

std::vector<std::string> certification_components() {
  std::vector<std::string> out = {"lstm_step",         "gru_step",        "bidir_unroll",
                                  "bidir_unroll_gru",  "attention_plain", "attention_context",
                                  "embedding_lookup",  "affine_softmax",  "joint_head"};
  for (auto n : kFamilyNames) out.push_back("family:" + std::string(n));
  return out;
}

CertificationResult certify_component(const std::string& component, std::uint64_t seed,
                                      double epsilon) {
  require(epsilon >= 1e-6 && epsilon <= 1e-3, "certify_component: epsilon must lie in [1e-6, 1e-3]");
  if (component == "lstm_step") return certify_lstm(seed, epsilon);
  if (component == "gru_step") return certify_gru(seed, epsilon);
  if (component == "bidir_unroll") return certify_bidir(component, CellKind::kLstm, seed, epsilon);
  if (component == "bidir_unroll_gru") return certify_bidir(component, CellKind::kGru, seed, epsilon);
  if (component == "attention_plain") return certify_attention(component, false, seed, epsilon);
  if (component == "attention_context") return certify_attention(component, true, seed, epsilon);
  if (component == "embedding_lookup") return certify_embedding(seed, epsilon);
  if (component == "affine_softmax") return certify_affine(seed, epsilon);
  if (component == "joint_head") return certify_joint_head(seed, epsilon);
  if (component.rfind("family:", 0) == 0) {
    if (auto f = parse_family(component.substr(7))) return certify_family(component, *f, seed, epsilon);
  }
  fail(ErrorKind::kInvalidArgument, "unknown certification component '" + component + "'");
}

}  // namespace slu
