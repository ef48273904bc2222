#include "slu/models.hpp"

#include <algorithm>

#include "slu/error.hpp"

namespace slu {
namespace {

constexpr std::array<std::string_view, 2> kCellNames = {"lstm", "gru"};
constexpr std::array<std::string_view, 3> kAttentionNames = {"none", "plain", "with_context"};

bool ends_in_zero(Family f) {
  return f == Family::kHybrid0 || f == Family::kSeparate0 || f == Family::kHierSeparate0;
}

std::vector<RealVector> embed(const ModelParams& p, std::span<const std::size_t> ids) {
  return lookup_indices(p.embedding, ids);
}

std::vector<std::size_t> ids_of(const Vocabulary& vocab, std::span<const std::string> tokens) {
  return token_indices(tokens, vocab);
}

// Softmax restricted to logits[begin, begin + count).
RealVector group_softmax(const RealVector& logits, std::size_t begin, std::size_t count) {
  return softmax(std::span<const double>(logits.values()).subspan(begin, count));
}

// Output features of a seq2one network.
struct FeatureCache {
  AttentionTrace attention;
};

RealVector seq2one_feature(const ClassifierNet& net, const std::vector<RealVector>& states,
                           FeatureCache* cache) {
  if (net.attention) {
    return attention_pool(states, *net.attention, cache ? &cache->attention : nullptr).pooled;
  }
  if (!net.encoder.bidirectional()) return states.back();
  const std::size_t h = net.encoder.hidden_dim();
  const auto last = std::span<const double>(states.back().values()).subspan(0, h);
  const auto first = std::span<const double>(states.front().values()).subspan(h, h);
  return concat(last, first);
}

void seq2one_feature_backward(const ClassifierNet& net, const FeatureCache& cache,
                              const RealVector& dfeat, std::vector<RealVector>& dstates,
                              ClassifierNet& grads) {
  if (net.attention) {
    auto d = attention_backward(*net.attention, cache.attention, dfeat, *grads.attention);
    for (std::size_t t = 0; t < d.size(); ++t) add_to(dstates[t], d[t]);
    return;
  }
  if (!net.encoder.bidirectional()) {
    add_to(dstates.back(), dfeat);
    return;
  }
  const std::size_t h = net.encoder.hidden_dim();
  auto df = std::span<const double>(dfeat.values());
  add_to(std::span<double>(dstates.back().values()).subspan(0, h), df.subspan(0, h));
  add_to(std::span<double>(dstates.front().values()).subspan(h, h), df.subspan(h, h));
}

RealVector apply_dropout(const RealVector& v, double rate, SeededRng* rng,
                         std::vector<double>& mask) {
  if (rate == 0.0) {
    mask.assign(v.dim(), 1.0);
    return v;
  }
  return dropout_apply(v, rate, true, *rng, &mask);
}

void mask_in_place(RealVector& v, const std::vector<double>& mask) {
  for (std::size_t i = 0; i < v.dim(); ++i) v[i] *= mask[i];
}

// Cross-entropy of one softmax head; accumulates the head gradient and the
// gradient with respect to its input feature.
void head_loss(const Affine& head, const RealVector& feat, std::size_t target,
               std::size_t group_begin, std::size_t group_size, LossTally& tally,
               Affine* head_grads, RealVector* dfeat) {
  const RealVector logits = head.apply(feat);
  const RealVector probs = group_softmax(logits, group_begin, group_size);
  tally.loss += cross_entropy(probs, target);
  ++tally.predictions;
  if (head_grads == nullptr) return;
  const RealVector dgroup = softmax_cross_entropy_grad(probs, target);
  RealVector dz(logits.dim());
  for (std::size_t i = 0; i < group_size; ++i) dz[group_begin + i] = dgroup[i];
  head.backward(feat, dz, *head_grads, *dfeat);
}

void tagger_loss(const TaggerNet& net, const ModelParams& params,
                 std::span<const std::size_t> ids, std::span<const SlotLabel> slots,
                 std::span<const KeywordLabel> keywords, ModelParams* grads, double dropout,
                 SeededRng* rng, LossTally& tally) {
  const auto xs = embed(params, ids);
  Encoder::Trace trace;
  const auto states = net.encoder.run(xs, grads ? &trace : nullptr);
  const std::size_t width = net.encoder.output_dim();
  std::vector<RealVector> dstates(states.size(), RealVector(width));
  std::vector<double> mask;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const RealVector feat = apply_dropout(states[t], dropout, rng, mask);
    RealVector dfeat(width);
    if (net.slot_head) {
      head_loss(*net.slot_head, feat, index_of(slots[t]), 0, kSlotCount, tally,
                grads ? &*grads->tagger->slot_head : nullptr, &dfeat);
    }
    head_loss(net.keyword_head, feat, index_of(keywords[t]), 0, kKeywordCount, tally,
              grads ? &grads->tagger->keyword_head : nullptr, &dfeat);
    if (grads) {
      mask_in_place(dfeat, mask);
      dstates[t] = std::move(dfeat);
    }
  }
  if (!grads) return;
  const auto dxs = net.encoder.backprop(trace, dstates, grads->tagger->encoder);
  if (params.embedding.trainable) accumulate_embedding_grad(grads->embedding.table, ids, dxs);
}

void classifier_loss(const ClassifierNet& net, const ModelParams& params,
                     std::span<const std::size_t> ids, IntentType intent, ModelParams* grads,
                     double dropout, SeededRng* rng, LossTally& tally) {
  const auto xs = embed(params, ids);
  Encoder::Trace trace;
  const auto states = net.encoder.run(xs, grads ? &trace : nullptr);
  FeatureCache cache;
  const RealVector pooled = seq2one_feature(net, states, grads ? &cache : nullptr);
  std::vector<double> mask;
  const RealVector feat = apply_dropout(pooled, dropout, rng, mask);
  RealVector dfeat(feat.dim());
  head_loss(net.intent_head, feat, index_of(intent), 0, kIntentCount, tally,
            grads ? &grads->classifier->intent_head : nullptr, &dfeat);
  if (!grads) return;
  mask_in_place(dfeat, mask);
  std::vector<RealVector> dstates(states.size(), RealVector(net.encoder.output_dim()));
  seq2one_feature_backward(net, cache, dfeat, dstates, *grads->classifier);
  const auto dxs = net.encoder.backprop(trace, dstates, grads->classifier->encoder);
  if (params.embedding.trainable) accumulate_embedding_grad(grads->embedding.table, ids, dxs);
}

// `ids` are already wrapped; slots/keywords cover the interior only.
void joint_loss(const JointNet& net, bool with_keywords, const ModelParams& params,
                std::span<const std::size_t> ids, std::span<const SlotLabel> slots,
                std::span<const KeywordLabel> keywords, IntentType intent, ModelParams* grads,
                double dropout, SeededRng* rng, LossTally& tally) {
  const auto xs = embed(params, ids);
  Encoder::Trace trace;
  const auto states = net.encoder.run(xs, grads ? &trace : nullptr);
  const std::size_t width = net.encoder.output_dim();
  const std::size_t last = states.size() - 1;
  std::vector<RealVector> dstates(states.size(), RealVector(width));
  std::vector<double> mask;
  Affine* head_grads = grads ? &grads->joint->head : nullptr;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const RealVector feat = apply_dropout(states[t], dropout, rng, mask);
    RealVector dfeat(width);
    if (t == 0 || t == last) {
      head_loss(net.head, feat, index_of(intent), kJointIntentBegin, kIntentCount, tally,
                head_grads, &dfeat);
    } else {
      head_loss(net.head, feat, index_of(slots[t - 1]), kJointSlotBegin, kSlotCount, tally,
                head_grads, &dfeat);
      if (with_keywords) {
        head_loss(net.head, feat, index_of(keywords[t - 1]), kJointKeywordBegin,
                  kKeywordCount, tally, head_grads, &dfeat);
      }
    }
    if (grads) {
      mask_in_place(dfeat, mask);
      dstates[t] = std::move(dfeat);
    }
  }
  if (!grads) return;
  const auto dxs = net.encoder.backprop(trace, dstates, grads->joint->encoder);
  if (params.embedding.trainable) accumulate_embedding_grad(grads->embedding.table, ids, dxs);
}

std::vector<std::size_t> wrapped_ids(const Vocabulary& vocab,
                                     std::span<const std::string> interior) {
  std::vector<std::size_t> ids;
  ids.reserve(interior.size() + 2);
  ids.push_back(Vocabulary::kBou);
  for (const auto& t : interior) ids.push_back(vocab.index_of(t));
  ids.push_back(Vocabulary::kEou);
  return ids;
}

std::vector<SlotMention> slot_mentions(std::span<const std::string> tokens,
                                       std::span<const SlotLabel> slots) {
  std::vector<SlotMention> out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (slots[t] != SlotLabel::kNone) out.emplace_back(tokens[t], slots[t]);
  }
  return out;
}

}  // namespace

std::optional<Family> parse_family(std::string_view text) {
  if (auto i = find_name(kFamilyNames, text)) return family_at(*i);
  return std::nullopt;
}

FamilyTraits traits(Family family) {
  FamilyTraits t;
  t.bidirectional = !ends_in_zero(family);
  t.lstm_only = ends_in_zero(family);
  switch (family) {
    case Family::kHybrid0:
    case Family::kHybrid1:
      t.tagger = true;
      t.rules = true;
      t.rule_variant = RuleVariant::kKeywordsOnly;
      break;
    case Family::kHybrid2:
      t.tagger = t.tagger_slots = t.rules = true;
      t.rule_variant = RuleVariant::kKeywordsAndDirection;
      break;
    case Family::kHybrid3:
      t.tagger = t.tagger_slots = t.rules = true;
      t.rule_variant = RuleVariant::kKeywordsAndSlots;
      break;
    case Family::kSeparate0:
    case Family::kSeparate1:
      t.classifier = true;
      break;
    case Family::kSeparate2:
      t.classifier = true;
      t.attention = AttentionKind::kPlain;
      break;
    case Family::kSeparate3:
      t.classifier = true;
      t.attention = AttentionKind::kWithContext;
      break;
    case Family::kJoint1:
      t.joint = true;
      break;
    case Family::kJoint2:
      t.joint = t.joint_keywords = true;
      break;
    case Family::kHierSeparate0:
    case Family::kHierSeparate1:
      t.tagger = t.tagger_slots = t.classifier = t.hierarchical = true;
      break;
    case Family::kHierSeparate2:
      t.tagger = t.tagger_slots = t.classifier = t.hierarchical = true;
      t.attention = AttentionKind::kPlain;
      break;
    case Family::kHierSeparate3:
      t.tagger = t.tagger_slots = t.classifier = t.hierarchical = true;
      t.attention = AttentionKind::kWithContext;
      break;
    case Family::kHierJoint2:
      t.tagger = t.tagger_slots = t.joint = t.joint_keywords = t.hierarchical = true;
      break;
  }
  return t;
}

TaskSet tasks(Family family) {
  const FamilyTraits t = traits(family);
  TaskSet s;
  if (t.tagger) {
    s.slots = t.tagger_slots;
    s.keywords = true;
  } else if (t.joint) {
    s.slots = true;
    s.keywords = t.joint_keywords;
  }
  return s;
}

std::string_view name(CellKind cell) { return kCellNames[static_cast<std::size_t>(cell)]; }
std::string_view name(AttentionKind attention) {
  return kAttentionNames[static_cast<std::size_t>(attention)];
}
std::optional<CellKind> parse_cell(std::string_view text) {
  if (auto i = find_name(kCellNames, text)) return static_cast<CellKind>(*i);
  return std::nullopt;
}
std::optional<AttentionKind> parse_attention(std::string_view text) {
  if (auto i = find_name(kAttentionNames, text)) return static_cast<AttentionKind>(*i);
  return std::nullopt;
}

ModelConfig ModelConfig::for_family(Family family) {
  const FamilyTraits t = traits(family);
  ModelConfig c;
  c.family = family;
  c.bidirectional = t.bidirectional;
  c.attention = t.attention;
  return c;
}

void ModelConfig::validate() const {
  const FamilyTraits t = traits(family);
  const std::string fam(name(family));
  if (bidirectional != t.bidirectional) {
    fail(ErrorKind::kConfig, "bidirectional: " + fam + " requires " +
                                 (t.bidirectional ? "a bidirectional" : "a unidirectional") +
                                 " encoder");
  }
  if (attention != t.attention) {
    fail(ErrorKind::kConfig, "attention: " + fam + " requires attention=" +
                                 std::string(name(t.attention)));
  }
  if (t.lstm_only && cell != CellKind::kLstm) {
    fail(ErrorKind::kConfig, "cell: " + fam + " requires an LSTM cell");
  }
  if (hidden_dim == 0) fail(ErrorKind::kConfig, "hidden: must be positive");
  if (embedding_dim == 0) fail(ErrorKind::kConfig, "embeddings: dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::kConfig, "dropout: must lie in [0, 1)");
}

JointGroup joint_group(std::size_t union_index) {
  require(union_index < kJointLabelCount, "joint_group: label index out of range");
  if (union_index < kJointKeywordBegin) return JointGroup::kSlot;
  if (union_index < kJointIntentBegin) return JointGroup::kKeyword;
  return JointGroup::kIntent;
}

TaggerNet TaggerNet::zeros_like() const {
  TaggerNet z{encoder.zeros_like(), std::nullopt, keyword_head.zeros_like()};
  if (slot_head) z.slot_head = slot_head->zeros_like();
  return z;
}

void TaggerNet::collect(const std::string& prefix, TensorList& out) {
  encoder.collect(prefix + "encoder.", out);
  if (slot_head) slot_head->collect(prefix + "slot_head.", out);
  keyword_head.collect(prefix + "keyword_head.", out);
}

ClassifierNet ClassifierNet::zeros_like() const {
  ClassifierNet z{encoder.zeros_like(), std::nullopt, intent_head.zeros_like()};
  if (attention) z.attention = attention->zeros_like();
  return z;
}

void ClassifierNet::collect(const std::string& prefix, TensorList& out) {
  encoder.collect(prefix + "encoder.", out);
  if (attention) attention->collect(prefix + "attention.", out);
  intent_head.collect(prefix + "intent_head.", out);
}

JointNet JointNet::zeros_like() const { return {encoder.zeros_like(), head.zeros_like()}; }

void JointNet::collect(const std::string& prefix, TensorList& out) {
  encoder.collect(prefix + "encoder.", out);
  head.collect(prefix + "head.", out);
}

ModelParams ModelParams::create(const ModelConfig& config, EmbeddingMatrix embedding,
                                SeededRng& rng) {
  config.validate();
  require(embedding.dim() == config.embedding_dim,
          "embedding table width differs from the configured dimension");
  const FamilyTraits t = traits(config.family);
  const std::size_t d = config.embedding_dim;
  const std::size_t h = config.hidden_dim;
  const std::size_t width = config.bidirectional ? 2 * h : h;
  ModelParams p;
  p.embedding = std::move(embedding);
  if (t.tagger) {
    TaggerNet net{Encoder::create(config.cell, config.bidirectional, d, h, rng), std::nullopt,
                  Affine{}};
    if (t.tagger_slots) net.slot_head = Affine::create(kSlotCount, width, rng);
    net.keyword_head = Affine::create(kKeywordCount, width, rng);
    p.tagger = std::move(net);
  }
  if (t.classifier) {
    ClassifierNet net{Encoder::create(config.cell, config.bidirectional, d, h, rng),
                      std::nullopt, Affine{}};
    if (config.attention != AttentionKind::kNone) {
      net.attention = AttentionParams::create(width, h,
                                              config.attention == AttentionKind::kWithContext,
                                              rng);
    }
    net.intent_head = Affine::create(kIntentCount, width, rng);
    p.classifier = std::move(net);
  }
  if (t.joint) {
    p.joint = JointNet{Encoder::create(config.cell, config.bidirectional, d, h, rng),
                       Affine::create(kJointLabelCount, width, rng)};
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.embedding = EmbeddingMatrix{RealMatrix(embedding.rows(), embedding.dim()),
                                embedding.trainable};
  if (tagger) z.tagger = tagger->zeros_like();
  if (classifier) z.classifier = classifier->zeros_like();
  if (joint) z.joint = joint->zeros_like();
  return z;
}

TensorList ModelParams::collect(bool include_frozen) {
  TensorList out;
  if (embedding.trainable || include_frozen) append_tensor(out, "embedding", embedding.table);
  if (tagger) tagger->collect("tagger.", out);
  if (classifier) classifier->collect("classifier.", out);
  if (joint) joint->collect("joint.", out);
  return out;
}

TagResult tag_sequence(const TrainedModel& model, std::span<const std::string> tokens) {
  require(model.params.tagger.has_value(), "tag_sequence: family " +
                                               std::string(name(model.config.family)) +
                                               " has no tagger");
  require(!tokens.empty(), "tag_sequence: empty token list");
  const TaggerNet& net = *model.params.tagger;
  const auto ids = ids_of(model.vocab, tokens);
  const auto states = net.encoder.run(embed(model.params, ids));
  TagResult r;
  for (const auto& s : states) {
    if (net.slot_head) {
      RealVector probs = softmax(net.slot_head->apply(s));
      r.slots.push_back(slot_at(argmax(probs)));
      r.slot_probs.push_back(std::move(probs));
    } else {
      r.slots.push_back(SlotLabel::kNone);
    }
    RealVector probs = softmax(net.keyword_head.apply(s));
    r.keywords.push_back(keyword_at(argmax(probs)));
    r.keyword_probs.push_back(std::move(probs));
  }
  return r;
}

FilteredSequence filter_salient(std::span<const std::string> tokens,
                                std::span<const SlotLabel> slots,
                                std::span<const KeywordLabel> keywords) {
  require(tokens.size() == slots.size() && tokens.size() == keywords.size(),
          "filter_salient: misaligned labels");
  FilteredSequence out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!is_salient(slots[t], keywords[t])) continue;
    out.tokens.push_back(tokens[t]);
    out.slots.push_back(slots[t]);
    out.keywords.push_back(keywords[t]);
    out.positions.push_back(t);
  }
  return out;
}

std::vector<std::string> wrap_boundaries(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size() + 2);
  out.emplace_back(Vocabulary::kBouToken);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.emplace_back(Vocabulary::kEouToken);
  return out;
}

IntentResult classify_utterance(const TrainedModel& model, std::span<const std::string> tokens) {
  require(model.params.classifier.has_value(), "classify_utterance: family " +
                                                   std::string(name(model.config.family)) +
                                                   " has no seq2one classifier");
  require(!tokens.empty(), "classify_utterance: empty token sequence");
  const ClassifierNet& net = *model.params.classifier;
  const auto ids = ids_of(model.vocab, tokens);
  const auto states = net.encoder.run(embed(model.params, ids));
  IntentResult r;
  r.distribution = softmax(net.intent_head.apply(seq2one_feature(net, states, nullptr)));
  r.intent = intent_at(argmax(r.distribution));
  return r;
}

JointResult joint_infer(const TrainedModel& model, std::span<const std::string> tokens) {
  require(model.params.joint.has_value(), "joint_infer: family " +
                                              std::string(name(model.config.family)) +
                                              " has no joint network");
  const JointNet& net = *model.params.joint;
  const bool with_keywords = traits(model.config.family).joint_keywords;
  const auto ids = wrapped_ids(model.vocab, tokens);
  const auto states = net.encoder.run(embed(model.params, ids));
  const std::size_t last = states.size() - 1;
  JointResult r;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const RealVector logits = net.head.apply(states[t]);
    if (t == 0 || t == last) {
      RealVector probs = group_softmax(logits, kJointIntentBegin, kIntentCount);
      r.labels.push_back(kJointIntentBegin + argmax(probs));
      (t == 0 ? r.bou : r.eou) = std::move(probs);
      continue;
    }
    const std::size_t slot = argmax(group_softmax(logits, kJointSlotBegin, kSlotCount));
    r.labels.push_back(kJointSlotBegin + slot);
    r.slots.push_back(slot_at(slot));
    if (with_keywords) {
      const std::size_t kw = argmax(group_softmax(logits, kJointKeywordBegin, kKeywordCount));
      r.keywords.push_back(keyword_at(kw));
    } else {
      r.keywords.push_back(KeywordLabel::kNonIntent);
    }
  }
  r.distribution = RealVector(kIntentCount);
  for (std::size_t i = 0; i < kIntentCount; ++i) r.distribution[i] = 0.5 * (r.bou[i] + r.eou[i]);
  r.intent = intent_at(argmax(r.distribution));
  return r;
}

std::vector<std::string> level2_tokens(Family family, const FilteredSequence& filtered) {
  if (!filtered.tokens.empty()) return filtered.tokens;
  if (traits(family).joint) return {};
  return {std::string(Vocabulary::kUnkToken)};
}

Prediction predict(const TrainedModel& model, std::span<const std::string> tokens) {
  require(!tokens.empty(), "predict: empty token list");
  const FamilyTraits t = traits(model.config.family);
  Prediction p;
  if (t.tagger) {
    TagResult tags = tag_sequence(model, tokens);
    p.slots = std::move(tags.slots);
    p.keywords = std::move(tags.keywords);
    p.has_slots = t.tagger_slots;
    p.has_keywords = true;
    if (t.rules) {
      std::vector<std::string> keywords;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (p.keywords[i] == KeywordLabel::kIntent) keywords.push_back(tokens[i]);
      }
      const auto mentions = slot_mentions(tokens, p.slots);
      p.intent = rule_map(model.lexicon, keywords, mentions, t.rule_variant);
      return p;
    }
    const FilteredSequence filtered = filter_salient(tokens, p.slots, p.keywords);
    p.level2_input = level2_tokens(model.config.family, filtered);
    if (t.joint) {
      JointResult j = joint_infer(model, p.level2_input);
      p.intent = j.intent;
      p.distribution = std::move(j.distribution);
    } else {
      IntentResult c = classify_utterance(model, p.level2_input);
      p.intent = c.intent;
      p.distribution = std::move(c.distribution);
    }
    return p;
  }
  if (t.joint) {
    JointResult j = joint_infer(model, tokens);
    p.intent = j.intent;
    p.distribution = std::move(j.distribution);
    p.slots = std::move(j.slots);
    p.keywords = std::move(j.keywords);
    p.has_slots = true;
    p.has_keywords = t.joint_keywords;
    return p;
  }
  IntentResult c = classify_utterance(model, tokens);
  p.intent = c.intent;
  p.distribution = std::move(c.distribution);
  return p;
}

LossTally utterance_loss(const TrainedModel& model, const AnnotatedUtterance& u,
                         ModelParams* grads, double dropout, SeededRng* rng) {
  validate_alignment(u);
  require(dropout == 0.0 || rng != nullptr, "utterance_loss: dropout needs a generator");
  const FamilyTraits t = traits(model.config.family);
  const ModelParams& params = model.params;
  LossTally tally;
  if (t.tagger) {
    const auto ids = ids_of(model.vocab, u.tokens);
    tagger_loss(*params.tagger, params, ids, u.slots, u.keywords, grads, dropout, rng, tally);
  }
  if (t.rules) return tally;

  std::vector<std::string> tokens = u.tokens;
  std::vector<SlotLabel> slots = u.slots;
  std::vector<KeywordLabel> keywords = u.keywords;
  if (t.hierarchical) {
    FilteredSequence filtered = filter_salient(u.tokens, u.slots, u.keywords);
    tokens = level2_tokens(model.config.family, filtered);
    slots = std::move(filtered.slots);
    keywords = std::move(filtered.keywords);
  }
  if (t.classifier) {
    const auto ids = ids_of(model.vocab, tokens);
    classifier_loss(*params.classifier, params, ids, u.intent, grads, dropout, rng, tally);
  }
  if (t.joint) {
    const auto ids = wrapped_ids(model.vocab, tokens);
    joint_loss(*params.joint, t.joint_keywords, params, ids, slots, keywords, u.intent, grads,
               dropout, rng, tally);
  }
  return tally;
}

}  // namespace slu
