#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slu/cells.hpp"
#include "slu/corpus.hpp"
#include "slu/embeddings.hpp"
#include "slu/lexicon.hpp"

namespace slu {

enum class Family : std::uint8_t {
  kHybrid0,
  kHybrid1,
  kHybrid2,
  kHybrid3,
  kSeparate0,
  kSeparate1,
  kSeparate2,
  kSeparate3,
  kJoint1,
  kJoint2,
  kHierSeparate0,
  kHierSeparate1,
  kHierSeparate2,
  kHierSeparate3,
  kHierJoint2,
};
inline constexpr std::size_t kFamilyCount = 15;

inline constexpr std::array<std::string_view, kFamilyCount> kFamilyNames = {
    "hybrid-0",   "hybrid-1",   "hybrid-2",   "hybrid-3",
    "separate-0", "separate-1", "separate-2", "separate-3",
    "joint-1",    "joint-2",    "hierarchical-separate-0",
    "hierarchical-separate-1",  "hierarchical-separate-2",
    "hierarchical-separate-3",  "hierarchical-joint-2"};

inline std::string_view name(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }
inline Family family_at(std::size_t i) { return static_cast<Family>(i); }
std::optional<Family> parse_family(std::string_view text);

// Structural facts fixed by the family.
struct FamilyTraits {
  bool tagger = false;          // word-level slot/keyword tagger (level 1)
  bool tagger_slots = false;    // tagger has a slot head; the keyword head is always present
  bool classifier = false;      // seq2one intent network
  bool joint = false;           // boundary-wrapped joint network
  bool joint_keywords = false;  // joint interior also predicts keywords
  bool hierarchical = false;    // level 2 sees the salience-filtered level-1 output
  bool rules = false;           // intent from the rule lexicon
  RuleVariant rule_variant = RuleVariant::kKeywordsOnly;
  bool bidirectional = true;    // every recurrent layer
  bool lstm_only = false;
  AttentionKind attention = AttentionKind::kNone;
};

FamilyTraits traits(Family family);

// Evaluated tasks per family.
struct TaskSet {
  bool intent = true;
  bool slots = false;
  bool keywords = false;
};
TaskSet tasks(Family family);

struct ModelConfig {
  Family family = Family::kHierJoint2;
  CellKind cell = CellKind::kLstm;
  bool bidirectional = true;
  std::size_t hidden_dim = 64;
  AttentionKind attention = AttentionKind::kNone;
  double dropout = 0.5;
  std::size_t embedding_dim = kDefaultEmbeddingDim;

  // Legal defaults for the family.
  static ModelConfig for_family(Family family);
  // Config error naming the offending field when the combination is illegal.
  void validate() const;
};

std::string_view name(CellKind cell);
std::string_view name(AttentionKind attention);
std::optional<CellKind> parse_cell(std::string_view text);
std::optional<AttentionKind> parse_attention(std::string_view text);

// Joint output layer: one affine map over the union of the label sets.
inline constexpr std::size_t kJointSlotBegin = 0;
inline constexpr std::size_t kJointKeywordBegin = kSlotCount;
inline constexpr std::size_t kJointIntentBegin = kSlotCount + kKeywordCount;
inline constexpr std::size_t kJointLabelCount = kSlotCount + kKeywordCount + kIntentCount;

enum class JointGroup { kSlot, kKeyword, kIntent };
JointGroup joint_group(std::size_t union_index);

struct TaggerNet {
  Encoder encoder;
  std::optional<Affine> slot_head;
  Affine keyword_head;

  TaggerNet zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);
};

struct ClassifierNet {
  Encoder encoder;
  std::optional<AttentionParams> attention;
  Affine intent_head;

  ClassifierNet zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);
};

struct JointNet {
  Encoder encoder;
  Affine head;  // kJointLabelCount outputs

  JointNet zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);
};

struct ModelParams {
  EmbeddingMatrix embedding;
  std::optional<TaggerNet> tagger;
  std::optional<ClassifierNet> classifier;
  std::optional<JointNet> joint;

  // Random initialization; the embedding table is drawn separately.
  static ModelParams create(const ModelConfig& config, EmbeddingMatrix embedding,
                            SeededRng& rng);
  ModelParams zeros_like() const;
  // Stable order: embedding, tagger, classifier, joint. A frozen embedding is
  // left out unless include_frozen is set.
  TensorList collect(bool include_frozen = false);
};

struct TrainedModel {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
  RuleLexicon lexicon;
};

struct TagResult {
  std::vector<SlotLabel> slots;  // all None when the tagger has no slot head
  std::vector<KeywordLabel> keywords;
  std::vector<RealVector> slot_probs;
  std::vector<RealVector> keyword_probs;
};

// Level-1 tagging; argmax per head, lowest index on ties.
TagResult tag_sequence(const TrainedModel& model, std::span<const std::string> tokens);

struct FilteredSequence {
  std::vector<std::string> tokens;
  std::vector<SlotLabel> slots;
  std::vector<KeywordLabel> keywords;
  std::vector<std::size_t> positions;  // indices into the unfiltered input
};

// Keeps tokens that are intent keywords or carry a slot, in order.
FilteredSequence filter_salient(std::span<const std::string> tokens,
                                std::span<const SlotLabel> slots,
                                std::span<const KeywordLabel> keywords);

std::vector<std::string> wrap_boundaries(std::span<const std::string> tokens);

struct IntentResult {
  IntentType intent = IntentType::kOther;
  RealVector distribution;
};

// Seq2one level: invalid argument on an empty sequence.
IntentResult classify_utterance(const TrainedModel& model, std::span<const std::string> tokens);

struct JointResult {
  std::vector<std::size_t> labels;  // union-space label per wrapped position
  std::vector<SlotLabel> slots;     // interior positions
  std::vector<KeywordLabel> keywords;
  RealVector bou;                   // boundary intent distributions
  RealVector eou;
  RealVector distribution;          // their average
  IntentType intent = IntentType::kOther;
};

// Wraps, tags interior positions over the slot (and keyword) groups and the
// boundaries over the intent group. An empty input runs on the two boundary
// tokens alone.
JointResult joint_infer(const TrainedModel& model, std::span<const std::string> tokens);

struct Prediction {
  IntentType intent = IntentType::kOther;
  std::vector<SlotLabel> slots;
  std::vector<KeywordLabel> keywords;
  bool has_slots = false;
  bool has_keywords = false;
  RealVector distribution;              // empty for rule-based families
  std::vector<std::string> level2_input;  // hierarchical families only
};

Prediction predict(const TrainedModel& model, std::span<const std::string> tokens);

// Level-2 input used by hierarchical families: filtered tokens, or the
// fallback for an empty filter result.
std::vector<std::string> level2_tokens(Family family, const FilteredSequence& filtered);

struct LossTally {
  double loss = 0.0;
  std::size_t predictions = 0;  // supervised outputs contributing to `loss`
};

// Summed cross-entropy of one gold utterance over every supervised output of
// the family. Gradients are accumulated into `grads` when it is non-null.
// Dropout uses `rng` and is skipped when `dropout` is 0.
LossTally utterance_loss(const TrainedModel& model, const AnnotatedUtterance& utterance,
                         ModelParams* grads, double dropout, SeededRng* rng);

}  // namespace slu
