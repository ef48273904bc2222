#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slu/training.hpp"

namespace slu {

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels);

  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);
  void merge(const ConfusionMatrix& other);

  std::size_t size() const { return labels_.size(); }
  std::size_t count(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * labels_.size() + predicted];
  }
  std::size_t total() const;
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;  // [truth][predicted], row-major
};

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // true instances
};

struct MetricSummary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;
  // Both averages skip classes with zero support.
  MetricSummary weighted;  // support-weighted
  MetricSummary macro;     // unweighted
  std::size_t total = 0;
};

// Precision is 0 when nothing was predicted for a class; F1 is 0 when
// precision + recall is 0. Invalid argument on an empty matrix.
MetricsReport class_metrics(const ConfusionMatrix& cm);

enum class Task { kIntent, kSlots, kKeywords };
inline constexpr std::size_t kTaskCount = 3;
std::string_view name(Task task);

ConfusionMatrix empty_matrix(Task task);

struct EvaluationReport {
  Family family = Family::kHierJoint2;
  std::array<std::optional<ConfusionMatrix>, kTaskCount> matrices;  // per Task

  void merge(const EvaluationReport& other);
};

// Scores `model` on `data` for every task its family supports. Slot and
// keyword scores are per token.
EvaluationReport evaluate(const TrainedModel& model, const Corpus& data);

struct CrossValidationResult {
  Family family = Family::kHierJoint2;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  EvaluationReport pooled;
  std::vector<EvaluationReport> folds;
  std::vector<std::string> warnings;
};

struct FoldEpochRecord {
  std::size_t fold = 0;
  EpochRecord epoch;
};
using FoldCallback = std::function<void(const FoldEpochRecord&)>;

// Trains on k-1 folds and scores the held-out one, for every fold; the held-out
// predictions are pooled into one matrix per task. Folds may run on up to
// `threads` worker threads; results do not depend on the thread count.
// Callbacks may arrive from worker threads, one at a time.
CrossValidationResult cross_validate(const ModelConfig& config, const Corpus& data,
                                     const TrainConfig& tc, std::size_t k, std::uint64_t seed,
                                     std::size_t threads = 1, const FoldCallback& on_epoch = {});

// Line records: family, task, class, precision, recall, f1, support, fold.
// Pooled rows use fold "all". A comment header documents the averaging.
std::string format_report_tsv(const CrossValidationResult& result);
std::string format_evaluation_tsv(const EvaluationReport& report);
// Aligned human-readable tables, one per task.
std::string format_report_table(const EvaluationReport& report);

}  // namespace slu
