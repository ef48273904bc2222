#include "slu/evaluation.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "slu/error.hpp"

namespace slu {
namespace {

constexpr std::array<std::string_view, kTaskCount> kTaskNames = {"intent", "slots", "keywords"};

template <std::size_t N>
std::vector<std::string> label_names(const std::array<std::string_view, N>& names) {
  return {names.begin(), names.end()};
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

constexpr const char* kHeader =
    "# Overall: support-weighted mean of per-class precision, recall and F1 over classes\n"
    "# with nonzero support; Macro: unweighted mean over the same classes.\n"
    "family\ttask\tclass\tprecision\trecall\tf1\tsupport\tfold\n";

void append_rows(std::ostringstream& out, Family family, const EvaluationReport& report,
                 const std::string& fold) {
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    if (!report.matrices[t]) continue;
    const MetricsReport m = class_metrics(*report.matrices[t]);
    auto row = [&](const std::string& label, double p, double r, double f, std::size_t n) {
      out << name(family) << '\t' << kTaskNames[t] << '\t' << label << '\t' << fixed6(p)
          << '\t' << fixed6(r) << '\t' << fixed6(f) << '\t' << n << '\t' << fold << '\n';
    };
    for (const auto& c : m.classes) row(c.label, c.precision, c.recall, c.f1, c.support);
    row("Overall", m.weighted.precision, m.weighted.recall, m.weighted.f1, m.total);
    row("Macro", m.macro.precision, m.macro.recall, m.macro.f1, m.total);
  }
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  require(truth < size() && predicted < size(), "ConfusionMatrix::add: label out of range");
  counts_[truth * size() + predicted] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.labels_ == labels_, "ConfusionMatrix::merge: label sets differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts_) n += c;
  return n;
}

MetricsReport class_metrics(const ConfusionMatrix& cm) {
  require(cm.size() > 0 && cm.total() > 0, "class_metrics: empty confusion matrix");
  const std::size_t n = cm.size();
  MetricsReport report;
  report.total = cm.total();
  std::size_t counted = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = cm.count(c, c), predicted = 0, actual = 0;
    for (std::size_t o = 0; o < n; ++o) {
      predicted += cm.count(o, c);
      actual += cm.count(c, o);
    }
    ClassMetrics m;
    m.label = cm.labels()[c];
    m.support = actual;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    if (actual > 0) {
      const double w = static_cast<double>(actual);
      report.weighted.precision += w * m.precision;
      report.weighted.recall += w * m.recall;
      report.weighted.f1 += w * m.f1;
      report.macro.precision += m.precision;
      report.macro.recall += m.recall;
      report.macro.f1 += m.f1;
      ++counted;
    }
    report.classes.push_back(std::move(m));
  }
  const double total = static_cast<double>(report.total);
  report.weighted.precision /= total;
  report.weighted.recall /= total;
  report.weighted.f1 /= total;
  report.macro.precision /= static_cast<double>(counted);
  report.macro.recall /= static_cast<double>(counted);
  report.macro.f1 /= static_cast<double>(counted);
  return report;
}

std::string_view name(Task task) { return kTaskNames[static_cast<std::size_t>(task)]; }

ConfusionMatrix empty_matrix(Task task) {
  switch (task) {
    case Task::kIntent:
      return ConfusionMatrix(label_names(kIntentNames));
    case Task::kSlots:
      return ConfusionMatrix(label_names(kSlotNames));
    case Task::kKeywords:
      return ConfusionMatrix(label_names(kKeywordNames));
  }
  return {};
}

void EvaluationReport::merge(const EvaluationReport& other) {
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    if (!other.matrices[t]) continue;
    if (!matrices[t]) {
      matrices[t] = other.matrices[t];
    } else {
      matrices[t]->merge(*other.matrices[t]);
    }
  }
}

EvaluationReport evaluate(const TrainedModel& model, const Corpus& data) {
  const TaskSet ts = tasks(model.config.family);
  EvaluationReport report;
  report.family = model.config.family;
  report.matrices[0] = empty_matrix(Task::kIntent);
  if (ts.slots) report.matrices[1] = empty_matrix(Task::kSlots);
  if (ts.keywords) report.matrices[2] = empty_matrix(Task::kKeywords);
  for (const auto& u : data) {
    validate_alignment(u);
    const Prediction p = predict(model, u.tokens);
    report.matrices[0]->add(index_of(u.intent), index_of(p.intent));
    for (std::size_t t = 0; t < u.tokens.size(); ++t) {
      if (ts.slots) report.matrices[1]->add(index_of(u.slots[t]), index_of(p.slots[t]));
      if (ts.keywords) report.matrices[2]->add(index_of(u.keywords[t]), index_of(p.keywords[t]));
    }
  }
  return report;
}

CrossValidationResult cross_validate(const ModelConfig& config, const Corpus& data,
                                     const TrainConfig& tc, std::size_t k, std::uint64_t seed,
                                     std::size_t threads, const FoldCallback& on_epoch) {
  config.validate();
  tc.validate();
  const FoldAssignment folds = stratified_kfold(data, k, seed);
  for (std::size_t f = 0; f < k; ++f) {
    require(!folds.members(f).empty(), "cross_validate: fold " + std::to_string(f) + " is empty");
  }
  CrossValidationResult result;
  result.family = config.family;
  result.k = k;
  result.seed = seed;
  result.warnings = folds.warnings;
  result.folds.resize(k);

  std::vector<std::uint64_t> fold_seeds;
  SeededRng seeder(tc.seed);
  for (std::size_t f = 0; f < k; ++f) fold_seeds.push_back(seeder.next_u64());

  std::mutex callback_mutex;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(k);
  auto worker = [&] {
    for (std::size_t f = next++; f < k; f = next++) {
      try {
        TrainConfig fold_tc = tc;
        fold_tc.seed = fold_seeds[f];
        EpochCallback cb;
        if (on_epoch) {
          cb = [&, f](const EpochRecord& r) {
            std::lock_guard<std::mutex> lock(callback_mutex);
            on_epoch({f, r});
          };
        }
        const TrainResult trained = train(config, subset(data, folds.complement(f)), fold_tc, cb);
        result.folds[f] = evaluate(trained.model, subset(data, folds.members(f)));
      } catch (const Error& e) {
        errors[f] = std::make_exception_ptr(
            Error(e.kind(), "fold " + std::to_string(f) + ": " + e.what()));
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, k));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.pooled.family = config.family;
  for (const auto& fold : result.folds) result.pooled.merge(fold);
  return result;
}

std::string format_report_tsv(const CrossValidationResult& result) {
  std::ostringstream out;
  out << "# cross-validation: family=" << name(result.family) << " k=" << result.k
      << " seed=" << result.seed << '\n';
  for (const auto& w : result.warnings) out << "# warning: " << w << '\n';
  out << kHeader;
  append_rows(out, result.family, result.pooled, "all");
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    append_rows(out, result.family, result.folds[f], std::to_string(f));
  }
  return out.str();
}

std::string format_evaluation_tsv(const EvaluationReport& report) {
  std::ostringstream out;
  out << kHeader;
  append_rows(out, report.family, report, "all");
  return out.str();
}

std::string format_report_table(const EvaluationReport& report) {
  std::ostringstream out;
  for (std::size_t t = 0; t < kTaskCount; ++t) {
    if (!report.matrices[t]) continue;
    const MetricsReport m = class_metrics(*report.matrices[t]);
    char line[160];
    std::snprintf(line, sizeof(line), "%s / %s\n%-20s %9s %9s %9s %9s\n",
                  std::string(name(report.family)).c_str(), std::string(kTaskNames[t]).c_str(),
                  "class", "precision", "recall", "f1", "support");
    out << line;
    auto row = [&](const std::string& label, double p, double r, double f, std::size_t n) {
      std::snprintf(line, sizeof(line), "%-20s %9.4f %9.4f %9.4f %9zu\n", label.c_str(), p, r, f, n);
      out << line;
    };
    for (const auto& c : m.classes) row(c.label, c.precision, c.recall, c.f1, c.support);
    row("Overall (weighted)", m.weighted.precision, m.weighted.recall, m.weighted.f1, m.total);
    row("Macro", m.macro.precision, m.macro.recall, m.macro.f1, m.total);
    out << '\n';
  }
  return out.str();
}

}  // namespace slu
