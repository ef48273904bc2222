#include "slu/slu.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "slu/asr_noise.hpp"
#include "slu/checkpoint.hpp"
#include "slu/embeddings.hpp"
#include "slu/error.hpp"
#include "slu/evaluation.hpp"
#include "slu/gradcert.hpp"
#include "slu/lexicon.hpp"
#include "slu/synth.hpp"
#include "slu/training.hpp"

struct slu_corpus {
  slu::Corpus corpus;
};

struct slu_model {
  slu::TrainedModel model;
};

namespace {

thread_local std::string g_last_error;

slu_status status_of(slu::ErrorKind kind) {
  switch (kind) {
    case slu::ErrorKind::kInvalidArgument: return SLU_ERR_INVALID_ARGUMENT;
    case slu::ErrorKind::kFormat: return SLU_ERR_FORMAT;
    case slu::ErrorKind::kIo: return SLU_ERR_IO;
    case slu::ErrorKind::kConfig: return SLU_ERR_CONFIG;
    case slu::ErrorKind::kVersion: return SLU_ERR_VERSION;
    case slu::ErrorKind::kIntegrity: return SLU_ERR_INTEGRITY;
    case slu::ErrorKind::kNumeric: return SLU_ERR_NUMERIC;
  }
  return SLU_ERR_INTERNAL;
}

template <class F>
slu_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return SLU_OK;
  } catch (const slu::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return SLU_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) slu::fail(slu::ErrorKind::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

slu::ModelConfig to_config(const slu_model_options* o) {
  need(o, "model options");
  need(o->family, "model options family");
  auto family = slu::parse_family(o->family);
  if (!family) {
    std::string valid;
    for (auto n : slu::kFamilyNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
    slu::fail(slu::ErrorKind::kConfig,
              "family: unknown family '" + std::string(o->family) + "' (valid: " + valid + ")");
  }
  slu::ModelConfig c = slu::ModelConfig::for_family(*family);
  if (o->cell != nullptr) {
    auto cell = slu::parse_cell(o->cell);
    if (!cell) slu::fail(slu::ErrorKind::kConfig, "cell: expected lstm or gru, got '" + std::string(o->cell) + "'");
    c.cell = *cell;
  }
  c.hidden_dim = o->hidden_dim;
  c.embedding_dim = o->embedding_dim;
  c.dropout = o->dropout;
  c.validate();
  return c;
}

slu::TrainConfig to_train_config(const slu_train_options* o) {
  need(o, "train options");
  slu::TrainConfig tc;
  tc.learning_rate = o->learning_rate;
  tc.beta1 = o->beta1;
  tc.beta2 = o->beta2;
  tc.adam_epsilon = o->adam_epsilon;
  tc.batch_size = o->batch_size;
  tc.epochs = o->epochs;
  tc.clip_norm = o->clip_norm;
  tc.seed = o->seed;
  if (o->embeddings_path != nullptr) tc.embeddings_path = o->embeddings_path;
  if (o->lexicon_path != nullptr && *o->lexicon_path != '\0') {
    tc.lexicon = slu::load_lexicon(o->lexicon_path);
  }
  tc.validate();
  return tc;
}

slu::NoiseConfig to_noise_config(const slu_noise_options* o) {
  need(o, "noise options");
  slu::NoiseConfig n;
  n.target_wer = o->target_wer;
  n.substitution = o->substitution;
  n.deletion = o->deletion;
  n.insertion = o->insertion;
  n.seed = o->seed;
  n.validate();
  return n;
}

void fill_wer(const slu::WerResult& r, slu_wer_counts* out) {
  out->substitutions = r.substitutions;
  out->deletions = r.deletions;
  out->insertions = r.insertions;
  out->reference_length = r.reference_length;
  out->wer = r.wer;
}

std::string prediction_json(const slu::TrainedModel& model, const std::vector<std::string>& tokens) {
  const slu::Prediction p = slu::predict(model, tokens);
  nlohmann::ordered_json j;
  j["tokens"] = tokens;
  j["intent"] = std::string(slu::name(p.intent));
  if (p.has_slots) {
    auto& arr = j["slots"] = nlohmann::ordered_json::array();
    for (auto s : p.slots) arr.push_back(std::string(slu::name(s)));
  }
  if (p.has_keywords) {
    auto& arr = j["keywords"] = nlohmann::ordered_json::array();
    for (auto k : p.keywords) arr.push_back(std::string(slu::name(k)));
  }
  if (slu::traits(model.config.family).hierarchical) j["level2_input"] = p.level2_input;
  return j.dump();
}

std::string wer_line(const char* label, const slu::WerResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%zu\t%zu\t%zu\t%zu\n", label, r.wer,
                r.substitutions, r.deletions, r.insertions, r.reference_length);
  return buf;
}

}  // namespace

extern "C" {

const char* slu_last_error(void) { return g_last_error.c_str(); }

const char* slu_status_name(slu_status status) {
  switch (status) {
    case SLU_OK: return "ok";
    case SLU_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SLU_ERR_FORMAT: return "format error";
    case SLU_ERR_IO: return "i/o error";
    case SLU_ERR_CONFIG: return "config error";
    case SLU_ERR_VERSION: return "version error";
    case SLU_ERR_INTEGRITY: return "integrity error";
    case SLU_ERR_NUMERIC: return "numeric error";
    case SLU_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void slu_string_free(char* text) { std::free(text); }

size_t slu_family_count(void) { return slu::kFamilyCount; }

const char* slu_family_name(size_t index) {
  return index < slu::kFamilyCount ? slu::kFamilyNames[index].data() : nullptr;
}

slu_status slu_corpus_load(const char* path, slu_corpus** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new slu_corpus{slu::load_corpus(path)};
  });
}

slu_status slu_corpus_save(const slu_corpus* corpus, const char* path) {
  return guarded([&] {
    need(corpus, "corpus");
    need(path, "path");
    slu::save_corpus(corpus->corpus, path);
  });
}

slu_status slu_corpus_generate(const char* templates_path, size_t total, uint64_t seed,
                               slu_corpus** out) {
  return guarded([&] {
    need(out, "out");
    const slu::TemplateSet templates = templates_path != nullptr && *templates_path != '\0'
                                           ? slu::load_templates(templates_path)
                                           : slu::default_templates();
    const slu::IntentCounts counts =
        total == 0 ? slu::default_intent_counts() : slu::scaled_intent_counts(total);
    *out = new slu_corpus{slu::synth_generate(templates, counts, seed)};
  });
}

size_t slu_corpus_size(const slu_corpus* corpus) {
  return corpus == nullptr ? 0 : corpus->corpus.size();
}

slu_status slu_corpus_stats(const slu_corpus* corpus, char** tsv) {
  return guarded([&] {
    need(corpus, "corpus");
    need(tsv, "tsv");
    put(tsv, slu::format_stats_tsv(slu::corpus_stats(corpus->corpus)));
  });
}

void slu_corpus_free(slu_corpus* corpus) { delete corpus; }

void slu_noise_options_default(slu_noise_options* options) {
  if (options == nullptr) return;
  const slu::NoiseConfig n;
  *options = {n.target_wer, n.substitution, n.deletion, n.insertion, n.seed};
}

slu_status slu_noise_options_load(const char* path, slu_noise_options* options) {
  return guarded([&] {
    need(path, "path");
    need(options, "options");
    // Keys missing from the file keep the caller's values.
    std::ifstream probe(path);
    if (!probe) slu::fail(slu::ErrorKind::kIo, std::string("cannot open noise config: ") + path);
    std::stringstream buffer;
    buffer << probe.rdbuf();
    const std::string text = buffer.str();
    const slu::NoiseConfig loaded = slu::parse_noise_config(text, path);
    const auto doc = nlohmann::json::parse(text);
    if (doc.contains("target_wer")) options->target_wer = loaded.target_wer;
    if (doc.contains("mix")) {
      options->substitution = loaded.substitution;
      options->deletion = loaded.deletion;
      options->insertion = loaded.insertion;
    }
    if (doc.contains("seed")) options->seed = loaded.seed;
  });
}

slu_status slu_corrupt(const slu_corpus* corpus, const slu_noise_options* options,
                       slu_corpus** out, slu_wer_counts* achieved, char** summary) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    slu::CorruptionResult r = slu::corrupt(corpus->corpus, to_noise_config(options));
    if (achieved != nullptr) fill_wer(r.achieved, achieved);
    if (summary != nullptr) {
      std::string s = "# scope\twer\tsubstitutions\tdeletions\tinsertions\treference_tokens\n";
      s += wer_line("overall", r.achieved);
      s += wer_line("singleton", r.singleton);
      s += wer_line("dyad", r.dyad);
      *summary = dup_string(s);
    }
    *out = new slu_corpus{std::move(r.corpus)};
  });
}

slu_status slu_wer(const char* const* reference, size_t reference_length,
                   const char* const* hypothesis, size_t hypothesis_length, slu_wer_counts* out) {
  return guarded([&] {
    need(out, "out");
    if (reference_length > 0) need(reference, "reference");
    if (hypothesis_length > 0) need(hypothesis, "hypothesis");
    std::vector<std::string> ref(reference, reference + reference_length);
    std::vector<std::string> hyp(hypothesis, hypothesis + hypothesis_length);
    fill_wer(slu::wer(ref, hyp), out);
  });
}

slu_status slu_corpus_wer(const slu_corpus* reference, const slu_corpus* hypothesis,
                          slu_wer_counts* out) {
  return guarded([&] {
    need(reference, "reference");
    need(hypothesis, "hypothesis");
    need(out, "out");
    fill_wer(slu::corpus_wer(reference->corpus, hypothesis->corpus), out);
  });
}

void slu_model_options_default(slu_model_options* options) {
  if (options == nullptr) return;
  const slu::ModelConfig c;
  *options = {"hierarchical-joint-2", "lstm", c.hidden_dim, c.embedding_dim, c.dropout};
}

void slu_train_options_default(slu_train_options* options) {
  if (options == nullptr) return;
  const slu::TrainConfig t;
  *options = {t.learning_rate, t.beta1,     t.beta2,   t.adam_epsilon, t.batch_size,
              t.epochs,        t.clip_norm, t.seed,    nullptr,        nullptr};
}

slu_status slu_train(const slu_corpus* corpus, const slu_model_options* model,
                     const slu_train_options* train, slu_epoch_callback callback, void* user,
                     slu_model** out) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    const slu::ModelConfig config = to_config(model);
    const slu::TrainConfig tc = to_train_config(train);
    slu::EpochCallback cb;
    if (callback != nullptr) {
      cb = [&](const slu::EpochRecord& r) { callback(user, 0, r.epoch, r.loss); };
    }
    slu::TrainResult result = slu::train(config, corpus->corpus, tc, cb);
    *out = new slu_model{std::move(result.model)};
  });
}

slu_status slu_model_save(const slu_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    slu::save_model(model->model, path);
  });
}

slu_status slu_model_load(const char* path, slu_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new slu_model{slu::load_model(path)};
  });
}

const char* slu_model_family(const slu_model* model) {
  return model == nullptr ? nullptr : slu::name(model->model.config.family).data();
}

void slu_model_free(slu_model* model) { delete model; }

slu_status slu_predict(const slu_model* model, const char* text, char** json) {
  return guarded([&] {
    need(model, "model");
    need(text, "text");
    need(json, "json");
    const auto tokens = slu::tokenize(text);
    if (tokens.empty()) slu::fail(slu::ErrorKind::kInvalidArgument, "text has no tokens");
    *json = dup_string(prediction_json(model->model, tokens));
  });
}

slu_status slu_predict_corpus(const slu_model* model, const slu_corpus* corpus, char** jsonl) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(jsonl, "jsonl");
    std::string out;
    for (const auto& u : corpus->corpus) {
      out += prediction_json(model->model, u.tokens);
      out += '\n';
    }
    *jsonl = dup_string(out);
  });
}

slu_status slu_evaluate(const slu_model* model, const slu_corpus* corpus, char** tsv,
                        char** table) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    const slu::EvaluationReport report = slu::evaluate(model->model, corpus->corpus);
    const std::string t = tsv != nullptr ? slu::format_evaluation_tsv(report) : std::string();
    const std::string h = table != nullptr ? slu::format_report_table(report) : std::string();
    put(tsv, t);
    put(table, h);
  });
}

slu_status slu_cross_validate(const slu_corpus* corpus, const slu_model_options* model,
                              const slu_train_options* train, size_t k, size_t threads,
                              slu_epoch_callback callback, void* user, char** tsv,
                              char** table) {
  return guarded([&] {
    need(corpus, "corpus");
    const slu::ModelConfig config = to_config(model);
    const slu::TrainConfig tc = to_train_config(train);
    std::mutex lock;
    slu::FoldCallback cb;
    if (callback != nullptr) {
      cb = [&](const slu::FoldEpochRecord& r) {
        std::lock_guard<std::mutex> guard(lock);
        callback(user, r.fold + 1, r.epoch.epoch, r.epoch.loss);
      };
    }
    const slu::CrossValidationResult result =
        slu::cross_validate(config, corpus->corpus, tc, k, tc.seed, threads == 0 ? 1 : threads, cb);
    if (tsv != nullptr) *tsv = dup_string(slu::format_report_tsv(result));
    if (table != nullptr) {
      std::string h;
      for (const auto& w : result.warnings) h += "warning: " + w + "\n";
      h += slu::format_report_table(result.pooled);
      *table = dup_string(h);
    }
  });
}

slu_status slu_grad_check(const char* component, uint64_t first_seed, size_t seeds,
                          double epsilon, char** tsv, double* worst) {
  return guarded([&] {
    if (seeds == 0) slu::fail(slu::ErrorKind::kInvalidArgument, "seeds must be positive");
    if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
      slu::fail(slu::ErrorKind::kInvalidArgument, "epsilon must lie in [1e-6, 1e-3]");
    }
    std::vector<std::string> components;
    if (component == nullptr || *component == '\0') {
      components = slu::certification_components();
    } else {
      components.emplace_back(component);
    }
    std::string out = "# component\tseed\ttensor\tmax_relative_error\n";
    double max_error = 0.0;
    char buf[64];
    for (const auto& c : components) {
      for (size_t s = 0; s < seeds; ++s) {
        const auto r = slu::certify_component(c, first_seed + s, epsilon);
        for (const auto& rep : r.reports) {
          std::snprintf(buf, sizeof(buf), "%.3e", rep.max_relative_error);
          out += c + "\t" + std::to_string(r.seed) + "\t" + rep.parameter + "\t" + buf + "\n";
        }
        max_error = std::max(max_error, r.max_relative_error);
      }
    }
    put(tsv, out);
    if (worst != nullptr) *worst = max_error;
  });
}

}  // extern "C"
