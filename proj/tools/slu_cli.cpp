// Command-line front end. Talks to the toolkit only through slu.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slu/slu.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  std::string message;
};

void check(slu_status status, const std::string& context) {
  if (status == SLU_OK) return;
  std::string message = context + ": " + slu_status_name(status);
  const std::string detail = slu_last_error();
  if (!detail.empty()) message += ": " + detail;
  throw Failure{message};
}

struct CorpusDeleter {
  void operator()(slu_corpus* c) const { slu_corpus_free(c); }
};
struct ModelDeleter {
  void operator()(slu_model* m) const { slu_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { slu_string_free(s); }
};
using CorpusPtr = std::unique_ptr<slu_corpus, CorpusDeleter>;
using ModelPtr = std::unique_ptr<slu_model, ModelDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

CorpusPtr load_corpus(const std::string& path) {
  slu_corpus* c = nullptr;
  check(slu_corpus_load(path.c_str(), &c), "corpus");
  return CorpusPtr(c);
}

ModelPtr load_model(const std::string& path) {
  slu_model* m = nullptr;
  check(slu_model_load(path.c_str(), &m), "model");
  return ModelPtr(m);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{"out: cannot open " + path + " for writing"};
  out << text;
  if (!out) throw Failure{"out: failed writing " + path};
}

// Sends machine-readable output to --out, or to stdout when no path is given.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::vector<std::string> family_names() {
  std::vector<std::string> out;
  for (size_t i = 0; i < slu_family_count(); ++i) out.emplace_back(slu_family_name(i));
  return out;
}

std::string joined(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

struct ModelFlags {
  std::string family;
  std::string cell = "lstm";
  size_t hidden = 64;
  size_t embedding_dim = 100;
  double dropout = 0.5;
  std::string embeddings;
  std::string lexicon;
  size_t epochs = 50;
  size_t batch = 32;
  double lr = 1e-3;
  double clip = 5.0;
  uint64_t seed = 1;

  void add_to(CLI::App* cmd, const std::vector<std::string>& families) {
    cmd->add_option("--family", family, "Model family")
        ->required()
        ->check(CLI::IsMember(families))
        ->description("Model family: " + joined(families));
    cmd->add_option("--cell", cell, "Recurrent cell (lstm or gru)")
        ->check(CLI::IsMember({"lstm", "gru"}))
        ->capture_default_str();
    cmd->add_option("--hidden", hidden, "Hidden units per direction")->capture_default_str();
    cmd->add_option("--embedding-dim", embedding_dim, "Embedding width")->capture_default_str();
    cmd->add_option("--dropout", dropout, "Dropout rate on head inputs")->capture_default_str();
    cmd->add_option("--embeddings", embeddings, "Pretrained embeddings, word2vec text format");
    cmd->add_option("--lexicon", lexicon, "Rule lexicon JSON for hybrid families");
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", lr, "Adam step size")->capture_default_str();
    cmd->add_option("--clip", clip, "Global gradient-norm clip")->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  slu_model_options model_options() const {
    slu_model_options o;
    slu_model_options_default(&o);
    o.family = family.c_str();
    o.cell = cell.c_str();
    o.hidden_dim = hidden;
    o.embedding_dim = embedding_dim;
    o.dropout = dropout;
    return o;
  }

  slu_train_options train_options() const {
    slu_train_options o;
    slu_train_options_default(&o);
    o.epochs = epochs;
    o.batch_size = batch;
    o.learning_rate = lr;
    o.clip_norm = clip;
    o.seed = seed;
    o.embeddings_path = embeddings.c_str();
    o.lexicon_path = lexicon.c_str();
    return o;
  }
};

void log_epoch(void*, size_t fold, size_t epoch, double loss) {
  if (fold == 0) {
    std::printf("epoch %zu loss %.6f\n", epoch, loss);
  } else {
    std::printf("fold %zu epoch %zu loss %.6f\n", fold, epoch, loss);
  }
  std::fflush(stdout);
}

void print_seed(uint64_t seed) {
  std::printf("seed: %llu\n", static_cast<unsigned long long>(seed));
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string format_wer(const slu_wer_counts& w) {
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "# wer\tsubstitutions\tdeletions\tinsertions\treference_tokens\n"
                "%.6f\t%zu\t%zu\t%zu\t%zu\n",
                w.wer, w.substitutions, w.deletions, w.insertions, w.reference_length);
  return buf;
}

// Parses "S,D,I" into the noise mix.
void parse_mix(const std::string& text, slu_noise_options& o) {
  std::vector<double> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{"mix: '" + item + "' is not a number"};
    }
  }
  if (parts.size() != 3) {
    throw Failure{"mix: expected substitution,deletion,insertion, got '" + text + "'"};
  }
  o.substitution = parts[0];
  o.deletion = parts[1];
  o.insertion = parts[2];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spoken-language understanding toolkit for in-cabin passenger commands"};
  app.require_subcommand(1);
  const auto families = family_names();

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a labelled synthetic corpus");
  std::string gen_out, gen_templates;
  uint64_t gen_seed = 1;
  size_t gen_size = 0;
  gen->add_option("--out", gen_out, "Output corpus (JSON lines)")->required();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--templates", gen_templates, "Template config JSON");
  gen->add_option("--size", gen_size, "Utterance count (0: 3418 in default proportions)")
      ->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Label statistics of a corpus");
  std::string stats_corpus, stats_out;
  stats->add_option("--corpus", stats_corpus, "Corpus file")->required();
  stats->add_option("--out", stats_out, "Output TSV (default: stdout)");

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  ModelFlags train_flags;
  std::string train_corpus, train_out;
  train_flags.add_to(train, families);
  train->add_option("--corpus", train_corpus, "Training corpus")->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  std::string eval_model, eval_corpus, eval_out;
  eval->add_option("--model", eval_model, "Checkpoint")->required();
  eval->add_option("--corpus", eval_corpus, "Test corpus")->required();
  eval->add_option("--out", eval_out, "Report TSV");

  // cv
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  ModelFlags cv_flags;
  std::string cv_corpus, cv_out;
  size_t cv_k = 10, cv_threads = 1;
  cv_flags.add_to(cv, families);
  cv->add_option("--corpus", cv_corpus, "Corpus")->required();
  cv->add_option("--k", cv_k, "Number of folds")->capture_default_str();
  cv->add_option("--threads", cv_threads, "Folds trained concurrently")->capture_default_str();
  cv->add_option("--out", cv_out, "Report TSV");

  // predict
  auto* pred = app.add_subcommand("predict", "Run a checkpoint on text or a corpus");
  std::string pred_model, pred_text, pred_corpus, pred_out;
  pred->add_option("--model", pred_model, "Checkpoint")->required();
  auto* text_opt = pred->add_option("--text", pred_text, "One utterance");
  auto* corpus_opt = pred->add_option("--corpus", pred_corpus, "Corpus of utterances");
  text_opt->excludes(corpus_opt);
  pred->add_option("--out", pred_out, "Output JSON lines (default: stdout)");

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Simulate recognition errors on a corpus");
  std::string cor_corpus, cor_out, cor_mix, cor_config;
  double cor_target = 0.136;
  uint64_t cor_seed = 1;
  corrupt->add_option("--corpus", cor_corpus, "Clean corpus")->required();
  corrupt->add_option("--out", cor_out, "Corrupted corpus")->required();
  auto* target_opt =
      corrupt->add_option("--target-wer", cor_target, "Target word error rate")->capture_default_str();
  corrupt->add_option("--mix", cor_mix, "Error mix substitution,deletion,insertion (default 0.7,0.2,0.1)");
  auto* seed_opt = corrupt->add_option("--seed", cor_seed, "Random seed")->capture_default_str();
  corrupt->add_option("--config", cor_config, "Noise config JSON; flags override it");

  // wer
  auto* werc = app.add_subcommand("wer", "Word error rate between references and hypotheses");
  std::string wer_ref, wer_hyp, wer_ref_text, wer_hyp_text, wer_out;
  auto* ref_opt = werc->add_option("--reference", wer_ref, "Reference corpus");
  auto* hyp_opt = werc->add_option("--hypothesis", wer_hyp, "Hypothesis corpus (same order)");
  auto* ref_text = werc->add_option("--ref-text", wer_ref_text, "Reference sentence");
  auto* hyp_text = werc->add_option("--hyp-text", wer_hyp_text, "Hypothesis sentence");
  ref_opt->needs(hyp_opt);
  hyp_opt->needs(ref_opt);
  ref_text->needs(hyp_text);
  hyp_text->needs(ref_text);
  ref_opt->excludes(ref_text);
  werc->add_option("--out", wer_out, "Output TSV (default: stdout)");

  // grad-check
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient certification");
  std::string grad_component, grad_out;
  uint64_t grad_seed = 1;
  size_t grad_seeds = 5;
  double grad_eps = 1e-5, grad_tol = 1e-4;
  grad->add_option("--component", grad_component, "One component (default: all)");
  grad->add_option("--seed", grad_seed, "First seed")->capture_default_str();
  grad->add_option("--seeds", grad_seeds, "Number of consecutive seeds")->capture_default_str();
  grad->add_option("--epsilon", grad_eps, "Central-difference step")->capture_default_str();
  grad->add_option("--tolerance", grad_tol, "Maximum relative error")->capture_default_str();
  grad->add_option("--out", grad_out, "Per-tensor TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      print_seed(gen_seed);
      slu_corpus* raw = nullptr;
      check(slu_corpus_generate(gen_templates.empty() ? nullptr : gen_templates.c_str(), gen_size,
                                gen_seed, &raw),
            "gen-corpus");
      CorpusPtr c(raw);
      check(slu_corpus_save(c.get(), gen_out.c_str()), "out");
      std::printf("wrote %zu utterances to %s\n", slu_corpus_size(c.get()), gen_out.c_str());
    } else if (*stats) {
      CorpusPtr c = load_corpus(stats_corpus);
      char* tsv = nullptr;
      check(slu_corpus_stats(c.get(), &tsv), "stats");
      emit(stats_out, StringPtr(tsv).get());
    } else if (*train) {
      print_seed(train_flags.seed);
      CorpusPtr c = load_corpus(train_corpus);
      const auto mo = train_flags.model_options();
      const auto to = train_flags.train_options();
      slu_model* raw = nullptr;
      check(slu_train(c.get(), &mo, &to, log_epoch, nullptr, &raw), "train");
      ModelPtr m(raw);
      check(slu_model_save(m.get(), train_out.c_str()), "out");
      std::printf("saved %s model to %s\n", slu_model_family(m.get()), train_out.c_str());
    } else if (*eval) {
      ModelPtr m = load_model(eval_model);
      CorpusPtr c = load_corpus(eval_corpus);
      char* tsv = nullptr;
      char* table = nullptr;
      check(slu_evaluate(m.get(), c.get(), &tsv, &table), "eval");
      StringPtr tsv_owner(tsv), table_owner(table);
      std::cout << table;
      if (!eval_out.empty()) write_file(eval_out, tsv);
    } else if (*cv) {
      print_seed(cv_flags.seed);
      CorpusPtr c = load_corpus(cv_corpus);
      const auto mo = cv_flags.model_options();
      const auto to = cv_flags.train_options();
      char* tsv = nullptr;
      char* table = nullptr;
      check(slu_cross_validate(c.get(), &mo, &to, cv_k, cv_threads, log_epoch, nullptr, &tsv,
                               &table),
            "cv");
      StringPtr tsv_owner(tsv), table_owner(table);
      std::cout << table;
      if (!cv_out.empty()) write_file(cv_out, tsv);
    } else if (*pred) {
      if (pred_text.empty() && pred_corpus.empty()) {
        std::cerr << "predict: one of --text or --corpus is required\n";
        return kExitUsage;
      }
      ModelPtr m = load_model(pred_model);
      char* out = nullptr;
      if (!pred_text.empty()) {
        check(slu_predict(m.get(), pred_text.c_str(), &out), "predict");
        StringPtr owner(out);
        emit(pred_out, std::string(out) + "\n");
      } else {
        CorpusPtr c = load_corpus(pred_corpus);
        check(slu_predict_corpus(m.get(), c.get(), &out), "predict");
        StringPtr owner(out);
        emit(pred_out, out);
      }
    } else if (*corrupt) {
      slu_noise_options o;
      slu_noise_options_default(&o);
      if (!cor_config.empty()) check(slu_noise_options_load(cor_config.c_str(), &o), "config");
      if (cor_config.empty() || target_opt->count() > 0) o.target_wer = cor_target;
      if (cor_config.empty() || seed_opt->count() > 0) o.seed = cor_seed;
      if (!cor_mix.empty()) parse_mix(cor_mix, o);
      print_seed(o.seed);
      CorpusPtr c = load_corpus(cor_corpus);
      slu_corpus* raw = nullptr;
      slu_wer_counts achieved{};
      char* summary = nullptr;
      check(slu_corrupt(c.get(), &o, &raw, &achieved, &summary), "corrupt");
      CorpusPtr noisy(raw);
      StringPtr summary_owner(summary);
      check(slu_corpus_save(noisy.get(), cor_out.c_str()), "out");
      std::printf("target %.6f\n%s", o.target_wer, summary);
    } else if (*werc) {
      slu_wer_counts w{};
      if (!wer_ref.empty()) {
        CorpusPtr r = load_corpus(wer_ref);
        CorpusPtr h = load_corpus(wer_hyp);
        check(slu_corpus_wer(r.get(), h.get(), &w), "wer");
      } else if (!wer_ref_text.empty()) {
        const auto ref = split_words(wer_ref_text);
        const auto hyp = split_words(wer_hyp_text);
        std::vector<const char*> rp, hp;
        for (const auto& s : ref) rp.push_back(s.c_str());
        for (const auto& s : hyp) hp.push_back(s.c_str());
        check(slu_wer(rp.data(), rp.size(), hp.data(), hp.size(), &w), "wer");
      } else {
        std::cerr << "wer: give --reference/--hypothesis or --ref-text/--hyp-text\n";
        return kExitUsage;
      }
      emit(wer_out, format_wer(w));
    } else if (*grad) {
      print_seed(grad_seed);
      char* tsv = nullptr;
      double worst = 0.0;
      check(slu_grad_check(grad_component.empty() ? nullptr : grad_component.c_str(), grad_seed,
                           grad_seeds, grad_eps, &tsv, &worst),
            "grad-check");
      StringPtr owner(tsv);
      if (!grad_out.empty()) write_file(grad_out, tsv);
      const bool pass = worst < grad_tol;
      std::printf("max relative error %.3e (tolerance %.1e): %s\n", worst, grad_tol,
                  pass ? "PASS" : "FAIL");
      if (!pass) return kExitFailure;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
