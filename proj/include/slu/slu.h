#ifndef SLU_SLU_H
#define SLU_SLU_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SLU_API __declspec(dllexport)
#else
#define SLU_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum slu_status {
  SLU_OK = 0,
  SLU_ERR_INVALID_ARGUMENT = 1,
  SLU_ERR_FORMAT = 2,
  SLU_ERR_IO = 3,
  SLU_ERR_CONFIG = 4,
  SLU_ERR_VERSION = 5,
  SLU_ERR_INTEGRITY = 6,
  SLU_ERR_NUMERIC = 7,
  SLU_ERR_INTERNAL = 8
} slu_status;

typedef struct slu_corpus slu_corpus;
typedef struct slu_model slu_model;

/* Message of the most recent failure on the calling thread; "" after success. */
SLU_API const char* slu_last_error(void);
SLU_API const char* slu_status_name(slu_status status);
/* Releases strings returned through char** out-parameters. NULL is a no-op. */
SLU_API void slu_string_free(char* text);

SLU_API size_t slu_family_count(void);
/* NULL when index is out of range. */
SLU_API const char* slu_family_name(size_t index);

/* ---- corpus -------------------------------------------------------------- */

SLU_API slu_status slu_corpus_load(const char* path, slu_corpus** out);
SLU_API slu_status slu_corpus_save(const slu_corpus* corpus, const char* path);
/* templates_path may be NULL for the built-in templates; total 0 selects the
   default intent counts (3418 utterances). */
SLU_API slu_status slu_corpus_generate(const char* templates_path, size_t total, uint64_t seed,
                                       slu_corpus** out);
SLU_API size_t slu_corpus_size(const slu_corpus* corpus);
/* Label counts as tab-separated values. */
SLU_API slu_status slu_corpus_stats(const slu_corpus* corpus, char** tsv);
SLU_API void slu_corpus_free(slu_corpus* corpus);

/* ---- ASR noise ----------------------------------------------------------- */

typedef struct slu_noise_options {
  double target_wer;
  double substitution; /* mix shares, summing to 1 */
  double deletion;
  double insertion;
  uint64_t seed;
} slu_noise_options;

typedef struct slu_wer_counts {
  size_t substitutions;
  size_t deletions;
  size_t insertions;
  size_t reference_length;
  double wer;
} slu_wer_counts;

SLU_API void slu_noise_options_default(slu_noise_options* options);
/* JSON noise config; fields absent from the file keep their values in *options. */
SLU_API slu_status slu_noise_options_load(const char* path, slu_noise_options* options);
/* summary (may be NULL) receives overall and per passenger-mode WER lines. */
SLU_API slu_status slu_corrupt(const slu_corpus* corpus, const slu_noise_options* options,
                               slu_corpus** out, slu_wer_counts* achieved, char** summary);
SLU_API slu_status slu_wer(const char* const* reference, size_t reference_length,
                           const char* const* hypothesis, size_t hypothesis_length,
                           slu_wer_counts* out);
SLU_API slu_status slu_corpus_wer(const slu_corpus* reference, const slu_corpus* hypothesis,
                                  slu_wer_counts* out);

/* ---- models -------------------------------------------------------------- */

typedef struct slu_model_options {
  const char* family;    /* kebab-case family name */
  const char* cell;      /* "lstm" or "gru" */
  size_t hidden_dim;
  size_t embedding_dim;
  double dropout;
} slu_model_options;

typedef struct slu_train_options {
  double learning_rate;
  double beta1;
  double beta2;
  double adam_epsilon;
  size_t batch_size;
  size_t epochs;
  double clip_norm;
  uint64_t seed;
  const char* embeddings_path; /* NULL or "": random embeddings */
  const char* lexicon_path;    /* NULL or "": built-in rule lexicon */
} slu_train_options;

/* fold is 0 for plain training and 1-based during cross-validation. */
typedef void (*slu_epoch_callback)(void* user, size_t fold, size_t epoch, double loss);

SLU_API void slu_model_options_default(slu_model_options* options);
SLU_API void slu_train_options_default(slu_train_options* options);

SLU_API slu_status slu_train(const slu_corpus* corpus, const slu_model_options* model,
                             const slu_train_options* train, slu_epoch_callback callback,
                             void* user, slu_model** out);
SLU_API slu_status slu_model_save(const slu_model* model, const char* path);
SLU_API slu_status slu_model_load(const char* path, slu_model** out);
SLU_API const char* slu_model_family(const slu_model* model);
SLU_API void slu_model_free(slu_model* model);

/* One JSON object: tokens, intent, slots/keywords when the family tags them,
   and the level-2 input for hierarchical families. */
SLU_API slu_status slu_predict(const slu_model* model, const char* text, char** json);
/* One JSON object per utterance, newline-terminated. */
SLU_API slu_status slu_predict_corpus(const slu_model* model, const slu_corpus* corpus,
                                      char** jsonl);
/* tsv and table may each be NULL. */
SLU_API slu_status slu_evaluate(const slu_model* model, const slu_corpus* corpus, char** tsv,
                                char** table);
/* Stratified k-fold; fold assignment and training both derive from train->seed. */
SLU_API slu_status slu_cross_validate(const slu_corpus* corpus, const slu_model_options* model,
                                      const slu_train_options* train, size_t k, size_t threads,
                                      slu_epoch_callback callback, void* user, char** tsv,
                                      char** table);

/* Finite-difference gradient check. component NULL runs every component. Seeds
   first_seed .. first_seed + seeds - 1. Rows: component, seed, tensor, error. */
SLU_API slu_status slu_grad_check(const char* component, uint64_t first_seed, size_t seeds,
                                  double epsilon, char** tsv, double* worst);

#ifdef __cplusplus
}
#endif

#endif
