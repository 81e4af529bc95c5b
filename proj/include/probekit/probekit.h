/* C interface to the probekit library. All functions return a pk_status;
   on failure pk_last_error() describes the problem (thread-local). */
#ifndef PROBEKIT_H
#define PROBEKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PK_API __declspec(dllexport)
#else
#define PK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pk_status {
  PK_OK = 0,
  PK_ERR_PARSE = 1,
  PK_ERR_DECODE = 2,
  PK_ERR_FORMAT = 3,
  PK_ERR_CONFIG = 4,
  PK_ERR_SHORTFALL = 5,
  PK_ERR_INVALID_ARGUMENT = 6,
  PK_ERR_COVERAGE = 7,
  PK_ERR_IO = 8,
  PK_ERR_DEGENERATE = 9,
  PK_ERR_ALIGNMENT = 10,
  PK_ERR_INTERNAL = 11
} pk_status;

typedef enum pk_stage {
  PK_STAGE_GENERATE = 0,
  PK_STAGE_ENCODE = 1,
  PK_STAGE_PROBE = 2,
  PK_STAGE_DOWNSTREAM = 3,
  PK_STAGE_ANALYZE = 4,
  PK_STAGE_REPORT = 5
} pk_stage;

typedef enum pk_corr_method { PK_PEARSON = 0, PK_SPEARMAN = 1 } pk_corr_method;

typedef enum pk_message_kind { PK_MSG_FAILURE = 0, PK_MSG_WRITTEN = 1, PK_MSG_NOTE = 2 } pk_message_kind;

typedef struct pk_config pk_config;
typedef struct pk_summary pk_summary;
typedef struct pk_dataset pk_dataset;
typedef struct pk_embeddings pk_embeddings;

typedef struct pk_run_options {
  size_t jobs; /* 0 = hardware concurrency */
  int resume;
  int quiet;
} pk_run_options;

PK_API const char* pk_version(void);
PK_API const char* pk_last_error(void);
PK_API const char* pk_status_name(pk_status status);

PK_API pk_status pk_config_load(const char* path, pk_config** out);
PK_API void pk_config_free(pk_config* config);
PK_API pk_status pk_config_set_seed(pk_config* config, uint64_t seed);
PK_API pk_status pk_config_set_output_dir(pk_config* config, const char* dir);
PK_API uint64_t pk_config_seed(const pk_config* config);
/* Valid until the next call on the same config. */
PK_API const char* pk_config_output_dir(const pk_config* config);
PK_API const char* pk_config_cache_dir(const pk_config* config);

PK_API pk_status pk_run(const pk_config* config, pk_stage stage, const pk_run_options* options, pk_summary** out);
PK_API void pk_summary_counts(const pk_summary* summary, size_t* total, size_t* run, size_t* skipped, size_t* failed);
PK_API size_t pk_summary_message_count(const pk_summary* summary, pk_message_kind kind);
PK_API const char* pk_summary_message(const pk_summary* summary, pk_message_kind kind, size_t index);
PK_API void pk_summary_free(pk_summary* summary);

PK_API pk_status pk_dataset_read(const char* tsv_path, pk_dataset** out);
PK_API size_t pk_dataset_size(const pk_dataset* dataset);
PK_API size_t pk_dataset_label_count(const pk_dataset* dataset);
PK_API void pk_dataset_free(pk_dataset* dataset);

PK_API pk_status pk_embeddings_read(const char* path, pk_embeddings** out);
PK_API size_t pk_embeddings_rows(const pk_embeddings* emb);
PK_API size_t pk_embeddings_dim(const pk_embeddings* emb);
PK_API const char* pk_embeddings_encoder_id(const pk_embeddings* emb);
/* Copies row `index` into `out`, which must hold pk_embeddings_dim() values. */
PK_API pk_status pk_embeddings_row(const pk_embeddings* emb, size_t index, double* out, size_t capacity);
PK_API pk_status pk_embeddings_check_alignment(const pk_embeddings* emb, const pk_dataset* dataset);
PK_API void pk_embeddings_free(pk_embeddings* emb);

PK_API pk_status pk_correlate(const double* x, const double* y, size_t n, pk_corr_method method, double* r,
                              double* p);

#ifdef __cplusplus
}
#endif

#endif
