#include "probekit/probekit.h"

#include <new>
#include <string>

#include "probekit/encoders.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/stats.hpp"

using namespace probekit;

struct pk_config {
  ExperimentConfig cfg;
  mutable std::string scratch;
};

struct pk_summary {
  RunSummary summary;
};

struct pk_dataset {
  ProbingDataset ds;
};

struct pk_embeddings {
  EmbeddingMatrix m;
};

namespace {

thread_local std::string last_error;

pk_status fail(pk_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class Fn>
pk_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return PK_OK;
  } catch (const Error& e) {
    return fail(static_cast<pk_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PK_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PK_ERR_INTERNAL, "unknown exception");
  }
}

#define PK_REQUIRE(cond, what) \
  if (!(cond)) return fail(PK_ERR_INVALID_ARGUMENT, what)

const std::vector<std::string>* messages(const pk_summary* s, pk_message_kind kind) {
  if (!s) return nullptr;
  switch (kind) {
    case PK_MSG_FAILURE: return &s->summary.failures;
    case PK_MSG_WRITTEN: return &s->summary.written;
    case PK_MSG_NOTE: return &s->summary.notes;
  }
  return nullptr;
}

}  // namespace

extern "C" {

const char* pk_version(void) { return "1.0.0"; }

const char* pk_last_error(void) { return last_error.c_str(); }

const char* pk_status_name(pk_status status) {
  if (status == PK_OK) return "ok";
  if (status >= PK_ERR_PARSE && status <= PK_ERR_INTERNAL) return error_kind_name(static_cast<ErrorKind>(status));
  return "unknown";
}

pk_status pk_config_load(const char* path, pk_config** out) {
  PK_REQUIRE(path && out, "pk_config_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new pk_config{load_config(path), {}}; });
}

void pk_config_free(pk_config* config) { delete config; }

pk_status pk_config_set_seed(pk_config* config, uint64_t seed) {
  PK_REQUIRE(config, "pk_config_set_seed: null config");
  config->cfg.seed = seed;
  return PK_OK;
}

pk_status pk_config_set_output_dir(pk_config* config, const char* dir) {
  PK_REQUIRE(config && dir && *dir, "pk_config_set_output_dir: null or empty argument");
  return guarded([&] { config->cfg.output_dir = std::filesystem::absolute(dir); });
}

uint64_t pk_config_seed(const pk_config* config) { return config ? config->cfg.seed : 0; }

const char* pk_config_output_dir(const pk_config* config) {
  if (!config) return "";
  config->scratch = config->cfg.output_dir.string();
  return config->scratch.c_str();
}

const char* pk_config_cache_dir(const pk_config* config) {
  if (!config) return "";
  config->scratch = cache_directory(config->cfg).string();
  return config->scratch.c_str();
}

pk_status pk_run(const pk_config* config, pk_stage stage, const pk_run_options* options, pk_summary** out) {
  PK_REQUIRE(config && out, "pk_run: null argument");
  PK_REQUIRE(stage >= PK_STAGE_GENERATE && stage <= PK_STAGE_REPORT, "pk_run: unknown stage");
  *out = nullptr;
  RunOptions opts;
  if (options) {
    opts.jobs = options->jobs;
    opts.resume = options->resume != 0;
    opts.quiet = options->quiet != 0;
  }
  return guarded([&] { *out = new pk_summary{run_stage(config->cfg, static_cast<Stage>(stage), opts)}; });
}

void pk_summary_counts(const pk_summary* s, size_t* total, size_t* run, size_t* skipped, size_t* failed) {
  if (total) *total = s ? s->summary.cells_total : 0;
  if (run) *run = s ? s->summary.cells_run : 0;
  if (skipped) *skipped = s ? s->summary.cells_skipped : 0;
  if (failed) *failed = s ? s->summary.cells_failed : 0;
}

size_t pk_summary_message_count(const pk_summary* s, pk_message_kind kind) {
  const auto* m = messages(s, kind);
  return m ? m->size() : 0;
}

const char* pk_summary_message(const pk_summary* s, pk_message_kind kind, size_t index) {
  const auto* m = messages(s, kind);
  if (!m || index >= m->size()) return nullptr;
  return (*m)[index].c_str();
}

void pk_summary_free(pk_summary* s) { delete s; }

pk_status pk_dataset_read(const char* tsv_path, pk_dataset** out) {
  PK_REQUIRE(tsv_path && out, "pk_dataset_read: null argument");
  *out = nullptr;
  return guarded([&] { *out = new pk_dataset{read_dataset(tsv_path)}; });
}

size_t pk_dataset_size(const pk_dataset* d) { return d ? d->ds.size() : 0; }
size_t pk_dataset_label_count(const pk_dataset* d) { return d ? d->ds.labels.size() : 0; }
void pk_dataset_free(pk_dataset* d) { delete d; }

pk_status pk_embeddings_read(const char* path, pk_embeddings** out) {
  PK_REQUIRE(path && out, "pk_embeddings_read: null argument");
  *out = nullptr;
  return guarded([&] { *out = new pk_embeddings{read_embeddings(std::filesystem::path(path))}; });
}

size_t pk_embeddings_rows(const pk_embeddings* e) { return e ? e->m.size() : 0; }
size_t pk_embeddings_dim(const pk_embeddings* e) { return e ? e->m.dim : 0; }
const char* pk_embeddings_encoder_id(const pk_embeddings* e) { return e ? e->m.encoder_id.c_str() : ""; }

pk_status pk_embeddings_row(const pk_embeddings* e, size_t index, double* out, size_t capacity) {
  PK_REQUIRE(e && out, "pk_embeddings_row: null argument");
  PK_REQUIRE(index < e->m.size(), "pk_embeddings_row: row index out of range");
  PK_REQUIRE(capacity >= e->m.dim, "pk_embeddings_row: output buffer too small");
  for (size_t j = 0; j < e->m.dim; ++j) out[j] = e->m.rows(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(j));
  return PK_OK;
}

pk_status pk_embeddings_check_alignment(const pk_embeddings* e, const pk_dataset* d) {
  PK_REQUIRE(e && d, "pk_embeddings_check_alignment: null argument");
  return guarded([&] { check_alignment(e->m, d->ds); });
}

void pk_embeddings_free(pk_embeddings* e) { delete e; }

pk_status pk_correlate(const double* x, const double* y, size_t n, pk_corr_method method, double* r, double* p) {
  PK_REQUIRE(x && y && r && p, "pk_correlate: null argument");
  PK_REQUIRE(method == PK_PEARSON || method == PK_SPEARMAN, "pk_correlate: unknown method");
  return guarded([&] {
    const auto c = correlate(std::span<const double>(x, n), std::span<const double>(y, n),
                             method == PK_PEARSON ? CorrMethod::pearson : CorrMethod::spearman);
    *r = c.r;
    *p = c.p;
  });
}

}  // extern "C"
