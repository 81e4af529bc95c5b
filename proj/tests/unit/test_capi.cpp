#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures/oracles.hpp"
#include "fixtures/synth.hpp"
#include "probekit/error.hpp"
#include "probekit/probekit.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  Scratch() {
    std::string tmpl = (fs::temp_directory_path() / "probekit_capi_XXXXXX").string();
    path = mkdtemp(tmpl.data());
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("status codes mirror error kinds") {
  using probekit::ErrorKind;
  CHECK(static_cast<int>(ErrorKind::parse) == PK_ERR_PARSE);
  CHECK(static_cast<int>(ErrorKind::decode) == PK_ERR_DECODE);
  CHECK(static_cast<int>(ErrorKind::format) == PK_ERR_FORMAT);
  CHECK(static_cast<int>(ErrorKind::config) == PK_ERR_CONFIG);
  CHECK(static_cast<int>(ErrorKind::shortfall) == PK_ERR_SHORTFALL);
  CHECK(static_cast<int>(ErrorKind::invalid_argument) == PK_ERR_INVALID_ARGUMENT);
  CHECK(static_cast<int>(ErrorKind::coverage) == PK_ERR_COVERAGE);
  CHECK(static_cast<int>(ErrorKind::io) == PK_ERR_IO);
  CHECK(static_cast<int>(ErrorKind::degenerate) == PK_ERR_DEGENERATE);
  CHECK(static_cast<int>(ErrorKind::alignment) == PK_ERR_ALIGNMENT);
  CHECK(static_cast<int>(ErrorKind::internal) == PK_ERR_INTERNAL);
  CHECK(std::string(pk_status_name(PK_OK)) == "ok");
  CHECK(std::string(pk_status_name(PK_ERR_ALIGNMENT)) == "alignment error");
  CHECK(std::string(pk_version()) == "1.0.0");
}

TEST_CASE("pk_correlate") {
  const double x[] = {1, 2, 3, 4, 5, 6, 7};
  const double y[] = {2, 1, 4, 3, 7, 5, 6};
  double r = 0, p = 0;
  REQUIRE(pk_correlate(x, y, 7, PK_SPEARMAN, &r, &p) == PK_OK);
  const auto [er, ep] = oracle::correlate({x, x + 7}, {y, y + 7}, true);
  CHECK(r == doctest::Approx(er).epsilon(1e-12));
  CHECK(p == doctest::Approx(ep).epsilon(1e-6));
  CHECK(pk_correlate(x, y, 2, PK_PEARSON, &r, &p) == PK_ERR_INVALID_ARGUMENT);
  CHECK(std::string(pk_last_error()).find("3 points") != std::string::npos);
  CHECK(pk_correlate(nullptr, y, 7, PK_PEARSON, &r, &p) == PK_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config handles") {
  Scratch dir;
  pk_config* cfg = nullptr;
  CHECK(pk_config_load((dir.path / "missing.json").c_str(), &cfg) == PK_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(pk_last_error()).find("missing.json") != std::string::npos);

  fixtures::write_text(dir.path / "bad.json", "{\"languages\": {}}");
  CHECK(pk_config_load((dir.path / "bad.json").c_str(), &cfg) == PK_ERR_CONFIG);

  const auto files = fixtures::write_toy_language(dir.path / "toy", {600, 1});
  nlohmann::json doc{{"seed", 5},
                     {"languages", {{"toy", {{"corpus", files.corpus.string()}, {"vectors", files.vectors_a.string()}}}}},
                     {"tasks", nlohmann::json::array({{{"name", "bshift"}, {"kind", "bigram_shift"}, {"size", 300},
                                                       {"dev", 50}, {"test", 50}}})},
                     {"encoders", nlohmann::json::array({{{"name", "avg"}, {"kind", "avg"}}})},
                     {"classifiers", nlohmann::json::array({{{"kind", "NB"}}})},
                     {"sizes", {200}}};
  fixtures::write_text(dir.path / "exp.json", doc.dump());
  REQUIRE(pk_config_load((dir.path / "exp.json").c_str(), &cfg) == PK_OK);
  CHECK(pk_config_seed(cfg) == 5);
  CHECK(pk_config_set_seed(cfg, 9) == PK_OK);
  CHECK(pk_config_seed(cfg) == 9);
  const auto out = (dir.path / "run").string();
  CHECK(pk_config_set_output_dir(cfg, out.c_str()) == PK_OK);
  CHECK(std::string(pk_config_output_dir(cfg)) == out);
  CHECK(std::string(pk_config_cache_dir(cfg)) == (fs::path(out) / "cache").string());

  pk_run_options opts{1, 0, 1};
  pk_summary* s = nullptr;
  REQUIRE(pk_run(cfg, PK_STAGE_PROBE, &opts, &s) == PK_OK);
  size_t total = 0, run = 0, skipped = 0, failed = 0;
  pk_summary_counts(s, &total, &run, &skipped, &failed);
  CHECK(total == 1);
  CHECK(run == 1);
  CHECK(failed == 0);
  pk_summary_free(s);

  // Analysis needs three encoders; the reason surfaces as a note.
  REQUIRE(pk_run(cfg, PK_STAGE_ANALYZE, &opts, &s) == PK_OK);
  bool noted = false;
  for (size_t i = 0; i < pk_summary_message_count(s, PK_MSG_NOTE); ++i)
    noted |= std::string(pk_summary_message(s, PK_MSG_NOTE, i)).find("requires ≥3 encoders") != std::string::npos;
  CHECK(noted);
  CHECK(pk_summary_message(s, PK_MSG_NOTE, 1000) == nullptr);
  pk_summary_free(s);

  REQUIRE(pk_run(cfg, PK_STAGE_GENERATE, &opts, &s) == PK_OK);
  CHECK(pk_summary_message_count(s, PK_MSG_WRITTEN) == 1);
  const std::string tsv = pk_summary_message(s, PK_MSG_WRITTEN, 0);
  pk_summary_free(s);

  pk_dataset* ds = nullptr;
  REQUIRE(pk_dataset_read(tsv.c_str(), &ds) == PK_OK);
  CHECK(pk_dataset_size(ds) == 300);
  CHECK(pk_dataset_label_count(ds) == 2);

  REQUIRE(pk_run(cfg, PK_STAGE_ENCODE, &opts, &s) == PK_OK);
  const std::string emb_path = pk_summary_message(s, PK_MSG_WRITTEN, 0);
  pk_summary_free(s);
  pk_embeddings* emb = nullptr;
  REQUIRE(pk_embeddings_read(emb_path.c_str(), &emb) == PK_OK);
  CHECK(pk_embeddings_rows(emb) == 300);
  CHECK(pk_embeddings_dim(emb) == 16);
  CHECK(std::string(pk_embeddings_encoder_id(emb)) == "avg");
  CHECK(pk_embeddings_check_alignment(emb, ds) == PK_OK);
  std::vector<double> row(16);
  CHECK(pk_embeddings_row(emb, 0, row.data(), row.size()) == PK_OK);
  CHECK(std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); }));
  CHECK(pk_embeddings_row(emb, 0, row.data(), 3) == PK_ERR_INVALID_ARGUMENT);
  CHECK(pk_embeddings_row(emb, 300, row.data(), row.size()) == PK_ERR_INVALID_ARGUMENT);
  pk_embeddings_free(emb);

  // A PROBEEMB file with the wrong row count fails alignment.
  fixtures::write_text(dir.path / "short.probeemb", "PROBEEMB 1 2 3 ext\n0\t1 2 3\n1\t4 5 6\n");
  REQUIRE(pk_embeddings_read((dir.path / "short.probeemb").c_str(), &emb) == PK_OK);
  CHECK(pk_embeddings_check_alignment(emb, ds) == PK_ERR_ALIGNMENT);
  pk_embeddings_free(emb);
  fixtures::write_text(dir.path / "bad.probeemb", "PROBEEMB 1 2 3 ext\n0\t1 2 3\n");
  CHECK(pk_embeddings_read((dir.path / "bad.probeemb").c_str(), &emb) == PK_ERR_FORMAT);

  pk_dataset_free(ds);
  pk_config_free(cfg);
  CHECK(pk_run(nullptr, PK_STAGE_PROBE, &opts, &s) == PK_ERR_INVALID_ARGUMENT);
}
