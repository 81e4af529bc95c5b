#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/classifiers.hpp"
#include "probekit/corpus.hpp"
#include "probekit/stats.hpp"
#include "probekit/taskgen.hpp"

namespace probekit {

enum class CorpusFormat { conllu, plain };

struct LanguageConfig {
  std::string code;
  std::filesystem::path corpus;
  CorpusFormat format = CorpusFormat::conllu;
  Tokenizer tokenizer = Tokenizer::whitespace;
  std::optional<std::filesystem::path> lexicon;
  // Named word-vector stores; a bare string in the config becomes "default".
  std::map<std::string, std::filesystem::path> vectors;
};

enum class TaskKind {
  bigram_shift,
  length,
  word_content,
  subj_number,
  voice,
  sv_agree,
  sv_dist,
  tree_depth,
  // Pre-built SentEval-style TSV (e.g. the en TreeDepth / TopConstituents originals).
  tsv,
  am,
  trec,
  sentiment,
};

std::string task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);
bool is_downstream(TaskKind kind);

struct TaskConfig {
  std::string name;
  TaskKind kind = TaskKind::bigram_shift;
  // Instances generated before any size subsetting.
  std::size_t size = 10000;
  std::optional<ClassRatio> ratio;
  Protocol protocol;
  Metric metric = Metric::accuracy;
  // Fixed-split layout: absolute dev/test counts win over proportions.
  SplitProportions proportions;
  std::optional<std::size_t> dev_count;
  std::optional<std::size_t> test_count;
  // Template with {language}; tsv and downstream kinds read instances from here.
  std::string path;
  // Restricts the task to these languages (empty = all).
  std::vector<std::string> languages;
  // Task-specific generator parameters (word_content k/window, length bins).
  nlohmann::json params = nlohmann::json::object();
  // Sizes override for this task; empty = the experiment sweep.
  std::vector<std::size_t> sizes;

  bool downstream() const { return is_downstream(kind); }
};

enum class EncoderKind { avg, pmeans, random_lstm, file };

struct EncoderConfig {
  std::string name;
  EncoderKind kind = EncoderKind::avg;
  std::string vectors = "default";
  std::size_t hidden = 2048;
  std::optional<std::uint64_t> seed;
  // For kind file: template with {language} and {task}.
  std::string path;
};

struct ExperimentConfig {
  std::string profile = "multilingual";
  std::vector<LanguageConfig> languages;
  std::vector<TaskConfig> tasks;
  std::vector<EncoderConfig> encoders;
  std::vector<ProbeSpec> classifiers;
  std::vector<std::size_t> sizes;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> cache_dir;
  StatsOptions stats;
  ProfileOptions profile_cell;
  // Accept fewer instances than requested when a corpus runs short.
  bool allow_shortfall = true;
  std::filesystem::path base_dir;

  const LanguageConfig& language(const std::string& code) const;
  const TaskConfig& task(const std::string& name) const;
  std::vector<std::size_t> sizes_for(const TaskConfig& task) const;
  bool task_applies(const TaskConfig& task, const std::string& language) const;
  std::string classifier_name(std::size_t i) const { return probe_kind_name(classifiers[i].kind); }
};

// Parses a JSON document; every problem found is reported in one Error(config).
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Expands {language} / {task} placeholders and resolves against the config's directory.
std::filesystem::path resolve_template(const ExperimentConfig& config, const std::string& pattern,
                                       const std::string& language, const std::string& task);

// $PROBEKIT_CACHE, then the config's cache_dir, then <output_dir>/cache.
std::filesystem::path cache_directory(const ExperimentConfig& config);

struct ResultRow {
  std::string language;
  std::string task;
  std::string encoder;
  std::string classifier;
  std::size_t size = 0;
  std::string metric;
  double score = 0.0;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::string timestamp;
  std::uint64_t seed = 0;
  std::string sidecar;

  GridKey key() const { return {language, task, encoder, classifier, size}; }
};

// CSV with a header; writes are appended and flushed one row at a time.
class ResultStore {
 public:
  static const std::vector<std::string>& columns();

  explicit ResultStore(std::filesystem::path csv_path);

  // Rows already on disk; malformed (e.g. torn) lines are skipped.
  std::vector<ResultRow> load() const;
  void append(const ResultRow& row);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

std::string csv_escape(const std::string& field);
// Splits a single CSV record; returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> csv_split(const std::string& line);

enum class Stage { generate, encode, probe, downstream, analyze, report };
std::string stage_name(Stage stage);

struct RunOptions {
  std::size_t jobs = 0;  // 0 = hardware concurrency
  bool resume = false;
  bool quiet = false;
  std::ostream* log = nullptr;  // defaults to std::clog
};

struct RunSummary {
  std::size_t cells_total = 0;
  std::size_t cells_run = 0;
  std::size_t cells_skipped = 0;
  std::size_t cells_failed = 0;
  std::vector<std::string> failures;
  std::vector<std::string> written;
  // Informational messages such as skipped reports.
  std::vector<std::string> notes;

  bool ok() const noexcept { return cells_failed == 0; }
};

// Full dataset for (language, task): generated or imported, rebalanced to the
// task's size and ratio, split per protocol, test-first deduplicated. Cached.
ProbingDataset prepare_dataset(const ExperimentConfig& config, const std::string& language, const TaskConfig& task);

// Row indices of `dataset` used for one size of the sweep.
std::vector<std::size_t> subset_for_size(const ProbingDataset& dataset, const TaskConfig& task, std::size_t size,
                                         std::uint64_t seed);

// Features for every instance of `dataset` (AM adds the topic average). Cached.
EmbeddingMatrix prepare_embeddings(const ExperimentConfig& config, const std::string& language,
                                   const TaskConfig& task, const EncoderConfig& encoder,
                                   const ProbingDataset& dataset);

RunSummary run_stage(const ExperimentConfig& config, Stage stage, const RunOptions& options);

// Grid assembled from a results store with axis order taken from the config.
ScoreGrid grid_from_results(const ExperimentConfig& config, const std::vector<ResultRow>& rows);

struct ReportSkip {
  std::string report;
  std::string reason;
};

struct AnalysisOutput {
  nlohmann::json analysis = nlohmann::json::object();
  std::vector<std::filesystem::path> files;
  std::vector<ReportSkip> skipped;
};

// CSV tables plus analysis.json under <dir>.
AnalysisOutput emit_analysis(const ExperimentConfig& config, const ScoreGrid& grid, const std::filesystem::path& dir);

// SVG heatmaps and summary.md rendered from analysis.json.
std::vector<std::filesystem::path> emit_reports(const nlohmann::json& analysis, const std::filesystem::path& dir);

std::string render_heatmap_svg(const Matrix& matrix, const std::string& title, double lo = -1.0, double hi = 1.0);

}  // namespace probekit
