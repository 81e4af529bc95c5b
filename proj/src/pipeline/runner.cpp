#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "probekit/encoders.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/rng.hpp"
#include "probekit/util.hpp"

namespace probekit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::generate: return "generate";
    case Stage::encode: return "encode";
    case Stage::probe: return "probe";
    case Stage::downstream: return "downstream";
    case Stage::analyze: return "analyze";
    case Stage::report: return "report";
  }
  return "unknown";
}

namespace {

// Process-wide memo of parsed inputs keyed by path; entries are immutable.
template <class T>
class Memo {
 public:
  template <class Make>
  std::shared_ptr<const T> get(const std::string& key, Make&& make) {
    {
      std::lock_guard lock(mu_);
      if (auto it = items_.find(key); it != items_.end()) return it->second;
    }
    auto value = std::make_shared<const T>(make());
    std::lock_guard lock(mu_);
    return items_.emplace(key, std::move(value)).first->second;
  }

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const T>> items_;
};

Memo<std::vector<Sentence>>& corpus_memo() {
  static Memo<std::vector<Sentence>> m;
  return m;
}
Memo<VectorStore>& vector_memo() {
  static Memo<VectorStore> m;
  return m;
}
Memo<ConjugationLexicon>& lexicon_memo() {
  static Memo<ConjugationLexicon> m;
  return m;
}
Memo<std::string>& digest_memo() {
  static Memo<std::string> m;
  return m;
}

std::string file_digest(const fs::path& p) {
  std::error_code ec;
  const auto stamp = std::to_string(fs::file_size(p, ec)) + ":" +
                     std::to_string(fs::last_write_time(p, ec).time_since_epoch().count());
  return *digest_memo().get(p.string() + "@" + stamp, [&] { return sha256_file_hex(p); });
}

std::shared_ptr<const std::vector<Sentence>> load_corpus(const LanguageConfig& lang) {
  const auto key = lang.corpus.string() + (lang.format == CorpusFormat::plain ? "#plain" : "#conllu") +
                   std::to_string(static_cast<int>(lang.tokenizer));
  return corpus_memo().get(key, [&] {
    std::ifstream in(lang.corpus, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open corpus " + lang.corpus.string());
    return lang.format == CorpusFormat::plain ? load_plain(in, lang.tokenizer) : parse_conllu(in);
  });
}

std::shared_ptr<const VectorStore> load_vectors(const fs::path& p) {
  return vector_memo().get(p.string(), [&] { return VectorStore::load(p); });
}

json task_json(const TaskConfig& t) {
  json j{{"name", t.name},
         {"kind", task_kind_name(t.kind)},
         {"size", t.size},
         {"protocol", t.protocol.name()},
         {"metric", metric_name(t.metric)},
         {"params", t.params}};
  if (t.ratio) j["ratio"] = std::to_string(t.ratio->first) + ":" + std::to_string(t.ratio->second);
  if (t.protocol.kind == Protocol::Kind::fixed_splits) {
    if (t.dev_count && t.test_count) {
      j["dev"] = *t.dev_count;
      j["test"] = *t.test_count;
    } else {
      j["proportions"] = {t.proportions.train, t.proportions.dev, t.proportions.test};
    }
  }
  if (!t.path.empty()) j["path"] = t.path;
  return j;
}

std::string encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::avg: return "avg";
    case EncoderKind::pmeans: return "pmeans";
    case EncoderKind::random_lstm: return "random_lstm";
    case EncoderKind::file: return "file";
  }
  return "unknown";
}

std::uint64_t encoder_seed(const ExperimentConfig& config, const EncoderConfig& e) {
  return e.seed ? *e.seed : derive_seed(config.seed, "encoder:" + e.name);
}

json encoder_json(const ExperimentConfig& config, const EncoderConfig& e) {
  json j{{"name", e.name}, {"kind", encoder_kind_name(e.kind)}};
  if (e.kind == EncoderKind::file) {
    j["path"] = e.path;
  } else {
    j["vectors"] = e.vectors;
  }
  if (e.kind == EncoderKind::random_lstm) {
    j["hidden"] = e.hidden;
    j["seed"] = encoder_seed(config, e);
  }
  return j;
}

ProbingDataset generate_raw(const ExperimentConfig& config, const LanguageConfig& lang, const TaskConfig& task,
                            std::size_t n, std::uint64_t seed) {
  const auto corpus = load_corpus(lang);
  GenOptions opts{n, seed, lang.code};
  const std::span<const Sentence> sents(*corpus);
  switch (task.kind) {
    case TaskKind::bigram_shift: return gen_bigram_shift(sents, opts);
    case TaskKind::length: {
      std::optional<std::vector<LengthBin>> bins;
      if (task.params.contains("bins")) {
        bins.emplace();
        for (const auto& b : task.params["bins"]) bins->push_back({b.at(0).get<int>(), b.at(1).get<int>()});
      }
      return gen_length(sents, opts, bins);
    }
    case TaskKind::word_content: {
      WordContentOptions wc;
      wc.k = task.params.value("k", wc.k);
      wc.window_first = task.params.value("window_first", wc.window_first);
      wc.window_last = task.params.value("window_last", wc.window_last);
      return gen_word_content(sents, wc, opts);
    }
    case TaskKind::subj_number: return gen_subj_number(sents, opts);
    case TaskKind::voice: return gen_voice(sents, opts);
    case TaskKind::sv_agree: {
      const auto lex = lexicon_memo().get(lang.lexicon->string(), [&] { return ConjugationLexicon::load(*lang.lexicon); });
      return gen_sv_agree(sents, *lex, opts);
    }
    case TaskKind::sv_dist: return gen_sv_dist(sents, opts);
    case TaskKind::tree_depth: return gen_tree_depth(sents, opts);
    default: break;
  }
  (void)config;
  throw Error(ErrorKind::internal, "task kind " + task_kind_name(task.kind) + " is not generated");
}

SplitProportions split_layout(const TaskConfig& task, std::size_t n) {
  if (task.dev_count && task.test_count) {
    const auto held = *task.dev_count + *task.test_count;
    if (held >= n)
      throw Error(ErrorKind::config, task.name + ": dev + test (" + std::to_string(held) + ") leave no training data from " +
                                         std::to_string(n) + " instances");
    const auto dn = static_cast<double>(n);
    return {static_cast<double>(n - held) / dn, static_cast<double>(*task.dev_count) / dn,
            static_cast<double>(*task.test_count) / dn};
  }
  return task.proportions;
}

ProbingDataset build_dataset(const ExperimentConfig& config, const LanguageConfig& lang, const TaskConfig& task) {
  const auto seed = derive_seed(config.seed, "dataset:" + lang.code + "/" + task.name);
  ProbingDataset ds;
  const bool file_backed = task.kind == TaskKind::tsv || task.downstream();
  if (file_backed) {
    ds = import_senteval_tsv(resolve_template(config, task.path, lang.code, task.name));
    ds.rng_seed = seed;
  } else {
    std::size_t n = task.size;
    for (int attempt = 0;; ++attempt) {
      try {
        ds = generate_raw(config, lang, task, n, seed);
        break;
      } catch (const ShortfallError& e) {
        if (!config.allow_shortfall || e.available() == 0 || e.available() >= n || attempt == 3) throw;
        n = e.available();
      }
    }
    if (n < task.size) ds.params["shortfall"] = {{"requested", task.size}, {"available", n}};
  }
  ds.task = task.name;
  ds.language = lang.code;

  const std::size_t target = task.size == 0 ? ds.size() : std::min(task.size, ds.size());
  if (task.ratio || target < ds.size()) ds = rebalance(ds, target, task.ratio, derive_seed(seed, "rebalance"));

  if (task.protocol.kind == Protocol::Kind::fixed_splits) {
    const bool has_splits = !ds.indices_of(Split::dev).empty() && !ds.indices_of(Split::test).empty();
    if (!file_backed || !has_splits) ds = assign_splits(ds, split_layout(task, ds.size()), derive_seed(seed, "splits"));
  } else {
    for (auto& inst : ds.instances) inst.split = Split::train;
  }
  ds = deduplicate(ds);
  ds.params["protocol"] = task.protocol.name();
  return ds;
}

json dataset_key(const ExperimentConfig& config, const LanguageConfig& lang, const TaskConfig& task) {
  json key{{"format", 1}, {"language", lang.code}, {"task", task_json(task)}, {"seed", config.seed},
           {"allow_shortfall", config.allow_shortfall}};
  if (task.kind == TaskKind::tsv || task.downstream()) {
    key["input"] = file_digest(resolve_template(config, task.path, lang.code, task.name));
  } else {
    key["corpus"] = file_digest(lang.corpus);
    key["corpus_format"] = lang.format == CorpusFormat::plain ? "plain" : "conllu";
    key["tokenizer"] = static_cast<int>(lang.tokenizer);
    if (task.kind == TaskKind::sv_agree) key["lexicon"] = file_digest(*lang.lexicon);
  }
  return key;
}

fs::path vectors_path(const LanguageConfig& lang, const std::string& name) {
  if (auto it = lang.vectors.find(name); it != lang.vectors.end()) return it->second;
  if (!lang.vectors.empty()) return lang.vectors.begin()->second;
  throw Error(ErrorKind::config, "language " + lang.code + " has no word vectors");
}

FeatureMatrix topic_features(const VectorStore& store, const ProbingDataset& ds) {
  FeatureMatrix out(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(store.dim()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.instances[i].topic)
      throw Error(ErrorKind::format, ds.task + ": instance " + std::to_string(i) + " has no topic column");
    const auto tokens = split_whitespace(*ds.instances[i].topic);
    const auto enc = encode_sentence(store, tokens, PoolingKind::avg);
    for (std::size_t j = 0; j < store.dim(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = enc.values[j];
  }
  return out;
}

EmbeddingMatrix concat_topic(EmbeddingMatrix m, const FeatureMatrix& topic) {
  FeatureMatrix joined(m.rows.rows(), m.rows.cols() + topic.cols());
  joined << m.rows, topic;
  m.rows = std::move(joined);
  m.dim = static_cast<std::size_t>(m.rows.cols());
  return m;
}

}  // namespace

ProbingDataset prepare_dataset(const ExperimentConfig& config, const std::string& language, const TaskConfig& task) {
  const auto& lang = config.language(language);
  const auto key = sha256_hex(dataset_key(config, lang, task).dump());
  const auto path = cache_directory(config) / "datasets" / (key + ".tsv");
  std::error_code ec;
  if (!fs::exists(path, ec)) write_dataset(build_dataset(config, lang, task), path);
  // Always read back so cache hits and misses yield the same object.
  return read_dataset(path);
}

std::vector<std::size_t> subset_for_size(const ProbingDataset& dataset, const TaskConfig& task, std::size_t size,
                                         std::uint64_t seed) {
  std::vector<std::size_t> pool;
  std::vector<std::size_t> fixed;
  if (task.protocol.kind == Protocol::Kind::fixed_splits) {
    pool = dataset.indices_of(Split::train);
    for (const auto s : {Split::dev, Split::test}) {
      const auto idx = dataset.indices_of(s);
      fixed.insert(fixed.end(), idx.begin(), idx.end());
    }
  } else {
    pool.resize(dataset.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  std::vector<std::size_t> chosen;
  if (size >= pool.size()) {
    chosen = pool;
  } else {
    ProbingDataset sub;
    sub.task = dataset.task;
    sub.labels = dataset.labels;
    for (const auto r : pool) {
      auto inst = dataset.instances[r];
      inst.source = r;
      sub.instances.push_back(std::move(inst));
    }
    // Labels absent from the pool would break proportional rebalancing.
    std::vector<std::string> present;
    for (const auto& l : sub.labels) {
      if (std::any_of(sub.instances.begin(), sub.instances.end(), [&](const auto& i) { return i.label == l; }))
        present.push_back(l);
    }
    sub.labels = present;
    for (const auto& inst : rebalance(sub, size, std::nullopt, seed).instances) chosen.push_back(*inst.source);
  }
  chosen.insert(chosen.end(), fixed.begin(), fixed.end());
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

EmbeddingMatrix prepare_embeddings(const ExperimentConfig& config, const std::string& language,
                                   const TaskConfig& task, const EncoderConfig& encoder,
                                   const ProbingDataset& dataset) {
  const auto& lang = config.language(language);
  const bool am = task.kind == TaskKind::am;
  if (encoder.kind == EncoderKind::file) {
    auto m = read_embeddings(resolve_template(config, encoder.path, language, task.name));
    check_alignment(m, dataset);
    if (am) m = concat_topic(std::move(m), topic_features(*load_vectors(vectors_path(lang, "default")), dataset));
    return m;
  }
  const auto vec_path = vectors_path(lang, encoder.vectors);
  json key{{"format", 1},
           {"dataset", sha256_hex(dataset_tsv_string(dataset))},
           {"encoder", encoder_json(config, encoder)},
           {"vectors", file_digest(vec_path)},
           {"topic", am}};
  const auto path = cache_directory(config) / "embeddings" / (sha256_hex(key.dump()) + ".probeemb");
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    const auto store = load_vectors(vec_path);
    std::unique_ptr<SentenceEncoder> enc;
    switch (encoder.kind) {
      case EncoderKind::avg: enc = make_pooling_encoder(store, PoolingKind::avg); break;
      case EncoderKind::pmeans: enc = make_pooling_encoder(store, PoolingKind::pmeans); break;
      default: enc = make_random_lstm_encoder(store, encoder.hidden, encoder_seed(config, encoder)); break;
    }
    auto m = encode_dataset(*enc, encoder.name, dataset);
    const auto oov = static_cast<std::size_t>(std::count(m.all_oov.begin(), m.all_oov.end(), true));
    if (am) m = concat_topic(std::move(m), topic_features(*store, dataset));
    write_embeddings(m, path);
    auto meta = path;
    meta += ".meta.json";
    write_file_atomic(meta, json{{"key", key}, {"all_oov_rows", oov}}.dump(2) + "\n");
  }
  auto m = read_embeddings(path);
  check_alignment(m, dataset);
  return m;
}

namespace {

class Logger {
 public:
  explicit Logger(const RunOptions& o) : out_(o.quiet ? nullptr : (o.log ? o.log : &std::clog)) {}
  void line(const std::string& msg) {
    if (!out_) return;
    std::lock_guard lock(mu_);
    *out_ << msg << '\n';
    out_->flush();
  }

 private:
  std::ostream* out_;
  std::mutex mu_;
};

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (n == 0) return;
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

std::size_t job_count(const RunOptions& o) {
  if (o.jobs > 0) return o.jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string error_text(const std::exception& e) {
  if (const auto* pe = dynamic_cast<const Error*>(&e)) return std::string(error_kind_name(pe->kind())) + ": " + e.what();
  return std::string("internal: ") + e.what();
}

struct Cell {
  std::size_t encoder;
  std::size_t classifier;
  std::size_t size;
  GridKey key;
};

std::string safe_file_part(std::string s) {
  for (auto& c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  }
  return s;
}

class MatrixRunner {
 public:
  MatrixRunner(const ExperimentConfig& config, Stage stage, const RunOptions& options)
      : config_(config), stage_(stage), options_(options), log_(options),
        store_(config.output_dir / "results.csv") {}

  RunSummary run() {
    fs::create_directories(config_.output_dir);
    const bool downstream = stage_ == Stage::downstream;
    std::vector<std::pair<const LanguageConfig*, const TaskConfig*>> groups;
    for (const auto& lang : config_.languages) {
      for (const auto& task : config_.tasks) {
        if (task.downstream() == downstream && config_.task_applies(task, lang.code)) groups.emplace_back(&lang, &task);
      }
    }
    std::set<GridKey> planned;
    for (const auto& [lang, task] : groups) {
      for (auto& c : cells_of(*lang, *task)) planned.insert(c.key);
    }
    prepare_store(planned);

    for (const auto& [lang, task] : groups) run_group(*lang, *task);
    summary_.cells_total = planned.size();
    return summary_;
  }

 private:
  std::vector<Cell> cells_of(const LanguageConfig& lang, const TaskConfig& task) const {
    std::vector<Cell> cells;
    for (std::size_t e = 0; e < config_.encoders.size(); ++e) {
      for (std::size_t c = 0; c < config_.classifiers.size(); ++c) {
        for (const auto s : config_.sizes_for(task)) {
          cells.push_back({e, c, s, {lang.code, task.name, config_.encoders[e].name, config_.classifier_name(c), s}});
        }
      }
    }
    return cells;
  }

  // Resume keeps finished cells; a fresh run drops this stage's previous rows.
  void prepare_store(const std::set<GridKey>& planned) {
    const auto rows = store_.load();
    if (options_.resume) {
      for (const auto& r : rows) completed_.insert(r.key());
      return;
    }
    std::vector<ResultRow> kept;
    for (const auto& r : rows) {
      if (!planned.contains(r.key())) kept.push_back(r);
    }
    if (kept.size() == rows.size()) return;
    std::error_code ec;
    fs::remove(store_.path(), ec);
    for (const auto& r : kept) store_.append(r);
  }

  void record_failure(const GridKey& key, const std::string& message) {
    std::lock_guard lock(write_mu_);
    ++summary_.cells_failed;
    summary_.failures.push_back(key.str() + ": " + message);
    std::ofstream out(config_.output_dir / "failures.jsonl", std::ios::app | std::ios::binary);
    out << json{{"cell", key.str()}, {"error", message}, {"timestamp", utc_timestamp()}}.dump() << '\n';
    log_.line("[" + stage_name(stage_) + "] FAILED " + key.str() + ": " + message);
  }

  void run_group(const LanguageConfig& lang, const TaskConfig& task) {
    std::vector<Cell> todo;
    for (auto& c : cells_of(lang, task)) {
      if (completed_.contains(c.key)) {
        ++summary_.cells_skipped;
      } else {
        todo.push_back(std::move(c));
      }
    }
    if (todo.empty()) return;
    log_.line("[" + stage_name(stage_) + "] " + lang.code + "/" + task.name + ": " + std::to_string(todo.size()) +
              " cells");

    ProbingDataset dataset;
    try {
      dataset = prepare_dataset(config_, lang.code, task);
    } catch (const std::exception& e) {
      for (const auto& c : todo) record_failure(c.key, error_text(e));
      return;
    }

    std::set<std::size_t> needed;
    for (const auto& c : todo) needed.insert(c.encoder);
    const std::vector<std::size_t> encoders(needed.begin(), needed.end());
    std::vector<std::optional<EmbeddingMatrix>> features(config_.encoders.size());
    std::vector<std::string> feature_errors(config_.encoders.size());
    parallel_for(encoders.size(), job_count(options_), [&](std::size_t i) {
      const auto e = encoders[i];
      try {
        features[e] = prepare_embeddings(config_, lang.code, task, config_.encoders[e], dataset);
      } catch (const std::exception& ex) {
        feature_errors[e] = error_text(ex);
      }
    });

    std::map<std::size_t, std::vector<std::size_t>> subsets;
    for (const auto s : config_.sizes_for(task)) {
      subsets[s] = subset_for_size(dataset, task, s,
                                   derive_seed(config_.seed, "subset:" + lang.code + "/" + task.name + "/" + std::to_string(s)));
    }

    parallel_for(todo.size(), job_count(options_), [&](std::size_t i) {
      const auto& cell = todo[i];
      if (!features[cell.encoder]) {
        record_failure(cell.key, feature_errors[cell.encoder]);
        return;
      }
      try {
        run_cell(cell, task, dataset, *features[cell.encoder], subsets.at(cell.size));
      } catch (const std::exception& e) {
        record_failure(cell.key, error_text(e));
      }
    });
  }

  void run_cell(const Cell& cell, const TaskConfig& task, const ProbingDataset& dataset, const EmbeddingMatrix& m,
                const std::vector<std::size_t>& rows) {
    ProbingDataset sub;
    sub.task = dataset.task;
    sub.language = dataset.language;
    sub.labels = dataset.labels;
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), m.rows.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sub.instances.push_back(dataset.instances[rows[i]]);
      x.row(static_cast<Eigen::Index>(i)) = m.rows.row(static_cast<Eigen::Index>(rows[i]));
    }
    // Keep only labels that occur in the subset so class indices stay dense.
    std::vector<std::string> present;
    for (const auto& l : sub.labels) {
      if (std::any_of(sub.instances.begin(), sub.instances.end(), [&](const auto& inst) { return inst.label == l; }))
        present.push_back(l);
    }
    sub.labels = present;
    sub.refresh_balance();

    const auto cell_seed = derive_seed(config_.seed, "cell:" + cell.key.str());
    auto spec = config_.classifiers[cell.classifier];
    spec.seed = cell_seed;
    const auto report = tune_and_eval(spec, sub, x, task.protocol);

    ResultRow row;
    row.language = cell.key.language;
    row.task = cell.key.task;
    row.encoder = cell.key.encoder;
    row.classifier = cell.key.classifier;
    row.size = cell.size;
    row.metric = metric_name(task.metric);
    row.score = report.test_score(task.metric);
    row.hyperparams = report.chosen.to_json();
    row.timestamp = utc_timestamp();
    row.seed = config_.seed;
    const fs::path rel = fs::path("cells") / safe_file_part(row.language) / safe_file_part(row.task) /
                         (safe_file_part(row.encoder) + "__" + row.classifier + "__" + std::to_string(row.size) + ".json");
    row.sidecar = rel.generic_string();
    const json sidecar{{"cell", cell.key.str()},
                       {"seed", config_.seed},
                       {"cell_seed", cell_seed},
                       {"metric", row.metric},
                       {"score", row.score},
                       {"instances", sub.size()},
                       {"train_instances", sub.indices_of(Split::train).size()},
                       {"balance", sub.balance},
                       {"task", task_json(task)},
                       {"encoder", encoder_json(config_, config_.encoders[cell.encoder])},
                       {"classifier", config_.classifiers[cell.classifier].to_json()},
                       {"feature_width", x.cols()},
                       {"report", report.to_json()}};
    write_file_atomic(config_.output_dir / rel, sidecar.dump(2) + "\n");

    std::lock_guard lock(write_mu_);
    store_.append(row);
    ++summary_.cells_run;
    log_.line("[" + stage_name(stage_) + "] " + cell.key.str() + " " + row.metric + "=" + format_double(row.score, 4));
  }

  const ExperimentConfig& config_;
  Stage stage_;
  RunOptions options_;
  Logger log_;
  ResultStore store_;
  std::set<GridKey> completed_;
  std::mutex write_mu_;
  RunSummary summary_;
};

RunSummary run_generate(const ExperimentConfig& config, const RunOptions& options) {
  Logger log(options);
  RunSummary summary;
  for (const auto& lang : config.languages) {
    for (const auto& task : config.tasks) {
      if (!config.task_applies(task, lang.code)) continue;
      ++summary.cells_total;
      const auto path = config.output_dir / "datasets" / lang.code / (task.name + ".tsv");
      if (options.resume && fs::exists(path)) {
        ++summary.cells_skipped;
        continue;
      }
      try {
        const auto ds = prepare_dataset(config, lang.code, task);
        write_dataset(ds, path);
        summary.written.push_back(path.string());
        ++summary.cells_run;
        log.line("[generate] " + lang.code + "/" + task.name + ": " + std::to_string(ds.size()) + " instances, balance " +
                 ds.balance);
      } catch (const std::exception& e) {
        ++summary.cells_failed;
        summary.failures.push_back(lang.code + "/" + task.name + ": " + error_text(e));
        log.line("[generate] FAILED " + lang.code + "/" + task.name + ": " + error_text(e));
      }
    }
  }
  return summary;
}

RunSummary run_encode(const ExperimentConfig& config, const RunOptions& options) {
  Logger log(options);
  RunSummary summary;
  for (const auto& lang : config.languages) {
    for (const auto& task : config.tasks) {
      if (!config.task_applies(task, lang.code)) continue;
      std::optional<ProbingDataset> ds;
      for (const auto& enc : config.encoders) {
        if (enc.kind == EncoderKind::file) continue;
        ++summary.cells_total;
        const auto path = config.output_dir / "embeddings" / lang.code / task.name / (enc.name + ".probeemb");
        if (options.resume && fs::exists(path)) {
          ++summary.cells_skipped;
          continue;
        }
        try {
          if (!ds) ds = prepare_dataset(config, lang.code, task);
          write_embeddings(prepare_embeddings(config, lang.code, task, enc, *ds), path);
          summary.written.push_back(path.string());
          ++summary.cells_run;
          log.line("[encode] " + lang.code + "/" + task.name + "/" + enc.name);
        } catch (const std::exception& e) {
          ++summary.cells_failed;
          summary.failures.push_back(lang.code + "/" + task.name + "/" + enc.name + ": " + error_text(e));
          log.line("[encode] FAILED " + summary.failures.back());
        }
      }
    }
  }
  return summary;
}

}  // namespace

ScoreGrid grid_from_results(const ExperimentConfig& config, const std::vector<ResultRow>& rows) {
  ScoreGrid grid;
  for (const auto& l : config.languages) grid.languages.push_back(l.code);
  for (const auto& t : config.tasks) {
    grid.tasks.push_back(t.name);
    if (t.downstream()) grid.downstream_tasks.insert(t.name);
  }
  for (const auto& e : config.encoders) grid.encoders.push_back(e.name);
  for (std::size_t c = 0; c < config.classifiers.size(); ++c) grid.classifiers.push_back(config.classifier_name(c));
  grid.sizes = config.sizes;
  for (const auto& t : config.tasks) {
    for (const auto s : t.sizes) {
      if (std::find(grid.sizes.begin(), grid.sizes.end(), s) == grid.sizes.end()) grid.sizes.push_back(s);
    }
  }
  for (const auto& r : rows) {
    if (grid.contains(r.key())) continue;
    try {
      grid.insert(r.key(), r.score);
    } catch (const Error&) {
      // Rows from axes no longer in the config are ignored.
    }
  }
  return grid;
}

RunSummary run_stage(const ExperimentConfig& config, Stage stage, const RunOptions& options) {
  switch (stage) {
    case Stage::generate: return run_generate(config, options);
    case Stage::encode: return run_encode(config, options);
    case Stage::probe:
    case Stage::downstream: return MatrixRunner(config, stage, options).run();
    case Stage::analyze: {
      const auto rows = ResultStore(config.output_dir / "results.csv").load();
      if (rows.empty()) throw Error(ErrorKind::coverage, "no results in " + (config.output_dir / "results.csv").string());
      const auto out = emit_analysis(config, grid_from_results(config, rows), config.output_dir / "reports");
      RunSummary s;
      for (const auto& f : out.files) s.written.push_back(f.string());
      for (const auto& k : out.skipped) s.notes.push_back("skipped " + k.report + ": " + k.reason);
      return s;
    }
    case Stage::report: {
      const auto dir = config.output_dir / "reports";
      if (!fs::exists(dir / "analysis.json")) run_stage(config, Stage::analyze, options);
      const auto analysis = json::parse(read_file(dir / "analysis.json"));
      RunSummary s;
      for (const auto& f : emit_reports(analysis, dir)) s.written.push_back(f.string());
      return s;
    }
  }
  throw Error(ErrorKind::internal, "unknown stage");
}

}  // namespace probekit
