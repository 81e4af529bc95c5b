#include <algorithm>
#include <cstdlib>
#include <set>

#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/util.hpp"

namespace probekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<TaskKind, const char*>>& task_kinds() {
  static const std::vector<std::pair<TaskKind, const char*>> kinds{
      {TaskKind::bigram_shift, "bigram_shift"}, {TaskKind::length, "length"},
      {TaskKind::word_content, "word_content"}, {TaskKind::subj_number, "subj_number"},
      {TaskKind::voice, "voice"},               {TaskKind::sv_agree, "sv_agree"},
      {TaskKind::sv_dist, "sv_dist"},           {TaskKind::tree_depth, "tree_depth"},
      {TaskKind::tsv, "tsv"},                   {TaskKind::am, "am"},
      {TaskKind::trec, "trec"},                 {TaskKind::sentiment, "sentiment"},
  };
  return kinds;
}

const std::vector<std::size_t> en_sizes{2000, 5000, 10000, 20000, 30000, 100000};

// Collects problems instead of stopping at the first one.
class Problems {
 public:
  void add(std::string msg) { items_.push_back(std::move(msg)); }
  bool empty() const { return items_.empty(); }

  void keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      add(where + ": expected an object");
      return;
    }
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        add(where + ": unknown key '" + k + "'");
    }
  }

  template <class T>
  std::optional<T> get(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      add(where + "." + key + ": wrong type");
      return std::nullopt;
    }
  }

  [[noreturn]] void raise() const {
    std::string msg = "invalid configuration (" + std::to_string(items_.size()) + " problem" +
                      (items_.size() == 1 ? "" : "s") + "):";
    for (const auto& p : items_) msg += "\n  - " + p;
    throw Error(ErrorKind::config, msg);
  }

 private:
  std::vector<std::string> items_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

bool is_en_profile(const std::string& profile) { return profile == "en-stability"; }

void task_defaults(TaskConfig& t, const std::string& profile) {
  const bool en = is_en_profile(profile);
  switch (t.kind) {
    case TaskKind::am:
      t.protocol = Protocol::kfold(10);
      t.metric = Metric::macro_f1;
      t.size = 0;
      return;
    case TaskKind::sentiment:
      t.protocol = Protocol::kfold(10);
      t.metric = Metric::macro_f1;
      t.size = 0;
      return;
    case TaskKind::trec:
      t.protocol = Protocol::fixed();
      t.metric = Metric::accuracy;
      t.size = 0;
      return;
    case TaskKind::tsv:
      t.protocol = Protocol::fixed();
      t.size = 0;
      return;
    default:
      break;
  }
  if (en) {
    t.protocol = Protocol::fixed();
    t.dev_count = 10000;
    t.test_count = 10000;
    t.size = en_sizes.back() + 20000;
  } else {
    t.size = 10000;
    t.protocol = t.kind == TaskKind::subj_number ? Protocol::fixed() : Protocol::kfold(5);
  }
  if (t.kind == TaskKind::word_content && !en) {
    t.params["k"] = 30;
  }
}

void parse_language(Problems& pr, const std::string& code, const json& j, const fs::path& base,
                    LanguageConfig& out) {
  const std::string where = "languages." + code;
  out.code = code;
  if (j.is_string()) {
    out.corpus = resolve(base, j.get<std::string>());
    return;
  }
  pr.keys(j, where, {"corpus", "format", "tokenizer", "lexicon", "vectors"});
  if (auto c = pr.get<std::string>(j, "corpus", where)) {
    out.corpus = resolve(base, *c);
  } else {
    pr.add(where + ": missing 'corpus'");
  }
  if (auto f = pr.get<std::string>(j, "format", where)) {
    if (*f == "conllu") out.format = CorpusFormat::conllu;
    else if (*f == "plain") out.format = CorpusFormat::plain;
    else pr.add(where + ".format: expected 'conllu' or 'plain', got '" + *f + "'");
  } else if (out.corpus.extension() == ".txt") {
    out.format = CorpusFormat::plain;
  }
  if (auto t = pr.get<std::string>(j, "tokenizer", where)) {
    if (*t == "whitespace") out.tokenizer = Tokenizer::whitespace;
    else if (*t == "unicode-word" || *t == "unicode_word") out.tokenizer = Tokenizer::unicode_word;
    else pr.add(where + ".tokenizer: unknown tokenizer '" + *t + "'");
  }
  if (auto l = pr.get<std::string>(j, "lexicon", where)) out.lexicon = resolve(base, *l);
  if (j.contains("vectors")) {
    const auto& v = j["vectors"];
    if (v.is_string()) {
      out.vectors["default"] = resolve(base, v.get<std::string>());
    } else if (v.is_object()) {
      for (const auto& [name, p] : v.items()) {
        if (p.is_string()) out.vectors[name] = resolve(base, p.get<std::string>());
        else pr.add(where + ".vectors." + name + ": expected a path");
      }
    } else {
      pr.add(where + ".vectors: expected a path or an object of paths");
    }
  }
}

void parse_task(Problems& pr, const json& j, std::size_t index, const std::string& profile, TaskConfig& t) {
  std::string where = "tasks[" + std::to_string(index) + "]";
  if (j.is_string()) {
    t.name = j.get<std::string>();
    try {
      t.kind = parse_task_kind(t.name);
    } catch (const Error& e) {
      pr.add(where + ": " + e.what());
    }
    task_defaults(t, profile);
    return;
  }
  pr.keys(j, where, {"name", "kind", "size", "ratio", "protocol", "k", "metric", "dev", "test", "proportions",
                     "path", "languages", "params", "sizes"});
  const auto name = pr.get<std::string>(j, "name", where);
  const auto kind = pr.get<std::string>(j, "kind", where);
  if (!name && !kind) {
    pr.add(where + ": needs 'name' or 'kind'");
    return;
  }
  t.name = name ? *name : *kind;
  where = "tasks." + t.name;
  try {
    t.kind = parse_task_kind(kind ? *kind : t.name);
  } catch (const Error& e) {
    pr.add(where + ": " + e.what());
  }
  task_defaults(t, profile);
  if (auto v = pr.get<std::size_t>(j, "size", where)) t.size = *v;
  if (auto v = pr.get<std::string>(j, "ratio", where)) {
    try {
      t.ratio = parse_ratio(*v);
    } catch (const Error& e) {
      pr.add(where + ".ratio: " + e.what());
    }
  }
  if (auto v = pr.get<std::string>(j, "protocol", where)) {
    if (*v == "fixed" || *v == "fixed-splits") t.protocol = Protocol::fixed();
    else if (*v == "kfold" || *v == "inner-kfold") t.protocol.kind = Protocol::Kind::inner_kfold;
    else pr.add(where + ".protocol: expected 'fixed' or 'kfold'");
  }
  if (auto v = pr.get<std::size_t>(j, "k", where)) {
    if (*v < 2) pr.add(where + ".k: must be at least 2");
    t.protocol.k = *v;
  }
  if (auto v = pr.get<std::string>(j, "metric", where)) {
    try {
      t.metric = parse_metric(*v);
    } catch (const Error& e) {
      pr.add(where + ".metric: " + e.what());
    }
  }
  if (auto v = pr.get<std::size_t>(j, "dev", where)) t.dev_count = *v;
  if (auto v = pr.get<std::size_t>(j, "test", where)) t.test_count = *v;
  if (j.contains("proportions")) {
    const auto& p = j["proportions"];
    pr.keys(p, where + ".proportions", {"train", "dev", "test"});
    t.proportions.train = pr.get<double>(p, "train", where).value_or(t.proportions.train);
    t.proportions.dev = pr.get<double>(p, "dev", where).value_or(t.proportions.dev);
    t.proportions.test = pr.get<double>(p, "test", where).value_or(t.proportions.test);
    t.dev_count.reset();
    t.test_count.reset();
  }
  if (auto v = pr.get<std::string>(j, "path", where)) t.path = *v;
  if (auto v = pr.get<std::vector<std::string>>(j, "languages", where)) t.languages = *v;
  if (j.contains("params")) {
    if (j["params"].is_object()) t.params.update(j["params"]);
    else pr.add(where + ".params: expected an object");
  }
  if (auto v = pr.get<std::vector<std::size_t>>(j, "sizes", where)) t.sizes = *v;
}

void parse_encoder(Problems& pr, const json& j, std::size_t index, EncoderConfig& e) {
  std::string where = "encoders[" + std::to_string(index) + "]";
  auto set_kind = [&](const std::string& k) {
    if (k == "avg") e.kind = EncoderKind::avg;
    else if (k == "pmeans") e.kind = EncoderKind::pmeans;
    else if (k == "random_lstm" || k == "rlstm" || k == "random-lstm") e.kind = EncoderKind::random_lstm;
    else if (k == "file") e.kind = EncoderKind::file;
    else pr.add(where + ": unknown encoder kind '" + k + "'");
  };
  if (j.is_string()) {
    e.name = j.get<std::string>();
    set_kind(e.name);
    return;
  }
  pr.keys(j, where, {"name", "kind", "vectors", "hidden", "seed", "path"});
  const auto name = pr.get<std::string>(j, "name", where);
  const auto kind = pr.get<std::string>(j, "kind", where);
  if (!name && !kind) {
    pr.add(where + ": needs 'name' or 'kind'");
    return;
  }
  e.name = name ? *name : *kind;
  set_kind(kind ? *kind : e.name);
  if (auto v = pr.get<std::string>(j, "vectors", where)) e.vectors = *v;
  if (auto v = pr.get<std::size_t>(j, "hidden", where)) {
    if (*v == 0) pr.add(where + ".hidden: must be positive");
    e.hidden = *v;
  }
  if (auto v = pr.get<std::uint64_t>(j, "seed", where)) e.seed = *v;
  if (auto v = pr.get<std::string>(j, "path", where)) e.path = *v;
  if (e.kind == EncoderKind::file && e.path.empty()) pr.add(where + ": file encoder needs 'path'");
}

void parse_classifier(Problems& pr, const json& j, std::size_t index, ProbeSpec& spec) {
  const std::string where = "classifiers[" + std::to_string(index) + "]";
  auto kind_of = [&](const std::string& k) {
    try {
      return parse_probe_kind(k);
    } catch (const Error& e) {
      pr.add(where + ": " + e.what());
      return ProbeKind::LR;
    }
  };
  if (j.is_string()) {
    spec = ProbeSpec::defaults(kind_of(j.get<std::string>()));
    return;
  }
  pr.keys(j, where, {"kind", "l2", "hidden", "dropout", "max_depth", "trees", "training"});
  const auto kind = pr.get<std::string>(j, "kind", where);
  if (!kind) {
    pr.add(where + ": missing 'kind'");
    return;
  }
  spec = ProbeSpec::defaults(kind_of(*kind));
  if (auto v = pr.get<std::vector<double>>(j, "l2", where)) spec.l2_grid = *v;
  if (auto v = pr.get<std::vector<std::size_t>>(j, "hidden", where)) spec.hidden_grid = *v;
  if (auto v = pr.get<std::vector<double>>(j, "dropout", where)) spec.dropout_grid = *v;
  if (j.contains("max_depth")) {
    std::vector<int> depths;
    bool ok = j["max_depth"].is_array();
    if (ok) {
      for (const auto& d : j["max_depth"]) {
        if (d.is_null() || (d.is_string() && (d == "inf" || d == "none"))) depths.push_back(0);
        else if (d.is_number_integer() && d.get<int>() > 0) depths.push_back(d.get<int>());
        else ok = false;
      }
    }
    if (ok) spec.depth_grid = depths;
    else pr.add(where + ".max_depth: expected positive integers or \"inf\"");
  }
  if (auto v = pr.get<std::size_t>(j, "trees", where)) spec.trees = *v;
  if (j.contains("training")) {
    const auto& t = j["training"];
    pr.keys(t, where + ".training", {"learning_rate", "batch_size", "max_epochs", "patience"});
    spec.training.learning_rate = pr.get<double>(t, "learning_rate", where).value_or(spec.training.learning_rate);
    spec.training.batch_size = pr.get<std::size_t>(t, "batch_size", where).value_or(spec.training.batch_size);
    spec.training.max_epochs = pr.get<std::size_t>(t, "max_epochs", where).value_or(spec.training.max_epochs);
    spec.training.patience = pr.get<std::size_t>(t, "patience", where).value_or(spec.training.patience);
  }
  if ((spec.kind == ProbeKind::LR || spec.kind == ProbeKind::MLP) && spec.l2_grid.empty())
    pr.add(where + ": empty l2 grid");
  if (spec.kind == ProbeKind::MLP && (spec.hidden_grid.empty() || spec.dropout_grid.empty()))
    pr.add(where + ": empty MLP grid");
  if (spec.kind == ProbeKind::RF && spec.depth_grid.empty()) pr.add(where + ": empty depth grid");
}

void check_exists(Problems& pr, const fs::path& p, const std::string& what) {
  std::error_code ec;
  if (!fs::exists(p, ec)) pr.add(what + ": file not found: " + p.string());
}

}  // namespace

std::string task_kind_name(TaskKind kind) {
  for (const auto& [k, n] : task_kinds()) {
    if (k == kind) return n;
  }
  return "unknown";
}

TaskKind parse_task_kind(const std::string& name) {
  for (const auto& [k, n] : task_kinds()) {
    if (name == n) return k;
  }
  throw Error(ErrorKind::config, "unknown task kind '" + name + "'");
}

bool is_downstream(TaskKind kind) {
  return kind == TaskKind::am || kind == TaskKind::trec || kind == TaskKind::sentiment;
}

const LanguageConfig& ExperimentConfig::language(const std::string& code) const {
  for (const auto& l : languages) {
    if (l.code == code) return l;
  }
  throw Error(ErrorKind::config, "unknown language '" + code + "'");
}

const TaskConfig& ExperimentConfig::task(const std::string& name) const {
  for (const auto& t : tasks) {
    if (t.name == name) return t;
  }
  throw Error(ErrorKind::config, "unknown task '" + name + "'");
}

std::vector<std::size_t> ExperimentConfig::sizes_for(const TaskConfig& t) const {
  return t.sizes.empty() ? sizes : t.sizes;
}

bool ExperimentConfig::task_applies(const TaskConfig& t, const std::string& lang) const {
  return t.languages.empty() || std::find(t.languages.begin(), t.languages.end(), lang) != t.languages.end();
}

fs::path resolve_template(const ExperimentConfig& config, const std::string& pattern, const std::string& language,
                          const std::string& task) {
  std::string out = pattern;
  auto replace = [&](const std::string& token, const std::string& value) {
    for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size()))
      out.replace(pos, token.size(), value);
  };
  replace("{language}", language);
  replace("{task}", task);
  return resolve(config.base_dir, out);
}

fs::path cache_directory(const ExperimentConfig& config) {
  if (const char* env = std::getenv("PROBEKIT_CACHE"); env && *env) return fs::path(env);
  if (config.cache_dir) return *config.cache_dir;
  return config.output_dir / "cache";
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  Problems pr;
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  pr.keys(doc, "config", {"profile", "seed", "output_dir", "cache_dir", "languages", "tasks", "encoders",
                          "classifiers", "sizes", "stats", "profile_cell", "allow_shortfall"});
  if (!doc.is_object()) pr.raise();

  if (auto v = pr.get<std::string>(doc, "profile", "config")) cfg.profile = *v;
  if (cfg.profile != "multilingual" && cfg.profile != "en-stability")
    pr.add("config.profile: expected 'multilingual' or 'en-stability', got '" + cfg.profile + "'");
  const bool en = is_en_profile(cfg.profile);
  cfg.seed = pr.get<std::uint64_t>(doc, "seed", "config").value_or(0);
  cfg.output_dir = resolve(base_dir, pr.get<std::string>(doc, "output_dir", "config").value_or("out"));
  if (auto v = pr.get<std::string>(doc, "cache_dir", "config")) cfg.cache_dir = resolve(base_dir, *v);
  cfg.allow_shortfall = pr.get<bool>(doc, "allow_shortfall", "config").value_or(true);

  if (!doc.contains("languages") || !doc["languages"].is_object() || doc["languages"].empty()) {
    pr.add("config: 'languages' must be a non-empty object");
  } else {
    for (const auto& [code, j] : doc["languages"].items()) {
      LanguageConfig lang;
      parse_language(pr, code, j, base_dir, lang);
      cfg.languages.push_back(std::move(lang));
    }
  }

  if (!doc.contains("tasks") || !doc["tasks"].is_array() || doc["tasks"].empty()) {
    pr.add("config: 'tasks' must be a non-empty array");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc["tasks"].size(); ++i) {
      TaskConfig t;
      parse_task(pr, doc["tasks"][i], i, cfg.profile, t);
      if (!t.name.empty() && !seen.insert(t.name).second) pr.add("tasks: duplicate task '" + t.name + "'");
      cfg.tasks.push_back(std::move(t));
    }
  }

  if (!doc.contains("encoders") || !doc["encoders"].is_array() || doc["encoders"].empty()) {
    pr.add("config: 'encoders' must be a non-empty array");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc["encoders"].size(); ++i) {
      EncoderConfig e;
      parse_encoder(pr, doc["encoders"][i], i, e);
      if (!e.name.empty() && !seen.insert(e.name).second) pr.add("encoders: duplicate encoder '" + e.name + "'");
      if (e.name.find_first_of("/\\,") != std::string::npos) pr.add("encoders." + e.name + ": name contains '/', '\\' or ','");
      cfg.encoders.push_back(std::move(e));
    }
  }

  if (doc.contains("classifiers")) {
    if (!doc["classifiers"].is_array() || doc["classifiers"].empty()) {
      pr.add("config: 'classifiers' must be a non-empty array");
    } else {
      std::set<ProbeKind> seen;
      for (std::size_t i = 0; i < doc["classifiers"].size(); ++i) {
        ProbeSpec spec;
        parse_classifier(pr, doc["classifiers"][i], i, spec);
        if (!seen.insert(spec.kind).second) pr.add("classifiers: duplicate kind " + probe_kind_name(spec.kind));
        cfg.classifiers.push_back(std::move(spec));
      }
    }
  } else if (en) {
    for (const auto k : {ProbeKind::LR, ProbeKind::MLP, ProbeKind::NB, ProbeKind::RF})
      cfg.classifiers.push_back(ProbeSpec::defaults(k));
  } else {
    cfg.classifiers.push_back(ProbeSpec::defaults(ProbeKind::LR));
  }

  if (auto v = pr.get<std::vector<std::size_t>>(doc, "sizes", "config")) {
    cfg.sizes = *v;
  } else {
    cfg.sizes = en ? en_sizes : std::vector<std::size_t>{10000};
  }
  if (cfg.sizes.empty()) pr.add("config.sizes: must not be empty");
  for (const auto s : cfg.sizes) {
    if (s == 0) pr.add("config.sizes: sizes must be positive");
  }
  if (std::set<std::size_t>(cfg.sizes.begin(), cfg.sizes.end()).size() != cfg.sizes.size())
    pr.add("config.sizes: duplicate size");

  if (doc.contains("stats")) {
    const auto& s = doc["stats"];
    pr.keys(s, "stats", {"method", "p_max", "closeness", "zero_below_closeness", "threshold_support", "p_value"});
    if (auto v = pr.get<std::string>(s, "method", "stats")) {
      try {
        cfg.stats.method = parse_corr_method(*v);
      } catch (const Error& e) {
        pr.add(std::string("stats.method: ") + e.what());
      }
    }
    cfg.stats.p_max = pr.get<double>(s, "p_max", "stats").value_or(cfg.stats.p_max);
    cfg.stats.closeness = pr.get<double>(s, "closeness", "stats").value_or(cfg.stats.closeness);
    cfg.stats.zero_below_closeness =
        pr.get<bool>(s, "zero_below_closeness", "stats").value_or(cfg.stats.zero_below_closeness);
    cfg.stats.threshold_support = pr.get<bool>(s, "threshold_support", "stats").value_or(cfg.stats.threshold_support);
    if (auto v = pr.get<std::string>(s, "p_value", "stats")) {
      if (*v == "t") cfg.stats.p_method = PValueMethod::t_dist;
      else if (*v == "permutation") cfg.stats.p_method = PValueMethod::permutation;
      else pr.add("stats.p_value: expected 't' or 'permutation'");
    }
  }
  cfg.profile_cell.size = en ? 10000 : cfg.sizes.front();
  if (doc.contains("profile_cell")) {
    const auto& p = doc["profile_cell"];
    pr.keys(p, "profile_cell", {"classifier", "size"});
    cfg.profile_cell.classifier = pr.get<std::string>(p, "classifier", "profile_cell").value_or("LR");
    cfg.profile_cell.size = pr.get<std::size_t>(p, "size", "profile_cell").value_or(cfg.profile_cell.size);
  }

  // Cross-field checks and file existence.
  for (const auto& lang : cfg.languages) {
    const std::string where = "languages." + lang.code;
    if (!lang.corpus.empty()) check_exists(pr, lang.corpus, where + ".corpus");
    if (lang.lexicon) check_exists(pr, *lang.lexicon, where + ".lexicon");
    for (const auto& [name, p] : lang.vectors) check_exists(pr, p, where + ".vectors." + name);
    for (const auto& e : cfg.encoders) {
      if (e.kind != EncoderKind::file && !lang.vectors.contains(e.vectors))
        pr.add("encoders." + e.name + ": language " + lang.code + " has no vector store '" + e.vectors + "'");
    }
  }
  for (const auto& t : cfg.tasks) {
    const std::string where = "tasks." + t.name;
    for (const auto& code : t.languages) {
      if (std::none_of(cfg.languages.begin(), cfg.languages.end(), [&](const auto& l) { return l.code == code; }))
        pr.add(where + ".languages: unknown language '" + code + "'");
    }
    const bool file_backed = t.kind == TaskKind::tsv || t.downstream();
    if (file_backed && t.path.empty()) pr.add(where + ": needs 'path'");
    for (const auto& lang : cfg.languages) {
      if (!cfg.task_applies(t, lang.code)) continue;
      if (file_backed && !t.path.empty())
        check_exists(pr, resolve_template(cfg, t.path, lang.code, t.name), where + ".path");
      if (t.kind == TaskKind::sv_agree && !lang.lexicon)
        pr.add(where + ": language " + lang.code + " needs a 'lexicon' for sv_agree");
    }
    if (t.kind == TaskKind::am) {
      for (const auto& lang : cfg.languages) {
        if (cfg.task_applies(t, lang.code) && lang.vectors.empty())
          pr.add(where + ": language " + lang.code + " needs word vectors for topic encoding");
      }
    }
    if (t.protocol.kind == Protocol::Kind::fixed_splits && !file_backed) {
      const double sum = t.proportions.train + t.proportions.dev + t.proportions.test;
      if (sum <= 0.0 || t.proportions.dev <= 0.0 || t.proportions.test <= 0.0)
        pr.add(where + ".proportions: dev and test must be positive");
      if (t.dev_count && t.test_count && t.size > 0 && *t.dev_count + *t.test_count >= t.size)
        pr.add(where + ": dev + test leave no training instances");
    }
  }
  if (!pr.empty()) pr.raise();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, std::string("cannot read config: ") + e.what());
  }
  if (path.extension() == ".toml")
    throw Error(ErrorKind::config, path.string() + ": TOML is not supported by this build; use JSON");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, path.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

}  // namespace probekit
