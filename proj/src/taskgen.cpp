#include "probekit/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "probekit/util.hpp"

namespace probekit {

std::string_view split_tag(Split split) noexcept {
  switch (split) {
    case Split::train: return "tr";
    case Split::dev: return "va";
    case Split::test: return "te";
  }
  return "tr";
}

std::optional<Split> parse_split_tag(std::string_view tag) noexcept {
  if (tag == "tr") return Split::train;
  if (tag == "va") return Split::dev;
  if (tag == "te") return Split::test;
  return std::nullopt;
}

std::vector<std::size_t> ProbingDataset::class_counts() const {
  std::vector<std::size_t> counts(labels.size(), 0);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  for (const auto& inst : instances) {
    const auto it = index.find(inst.label);
    if (it != index.end()) ++counts[it->second];
  }
  return counts;
}

std::size_t ProbingDataset::label_index(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::invalid_argument, "label '" + label + "' not in inventory of " + task);
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::size_t> ProbingDataset::label_indices() const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  std::vector<std::size_t> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto it = index.find(inst.label);
    if (it == index.end()) throw Error(ErrorKind::invalid_argument, "label '" + inst.label + "' not in inventory of " + task);
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::size_t> ProbingDataset::indices_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].split == split) out.push_back(i);
  }
  return out;
}

void ProbingDataset::refresh_balance() { balance = format_balance(class_counts()); }

std::string format_balance(const std::vector<std::size_t>& counts) {
  std::size_t hi = 0;
  std::size_t lo = SIZE_MAX;
  for (const auto c : counts) {
    if (c == 0) continue;
    hi = std::max(hi, c);
    lo = std::min(lo, c);
  }
  if (hi == 0) return "0:1";
  const double ratio = std::round(10.0 * static_cast<double>(hi) / static_cast<double>(lo)) / 10.0;
  char buf[32];
  if (std::fabs(ratio - std::round(ratio)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.0f:1", ratio);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f:1", ratio);
  }
  return buf;
}

namespace {

// Deduplicated candidate indices (first occurrence of each surface string).
template <typename Pred>
std::vector<std::size_t> unique_candidates(std::span<const Sentence> sentences, Pred&& eligible) {
  std::vector<std::size_t> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].tokens.empty() || !eligible(sentences[i])) continue;
    if (seen.insert(join_forms(sentences[i].forms())).second) out.push_back(i);
  }
  return out;
}

// Per-class counts as even as availability allows, summing to min(n, total).
std::vector<std::size_t> water_fill(const std::vector<std::size_t>& available, std::size_t n) {
  const std::size_t k = available.size();
  std::vector<std::size_t> take(k, 0);
  std::vector<bool> open(k, true);
  std::size_t remaining = std::min(n, std::accumulate(available.begin(), available.end(), std::size_t{0}));
  while (remaining > 0) {
    std::size_t active = 0;
    for (std::size_t c = 0; c < k; ++c) active += open[c] ? 1 : 0;
    if (active == 0) break;
    const std::size_t share = remaining / active;
    std::size_t extra = remaining % active;
    bool saturated = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (!open[c]) continue;
      const std::size_t capacity = available[c] - take[c];
      if (capacity <= share) {
        saturated = true;
        break;
      }
    }
    if (saturated) {
      // Classes that cannot absorb their share give all they have.
      for (std::size_t c = 0; c < k; ++c) {
        if (!open[c]) continue;
        const std::size_t capacity = available[c] - take[c];
        if (capacity <= share) {
          take[c] += capacity;
          remaining -= capacity;
          open[c] = false;
        }
      }
      continue;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (!open[c]) continue;
      std::size_t add = share;
      if (extra > 0) {
        ++add;
        --extra;
      }
      take[c] += add;
    }
    remaining = 0;
  }
  return take;
}

struct Pick {
  std::size_t sentence;
  std::size_t label;
};

// Samples toward 1:1 across classes, then interleaves the result.
std::vector<Pick> sample_balanced(std::vector<std::vector<std::size_t>> per_class, std::size_t n, Rng& rng) {
  std::vector<std::size_t> available;
  for (auto& members : per_class) {
    rng.shuffle(members);
    available.push_back(members.size());
  }
  const auto take = water_fill(available, n);
  std::vector<Pick> out;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < take[c]; ++i) out.push_back({per_class[c][i], c});
  }
  rng.shuffle(out);
  return out;
}

ProbingDataset make_dataset(const std::string& task, const GenOptions& opts, std::vector<std::string> labels) {
  ProbingDataset ds;
  ds.task = task;
  ds.language = opts.language;
  ds.labels = std::move(labels);
  ds.rng_seed = opts.seed;
  return ds;
}

// Drops labels that ended up without instances and records the balance.
void finalize(ProbingDataset& ds) {
  const auto counts = ds.class_counts();
  std::vector<std::string> kept;
  nlohmann::json dropped = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (counts[i] > 0) {
      kept.push_back(ds.labels[i]);
    } else {
      dropped.push_back(ds.labels[i]);
    }
  }
  if (!dropped.empty()) ds.params["empty_labels"] = dropped;
  ds.labels = std::move(kept);
  ds.refresh_balance();
}

void emit_balanced(ProbingDataset& ds, std::span<const Sentence> sentences,
                   std::vector<std::vector<std::size_t>> per_class, const GenOptions& opts, Rng& rng) {
  std::size_t total = 0;
  for (const auto& m : per_class) total += m.size();
  if (total < opts.n) throw ShortfallError(ds.task, opts.n, total);
  for (const auto& pick : sample_balanced(std::move(per_class), opts.n, rng)) {
    ProbingInstance inst;
    inst.label = ds.labels[pick.label];
    inst.sentence = join_forms(sentences[pick.sentence].forms());
    inst.source = pick.sentence;
    ds.instances.push_back(std::move(inst));
  }
  finalize(ds);
}

// Plan of n binary decisions with exactly n/2 set.
std::vector<bool> half_plan(std::size_t n, Rng& rng) {
  std::vector<bool> plan(n, false);
  for (std::size_t i = 0; i < n / 2; ++i) plan[i] = true;
  std::vector<std::size_t> order = rng.permutation(n);
  std::vector<bool> shuffled(n);
  for (std::size_t i = 0; i < n; ++i) shuffled[i] = plan[order[i]];
  return shuffled;
}

// Subject dependents of the root (nsubj / nsubj:pass).
std::vector<std::size_t> root_subjects(const Sentence& s) {
  std::vector<std::size_t> out;
  for (const auto d : s.dependents(s.root())) {
    const auto& rel = s.tokens[d - 1].deprel;
    if (rel && (*rel == "nsubj" || *rel == "nsubj:pass")) out.push_back(d);
  }
  return out;
}

void count_skip(ProbingDataset& ds, const std::string& reason) {
  auto& skipped = ds.params["skipped"];
  if (!skipped.is_object()) skipped = nlohmann::json::object();
  skipped[reason] = skipped.value(reason, 0) + 1;
}

}  // namespace

ProbingDataset gen_bigram_shift(std::span<const Sentence> sentences, const GenOptions& opts) {
  Rng rng(opts.seed);
  auto ds = make_dataset("bigram_shift", opts, {"True", "False"});
  auto cands = unique_candidates(sentences, [](const Sentence& s) { return s.tokens.size() >= 4; });
  rng.shuffle(cands);
  const auto plan = half_plan(opts.n, rng);

  std::unordered_set<std::string> emitted;
  std::size_t filled = 0;
  for (const auto idx : cands) {
    if (filled == opts.n) break;
    auto forms = sentences[idx].forms();
    ProbingInstance inst;
    inst.source = idx;
    if (plan[filled]) {
      std::vector<int> positions;
      for (std::size_t p = 0; p + 1 < forms.size(); ++p) {
        if (forms[p] != forms[p + 1]) positions.push_back(static_cast<int>(p));
      }
      if (positions.empty()) continue;
      const int p = positions[rng.below(positions.size())];
      std::swap(forms[static_cast<std::size_t>(p)], forms[static_cast<std::size_t>(p) + 1]);
      inst.label = "True";
      inst.edit_position = p;
    } else {
      inst.label = "False";
    }
    inst.sentence = join_forms(forms);
    if (!emitted.insert(inst.sentence).second) continue;
    ds.instances.push_back(std::move(inst));
    ++filled;
  }
  if (filled < opts.n) throw ShortfallError(ds.task, opts.n, cands.size());
  finalize(ds);
  return ds;
}

std::vector<LengthBin> fit_length_bins(std::vector<int> lengths, std::size_t bin_count) {
  std::sort(lengths.begin(), lengths.end());
  std::vector<int> distinct = lengths;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (bin_count == 0 || distinct.size() < bin_count)
    throw Error(ErrorKind::config, "length distribution has " + std::to_string(distinct.size()) +
                                       " distinct values, fewer than " + std::to_string(bin_count) +
                                       " bins; supply explicit bin edges");
  const std::size_t n = lengths.size();
  std::vector<LengthBin> bins;
  std::ptrdiff_t prev = -1;  // index into `distinct` of the previous upper edge
  for (std::size_t b = 1; b < bin_count; ++b) {
    const std::size_t pos = (b * n + bin_count - 1) / bin_count - 1;
    auto at = static_cast<std::ptrdiff_t>(std::lower_bound(distinct.begin(), distinct.end(), lengths[pos]) -
                                          distinct.begin());
    const auto max_at = static_cast<std::ptrdiff_t>(distinct.size() - 1 - (bin_count - b));
    at = std::clamp(at, prev + 1, max_at);
    const int lo = prev < 0 ? distinct.front() : distinct[static_cast<std::size_t>(prev)] + 1;
    bins.push_back({lo, distinct[static_cast<std::size_t>(at)]});
    prev = at;
  }
  bins.push_back({distinct[static_cast<std::size_t>(prev)] + 1, distinct.back()});
  return bins;
}

ProbingDataset gen_length(std::span<const Sentence> sentences, const GenOptions& opts,
                          std::optional<std::vector<LengthBin>> bins) {
  Rng rng(opts.seed);
  auto cands = unique_candidates(sentences, [](const Sentence&) { return true; });
  const bool fitted = !bins.has_value();
  if (fitted) {
    std::vector<int> lengths;
    lengths.reserve(cands.size());
    for (const auto i : cands) lengths.push_back(static_cast<int>(sentences[i].tokens.size()));
    bins = fit_length_bins(std::move(lengths));
  }
  std::vector<std::string> labels;
  for (const auto& b : *bins) labels.push_back(b.label());
  auto ds = make_dataset("length", opts, labels);
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& b : *bins) jb.push_back({b.lo, b.hi});
  ds.params["bins"] = jb;
  ds.params["bins_fitted"] = fitted;

  std::vector<std::pair<std::size_t, std::size_t>> labelled;
  for (const auto i : cands) {
    const int len = static_cast<int>(sentences[i].tokens.size());
    for (std::size_t b = 0; b < bins->size(); ++b) {
      if ((*bins)[b].contains(len)) {
        labelled.emplace_back(i, b);
        break;
      }
    }
  }
  if (labelled.size() < opts.n) throw ShortfallError(ds.task, opts.n, labelled.size());
  rng.shuffle(labelled);
  for (std::size_t j = 0; j < opts.n; ++j) {
    ProbingInstance inst;
    inst.label = labels[labelled[j].second];
    inst.sentence = join_forms(sentences[labelled[j].first].forms());
    inst.source = labelled[j].first;
    ds.instances.push_back(std::move(inst));
  }
  finalize(ds);
  return ds;
}

std::vector<std::pair<std::string, std::size_t>> frequency_ranking(std::span<const Sentence> sentences) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++counts[ascii_lower(t.form)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranking(counts.begin(), counts.end());
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranking;
}

ProbingDataset gen_word_content(std::span<const Sentence> sentences, const WordContentOptions& wc,
                                const GenOptions& opts) {
  if (wc.k == 0 || wc.window_first == 0 || wc.window_last < wc.window_first ||
      wc.window_last - wc.window_first + 1 < wc.k)
    throw Error(ErrorKind::config, "word-content window [" + std::to_string(wc.window_first) + ", " +
                                       std::to_string(wc.window_last) + "] cannot hold " +
                                       std::to_string(wc.k) + " target words");
  const auto ranking = frequency_ranking(sentences);
  if (ranking.size() < wc.window_first + wc.k - 1)
    throw Error(ErrorKind::config, "vocabulary has only " + std::to_string(ranking.size()) +
                                       " ranked words; word-content window starting at rank " +
                                       std::to_string(wc.window_first) + " needs " + std::to_string(wc.k));
  std::vector<std::string> targets;
  std::unordered_map<std::string, std::size_t> target_index;
  for (std::size_t r = wc.window_first - 1; r < wc.window_first - 1 + wc.k; ++r) {
    target_index.emplace(ranking[r].first, targets.size());
    targets.push_back(ranking[r].first);
  }
  Rng rng(opts.seed);
  auto ds = make_dataset("word_content", opts, targets);
  ds.params["k"] = wc.k;
  ds.params["window"] = {wc.window_first, wc.window_last};

  std::vector<std::vector<std::size_t>> per_class(targets.size());
  const auto cands = unique_candidates(sentences, [](const Sentence&) { return true; });
  for (const auto i : cands) {
    std::size_t hits = 0;
    std::size_t cls = 0;
    for (const auto& t : sentences[i].tokens) {
      const auto it = target_index.find(ascii_lower(t.form));
      if (it != target_index.end()) {
        ++hits;
        cls = it->second;
      }
    }
    if (hits == 1) per_class[cls].push_back(i);
  }
  emit_balanced(ds, sentences, std::move(per_class), opts, rng);
  return ds;
}

ProbingDataset gen_subj_number(std::span<const Sentence> sentences, const GenOptions& opts) {
  Rng rng(opts.seed);
  auto ds = make_dataset("subj_number", opts, {"Singular", "Plural"});
  std::vector<std::vector<std::size_t>> per_class(2);
  for (const auto i : unique_candidates(sentences, [](const Sentence&) { return true; })) {
    const auto& s = sentences[i];
    if (s.tree_status() != TreeStatus::ok) {
      count_skip(ds, "invalid_tree");
      continue;
    }
    const auto subjects = root_subjects(s);
    if (subjects.size() != 1) continue;
    const auto number = s.tokens[subjects[0] - 1].feat("Number");
    if (number == "Sing") {
      per_class[0].push_back(i);
    } else if (number == "Plur") {
      per_class[1].push_back(i);
    }
  }
  emit_balanced(ds, sentences, std::move(per_class), opts, rng);
  return ds;
}

ProbingDataset gen_voice(std::span<const Sentence> sentences, const GenOptions& opts) {
  Rng rng(opts.seed);
  auto ds = make_dataset("voice", opts, {"True", "False"});
  std::vector<std::vector<std::size_t>> per_class(2);
  for (const auto i : unique_candidates(sentences, [](const Sentence&) { return true; })) {
    bool passive = false;
    for (const auto& t : sentences[i].tokens) {
      if (t.feat("Voice") == "Pass" ||
          (t.deprel && (*t.deprel == "aux:pass" || *t.deprel == "nsubj:pass" || *t.deprel == "csubj:pass"))) {
        passive = true;
        break;
      }
    }
    per_class[passive ? 0 : 1].push_back(i);
  }
  emit_balanced(ds, sentences, std::move(per_class), opts, rng);
  return ds;
}

ConjugationLexicon ConjugationLexicon::parse(std::istream& in) {
  ConjugationLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (find_invalid_utf8(line) != std::string::npos) throw LineError(ErrorKind::decode, line_no, "invalid UTF-8");
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos)
      throw LineError(ErrorKind::format, line_no, "expected 'lemma<TAB>forms'");
    auto forms = split_whitespace(body.substr(tab + 1));
    if (forms.empty()) throw LineError(ErrorKind::format, line_no, "lemma without forms");
    lex.add(std::string(trim(body.substr(0, tab))), std::move(forms));
  }
  return lex;
}

ConjugationLexicon ConjugationLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open lexicon " + path.string());
  return parse(in);
}

void ConjugationLexicon::add(std::string lemma, std::vector<std::string> forms) {
  std::vector<std::string> unique;
  for (auto& f : forms) {
    if (std::find(unique.begin(), unique.end(), f) == unique.end()) unique.push_back(std::move(f));
  }
  const std::size_t idx = entries_.size();
  for (const auto& f : unique) by_form_.emplace(f, idx);
  entries_.emplace_back(std::move(lemma), std::move(unique));
}

std::optional<std::size_t> ConjugationLexicon::lemma_of(const std::string& form) const {
  const auto it = by_form_.find(form);
  if (it == by_form_.end()) return std::nullopt;
  return it->second;
}

ProbingDataset gen_sv_agree(std::span<const Sentence> sentences, const ConjugationLexicon& lexicon,
                            const GenOptions& opts) {
  Rng rng(opts.seed);
  auto ds = make_dataset("sv_agree", opts, {"Agree", "Disagree"});
  auto cands = unique_candidates(sentences, [&](const Sentence& s) {
    for (const auto& t : s.tokens) {
      if (lexicon.lemma_of(t.form)) return true;
    }
    return false;
  });
  rng.shuffle(cands);
  const auto plan = half_plan(opts.n, rng);

  std::unordered_set<std::string> emitted;
  std::size_t filled = 0;
  for (const auto idx : cands) {
    if (filled == opts.n) break;
    auto forms = sentences[idx].forms();
    ProbingInstance inst;
    inst.source = idx;
    if (plan[filled]) {
      std::size_t pos = 0;
      while (!lexicon.lemma_of(forms[pos])) ++pos;
      const auto lemma = *lexicon.lemma_of(forms[pos]);
      std::vector<std::string> others;
      for (const auto& f : lexicon.forms(lemma)) {
        if (f != forms[pos]) others.push_back(f);
      }
      if (others.empty()) {
        count_skip(ds, "single_form_lemma");
        continue;
      }
      forms[pos] = others[rng.below(others.size())];
      inst.label = "Disagree";
      inst.edit_position = static_cast<int>(pos);
    } else {
      inst.label = "Agree";
    }
    inst.sentence = join_forms(forms);
    if (!emitted.insert(inst.sentence).second) continue;
    ds.instances.push_back(std::move(inst));
    ++filled;
  }
  if (filled < opts.n) throw ShortfallError(ds.task, opts.n, cands.size());
  finalize(ds);
  return ds;
}

const std::vector<std::string>& sv_dist_labels() {
  static const std::vector<std::string> labels{"[1]", "[2,4]", "[5,7]", "[8,12]", "[13,∞)"};
  return labels;
}

std::string sv_dist_bin(int distance) {
  const auto& l = sv_dist_labels();
  if (distance <= 1) return l[0];
  if (distance <= 4) return l[1];
  if (distance <= 7) return l[2];
  if (distance <= 12) return l[3];
  return l[4];
}

ProbingDataset gen_sv_dist(std::span<const Sentence> sentences, const GenOptions& opts) {
  Rng rng(opts.seed);
  const auto& labels = sv_dist_labels();
  auto ds = make_dataset("sv_dist", opts, labels);
  std::vector<std::vector<std::size_t>> per_class(labels.size());
  for (const auto i : unique_candidates(sentences, [](const Sentence&) { return true; })) {
    const auto& s = sentences[i];
    if (s.tree_status() != TreeStatus::ok) {
      count_skip(ds, "invalid_tree");
      continue;
    }
    const auto root = s.root();
    if (s.tokens[root - 1].upos != "VERB") continue;
    const auto subjects = root_subjects(s);
    if (subjects.size() != 1) continue;
    const int distance = std::abs(static_cast<int>(subjects[0]) - static_cast<int>(root));
    per_class[ds.label_index(sv_dist_bin(distance))].push_back(i);
  }
  emit_balanced(ds, sentences, std::move(per_class), opts, rng);
  return ds;
}

ProbingDataset gen_tree_depth(std::span<const Sentence> sentences, const GenOptions& opts) {
  Rng rng(opts.seed);
  std::map<int, std::vector<std::size_t>> by_depth;
  std::size_t invalid = 0;
  for (const auto i : unique_candidates(sentences, [](const Sentence&) { return true; })) {
    if (sentences[i].tree_status() != TreeStatus::ok) {
      ++invalid;
      continue;
    }
    by_depth[sentences[i].depth()].push_back(i);
  }
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> per_class;
  for (auto& [depth, members] : by_depth) {
    labels.push_back(std::to_string(depth));
    per_class.push_back(std::move(members));
  }
  auto ds = make_dataset("tree_depth", opts, labels);
  if (invalid) ds.params["skipped"] = {{"invalid_tree", invalid}};
  emit_balanced(ds, sentences, std::move(per_class), opts, rng);
  return ds;
}

ProbingDataset read_dataset_tsv(std::istream& in, const std::string& task) {
  ProbingDataset ds;
  ds.task = task;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (find_invalid_utf8(line) != std::string::npos) throw LineError(ErrorKind::decode, line_no, "invalid UTF-8");
    const auto cols = split(line, '\t');
    if (cols.size() != 3 && cols.size() != 4)
      throw LineError(ErrorKind::format, line_no, "expected 3 or 4 tab-separated columns, found " +
                                                      std::to_string(cols.size()));
    const auto split = parse_split_tag(cols[0]);
    if (!split) throw LineError(ErrorKind::format, line_no, "unknown split tag '" + cols[0] + "'");
    if (cols[1].empty()) throw LineError(ErrorKind::format, line_no, "empty label");
    if (trim(cols[2]).empty()) throw LineError(ErrorKind::format, line_no, "empty sentence");
    ProbingInstance inst;
    inst.split = *split;
    inst.label = cols[1];
    inst.sentence = cols[2];
    if (cols.size() == 4) inst.topic = cols[3];
    if (std::find(ds.labels.begin(), ds.labels.end(), inst.label) == ds.labels.end()) ds.labels.push_back(inst.label);
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) throw Error(ErrorKind::format, "dataset '" + task + "' is empty");
  ds.refresh_balance();
  return ds;
}

ProbingDataset import_senteval_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_dataset_tsv(in, path.stem().string());
}

namespace {
void check_cell(const std::string& s, const char* what) {
  if (s.find_first_of("\t\n\r") != std::string::npos)
    throw Error(ErrorKind::format, std::string(what) + " contains a tab or newline: " + s);
}
}  // namespace

void write_dataset_tsv(std::ostream& out, const ProbingDataset& dataset) {
  for (const auto& inst : dataset.instances) {
    check_cell(inst.label, "label");
    check_cell(inst.sentence, "sentence");
    out << split_tag(inst.split) << '\t' << inst.label << '\t' << inst.sentence;
    if (inst.topic) {
      check_cell(*inst.topic, "topic");
      out << '\t' << *inst.topic;
    }
    out << '\n';
  }
}

std::string dataset_tsv_string(const ProbingDataset& dataset) {
  std::ostringstream ss;
  write_dataset_tsv(ss, dataset);
  return ss.str();
}

nlohmann::json dataset_metadata(const ProbingDataset& dataset) {
  return {{"task", dataset.task},           {"language", dataset.language},
          {"labels", dataset.labels},       {"balance", dataset.balance},
          {"seed", dataset.rng_seed},       {"instances", dataset.instances.size()},
          {"params", dataset.params},       {"format", "senteval-tsv"}};
}

void write_dataset(const ProbingDataset& dataset, const std::filesystem::path& tsv_path) {
  write_file_atomic(tsv_path, dataset_tsv_string(dataset));
  auto meta = tsv_path;
  meta += ".meta.json";
  write_file_atomic(meta, dataset_metadata(dataset).dump(2) + "\n");
}

ProbingDataset read_dataset(const std::filesystem::path& tsv_path) {
  auto ds = import_senteval_tsv(tsv_path);
  auto meta_path = tsv_path;
  meta_path += ".meta.json";
  if (!std::filesystem::exists(meta_path)) return ds;
  const auto meta = nlohmann::json::parse(read_file(meta_path));
  ds.task = meta.value("task", ds.task);
  ds.language = meta.value("language", ds.language);
  ds.rng_seed = meta.value("seed", std::uint64_t{0});
  ds.params = meta.value("params", nlohmann::json::object());
  if (meta.contains("labels")) {
    auto labels = meta["labels"].get<std::vector<std::string>>();
    for (const auto& l : ds.labels) {
      if (std::find(labels.begin(), labels.end(), l) == labels.end())
        throw Error(ErrorKind::format, tsv_path.string() + ": label '" + l + "' missing from metadata");
    }
    ds.labels = std::move(labels);
  }
  ds.refresh_balance();
  return ds;
}

ClassRatio parse_ratio(std::string_view text) {
  const auto colon = text.find(':');
  auto parse_part = [&](std::string_view part) -> std::size_t {
    part = trim(part);
    std::size_t v = 0;
    if (part.empty()) throw Error(ErrorKind::invalid_argument, "malformed ratio '" + std::string(text) + "'");
    for (const char c : part) {
      if (c < '0' || c > '9') throw Error(ErrorKind::invalid_argument, "malformed ratio '" + std::string(text) + "'");
      v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    if (v == 0) throw Error(ErrorKind::invalid_argument, "ratio parts must be positive: '" + std::string(text) + "'");
    return v;
  };
  if (colon == std::string_view::npos) throw Error(ErrorKind::invalid_argument, "malformed ratio '" + std::string(text) + "'");
  return {parse_part(text.substr(0, colon)), parse_part(text.substr(colon + 1))};
}

namespace {

// Largest-remainder apportionment of `total` by `weights`; ties go to the lower index.
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum <= 0.0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total && j < remainders.size(); ++j, ++assigned) ++out[remainders[j].second];
  return out;
}

std::vector<std::vector<std::size_t>> members_by_class(const ProbingDataset& ds) {
  std::vector<std::vector<std::size_t>> members(ds.labels.size());
  const auto labels = ds.label_indices();
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  return members;
}

}  // namespace

ProbingDataset rebalance(const ProbingDataset& dataset, std::size_t target_size, std::optional<ClassRatio> ratio,
                         std::uint64_t seed) {
  if (target_size > dataset.size())
    throw Error(ErrorKind::invalid_argument, dataset.task + ": cannot downsample " + std::to_string(dataset.size()) +
                                                 " instances to " + std::to_string(target_size));
  Rng rng(seed);
  const auto members = members_by_class(dataset);
  std::vector<std::size_t> quota;
  if (!ratio) {
    std::vector<double> weights;
    for (const auto& m : members) weights.push_back(static_cast<double>(m.size()));
    quota = apportion(weights, target_size);
    // Keep every label represented when the target allows it.
    if (target_size >= members.size()) {
      for (std::size_t c = 0; c < quota.size(); ++c) {
        if (quota[c] > 0 || members[c].empty()) continue;
        const auto donor = static_cast<std::size_t>(std::max_element(quota.begin(), quota.end()) - quota.begin());
        --quota[donor];
        quota[c] = 1;
      }
    }
  } else {
    if (dataset.labels.size() != 2)
      throw Error(ErrorKind::invalid_argument, dataset.task + ": ratio rebalancing needs a binary dataset");
    const std::size_t a = ratio->first;
    const std::size_t b = ratio->second;
    const std::size_t by_data = std::min(members[0].size() / a, members[1].size() / b);
    const std::size_t unit = std::min(by_data, target_size / (a + b));
    if (unit == 0)
      throw Error(ErrorKind::invalid_argument,
                  dataset.task + ": ratio " + std::to_string(a) + ":" + std::to_string(b) +
                      " unattainable at size " + std::to_string(target_size) + "; maximum attainable size is " +
                      std::to_string(by_data * (a + b)));
    quota = {a * unit, b * unit};
  }
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto m = members[c];
    rng.shuffle(m);
    chosen.insert(chosen.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  ProbingDataset out = dataset;
  out.instances.clear();
  for (const auto i : chosen) out.instances.push_back(dataset.instances[i]);
  out.refresh_balance();
  out.params["rebalanced_from"] = dataset.size();
  if (ratio) out.params["ratio"] = std::to_string(ratio->first) + ":" + std::to_string(ratio->second);
  return out;
}

ProbingDataset assign_splits(const ProbingDataset& dataset, const SplitProportions& p, std::uint64_t seed) {
  if (p.train < 0 || p.dev < 0 || p.test < 0 || p.train + p.dev + p.test <= 0)
    throw Error(ErrorKind::invalid_argument, "split proportions must be non-negative with a positive sum");
  Rng rng(seed);
  ProbingDataset out = dataset;
  for (auto m : members_by_class(dataset)) {
    rng.shuffle(m);
    const auto counts = apportion({p.train, p.dev, p.test}, m.size());
    std::size_t j = 0;
    const Split order[] = {Split::train, Split::dev, Split::test};
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t c = 0; c < counts[s]; ++c) out.instances[m[j++]].split = order[s];
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::size_t>& labels, std::size_t label_count,
                                                       std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::invalid_argument, "k-fold needs k >= 2");
  std::vector<std::vector<std::size_t>> members(label_count);
  for (std::size_t i = 0; i < labels.size(); ++i) members.at(labels[i]).push_back(i);
  for (std::size_t c = 0; c < label_count; ++c) {
    if (!members[c].empty() && members[c].size() < k)
      throw Error(ErrorKind::invalid_argument, "cannot stratify into " + std::to_string(k) + " folds: class " +
                                                   std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                                   " instances");
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;
  for (auto& m : members) {
    rng.shuffle(m);
    for (const auto i : m) folds[next++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::vector<std::size_t>> assign_kfold(const ProbingDataset& dataset, std::size_t k, std::uint64_t seed) {
  return stratified_kfold(dataset.label_indices(), dataset.labels.size(), k, seed);
}

ProbingDataset deduplicate(const ProbingDataset& dataset) {
  std::unordered_set<std::string> seen;
  std::vector<bool> keep(dataset.size(), false);
  for (const Split s : {Split::test, Split::dev, Split::train}) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& inst = dataset.instances[i];
      if (inst.split != s) continue;
      keep[i] = seen.insert(inst.sentence + '\t' + inst.topic.value_or("")).second;
    }
  }
  ProbingDataset out = dataset;
  out.instances.clear();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (keep[i]) out.instances.push_back(dataset.instances[i]);
  }
  const auto removed = dataset.size() - out.size();
  if (removed) out.params["duplicates_removed"] = removed;
  out.refresh_balance();
  return out;
}

}  // namespace probekit
