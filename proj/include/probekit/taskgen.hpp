#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/corpus.hpp"

namespace probekit {

enum class Split { train, dev, test };

// SentEval tags: "tr", "va", "te".
std::string_view split_tag(Split split) noexcept;
std::optional<Split> parse_split_tag(std::string_view tag) noexcept;

struct ProbingInstance {
  Split split = Split::train;
  std::string label;
  std::string sentence;
  // Extra input column used by downstream adapters (argument mining topics).
  std::optional<std::string> topic;
  // Index into the generator's input sentences.
  std::optional<std::size_t> source;
  // For perturbing generators: the 0-based token position that was edited
  // (BigramShift: left element of the swapped pair).
  std::optional<int> edit_position;
};

struct ProbingDataset {
  std::string task;
  std::string language = "en";
  std::vector<std::string> labels;
  std::vector<ProbingInstance> instances;
  std::string balance;
  std::uint64_t rng_seed = 0;
  // Generator parameters and bookkeeping (bins, skip counts, target words).
  nlohmann::json params = nlohmann::json::object();

  std::size_t size() const noexcept { return instances.size(); }
  std::vector<std::size_t> class_counts() const;
  std::size_t label_index(const std::string& label) const;
  std::vector<std::size_t> label_indices() const;
  std::vector<std::size_t> indices_of(Split split) const;
  // Recomputes `balance` from the instances.
  void refresh_balance();
};

// Largest-to-smallest class ratio rounded to one decimal, e.g. "6:1", "1.1:1".
std::string format_balance(const std::vector<std::size_t>& counts);

struct GenOptions {
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::string language = "en";
};

ProbingDataset gen_bigram_shift(std::span<const Sentence> sentences, const GenOptions& opts);

struct LengthBin {
  int lo = 0;
  int hi = 0;
  std::string label() const { return std::to_string(lo) + "-" + std::to_string(hi); }
  bool contains(int len) const noexcept { return len >= lo && len <= hi; }
  bool operator==(const LengthBin&) const = default;
};

// Equal-frequency integer bins spanning [min, max] of `lengths`.
std::vector<LengthBin> fit_length_bins(std::vector<int> lengths, std::size_t bin_count = 6);

ProbingDataset gen_length(std::span<const Sentence> sentences, const GenOptions& opts,
                          std::optional<std::vector<LengthBin>> bins = std::nullopt);

struct WordContentOptions {
  std::size_t k = 1000;
  // 1-based inclusive frequency-rank window.
  std::size_t window_first = 2001;
  std::size_t window_last = 4000;
};

// Lowercased frequency ranking; ties broken lexicographically.
std::vector<std::pair<std::string, std::size_t>> frequency_ranking(std::span<const Sentence> sentences);

ProbingDataset gen_word_content(std::span<const Sentence> sentences, const WordContentOptions& wc,
                                const GenOptions& opts);

ProbingDataset gen_subj_number(std::span<const Sentence> sentences, const GenOptions& opts);

ProbingDataset gen_voice(std::span<const Sentence> sentences, const GenOptions& opts);

class ConjugationLexicon {
 public:
  // Lines "lemma<TAB>form form ..."; '#' comments and blank lines ignored.
  static ConjugationLexicon parse(std::istream& in);
  static ConjugationLexicon load(const std::filesystem::path& path);

  void add(std::string lemma, std::vector<std::string> forms);

  // Lemma index owning `form`, first registered wins.
  std::optional<std::size_t> lemma_of(const std::string& form) const;
  const std::string& lemma(std::size_t i) const { return entries_[i].first; }
  const std::vector<std::string>& forms(std::size_t i) const { return entries_[i].second; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
  std::map<std::string, std::size_t> by_form_;
};

ProbingDataset gen_sv_agree(std::span<const Sentence> sentences, const ConjugationLexicon& lexicon,
                            const GenOptions& opts);

// Bins [1], [2,4], [5,7], [8,12], [13,∞).
const std::vector<std::string>& sv_dist_labels();
std::string sv_dist_bin(int distance);

ProbingDataset gen_sv_dist(std::span<const Sentence> sentences, const GenOptions& opts);

ProbingDataset gen_tree_depth(std::span<const Sentence> sentences, const GenOptions& opts);

// SentEval-style TSV: split tag, label, sentence[, topic]. Throws LineError(format).
ProbingDataset read_dataset_tsv(std::istream& in, const std::string& task);
ProbingDataset import_senteval_tsv(const std::filesystem::path& path);

void write_dataset_tsv(std::ostream& out, const ProbingDataset& dataset);
std::string dataset_tsv_string(const ProbingDataset& dataset);
nlohmann::json dataset_metadata(const ProbingDataset& dataset);

// TSV plus "<path>.meta.json" sidecar.
void write_dataset(const ProbingDataset& dataset, const std::filesystem::path& tsv_path);
ProbingDataset read_dataset(const std::filesystem::path& tsv_path);

struct ClassRatio {
  std::size_t first = 1;
  std::size_t second = 1;
};
ClassRatio parse_ratio(std::string_view text);

// Proportional (largest remainder) downsampling, or resampling to an
// imbalance ratio between labels[0] and labels[1].
ProbingDataset rebalance(const ProbingDataset& dataset, std::size_t target_size,
                         std::optional<ClassRatio> ratio, std::uint64_t seed);

struct SplitProportions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

// Stratified fixed split; instance order is preserved, only tags change.
ProbingDataset assign_splits(const ProbingDataset& dataset, const SplitProportions& proportions,
                             std::uint64_t seed);

// k disjoint stratified folds of indices into `labels`.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::size_t>& labels,
                                                       std::size_t label_count, std::size_t k,
                                                       std::uint64_t seed);
std::vector<std::vector<std::size_t>> assign_kfold(const ProbingDataset& dataset, std::size_t k,
                                                   std::uint64_t seed);

// Drops repeated sentences; test copies win over dev, dev over train.
ProbingDataset deduplicate(const ProbingDataset& dataset);

}  // namespace probekit
