#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace probekit {

enum class CorrMethod { pearson, spearman };
std::string corr_method_name(CorrMethod method);
CorrMethod parse_corr_method(const std::string& name);

// How the Spearman p-value is obtained. `permutation` enumerates all n!
// orderings of y and is limited to n <= 10.
enum class PValueMethod { t_dist, permutation };

struct Correlation {
  double r = 0.0;
  double p = 1.0;
};

// Average ranks (1-based, ascending); ties share the mean rank.
std::vector<double> average_ranks(std::span<const double> x);

// Encoder ranking of a score vector: rank 1 = highest score, ties averaged.
std::vector<double> ranking_from_scores(std::span<const double> scores);

double pearson_r(std::span<const double> x, std::span<const double> y);

// Two-sided p for correlation r over n points via Student's t (n-2 dof).
double correlation_p_value(double r, std::size_t n);

Correlation correlate(std::span<const double> x, std::span<const double> y, CorrMethod method,
                      PValueMethod p_method = PValueMethod::t_dist);

// r if p <= p_max, else 0.
double corr_thresholded(std::span<const double> x, std::span<const double> y, CorrMethod method,
                        double p_max = 0.2, PValueMethod p_method = PValueMethod::t_dist);

struct GridKey {
  std::string language;
  std::string task;
  std::string encoder;
  std::string classifier;
  std::size_t size = 0;

  auto tie() const { return std::tie(language, task, encoder, classifier, size); }
  bool operator<(const GridKey& o) const { return tie() < o.tie(); }
  bool operator==(const GridKey& o) const { return tie() == o.tie(); }
  std::string str() const;
};

class ScoreGrid {
 public:
  std::vector<std::string> languages;
  std::vector<std::string> tasks;
  std::vector<std::string> encoders;
  std::vector<std::string> classifiers;
  std::vector<std::size_t> sizes;
  // Tasks evaluated as downstream applications; excluded from stability analyses.
  std::set<std::string> downstream_tasks;

  // Throws invalid_argument for a duplicate key or an axis value outside the inventory.
  void insert(const GridKey& key, double score);
  // Inserts after appending any unseen axis values.
  void insert_extending(const GridKey& key, double score);

  std::optional<double> find(const GridKey& key) const;
  bool contains(const GridKey& key) const { return entries_.contains(key); }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  const std::map<GridKey, double>& entries() const noexcept { return entries_; }

  std::vector<std::string> probing_tasks() const;
  // Probing tasks with every encoder present at every (classifier, size) for `language`.
  std::vector<std::string> covered_probing_tasks(const std::string& language) const;

  // Scores of all encoders in axis order. Missing cells are appended to `missing`
  // when provided, otherwise a coverage error is thrown.
  std::vector<double> encoder_vector(const std::string& language, const std::string& task,
                                     const std::string& classifier, std::size_t size,
                                     std::vector<GridKey>* missing = nullptr) const;

 private:
  std::map<GridKey, double> entries_;
};

// Throws Error(coverage) listing the keys.
[[noreturn]] void throw_missing(const std::vector<GridKey>& missing);

struct StatsOptions {
  CorrMethod method = CorrMethod::spearman;
  double p_max = 0.2;
  PValueMethod p_method = PValueMethod::t_dist;
  double closeness = 0.75;
  // Tasks below closeness add 0 to mu; when false they add their raw correlation.
  bool zero_below_closeness = true;
  // Ranking support averages raw Spearman by default; true applies the p threshold.
  bool threshold_support = false;
};

double sim_size(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                std::size_t s, std::size_t t, const StatsOptions& opts = {});
double size_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                      std::size_t s, const StatsOptions& opts = {});
double sim_cross(const ScoreGrid& grid, const std::string& language, const std::string& c, const std::string& d,
                 std::size_t s, std::size_t t, const StatsOptions& opts = {});

struct MinAvg {
  double min = 0.0;
  double avg = 0.0;
};
MinAvg pair_minavg(std::span<const double> values);

struct RankingSupport {
  // Encoder indices from best to worst.
  std::vector<std::size_t> order;
  // Rank of each encoder (1 = best) under `order`.
  std::vector<double> ranks;
  double support = 0.0;
};

// Exhaustive search over encoder permutations in lexicographic order of `order`;
// the first permutation reaching the maximum support wins.
RankingSupport ranking_support(const ScoreGrid& grid, const std::string& language, const std::string& task,
                               const StatsOptions& opts = {});

double mu_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                    std::size_t size, const std::map<std::string, RankingSupport>& r_max,
                    const StatsOptions& opts = {});
double mu_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                    std::size_t size, const StatsOptions& opts = {});

struct MuEntry {
  std::string classifier;
  std::size_t size = 0;
  double mu = 0.0;
};

struct Matrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  // Row-major, row_labels.size() x col_labels.size().
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * col_labels.size() + c]; }
};

struct StabilityReport {
  std::string language;
  std::vector<std::string> tasks;
  // classifier -> sizes x sizes
  std::map<std::string, Matrix> sim_size;
  // classifier -> value per size (axis order)
  std::map<std::string, std::vector<double>> size_stability;
  // classifier -> min/avg over s < t of sim_size
  std::map<std::string, MinAvg> size_minavg;
  // rows/cols classifiers, min and avg over all (s, t) of sim_cross
  Matrix cross_min;
  Matrix cross_avg;
  // Sorted by mu descending; ties in axis order.
  std::vector<MuEntry> mu;
  std::map<std::string, RankingSupport> r_max;
};

StabilityReport stability_report(const ScoreGrid& grid, const std::string& language, const StatsOptions& opts = {});

enum class ProfileMode { encoder, task, probing_vs_downstream };

struct ProfileOptions {
  std::string classifier = "LR";
  std::size_t size = 10000;
};

// encoder: rows encoders, cols language pairs "a-b", correlating task-score vectors.
// task: rows probing tasks, cols language pairs, correlating encoder vectors.
// probing_vs_downstream: rows probing tasks, cols downstream tasks of `language`.
// Entries whose inputs are not covered by the grid are NaN.
Matrix profile_correlation(const ScoreGrid& grid, ProfileMode mode, const ProfileOptions& where,
                           const StatsOptions& opts = {}, const std::string& language = "");

}  // namespace probekit
