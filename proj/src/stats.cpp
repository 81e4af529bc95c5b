#include "probekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "probekit/error.hpp"

namespace probekit {

std::string corr_method_name(CorrMethod method) {
  return method == CorrMethod::pearson ? "pearson" : "spearman";
}

CorrMethod parse_corr_method(const std::string& name) {
  if (name == "pearson") return CorrMethod::pearson;
  if (name == "spearman") return CorrMethod::spearman;
  throw Error(ErrorKind::invalid_argument, "unknown correlation method '" + name + "'");
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::vector<double> ranking_from_scores(std::span<const double> scores) {
  std::vector<double> neg(scores.begin(), scores.end());
  for (auto& v : neg) v = -v;
  return average_ranks(neg);
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw Error(ErrorKind::invalid_argument, "p-value needs at least 3 points");
  if (std::abs(r) >= 1.0) return 0.0;
  if (r == 0.0) return 1.0;
  const double dof = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::invalid_argument, "correlation inputs differ in length (" + std::to_string(x.size()) +
                                                 " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 3) throw Error(ErrorKind::invalid_argument, "correlation needs at least 3 points");
}

double permutation_p(std::span<const double> rx, std::span<const double> ry, double r_obs) {
  if (rx.size() > 10) throw Error(ErrorKind::invalid_argument, "permutation p-value limited to n <= 10");
  std::vector<std::size_t> perm(ry.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> shuffled(ry.size());
  std::size_t hits = 0;
  std::size_t total = 0;
  const double target = std::abs(r_obs) - 1e-12;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = ry[perm[i]];
    if (std::abs(pearson_r(rx, shuffled)) >= target) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

Correlation correlate(std::span<const double> x, std::span<const double> y, CorrMethod method,
                      PValueMethod p_method) {
  check_pair(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw Error(ErrorKind::invalid_argument, "correlation inputs must be finite");
  }
  Correlation c;
  if (method == CorrMethod::pearson) {
    c.r = pearson_r(x, y);
    c.p = c.r == 0.0 ? 1.0 : correlation_p_value(c.r, x.size());
    return c;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  c.r = pearson_r(rx, ry);
  if (c.r == 0.0) {
    c.p = 1.0;
  } else if (p_method == PValueMethod::permutation) {
    c.p = permutation_p(rx, ry, c.r);
  } else {
    c.p = correlation_p_value(c.r, x.size());
  }
  return c;
}

double corr_thresholded(std::span<const double> x, std::span<const double> y, CorrMethod method, double p_max,
                        PValueMethod p_method) {
  const auto c = correlate(x, y, method, p_method);
  return c.p <= p_max ? c.r : 0.0;
}

std::string GridKey::str() const {
  return language + "/" + task + "/" + encoder + "/" + classifier + "/" + std::to_string(size);
}

namespace {

template <class T>
bool has(const std::vector<T>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

template <class T>
void extend(std::vector<T>& v, const T& x) {
  if (!has(v, x)) v.push_back(x);
}

}  // namespace

void ScoreGrid::insert(const GridKey& key, double score) {
  std::string bad;
  if (!has(languages, key.language)) bad = "language '" + key.language + "'";
  else if (!has(tasks, key.task)) bad = "task '" + key.task + "'";
  else if (!has(encoders, key.encoder)) bad = "encoder '" + key.encoder + "'";
  else if (!has(classifiers, key.classifier)) bad = "classifier '" + key.classifier + "'";
  else if (!has(sizes, key.size)) bad = "size " + std::to_string(key.size);
  if (!bad.empty()) throw Error(ErrorKind::invalid_argument, "grid key " + key.str() + ": " + bad + " not in axes");
  if (!std::isfinite(score)) throw Error(ErrorKind::invalid_argument, "grid key " + key.str() + ": non-finite score");
  if (!entries_.emplace(key, score).second)
    throw Error(ErrorKind::invalid_argument, "duplicate grid key " + key.str());
}

void ScoreGrid::insert_extending(const GridKey& key, double score) {
  extend(languages, key.language);
  extend(tasks, key.task);
  extend(encoders, key.encoder);
  extend(classifiers, key.classifier);
  extend(sizes, key.size);
  insert(key, score);
}

std::optional<double> ScoreGrid::find(const GridKey& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> ScoreGrid::probing_tasks() const {
  std::vector<std::string> out;
  for (const auto& t : tasks) {
    if (!downstream_tasks.contains(t)) out.push_back(t);
  }
  return out;
}

std::vector<std::string> ScoreGrid::covered_probing_tasks(const std::string& language) const {
  std::vector<std::string> out;
  for (const auto& t : probing_tasks()) {
    bool ok = true;
    for (const auto& c : classifiers) {
      for (const auto s : sizes) {
        for (const auto& e : encoders) ok = ok && contains({language, t, e, c, s});
      }
    }
    if (ok) out.push_back(t);
  }
  return out;
}

std::vector<double> ScoreGrid::encoder_vector(const std::string& language, const std::string& task,
                                              const std::string& classifier, std::size_t size,
                                              std::vector<GridKey>* missing) const {
  std::vector<double> out;
  std::vector<GridKey> absent;
  out.reserve(encoders.size());
  for (const auto& e : encoders) {
    GridKey key{language, task, e, classifier, size};
    const auto v = find(key);
    if (v) {
      out.push_back(*v);
    } else {
      out.push_back(0.0);
      absent.push_back(std::move(key));
    }
  }
  if (!absent.empty()) {
    if (!missing) throw_missing(absent);
    missing->insert(missing->end(), absent.begin(), absent.end());
  }
  return out;
}

void throw_missing(const std::vector<GridKey>& missing) {
  std::string msg = "missing grid cells (" + std::to_string(missing.size()) + "):";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i].str();
  if (shown < missing.size()) msg += " ... and " + std::to_string(missing.size() - shown) + " more";
  throw Error(ErrorKind::coverage, msg);
}

namespace {

std::vector<std::string> require_tasks(const ScoreGrid& grid) {
  auto tasks = grid.probing_tasks();
  if (tasks.empty()) throw Error(ErrorKind::coverage, "grid has no probing tasks");
  return tasks;
}

double mean_thresholded_over_tasks(const ScoreGrid& grid, const std::string& language, const std::string& c,
                                   std::size_t s, const std::string& d, std::size_t t, const StatsOptions& opts) {
  const auto tasks = require_tasks(grid);
  std::vector<GridKey> missing;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> vectors;
  for (const auto& task : tasks) {
    auto a = grid.encoder_vector(language, task, c, s, &missing);
    auto b = grid.encoder_vector(language, task, d, t, &missing);
    vectors.emplace_back(std::move(a), std::move(b));
  }
  if (!missing.empty()) throw_missing(missing);
  double sum = 0.0;
  for (const auto& [a, b] : vectors) sum += corr_thresholded(a, b, opts.method, opts.p_max, opts.p_method);
  return sum / static_cast<double>(vectors.size());
}

}  // namespace

double sim_size(const ScoreGrid& grid, const std::string& language, const std::string& classifier, std::size_t s,
                std::size_t t, const StatsOptions& opts) {
  return mean_thresholded_over_tasks(grid, language, classifier, s, classifier, t, opts);
}

double size_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                      std::size_t s, const StatsOptions& opts) {
  if (grid.sizes.empty()) throw Error(ErrorKind::coverage, "grid has no sizes");
  double sum = 0.0;
  for (const auto t : grid.sizes) sum += sim_size(grid, language, classifier, s, t, opts);
  return sum / static_cast<double>(grid.sizes.size());
}

double sim_cross(const ScoreGrid& grid, const std::string& language, const std::string& c, const std::string& d,
                 std::size_t s, std::size_t t, const StatsOptions& opts) {
  return mean_thresholded_over_tasks(grid, language, c, s, d, t, opts);
}

MinAvg pair_minavg(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "min/avg of an empty collection");
  MinAvg out;
  out.min = *std::min_element(values.begin(), values.end());
  out.avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return out;
}

namespace {

std::vector<std::vector<double>> cell_rankings(const ScoreGrid& grid, const std::string& language,
                                               const std::string& task) {
  std::vector<GridKey> missing;
  std::vector<std::vector<double>> out;
  for (const auto& c : grid.classifiers) {
    for (const auto s : grid.sizes) out.push_back(ranking_from_scores(grid.encoder_vector(language, task, c, s, &missing)));
  }
  if (!missing.empty()) throw_missing(missing);
  if (out.empty()) throw Error(ErrorKind::coverage, "grid has no (classifier, size) cells");
  return out;
}

double rank_agreement(std::span<const double> candidate, std::span<const double> observed, const StatsOptions& opts,
                      bool thresholded) {
  if (!thresholded) return pearson_r(candidate, observed);
  return corr_thresholded(candidate, observed, CorrMethod::pearson, opts.p_max);
}

}  // namespace

RankingSupport ranking_support(const ScoreGrid& grid, const std::string& language, const std::string& task,
                               const StatsOptions& opts) {
  const std::size_t n = grid.encoders.size();
  if (n < 3) throw Error(ErrorKind::invalid_argument, "ranking support needs at least 3 encoders");
  if (n > 10) throw Error(ErrorKind::invalid_argument, "ranking support enumerates n! orders; n <= 10 supported");
  const auto cells = cell_rankings(grid, language, task);

  RankingSupport best;
  best.support = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ranks(n);
  do {
    for (std::size_t k = 0; k < n; ++k) ranks[order[k]] = static_cast<double>(k + 1);
    double sum = 0.0;
    for (const auto& cell : cells) sum += rank_agreement(ranks, cell, opts, opts.threshold_support);
    const double support = sum / static_cast<double>(cells.size());
    // Tolerance keeps mathematically tied candidates on the first permutation.
    if (support > best.support + 1e-12) {
      best.support = support;
      best.order = order;
      best.ranks = ranks;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

double mu_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                    std::size_t size, const std::map<std::string, RankingSupport>& r_max, const StatsOptions& opts) {
  const auto tasks = require_tasks(grid);
  std::vector<GridKey> missing;
  std::vector<std::vector<double>> rankings;
  for (const auto& task : tasks) rankings.push_back(ranking_from_scores(grid.encoder_vector(language, task, classifier, size, &missing)));
  if (!missing.empty()) throw_missing(missing);
  double mu = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto it = r_max.find(tasks[i]);
    if (it == r_max.end()) throw Error(ErrorKind::coverage, "no ranking support computed for task " + tasks[i]);
    const double rho = pearson_r(rankings[i], it->second.ranks);
    if (rho >= opts.closeness || !opts.zero_below_closeness) mu += rho;
  }
  return mu;
}

double mu_stability(const ScoreGrid& grid, const std::string& language, const std::string& classifier,
                    std::size_t size, const StatsOptions& opts) {
  std::map<std::string, RankingSupport> r_max;
  for (const auto& task : require_tasks(grid)) r_max.emplace(task, ranking_support(grid, language, task, opts));
  return mu_stability(grid, language, classifier, size, r_max, opts);
}

StabilityReport stability_report(const ScoreGrid& grid, const std::string& language, const StatsOptions& opts) {
  StabilityReport rep;
  rep.language = language;
  rep.tasks = require_tasks(grid);
  std::vector<std::string> size_labels;
  for (const auto s : grid.sizes) size_labels.push_back(std::to_string(s));

  for (const auto& c : grid.classifiers) {
    Matrix m;
    m.row_labels = size_labels;
    m.col_labels = size_labels;
    std::vector<double> upper;
    for (std::size_t i = 0; i < grid.sizes.size(); ++i) {
      for (std::size_t j = 0; j < grid.sizes.size(); ++j) {
        const double v = sim_size(grid, language, c, grid.sizes[i], grid.sizes[j], opts);
        m.values.push_back(v);
        if (i < j) upper.push_back(v);
      }
    }
    std::vector<double> stab;
    const std::size_t n = grid.sizes.size();
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += m.values[i * n + j];
      stab.push_back(sum / static_cast<double>(n));
    }
    rep.size_stability[c] = std::move(stab);
    if (!upper.empty()) rep.size_minavg[c] = pair_minavg(upper);
    rep.sim_size[c] = std::move(m);
  }

  rep.cross_min.row_labels = rep.cross_min.col_labels = grid.classifiers;
  rep.cross_avg.row_labels = rep.cross_avg.col_labels = grid.classifiers;
  for (const auto& c : grid.classifiers) {
    for (const auto& d : grid.classifiers) {
      std::vector<double> vals;
      for (const auto s : grid.sizes) {
        for (const auto t : grid.sizes) vals.push_back(sim_cross(grid, language, c, d, s, t, opts));
      }
      const auto ma = pair_minavg(vals);
      rep.cross_min.values.push_back(ma.min);
      rep.cross_avg.values.push_back(ma.avg);
    }
  }

  for (const auto& task : rep.tasks) rep.r_max.emplace(task, ranking_support(grid, language, task, opts));
  for (const auto& c : grid.classifiers) {
    for (const auto s : grid.sizes) rep.mu.push_back({c, s, mu_stability(grid, language, c, s, rep.r_max, opts)});
  }
  std::stable_sort(rep.mu.begin(), rep.mu.end(), [](const MuEntry& a, const MuEntry& b) { return a.mu > b.mu; });
  return rep;
}

namespace {

constexpr double not_available = std::numeric_limits<double>::quiet_NaN();

std::vector<std::pair<std::string, std::string>> language_pairs(const ScoreGrid& grid) {
  if (grid.languages.size() < 2) throw Error(ErrorKind::coverage, "requires ≥2 languages");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < grid.languages.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.languages.size(); ++j) out.emplace_back(grid.languages[i], grid.languages[j]);
  }
  return out;
}

std::optional<std::vector<double>> full_vector(const ScoreGrid& grid, const std::string& language,
                                               const std::string& task, const ProfileOptions& where) {
  std::vector<GridKey> missing;
  auto v = grid.encoder_vector(language, task, where.classifier, where.size, &missing);
  if (!missing.empty()) return std::nullopt;
  return v;
}

}  // namespace

Matrix profile_correlation(const ScoreGrid& grid, ProfileMode mode, const ProfileOptions& where,
                           const StatsOptions& opts, const std::string& language) {
  Matrix m;
  bool any = false;
  auto corr = [&](std::span<const double> a, std::span<const double> b) {
    any = true;
    return corr_thresholded(a, b, opts.method, opts.p_max, opts.p_method);
  };

  if (mode == ProfileMode::probing_vs_downstream) {
    const std::string lang = language.empty() && grid.languages.size() == 1 ? grid.languages.front() : language;
    if (!has(grid.languages, lang)) throw Error(ErrorKind::coverage, "language '" + lang + "' not in grid");
    m.row_labels = grid.probing_tasks();
    for (const auto& t : grid.tasks) {
      if (grid.downstream_tasks.contains(t)) m.col_labels.push_back(t);
    }
    if (m.col_labels.empty()) throw Error(ErrorKind::coverage, "requires ≥1 downstream task");
    for (const auto& p : m.row_labels) {
      const auto a = full_vector(grid, lang, p, where);
      for (const auto& d : m.col_labels) {
        const auto b = full_vector(grid, lang, d, where);
        m.values.push_back(a && b ? corr(*a, *b) : not_available);
      }
    }
  } else {
    const auto pairs = language_pairs(grid);
    for (const auto& [a, b] : pairs) m.col_labels.push_back(a + "-" + b);
    if (mode == ProfileMode::task) {
      m.row_labels = grid.probing_tasks();
      for (const auto& t : m.row_labels) {
        for (const auto& [a, b] : pairs) {
          const auto va = full_vector(grid, a, t, where);
          const auto vb = full_vector(grid, b, t, where);
          m.values.push_back(va && vb ? corr(*va, *vb) : not_available);
        }
      }
    } else {
      m.row_labels = grid.encoders;
      for (const auto& e : grid.encoders) {
        for (const auto& [a, b] : pairs) {
          std::vector<double> va;
          std::vector<double> vb;
          for (const auto& t : grid.probing_tasks()) {
            const auto x = grid.find({a, t, e, where.classifier, where.size});
            const auto y = grid.find({b, t, e, where.classifier, where.size});
            if (x && y) {
              va.push_back(*x);
              vb.push_back(*y);
            }
          }
          m.values.push_back(va.size() >= 3 ? corr(va, vb) : not_available);
        }
      }
    }
  }
  if (!any)
    throw Error(ErrorKind::coverage, "no covered entries for " + where.classifier + "/" + std::to_string(where.size));
  return m;
}

}  // namespace probekit
