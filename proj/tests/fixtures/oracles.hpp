#pragma once

// Direct-formula reference implementations used to cross-check the stats
// layer. Deliberately naive: O(n^2) ranks, two-pass moments, Simpson
// integration of the t density, recursive permutation enumeration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx) / std::sqrt(syy);
}

// rank = 1 + #smaller + (#equal - 1) / 2
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, eq = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) eq += 1;
    }
    r[i] = 1 + less + (eq - 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Two-sided tail probability P(|T| >= |t|). Substituting t = sqrt(k) tan(u)
// turns the density into c * cos(u)^(k-1) on [0, pi/2); both the partial and
// the full integral are done by composite Simpson.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline double t_two_sided(double t, double k) {
  const double a = std::abs(t);
  if (a == 0) return 1.0;
  const auto f = [k](double u) { return std::pow(std::cos(u), k - 1); };
  const double ua = std::atan(a / std::sqrt(k));
  const double central = simpson(f, 0.0, ua, 4000) / simpson(f, 0.0, M_PI / 2, 4000);
  return std::clamp(1.0 - central, 0.0, 1.0);
}

inline std::pair<double, double> correlate(const std::vector<double>& x, const std::vector<double>& y,
                                           bool spearman_mode) {
  const double r = spearman_mode ? spearman(x, y) : pearson(x, y);
  const double n = static_cast<double>(x.size());
  if (std::abs(r) >= 1.0) return {r, 0.0};
  if (r == 0.0) return {0.0, 1.0};
  const double t = r * std::sqrt((n - 2) / (1 - r * r));
  return {r, t_two_sided(t, n - 2)};
}

// score vectors are indexed [cell][encoder]; returns (best order, support).
// Orders are enumerated recursively and compared lexicographically so the
// first (smallest) order among the maxima wins.
inline std::pair<std::vector<std::size_t>, double> ranking_support(const std::vector<std::vector<double>>& cells) {
  const std::size_t m = cells.front().size();
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> cur;
  std::vector<bool> used(m, false);
  std::function<void()> rec = [&] {
    if (cur.size() == m) {
      orders.push_back(cur);
      return;
    }
    for (std::size_t e = 0; e < m; ++e) {
      if (used[e]) continue;
      used[e] = true;
      cur.push_back(e);
      rec();
      cur.pop_back();
      used[e] = false;
    }
  };
  rec();
  std::vector<std::vector<double>> cell_ranks;
  for (const auto& c : cells) {
    std::vector<double> neg(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) neg[i] = -c[i];
    cell_ranks.push_back(ranks(neg));
  }
  std::vector<std::size_t> best_order;
  double best = -2.0;
  for (const auto& o : orders) {
    std::vector<double> r(m);
    for (std::size_t k = 0; k < m; ++k) r[o[k]] = static_cast<double>(k + 1);
    double s = 0;
    for (const auto& cr : cell_ranks) s += pearson(r, cr);
    s /= static_cast<double>(cell_ranks.size());
    if (s > best + 1e-12 || (std::abs(s - best) <= 1e-12 && o < best_order)) {
      best = std::max(best, s);
      best_order = o;
    }
  }
  return {best_order, best};
}

}  // namespace oracle
