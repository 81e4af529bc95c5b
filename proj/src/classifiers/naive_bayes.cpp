#include <algorithm>
#include <cmath>
#include <numbers>

#include "probekit/classifiers.hpp"
#include "probekit/error.hpp"

namespace probekit {

void GaussianNaiveBayes::train(const FeatureMatrix& x, std::span<const std::size_t> y,
                               std::span<const std::size_t> rows, std::size_t classes) {
  const auto d = x.cols();
  const auto c = static_cast<Eigen::Index>(classes);
  means_ = Eigen::MatrixXd::Zero(c, d);
  variances_ = Eigen::MatrixXd::Zero(c, d);
  log_priors_ = Eigen::VectorXd::Constant(c, -std::numeric_limits<double>::infinity());

  std::vector<std::vector<std::size_t>> members(classes);
  for (const auto r : rows) members.at(y[r]).push_back(r);

  // Values are summed in sorted order so the fit does not depend on row order.
  std::vector<double> column;
  for (Eigen::Index k = 0; k < c; ++k) {
    const auto& m = members[static_cast<std::size_t>(k)];
    if (m.empty()) continue;
    log_priors_(k) = std::log(static_cast<double>(m.size()) / static_cast<double>(rows.size()));
    const double n = static_cast<double>(m.size());
    for (Eigen::Index j = 0; j < d; ++j) {
      column.clear();
      for (const auto r : m) column.push_back(x(static_cast<Eigen::Index>(r), j));
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (const double v : column) sum += v;
      const double mean = sum / n;
      double sq = 0.0;
      for (const double v : column) sq += (v - mean) * (v - mean);
      means_(k, j) = mean;
      variances_(k, j) = std::max(sq / n, variance_floor);
    }
  }
}

Eigen::MatrixXd GaussianNaiveBayes::scores(const FeatureMatrix& x) const {
  const auto c = means_.rows();
  Eigen::MatrixXd out(x.rows(), c);
  for (Eigen::Index k = 0; k < c; ++k) {
    if (!std::isfinite(log_priors_(k))) {
      out.col(k).setConstant(-std::numeric_limits<double>::infinity());
      continue;
    }
    const Eigen::ArrayXd var = variances_.row(k).transpose().array();
    const double norm = -0.5 * (2.0 * std::numbers::pi * var).log().sum();
    const Eigen::ArrayXd inv = 0.5 / var;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::ArrayXd diff = x.row(i).transpose().array() - means_.row(k).transpose().array();
      out(i, k) = log_priors_(k) + norm - (diff.square() * inv).sum();
    }
  }
  return out;
}

}  // namespace probekit
