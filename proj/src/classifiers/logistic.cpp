#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "training.hpp"

namespace probekit {

namespace detail {

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> rows, std::size_t batch_size,
                                                    Rng& rng) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  rng.shuffle(order);
  const std::size_t b = batch_size == 0 ? order.size() : batch_size;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += b) {
    const auto end = std::min(order.size(), start + b);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace detail

LogisticRegression::LogisticRegression(std::size_t input_width, std::size_t classes)
    : weights_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(input_width))),
      bias_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes))) {}

Eigen::MatrixXd LogisticRegression::scores(const FeatureMatrix& x) const {
  Eigen::MatrixXd z = x * weights_.transpose();
  z.rowwise() += bias_.transpose();
  return z;
}

double LogisticRegression::loss(const FeatureMatrix& x, std::span<const std::size_t> y,
                                std::span<const std::size_t> rows, double l2) const {
  const Eigen::MatrixXd xb = detail::gather_rows(x, rows);
  Eigen::MatrixXd p = xb * weights_.transpose();
  p.rowwise() += bias_.transpose();
  detail::softmax_rows(p);
  return detail::mean_cross_entropy(p, y, rows) + 0.5 * l2 * weights_.squaredNorm();
}

double LogisticRegression::loss_and_gradient(const FeatureMatrix& x, std::span<const std::size_t> y,
                                             std::span<const std::size_t> rows, double l2, Gradient& grad) const {
  const Eigen::MatrixXd xb = detail::gather_rows(x, rows);
  Eigen::MatrixXd p = xb * weights_.transpose();
  p.rowwise() += bias_.transpose();
  detail::softmax_rows(p);
  const double loss = detail::mean_cross_entropy(p, y, rows) + 0.5 * l2 * weights_.squaredNorm();
  for (std::size_t i = 0; i < rows.size(); ++i) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[rows[i]])) -= 1.0;
  p /= static_cast<double>(rows.size());
  grad.weights = p.transpose() * xb + l2 * weights_;
  grad.bias = p.colwise().sum().transpose();
  return loss;
}

std::size_t LogisticRegression::train(const FeatureMatrix& x, std::span<const std::size_t> y,
                                      std::span<const std::size_t> train_rows, std::span<const std::size_t> dev_rows,
                                      double l2, const TrainingOptions& opts, std::uint64_t seed,
                                      std::vector<double>* loss_history) {
  Rng rng(seed);
  detail::AdamSlot w_slot(weights_);
  detail::AdamSlot b_slot(bias_);
  Gradient grad;
  std::size_t t = 0;
  double best_dev = -1.0;
  Eigen::MatrixXd best_w = weights_;
  Eigen::VectorXd best_b = bias_;
  std::size_t since_best = 0;
  std::size_t epoch = 0;
  while (epoch < opts.max_epochs) {
    ++epoch;
    for (const auto& batch : detail::epoch_batches(train_rows, opts.batch_size, rng)) {
      loss_and_gradient(x, y, batch, l2, grad);
      ++t;
      w_slot.step(weights_, grad.weights, opts, t);
      b_slot.step(bias_, grad.bias, opts, t);
    }
    if (loss_history) loss_history->push_back(loss(x, y, train_rows, l2));
    if (dev_rows.empty()) continue;
    const double dev = detail::subset_accuracy(*this, x, y, dev_rows);
    if (dev > best_dev) {
      best_dev = dev;
      best_w = weights_;
      best_b = bias_;
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  if (!dev_rows.empty()) {
    weights_ = best_w;
    bias_ = best_b;
  }
  return epoch;
}

}  // namespace probekit
