#include <cmath>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "training.hpp"

namespace probekit {

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

Mlp::Mlp(std::size_t input_width, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(input_width);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto c = static_cast<Eigen::Index>(classes);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(input_width));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  params_.w1 = uniform_matrix(h, d, b1, rng);
  params_.b1 = uniform_matrix(h, 1, b1, rng);
  params_.w2 = uniform_matrix(c, h, b2, rng);
  params_.b2 = uniform_matrix(c, 1, b2, rng);
}

Eigen::MatrixXd Mlp::scores(const FeatureMatrix& x) const {
  Eigen::MatrixXd a = x * params_.w1.transpose();
  a.rowwise() += params_.b1.transpose();
  Eigen::MatrixXd z = sigmoid(a) * params_.w2.transpose();
  z.rowwise() += params_.b2.transpose();
  return z;
}

double Mlp::loss(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
                 double l2) const {
  const Eigen::MatrixXd xb = detail::gather_rows(x, rows);
  Eigen::MatrixXd a = xb * params_.w1.transpose();
  a.rowwise() += params_.b1.transpose();
  Eigen::MatrixXd p = sigmoid(a) * params_.w2.transpose();
  p.rowwise() += params_.b2.transpose();
  detail::softmax_rows(p);
  return detail::mean_cross_entropy(p, y, rows) +
         0.5 * l2 * (params_.w1.squaredNorm() + params_.w2.squaredNorm());
}

namespace {

// Forward/backward on one batch. `mask` (same shape as the hidden layer)
// holds inverted-dropout multipliers, or is empty for no dropout.
double forward_backward(const Mlp::Params& prm, const Eigen::MatrixXd& xb, std::span<const std::size_t> y,
                        std::span<const std::size_t> rows, double l2, const Eigen::MatrixXd& mask, Mlp::Params& g) {
  Eigen::MatrixXd a = xb * prm.w1.transpose();
  a.rowwise() += prm.b1.transpose();
  const Eigen::MatrixXd h = sigmoid(a);
  const Eigen::MatrixXd hd = mask.size() ? Eigen::MatrixXd(h.cwiseProduct(mask)) : h;
  Eigen::MatrixXd p = hd * prm.w2.transpose();
  p.rowwise() += prm.b2.transpose();
  detail::softmax_rows(p);
  const double loss = detail::mean_cross_entropy(p, y, rows) + 0.5 * l2 * (prm.w1.squaredNorm() + prm.w2.squaredNorm());
  for (std::size_t i = 0; i < rows.size(); ++i) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[rows[i]])) -= 1.0;
  p /= static_cast<double>(rows.size());
  g.w2 = p.transpose() * hd + l2 * prm.w2;
  g.b2 = p.colwise().sum().transpose();
  Eigen::MatrixXd dh = p * prm.w2;
  if (mask.size()) dh = dh.cwiseProduct(mask);
  const Eigen::MatrixXd da = dh.cwiseProduct(h.cwiseProduct((1.0 - h.array()).matrix()));
  g.w1 = da.transpose() * xb + l2 * prm.w1;
  g.b1 = da.colwise().sum().transpose();
  return loss;
}

}  // namespace

double Mlp::loss_and_gradient(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
                              double l2, Params& grad) const {
  return forward_backward(params_, detail::gather_rows(x, rows), y, rows, l2, Eigen::MatrixXd(), grad);
}

std::size_t Mlp::train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> train_rows,
                       std::span<const std::size_t> dev_rows, double l2, double dropout, const TrainingOptions& opts,
                       std::uint64_t seed) {
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorKind::invalid_argument, "dropout must lie in [0, 1)");
  Rng rng(seed);
  detail::AdamSlot s_w1(params_.w1), s_b1(params_.b1), s_w2(params_.w2), s_b2(params_.b2);
  Params grad;
  Params best = params_;
  double best_dev = -1.0;
  std::size_t since_best = 0;
  std::size_t t = 0;
  std::size_t epoch = 0;
  const double keep = 1.0 - dropout;
  while (epoch < opts.max_epochs) {
    ++epoch;
    for (const auto& batch : detail::epoch_batches(train_rows, opts.batch_size, rng)) {
      const Eigen::MatrixXd xb = detail::gather_rows(x, batch);
      Eigen::MatrixXd mask;
      if (dropout > 0.0) {
        mask.resize(static_cast<Eigen::Index>(batch.size()), params_.w1.rows());
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
          for (Eigen::Index c = 0; c < mask.cols(); ++c) mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
      }
      forward_backward(params_, xb, y, batch, l2, mask, grad);
      ++t;
      s_w1.step(params_.w1, grad.w1, opts, t);
      s_b1.step(params_.b1, grad.b1, opts, t);
      s_w2.step(params_.w2, grad.w2, opts, t);
      s_b2.step(params_.b2, grad.b2, opts, t);
    }
    if (dev_rows.empty()) continue;
    const double dev = detail::subset_accuracy(*this, x, y, dev_rows);
    if (dev > best_dev) {
      best_dev = dev;
      best = params_;
      since_best = 0;
    } else if (++since_best >= opts.patience) {
      break;
    }
  }
  if (!dev_rows.empty()) params_ = best;
  return epoch;
}

}  // namespace probekit
