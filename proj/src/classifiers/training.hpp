#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "probekit/classifiers.hpp"
#include "probekit/rng.hpp"

namespace probekit::detail {

// Adam state for one parameter block.
class AdamSlot {
 public:
  template <typename Derived>
  explicit AdamSlot(const Eigen::MatrixBase<Derived>& shape)
      : m_(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())), v_(Eigen::MatrixXd::Zero(shape.rows(), shape.cols())) {}

  template <typename P, typename G>
  void step(Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad, const TrainingOptions& o, std::size_t t) {
    m_ = o.beta1 * m_ + (1.0 - o.beta1) * grad;
    v_ = o.beta2 * v_ + (1.0 - o.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
    param -= (o.learning_rate * (m_ / c1).array() / ((v_ / c2).array().sqrt() + o.epsilon)).matrix();
  }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
};

inline Eigen::MatrixXd gather_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// Row-wise softmax in place.
inline void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - mx).exp();
    z.row(i) /= z.row(i).sum();
  }
}

// Mean cross entropy of softmax probabilities against integer labels.
inline double mean_cross_entropy(const Eigen::MatrixXd& probs, std::span<const std::size_t> y,
                                 std::span<const std::size_t> rows) {
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[rows[i]])), 1e-300));
  return loss / static_cast<double>(rows.size());
}

inline double subset_accuracy(const Probe& probe, const FeatureMatrix& x, std::span<const std::size_t> y,
                              std::span<const std::size_t> rows) {
  FeatureMatrix sub(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  const auto pred = argmax_rows(probe.scores(sub));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == y[rows[i]] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

// Batches of `rows`, reshuffled every epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> rows, std::size_t batch_size,
                                                    Rng& rng);

}  // namespace probekit::detail
