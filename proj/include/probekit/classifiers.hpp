#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "probekit/encoders.hpp"
#include "probekit/taskgen.hpp"

namespace probekit {

enum class ProbeKind { LR, MLP, NB, RF };

std::string probe_kind_name(ProbeKind kind);
ProbeKind parse_probe_kind(const std::string& name);

// Optimizer settings shared by LR and MLP (Adam).
struct TrainingOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // 0 = full batch.
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  // Stop after this many epochs without a dev-accuracy improvement.
  std::size_t patience = 5;

  nlohmann::json to_json() const;
};

struct HyperPoint {
  std::optional<double> l2;
  std::optional<std::size_t> hidden;
  std::optional<double> dropout;
  // 0 encodes an unbounded depth.
  std::optional<int> max_depth;

  nlohmann::json to_json() const;
  bool operator==(const HyperPoint&) const = default;
};

struct ProbeSpec {
  ProbeKind kind = ProbeKind::LR;
  std::vector<double> l2_grid{1e-5, 1e-1};
  std::vector<std::size_t> hidden_grid{50, 100, 200};
  std::vector<double> dropout_grid{0.0, 0.1, 0.2};
  std::vector<int> depth_grid{10, 50, 100, 0};
  std::size_t trees = 100;
  TrainingOptions training;
  std::uint64_t seed = 0;

  static ProbeSpec defaults(ProbeKind kind, std::uint64_t seed = 0);

  // Deterministic grid order: hidden, then dropout, then L2 (MLP).
  std::vector<HyperPoint> grid() const;
  nlohmann::json to_json() const;
};

class Probe {
 public:
  virtual ~Probe() = default;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t class_count() const = 0;
  // Per-class scores; argmax with first-index ties gives the label.
  virtual Eigen::MatrixXd scores(const FeatureMatrix& x) const = 0;

  // Throws Error(invalid_argument) on a width mismatch.
  std::vector<std::size_t> predict(const FeatureMatrix& x) const;
};

// Row-wise argmax, ties to the lowest class index.
std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& scores);

enum class Metric { accuracy, macro_f1 };
std::string metric_name(Metric metric);
Metric parse_metric(const std::string& name);

double score(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, Metric metric);

// Multinomial logistic regression: softmax(W x + b), loss = mean CE + l2/2 ||W||².
class LogisticRegression final : public Probe {
 public:
  LogisticRegression(std::size_t input_width, std::size_t classes);

  struct Gradient {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
  };

  double loss(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
              double l2) const;
  double loss_and_gradient(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
                           double l2, Gradient& grad) const;

  // Returns the number of epochs run; restores the best-dev parameters.
  std::size_t train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> train_rows,
                    std::span<const std::size_t> dev_rows, double l2, const TrainingOptions& opts,
                    std::uint64_t seed, std::vector<double>* loss_history = nullptr);

  std::size_t input_width() const override { return static_cast<std::size_t>(weights_.cols()); }
  std::size_t class_count() const override { return static_cast<std::size_t>(weights_.rows()); }
  Eigen::MatrixXd scores(const FeatureMatrix& x) const override;

  Eigen::MatrixXd& weights() { return weights_; }
  Eigen::VectorXd& bias() { return bias_; }

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

// One sigmoid hidden layer with dropout on hidden activations during training.
class Mlp final : public Probe {
 public:
  Mlp(std::size_t input_width, std::size_t hidden, std::size_t classes, std::uint64_t seed);

  struct Params {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
  };

  // Loss without dropout (evaluation mode).
  double loss(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
              double l2) const;
  double loss_and_gradient(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
                           double l2, Params& grad) const;

  std::size_t train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> train_rows,
                    std::span<const std::size_t> dev_rows, double l2, double dropout, const TrainingOptions& opts,
                    std::uint64_t seed);

  std::size_t input_width() const override { return static_cast<std::size_t>(params_.w1.cols()); }
  std::size_t class_count() const override { return static_cast<std::size_t>(params_.w2.rows()); }
  Eigen::MatrixXd scores(const FeatureMatrix& x) const override;

  Params& params() { return params_; }

 private:
  Params params_;
};

class GaussianNaiveBayes final : public Probe {
 public:
  static constexpr double variance_floor = 1e-9;

  void train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
             std::size_t classes);

  std::size_t input_width() const override { return static_cast<std::size_t>(means_.cols()); }
  std::size_t class_count() const override { return static_cast<std::size_t>(means_.rows()); }
  // Log joint likelihood per class.
  Eigen::MatrixXd scores(const FeatureMatrix& x) const override;

  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::MatrixXd& variances() const { return variances_; }

 private:
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  Eigen::VectorXd log_priors_;
};

struct ForestOptions {
  std::size_t trees = 100;
  // Features tried per split; 0 = floor(sqrt(d)).
  std::size_t features_per_split = 0;
  // Maps logical feature ids to matrix columns. Feature subsampling draws
  // logical ids, so permuting columns together with this map reproduces
  // the same forest.
  std::vector<std::size_t> logical_to_column;
};

// Bagged Gini trees grown until pure. Nodes record their depth so one fitted
// forest answers every max-depth setting: truncating the walk at depth D
// equals growing with max_depth = D.
class RandomForest {
 public:
  void train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
             std::size_t classes, const ForestOptions& opts, std::uint64_t seed);

  Eigen::MatrixXd scores(const FeatureMatrix& x, int max_depth) const;
  std::size_t input_width() const noexcept { return width_; }
  std::size_t class_count() const noexcept { return classes_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    std::uint32_t dist_offset = 0;  // into Tree::dist, `classes_` entries
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<float> dist;
  };

  Tree grow(const FeatureMatrix& x, std::span<const std::size_t> y, std::vector<std::size_t> sample,
            const ForestOptions& opts, std::uint64_t seed) const;

  std::vector<Tree> trees_;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
};

class ForestProbe final : public Probe {
 public:
  ForestProbe(std::shared_ptr<const RandomForest> forest, int max_depth)
      : forest_(std::move(forest)), max_depth_(max_depth) {}
  std::size_t input_width() const override { return forest_->input_width(); }
  std::size_t class_count() const override { return forest_->class_count(); }
  Eigen::MatrixXd scores(const FeatureMatrix& x) const override { return forest_->scores(x, max_depth_); }

 private:
  std::shared_ptr<const RandomForest> forest_;
  int max_depth_;
};

struct FitReport {
  ProbeKind kind = ProbeKind::LR;
  HyperPoint chosen;
  std::vector<std::pair<HyperPoint, double>> dev_scores;
  std::optional<double> test_accuracy;
  std::optional<double> test_macro_f1;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  nlohmann::json training = nlohmann::json::object();
  // Populated by k-fold protocols: one report per outer fold.
  std::vector<FitReport> folds;

  double test_score(Metric metric) const;
  nlohmann::json to_json() const;
};

struct FitResult {
  std::unique_ptr<Probe> probe;
  FitReport report;
};

// Trains every grid point on `train_rows`, keeps the best dev accuracy
// (first in grid order on ties).
FitResult fit(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t classes,
              std::span<const std::size_t> train_rows, std::span<const std::size_t> dev_rows);

// Same, with every non-dev row used for training.
FitResult fit(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t classes,
              std::span<const std::size_t> dev_rows);

struct Protocol {
  enum class Kind { fixed_splits, inner_kfold } kind = Kind::fixed_splits;
  std::size_t k = 5;
  // Inner validation share carved from each outer-train portion.
  double inner_dev_fraction = 0.2;

  static Protocol fixed() { return {}; }
  static Protocol kfold(std::size_t k) { return {Kind::inner_kfold, k, 0.2}; }
  std::string name() const;
};

// Dataset rows must align with `x`. Fixed splits tune on "va" and score "te";
// k-fold reports the mean over outer folds.
FitReport tune_and_eval(const ProbeSpec& spec, const ProbingDataset& dataset, const FeatureMatrix& x,
                        const Protocol& protocol);

// Stratified holdout: returns (kept, held_out) subsets of `rows`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    std::span<const std::size_t> rows, std::span<const std::size_t> y, std::size_t classes, double fraction,
    std::uint64_t seed);

}  // namespace probekit
