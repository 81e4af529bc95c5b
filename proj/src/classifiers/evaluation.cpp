#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "probekit/error.hpp"
#include "probekit/rng.hpp"
#include "training.hpp"

namespace probekit {

namespace {

void validate_inputs(const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t classes,
                     std::span<const std::size_t> train_rows, std::span<const std::size_t> dev_rows) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorKind::invalid_argument, "feature rows (" + std::to_string(x.rows()) + ") and labels (" +
                                                 std::to_string(y.size()) + ") differ");
  if (!x.allFinite()) throw Error(ErrorKind::invalid_argument, "feature matrix contains non-finite values");
  for (const auto l : y) {
    if (l >= classes) throw Error(ErrorKind::invalid_argument, "label index outside the class inventory");
  }
  std::set<std::size_t> dev(dev_rows.begin(), dev_rows.end());
  std::set<std::size_t> present;
  for (const auto r : train_rows) {
    if (r >= y.size()) throw Error(ErrorKind::invalid_argument, "training row out of range");
    if (dev.contains(r)) throw Error(ErrorKind::invalid_argument, "dev rows overlap training rows");
    present.insert(y[r]);
  }
  if (present.size() < 2)
    throw Error(ErrorKind::degenerate, "training labels contain " + std::to_string(present.size()) + " class(es)");
}

FeatureMatrix gather(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<std::size_t> labels_of(std::span<const std::size_t> y, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(y[r]);
  return out;
}

}  // namespace

FitResult fit(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t classes,
              std::span<const std::size_t> train_rows, std::span<const std::size_t> dev_rows) {
  validate_inputs(x, y, classes, train_rows, dev_rows);
  const auto grid = spec.grid();
  if (grid.size() > 1 && dev_rows.empty())
    throw Error(ErrorKind::invalid_argument, "grid search needs a non-empty dev set");
  const std::size_t d = static_cast<std::size_t>(x.cols());

  FitResult result;
  result.report.kind = spec.kind;
  result.report.seed = spec.seed;
  if (spec.kind == ProbeKind::LR || spec.kind == ProbeKind::MLP) result.report.training = spec.training.to_json();

  std::shared_ptr<RandomForest> forest;
  if (spec.kind == ProbeKind::RF) {
    forest = std::make_shared<RandomForest>();
    forest->train(x, y, train_rows, classes, ForestOptions{.trees = spec.trees}, derive_seed(spec.seed, "forest"));
    result.report.training = {{"trees", spec.trees}, {"bootstrap", true}, {"features_per_split", "sqrt"}};
  }

  double best = -1.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& point = grid[g];
    const auto seed = derive_seed(spec.seed, "grid:" + std::to_string(g));
    std::unique_ptr<Probe> probe;
    std::size_t epochs = 0;
    switch (spec.kind) {
      case ProbeKind::LR: {
        auto m = std::make_unique<LogisticRegression>(d, classes);
        epochs = m->train(x, y, train_rows, dev_rows, *point.l2, spec.training, seed);
        probe = std::move(m);
        break;
      }
      case ProbeKind::MLP: {
        auto m = std::make_unique<Mlp>(d, *point.hidden, classes, seed);
        epochs = m->train(x, y, train_rows, dev_rows, *point.l2, *point.dropout, spec.training,
                          derive_seed(seed, "batches"));
        probe = std::move(m);
        break;
      }
      case ProbeKind::NB: {
        auto m = std::make_unique<GaussianNaiveBayes>();
        m->train(x, y, train_rows, classes);
        probe = std::move(m);
        break;
      }
      case ProbeKind::RF:
        probe = std::make_unique<ForestProbe>(forest, *point.max_depth);
        break;
    }
    const double dev = dev_rows.empty() ? 0.0 : detail::subset_accuracy(*probe, x, y, dev_rows);
    result.report.dev_scores.emplace_back(point, dev);
    if (dev > best) {
      best = dev;
      result.report.chosen = point;
      result.report.epochs = epochs;
      result.probe = std::move(probe);
    }
  }
  return result;
}

FitResult fit(const ProbeSpec& spec, const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t classes,
              std::span<const std::size_t> dev_rows) {
  std::set<std::size_t> dev(dev_rows.begin(), dev_rows.end());
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!dev.contains(i)) train.push_back(i);
  }
  return fit(spec, x, y, classes, train, dev_rows);
}

std::string Protocol::name() const {
  return kind == Kind::fixed_splits ? "fixed-splits" : "inner-kfold(" + std::to_string(k) + ")";
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    std::span<const std::size_t> rows, std::span<const std::size_t> y, std::size_t classes, double fraction,
    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> members(classes);
  for (const auto r : rows) members.at(y[r]).push_back(r);
  std::vector<std::size_t> kept;
  std::vector<std::size_t> held;
  for (auto& m : members) {
    rng.shuffle(m);
    auto h = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m.size())));
    if (m.size() >= 2) h = std::clamp<std::size_t>(h, 1, m.size() - 1);
    held.insert(held.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(h));
    kept.insert(kept.end(), m.begin() + static_cast<std::ptrdiff_t>(h), m.end());
  }
  std::sort(kept.begin(), kept.end());
  std::sort(held.begin(), held.end());
  return {kept, held};
}

namespace {

void evaluate_on(FitReport& report, const Probe& probe, const FeatureMatrix& x, std::span<const std::size_t> y,
                 std::span<const std::size_t> rows) {
  const auto pred = probe.predict(gather(x, rows));
  const auto truth = labels_of(y, rows);
  report.test_accuracy = score(truth, pred, Metric::accuracy);
  report.test_macro_f1 = score(truth, pred, Metric::macro_f1);
}

}  // namespace

FitReport tune_and_eval(const ProbeSpec& spec, const ProbingDataset& dataset, const FeatureMatrix& x,
                        const Protocol& protocol) {
  if (static_cast<std::size_t>(x.rows()) != dataset.size())
    throw Error(ErrorKind::alignment, "feature matrix rows do not match dataset size");
  const auto y = dataset.label_indices();
  const std::size_t classes = dataset.labels.size();

  if (protocol.kind == Protocol::Kind::fixed_splits) {
    const auto train = dataset.indices_of(Split::train);
    const auto dev = dataset.indices_of(Split::dev);
    const auto test = dataset.indices_of(Split::test);
    if (train.empty() || dev.empty() || test.empty())
      throw Error(ErrorKind::config, dataset.task + ": fixed-splits protocol needs tr, va and te instances");
    auto result = fit(spec, x, y, classes, train, dev);
    evaluate_on(result.report, *result.probe, x, y, test);
    return std::move(result.report);
  }

  const auto folds = stratified_kfold(y, classes, protocol.k, derive_seed(spec.seed, "outer-folds"));
  FitReport top;
  top.kind = spec.kind;
  top.seed = spec.seed;
  double acc = 0.0;
  double f1 = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> outer_train;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) outer_train.insert(outer_train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(outer_train.begin(), outer_train.end());
    const auto [inner_train, inner_dev] = stratified_holdout(
        outer_train, y, classes, protocol.inner_dev_fraction, derive_seed(spec.seed, "inner:" + std::to_string(f)));
    ProbeSpec fold_spec = spec;
    fold_spec.seed = derive_seed(spec.seed, "fold:" + std::to_string(f));
    auto result = fit(fold_spec, x, y, classes, inner_train, inner_dev);
    evaluate_on(result.report, *result.probe, x, y, folds[f]);
    acc += *result.report.test_accuracy;
    f1 += *result.report.test_macro_f1;
    top.epochs = std::max(top.epochs, result.report.epochs);
    top.training = result.report.training;
    top.folds.push_back(std::move(result.report));
  }
  const auto k = static_cast<double>(folds.size());
  top.test_accuracy = acc / k;
  top.test_macro_f1 = f1 / k;
  // Grid-point dev scores averaged over folds; the reported choice is their argmax.
  const auto& first = top.folds.front().dev_scores;
  double best = -1.0;
  for (std::size_t g = 0; g < first.size(); ++g) {
    double mean = 0.0;
    for (const auto& r : top.folds) mean += r.dev_scores[g].second;
    mean /= k;
    top.dev_scores.emplace_back(first[g].first, mean);
    if (mean > best) {
      best = mean;
      top.chosen = first[g].first;
    }
  }
  return top;
}

}  // namespace probekit
