#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fixtures/synth.hpp"
#include "probekit/classifiers.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"

using namespace probekit;

namespace {

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> v(b - a);
  std::iota(v.begin(), v.end(), a);
  return v;
}

double accuracy_on(const Probe& p, const FeatureMatrix& x, const std::vector<std::size_t>& y,
                   const std::vector<std::size_t>& rows) {
  FeatureMatrix sub(static_cast<Eigen::Index>(rows.size()), x.cols());
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    truth.push_back(y[rows[i]]);
  }
  return score(truth, p.predict(sub), Metric::accuracy);
}

// Nearest-centroid accuracy: the separability oracle for the blob fixtures.
double nearest_centroid(const fixtures::Blobs& b) {
  Eigen::RowVectorXd c[2] = {Eigen::RowVectorXd::Zero(b.x.cols()), Eigen::RowVectorXd::Zero(b.x.cols())};
  double n[2] = {0, 0};
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    c[b.y[i]] += b.x.row(static_cast<Eigen::Index>(i));
    n[b.y[i]] += 1;
  }
  c[0] /= n[0];
  c[1] /= n[1];
  std::size_t ok = 0;
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    const auto r = b.x.row(static_cast<Eigen::Index>(i));
    const std::size_t p = (r - c[0]).squaredNorm() <= (r - c[1]).squaredNorm() ? 0 : 1;
    ok += p == b.y[i];
  }
  return static_cast<double>(ok) / static_cast<double>(b.y.size());
}

ProbeSpec spec_of(ProbeKind k, std::uint64_t seed = 3) { return ProbeSpec::defaults(k, seed); }

FeatureMatrix toy5(std::vector<std::size_t>& y) {
  FeatureMatrix x(5, 3);
  x << 0.5, -1.2, 0.3, 1.5, 0.2, -0.7, -0.4, 0.9, 1.1, 0.05, -0.3, -1.4, 2.0, 1.1, 0.6;
  y = {0, 2, 1, 0, 2};
  return x;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("separable blobs: every kind reaches 0.95 dev accuracy") {
  const auto b = fixtures::gaussian_blobs(200, 10, 10.0, 21);
  CHECK(nearest_centroid(b) >= 0.99);
  const auto train = range(0, 140);
  const auto dev = range(140, 200);
  for (auto k : {ProbeKind::LR, ProbeKind::MLP, ProbeKind::NB, ProbeKind::RF}) {
    auto spec = spec_of(k);
    if (k == ProbeKind::MLP) spec.hidden_grid = {50};
    const auto r = fit(spec, b.x, b.y, 2, train, dev);
    CAPTURE(probe_kind_name(k));
    CHECK(accuracy_on(*r.probe, b.x, b.y, dev) >= 0.95);
    CHECK(accuracy_on(*r.probe, b.x, b.y, train) >= 0.99);
    double best = -1;
    for (const auto& [p, s] : r.report.dev_scores) best = std::max(best, s);
    for (const auto& [p, s] : r.report.dev_scores)
      if (p == r.report.chosen) CHECK(s == best);
  }
}

TEST_CASE("naive Bayes hand case") {
  FeatureMatrix x(4, 1);
  x << 0, 1, 10, 11;
  const std::vector<std::size_t> y{0, 0, 1, 1};
  GaussianNaiveBayes nb;
  nb.train(x, y, range(0, 4), 2);
  CHECK(nb.means()(0, 0) == doctest::Approx(0.5));
  CHECK(nb.means()(1, 0) == doctest::Approx(10.5));
  CHECK(nb.variances()(0, 0) == doctest::Approx(0.25));
  FeatureMatrix q(1, 1);
  q << 0.4;
  CHECK(nb.predict(q)[0] == 0);
  // Closed form: log N(0.4; 0.5, 0.25) + log 1/2.
  const auto s = nb.scores(q);
  const double expect = -0.5 * std::log(2 * M_PI * 0.25) - 0.01 / 0.5 + std::log(0.5);
  CHECK(s(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("naive Bayes is invariant to instance order") {
  const auto b = fixtures::gaussian_blobs(300, 6, 2.0, 4);
  GaussianNaiveBayes a, c;
  a.train(b.x, b.y, range(0, 300), 2);
  auto rows = range(0, 300);
  Rng(1).shuffle(rows);
  c.train(b.x, b.y, rows, 2);
  CHECK(a.means() == c.means());
  CHECK(a.variances() == c.variances());
  CHECK(a.scores(b.x) == c.scores(b.x));
}

TEST_CASE("MLP grid has 18 points") {
  const auto b = fixtures::gaussian_blobs(120, 4, 6.0, 5);
  auto spec = spec_of(ProbeKind::MLP);
  spec.training.max_epochs = 3;
  const auto r = fit(spec, b.x, b.y, 2, range(0, 90), range(90, 120));
  CHECK(r.report.dev_scores.size() == 18);
  CHECK(spec_of(ProbeKind::LR).grid().size() == 2);
  CHECK(spec_of(ProbeKind::RF).grid().size() == 4);
  CHECK(spec_of(ProbeKind::NB).grid().size() == 1);
}

TEST_CASE("zero-weight LR ties to the first class") {
  LogisticRegression lr(3, 4);
  lr.weights().setZero();
  lr.bias().setZero();
  FeatureMatrix x = FeatureMatrix::Random(5, 3);
  for (auto p : lr.predict(x)) CHECK(p == 0);
  CHECK(argmax_rows(Eigen::MatrixXd::Constant(2, 3, 1.0)) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("predict rejects a width mismatch") {
  LogisticRegression lr(3, 2);
  CHECK_THROWS_AS(lr.predict(FeatureMatrix::Zero(2, 4)), Error);
}

TEST_CASE("score") {
  const std::vector<std::size_t> t{1, 1, 0, 0}, p{1, 0, 0, 0};
  CHECK(score(t, p, Metric::accuracy) == doctest::Approx(0.75));
  CHECK(score(t, p, Metric::macro_f1) == doctest::Approx((0.8 + 2.0 / 3.0) / 2).epsilon(1e-12));
  CHECK(score(t, t, Metric::accuracy) == 1.0);
  CHECK(score(t, t, Metric::macro_f1) == 1.0);
  const std::vector<std::size_t> all0{0, 0, 0, 0};
  CHECK(score(t, all0, Metric::macro_f1) < score(t, all0, Metric::accuracy));
  CHECK_THROWS_AS(score(t, std::vector<std::size_t>{1}, Metric::accuracy), Error);
  CHECK_THROWS_AS(score(std::vector<std::size_t>{}, std::vector<std::size_t>{}, Metric::accuracy), Error);
}

TEST_CASE("LR gradient matches central differences") {
  std::vector<std::size_t> y;
  const auto x = toy5(y);
  LogisticRegression lr(3, 3);
  Rng rng(2);
  for (Eigen::Index i = 0; i < lr.weights().size(); ++i) lr.weights().data()[i] = rng.normal() * 0.5;
  for (Eigen::Index i = 0; i < lr.bias().size(); ++i) lr.bias()(i) = rng.normal() * 0.1;
  const auto rows = range(0, 5);
  LogisticRegression::Gradient g;
  lr.loss_and_gradient(x, y, rows, 0.1, g);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < lr.weights().size(); ++i) {
    double& w = lr.weights().data()[i];
    const double w0 = w;
    w = w0 + h;
    const double up = lr.loss(x, y, rows, 0.1);
    w = w0 - h;
    const double dn = lr.loss(x, y, rows, 0.1);
    w = w0;
    CHECK(rel_err(g.weights.data()[i], (up - dn) / (2 * h)) <= 1e-4);
  }
  for (Eigen::Index i = 0; i < lr.bias().size(); ++i) {
    double& b = lr.bias()(i);
    const double b0 = b;
    b = b0 + h;
    const double up = lr.loss(x, y, rows, 0.1);
    b = b0 - h;
    const double dn = lr.loss(x, y, rows, 0.1);
    b = b0;
    CHECK(rel_err(g.bias(i), (up - dn) / (2 * h)) <= 1e-4);
  }
}

TEST_CASE("MLP gradient matches central differences") {
  std::vector<std::size_t> y;
  const auto x = toy5(y);
  Mlp mlp(3, 4, 3, 6);
  const auto rows = range(0, 5);
  Mlp::Params g;
  mlp.loss_and_gradient(x, y, rows, 0.05, g);
  auto& p = mlp.params();
  const double h = 1e-6;
  auto check_block = [&](double* data, const double* grad, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v0 = data[i];
      data[i] = v0 + h;
      const double up = mlp.loss(x, y, rows, 0.05);
      data[i] = v0 - h;
      const double dn = mlp.loss(x, y, rows, 0.05);
      data[i] = v0;
      CHECK(rel_err(grad[i], (up - dn) / (2 * h)) <= 1e-4);
    }
  };
  check_block(p.w1.data(), g.w1.data(), p.w1.size());
  check_block(p.b1.data(), g.b1.data(), p.b1.size());
  check_block(p.w2.data(), g.w2.data(), p.w2.size());
  check_block(p.b2.data(), g.b2.data(), p.b2.size());
}

TEST_CASE("full-batch LR loss is non-increasing") {
  const auto b = fixtures::gaussian_blobs(200, 5, 1.5, 8);
  LogisticRegression lr(5, 2);
  TrainingOptions o;
  o.batch_size = 0;
  o.max_epochs = 60;
  o.patience = 1000;
  std::vector<double> hist;
  lr.train(b.x, b.y, range(0, 200), {}, 1e-3, o, 1, &hist);
  REQUIRE(hist.size() >= 10);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1] + 1e-8);
}

TEST_CASE("MLP and RF are deterministic for a fixed seed") {
  const auto b = fixtures::gaussian_blobs(200, 6, 2.0, 12);
  for (auto k : {ProbeKind::MLP, ProbeKind::RF}) {
    auto spec = spec_of(k, 77);
    spec.hidden_grid = {20};
    spec.dropout_grid = {0.1};
    spec.training.max_epochs = 20;
    const auto r1 = fit(spec, b.x, b.y, 2, range(0, 150), range(150, 200));
    const auto r2 = fit(spec, b.x, b.y, 2, range(0, 150), range(150, 200));
    CHECK(r1.probe->scores(b.x) == r2.probe->scores(b.x));
    CHECK(r1.report.to_json() == r2.report.to_json());
  }
}

TEST_CASE("RF is invariant under a consistent feature permutation") {
  const auto b = fixtures::gaussian_blobs(300, 8, 2.5, 13);
  std::vector<std::size_t> perm{3, 7, 0, 5, 1, 6, 2, 4};  // new column j holds old column perm[j]
  FeatureMatrix xp(b.x.rows(), b.x.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) xp.col(static_cast<Eigen::Index>(j)) = b.x.col(static_cast<Eigen::Index>(perm[j]));
  std::vector<std::size_t> logical_to_column(8);
  for (std::size_t j = 0; j < perm.size(); ++j) logical_to_column[perm[j]] = j;
  RandomForest a, c;
  ForestOptions oa{.trees = 20};
  ForestOptions oc{.trees = 20, .features_per_split = 0, .logical_to_column = logical_to_column};
  a.train(b.x, b.y, range(0, 300), 2, oa, 5);
  c.train(xp, b.y, range(0, 300), 2, oc, 5);
  for (int depth : {0, 2, 5}) CHECK(a.scores(b.x, depth) == c.scores(xp, depth));
}

TEST_CASE("RF depth truncation answers each depth setting") {
  const auto b = fixtures::gaussian_blobs(200, 4, 1.0, 14);
  RandomForest f;
  f.train(b.x, b.y, range(0, 200), 2, ForestOptions{.trees = 10}, 3);
  const auto shallow = f.scores(b.x, 1);
  const auto full = f.scores(b.x, 0);
  CHECK(shallow != full);
  // Fully grown trees fit their bootstrap samples; the ensemble is near perfect on train.
  ForestProbe p(std::make_shared<RandomForest>(f), 0);
  CHECK(accuracy_on(p, b.x, b.y, range(0, 200)) >= 0.97);
}

TEST_CASE("fit input validation") {
  const auto b = fixtures::gaussian_blobs(40, 3, 4.0, 15);
  std::vector<std::size_t> one(40, 0);
  try {
    fit(spec_of(ProbeKind::NB), b.x, one, 2, range(0, 30), range(30, 40));
    FAIL("expected degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
  auto bad = b.x;
  bad(3, 1) = std::numeric_limits<double>::infinity();
  try {
    fit(spec_of(ProbeKind::NB), bad, b.y, 2, range(0, 30), range(30, 40));
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
  }
  CHECK_THROWS_AS(fit(spec_of(ProbeKind::NB), b.x, b.y, 2, range(0, 30), range(25, 40)), Error);
}

TEST_CASE("tune_and_eval protocols") {
  const auto b = fixtures::gaussian_blobs(500, 5, 3.0, 16);
  ProbingDataset d;
  d.task = "blobs";
  d.labels = {"a", "b"};
  for (std::size_t i = 0; i < 500; ++i) {
    const Split s = i < 400 ? Split::train : (i < 450 ? Split::dev : Split::test);
    d.instances.push_back({s, b.y[i] ? "b" : "a", "s" + std::to_string(i)});
  }
  auto spec = spec_of(ProbeKind::LR);
  const auto fixed = tune_and_eval(spec, d, b.x, Protocol::fixed());
  REQUIRE(fixed.test_accuracy);
  CHECK(fixed.folds.empty());
  // Refit on the same rows reproduces the reported test score on the 50 test rows.
  const auto direct = fit(spec, b.x, b.y, 2, range(0, 400), range(400, 450));
  CHECK(*fixed.test_accuracy == doctest::Approx(accuracy_on(*direct.probe, b.x, b.y, range(450, 500))));

  const auto kf = tune_and_eval(spec, d, b.x, Protocol::kfold(5));
  REQUIRE(kf.folds.size() == 5);
  double mean = 0;
  for (const auto& f : kf.folds) mean += *f.test_accuracy;
  CHECK(*kf.test_accuracy == doctest::Approx(mean / 5).epsilon(1e-12));
  CHECK(*kf.test_accuracy >= 0.9);
  CHECK(Protocol::kfold(5).name() == "inner-kfold(5)");

  auto no_test = d;
  for (auto& inst : no_test.instances)
    if (inst.split == Split::test) inst.split = Split::train;
  CHECK_THROWS_AS(tune_and_eval(spec, no_test, b.x, Protocol::fixed()), Error);
}

TEST_CASE("stratified holdout") {
  std::vector<std::size_t> y;
  for (int i = 0; i < 100; ++i) y.push_back(i < 70 ? 0u : 1u);
  const auto rows = range(0, 100);
  const auto [kept, held] = stratified_holdout(rows, y, 2, 0.2, 4);
  CHECK(kept.size() == 80);
  CHECK(held.size() == 20);
  std::size_t held1 = 0;
  for (auto r : held) held1 += y[r];
  CHECK(held1 == 6);
}
