#include <algorithm>
#include <cmath>
#include <set>

#include "probekit/classifiers.hpp"
#include "probekit/error.hpp"

namespace probekit {

std::string probe_kind_name(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::LR: return "LR";
    case ProbeKind::MLP: return "MLP";
    case ProbeKind::NB: return "NB";
    case ProbeKind::RF: return "RF";
  }
  return "?";
}

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "LR") return ProbeKind::LR;
  if (name == "MLP") return ProbeKind::MLP;
  if (name == "NB") return ProbeKind::NB;
  if (name == "RF") return ProbeKind::RF;
  throw Error(ErrorKind::config, "unknown classifier kind '" + name + "' (expected LR, MLP, NB or RF)");
}

nlohmann::json TrainingOptions::to_json() const {
  return {{"optimizer", "adam"}, {"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2},      {"epsilon", epsilon},             {"batch_size", batch_size},
          {"max_epochs", max_epochs}, {"patience", patience}};
}

nlohmann::json HyperPoint::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (l2) j["l2"] = *l2;
  if (hidden) j["hidden"] = *hidden;
  if (dropout) j["dropout"] = *dropout;
  if (max_depth) {
    if (*max_depth == 0) {
      j["max_depth"] = "inf";
    } else {
      j["max_depth"] = *max_depth;
    }
  }
  return j;
}

ProbeSpec ProbeSpec::defaults(ProbeKind kind, std::uint64_t seed) {
  ProbeSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

std::vector<HyperPoint> ProbeSpec::grid() const {
  std::vector<HyperPoint> out;
  switch (kind) {
    case ProbeKind::LR:
      for (const auto l2 : l2_grid) out.push_back({.l2 = l2});
      break;
    case ProbeKind::MLP:
      for (const auto h : hidden_grid)
        for (const auto p : dropout_grid)
          for (const auto l2 : l2_grid) out.push_back({.l2 = l2, .hidden = h, .dropout = p});
      break;
    case ProbeKind::NB:
      out.push_back({});
      break;
    case ProbeKind::RF:
      for (const auto d : depth_grid) out.push_back({.max_depth = d});
      break;
  }
  if (out.empty()) throw Error(ErrorKind::config, probe_kind_name(kind) + " hyperparameter grid is empty");
  return out;
}

nlohmann::json ProbeSpec::to_json() const {
  nlohmann::json grid_json = nlohmann::json::array();
  for (const auto& p : grid()) grid_json.push_back(p.to_json());
  nlohmann::json j{{"kind", probe_kind_name(kind)}, {"grid", grid_json}, {"seed", seed}};
  if (kind == ProbeKind::LR || kind == ProbeKind::MLP) j["training"] = training.to_json();
  if (kind == ProbeKind::RF) j["trees"] = trees;
  return j;
}

std::vector<std::size_t> Probe::predict(const FeatureMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_width())
    throw Error(ErrorKind::invalid_argument, "feature width " + std::to_string(x.cols()) +
                                                 " does not match trained width " + std::to_string(input_width()));
  return argmax_rows(scores(x));
}

std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

std::string metric_name(Metric metric) { return metric == Metric::accuracy ? "accuracy" : "macro_f1"; }

Metric parse_metric(const std::string& name) {
  if (name == "accuracy") return Metric::accuracy;
  if (name == "macro_f1" || name == "macro-F1") return Metric::macro_f1;
  throw Error(ErrorKind::config, "unknown metric '" + name + "'");
}

double score(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, Metric metric) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorKind::invalid_argument, "score: " + std::to_string(y_true.size()) + " labels vs " +
                                                 std::to_string(y_pred.size()) + " predictions");
  if (y_true.empty()) throw Error(ErrorKind::invalid_argument, "score: empty input");
  const std::size_t n = y_true.size();
  if (metric == Metric::accuracy) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(n);
  }
  std::set<std::size_t> classes(y_true.begin(), y_true.end());
  classes.insert(y_pred.begin(), y_pred.end());
  double total = 0.0;
  for (const auto c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool t = y_true[i] == c;
      const bool p = y_pred[i] == c;
      tp += (t && p) ? 1 : 0;
      fp += (!t && p) ? 1 : 0;
      fn += (t && !p) ? 1 : 0;
    }
    const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    total += precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

double FitReport::test_score(Metric metric) const {
  const auto& v = metric == Metric::accuracy ? test_accuracy : test_macro_f1;
  if (!v) throw Error(ErrorKind::internal, "fit report has no test score");
  return *v;
}

nlohmann::json FitReport::to_json() const {
  nlohmann::json dev = nlohmann::json::array();
  for (const auto& [p, s] : dev_scores) dev.push_back({{"params", p.to_json()}, {"dev_accuracy", s}});
  nlohmann::json j{{"kind", probe_kind_name(kind)}, {"chosen", chosen.to_json()}, {"dev_scores", dev},
                   {"epochs", epochs},              {"seed", seed},               {"training", training}};
  if (test_accuracy) j["test_accuracy"] = *test_accuracy;
  if (test_macro_f1) j["test_macro_f1"] = *test_macro_f1;
  if (!folds.empty()) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& r : folds) f.push_back(r.to_json());
    j["folds"] = f;
  }
  return j;
}

}  // namespace probekit
