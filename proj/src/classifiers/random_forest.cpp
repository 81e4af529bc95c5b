#include <algorithm>
#include <cmath>
#include <numeric>

#include "probekit/classifiers.hpp"
#include "probekit/error.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

struct WorkItem {
  int node;
  std::size_t begin;
  std::size_t end;
  std::uint64_t seed;
};

std::uint64_t child_seed(std::uint64_t parent, std::uint64_t side) {
  return splitmix64(parent ^ (0xa0761d6478bd642fULL * (side + 1)));
}

}  // namespace

RandomForest::Tree RandomForest::grow(const FeatureMatrix& x, std::span<const std::size_t> y,
                                      std::vector<std::size_t> sample, const ForestOptions& opts,
                                      std::uint64_t seed) const {
  const std::size_t d = width_;
  const std::size_t mtry = opts.features_per_split
                               ? std::min(opts.features_per_split, d)
                               : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
  Tree tree;
  tree.nodes.push_back(Node{});
  std::vector<WorkItem> stack{{0, 0, sample.size(), seed}};
  std::vector<std::size_t> counts(classes_);
  std::vector<std::size_t> left(classes_);
  std::vector<std::size_t> right(classes_);
  std::vector<std::size_t> features(d);
  std::vector<std::pair<double, std::size_t>> column;

  while (!stack.empty()) {
    const WorkItem item = stack.back();
    stack.pop_back();
    const std::size_t m = item.end - item.begin;

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = item.begin; i < item.end; ++i) ++counts[y[sample[i]]];
    tree.nodes[static_cast<std::size_t>(item.node)].dist_offset = static_cast<std::uint32_t>(tree.dist.size());
    std::size_t present = 0;
    for (const auto c : counts) {
      tree.dist.push_back(static_cast<float>(static_cast<double>(c) / static_cast<double>(m)));
      present += c ? 1 : 0;
    }
    if (present < 2 || m < 2) continue;

    Rng rng(item.seed);
    std::iota(features.begin(), features.end(), std::size_t{0});
    double best_score = -1.0;
    std::size_t best_col = 0;
    double best_threshold = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t pos = 0; pos < d && evaluated < mtry; ++pos) {
      const auto pick = pos + static_cast<std::size_t>(rng.below(d - pos));
      std::swap(features[pos], features[pick]);
      const std::size_t logical = features[pos];
      const std::size_t col = opts.logical_to_column.empty() ? logical : opts.logical_to_column[logical];

      column.clear();
      for (std::size_t i = item.begin; i < item.end; ++i)
        column.emplace_back(x(static_cast<Eigen::Index>(sample[i]), static_cast<Eigen::Index>(col)), y[sample[i]]);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++evaluated;

      // Maximizing sum(l_k^2)/n_l + sum(r_k^2)/n_r minimizes weighted Gini.
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (const auto c : counts) right_sq += static_cast<double>(c) * static_cast<double>(c);
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto k = column[i].second;
        left_sq += 2.0 * static_cast<double>(left[k]) + 1.0;
        right_sq -= 2.0 * static_cast<double>(right[k]) - 1.0;
        ++left[k];
        --right[k];
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(m - i - 1);
        const double s = left_sq / nl + right_sq / nr;
        if (s > best_score) {
          best_score = s;
          best_col = col;
          double thr = 0.5 * (column[i].first + column[i + 1].first);
          if (thr >= column[i + 1].first) thr = column[i].first;
          best_threshold = thr;
        }
      }
    }
    if (best_score < 0.0) continue;

    const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(item.begin),
                                    sample.begin() + static_cast<std::ptrdiff_t>(item.end), [&](std::size_t r) {
                                      return x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(best_col)) <=
                                             best_threshold;
                                    });
    const auto split_at = static_cast<std::size_t>(mid - sample.begin());
    const int depth = tree.nodes[static_cast<std::size_t>(item.node)].depth;
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(Node{.depth = depth + 1});
    tree.nodes.push_back(Node{.depth = depth + 1});
    auto& node = tree.nodes[static_cast<std::size_t>(item.node)];
    node.feature = static_cast<int>(best_col);
    node.threshold = best_threshold;
    node.left = l;
    node.right = l + 1;
    stack.push_back({l + 1, split_at, item.end, child_seed(item.seed, 1)});
    stack.push_back({l, item.begin, split_at, child_seed(item.seed, 0)});
  }
  return tree;
}

void RandomForest::train(const FeatureMatrix& x, std::span<const std::size_t> y, std::span<const std::size_t> rows,
                         std::size_t classes, const ForestOptions& opts, std::uint64_t seed) {
  if (rows.empty()) throw Error(ErrorKind::invalid_argument, "random forest needs training rows");
  width_ = static_cast<std::size_t>(x.cols());
  classes_ = classes;
  if (!opts.logical_to_column.empty() && opts.logical_to_column.size() != width_)
    throw Error(ErrorKind::invalid_argument, "feature map size does not match feature width");
  trees_.clear();
  trees_.reserve(opts.trees);
  for (std::size_t t = 0; t < opts.trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, "tree:" + std::to_string(t));
    Rng rng(tree_seed);
    std::vector<std::size_t> sample(rows.size());
    for (auto& s : sample) s = rows[static_cast<std::size_t>(rng.below(rows.size()))];
    trees_.push_back(grow(x, y, std::move(sample), opts, splitmix64(tree_seed)));
  }
}

Eigen::MatrixXd RandomForest::scores(const FeatureMatrix& x, int max_depth) const {
  if (static_cast<std::size_t>(x.cols()) != width_)
    throw Error(ErrorKind::invalid_argument, "feature width mismatch for random forest");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(classes_));
  for (const auto& tree : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Node* node = &tree.nodes[0];
      while (node->feature >= 0 && (max_depth <= 0 || node->depth < max_depth)) {
        node = &tree.nodes[static_cast<std::size_t>(x(i, node->feature) <= node->threshold ? node->left : node->right)];
      }
      for (std::size_t c = 0; c < classes_; ++c) out(i, static_cast<Eigen::Index>(c)) += tree.dist[node->dist_offset + c];
    }
  }
  if (!trees_.empty()) out /= static_cast<double>(trees_.size());
  return out;
}

}  // namespace probekit
