#include "idm/regression_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "idm/common.hpp"

namespace idm {

DesignMatrix::DesignMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) throw UsageError("DesignMatrix: size mismatch");
}

namespace {

struct NodeStats {
  double mean = 0.0;
  double sse = 0.0;
};

NodeStats node_stats(std::span<const double> y, const std::vector<std::size_t>& rows,
                     std::size_t begin, std::size_t end) {
  NodeStats s;
  const double count = static_cast<double>(end - begin);
  double total = 0.0;
  for (std::size_t k = begin; k < end; ++k) total += y[rows[k]];
  s.mean = total / count;
  for (std::size_t k = begin; k < end; ++k) {
    const double d = y[rows[k]] - s.mean;
    s.sse += d * d;
  }
  return s;
}

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

}  // namespace

RegressionTree RegressionTree::fit(const DesignMatrix& x, std::span<const double> y,
                                   const TreeOptions& options) {
  if (x.rows() == 0 || y.empty()) throw UsageError("fit_tree: empty input");
  if (x.rows() != y.size()) throw UsageError("fit_tree: feature rows and targets differ in length");
  if (options.max_depth < 1 || options.max_depth > 10) {
    throw UsageError("fit_tree: max_depth must lie in [1, 10]");
  }
  if (options.min_samples_leaf < 1) throw UsageError("fit_tree: min_samples_leaf must be >= 1");
  for (double v : y) {
    if (!std::isfinite(v)) throw UsageError("fit_tree: non-finite target");
  }
  RegressionTree tree;
  tree.options_ = options;
  tree.num_features_ = x.cols();
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  tree.grow(x, y, rows, 0, rows.size(), 0);
  return tree;
}

std::size_t RegressionTree::grow(const DesignMatrix& x, std::span<const double> y,
                                 std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                                 std::size_t depth) {
  const std::size_t index = nodes_.size();
  const NodeStats stats = node_stats(y, rows, begin, end);
  nodes_.push_back(TreeNode{});
  TreeNode& fresh = nodes_.back();
  fresh.value = stats.mean;
  fresh.sse = stats.sse;
  fresh.samples = end - begin;
  fresh.depth = depth;

  const std::size_t count = end - begin;
  const std::size_t min_leaf = options_.min_samples_leaf;
  const auto [lo_it, hi_it] = std::minmax_element(
      rows.begin() + static_cast<std::ptrdiff_t>(begin), rows.begin() + static_cast<std::ptrdiff_t>(end),
      [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  const bool pure = y[*lo_it] == y[*hi_it];
  if (depth >= options_.max_depth || count < 2 * min_leaf || pure) return index;

  // Squared error of a sample set from sums of deviations c = y - node mean.
  auto sse = [](double sum, double sum_sq, double n) { return std::max(0.0, sum_sq - sum * sum / n); };
  const double tie_band = 1e-12 * (stats.sse + 1e-300);

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_error = 0.0;
  std::vector<std::size_t> order(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                 rows.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    double total = 0.0, total_sq = 0.0;
    for (std::size_t r : order) {
      const double c = y[r] - stats.mean;
      total += c;
      total_sq += c * c;
    }
    double left = 0.0, left_sq = 0.0;
    for (std::size_t p = 1; p < count; ++p) {
      const double c = y[order[p - 1]] - stats.mean;
      left += c;
      left_sq += c * c;
      const double a = x(order[p - 1], f);
      const double b = x(order[p], f);
      if (!(a < b) || p < min_leaf || count - p < min_leaf) continue;
      const double nl = static_cast<double>(p);
      const double nr = static_cast<double>(count - p);
      const double error = sse(left, left_sq, nl) + sse(total - left, total_sq - left_sq, nr);
      if (best_feature < 0 || error < best_error - tie_band) {
        best_feature = static_cast<int>(f);
        best_threshold = split_threshold(a, b);
        best_error = error;
      }
    }
  }
  if (best_feature < 0) return index;

  const auto split = std::stable_partition(
      rows.begin() + static_cast<std::ptrdiff_t>(begin), rows.begin() + static_cast<std::ptrdiff_t>(end),
      [&](std::size_t r) { return x(r, static_cast<std::size_t>(best_feature)) < best_threshold; });
  const auto mid = static_cast<std::size_t>(split - rows.begin());
  const std::size_t left_child = grow(x, y, rows, begin, mid, depth + 1);
  const std::size_t right_child = grow(x, y, rows, mid, end, depth + 1);
  TreeNode& node = nodes_[index];
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = static_cast<int>(left_child);
  node.right = static_cast<int>(right_child);
  return index;
}

double RegressionTree::predict(std::span<const double> x) const {
  if (x.size() != num_features_) throw UsageError("predict_tree: wrong feature count");
  std::size_t k = 0;
  while (!nodes_[k].is_leaf()) {
    const TreeNode& node = nodes_[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left
                                                                                            : node.right);
  }
  return nodes_[k].value;
}

std::vector<double> RegressionTree::feature_importance() const {
  std::vector<double> importance(num_features_, 0.0);
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    const double reduction = node.sse - nodes_[static_cast<std::size_t>(node.left)].sse -
                             nodes_[static_cast<std::size_t>(node.right)].sse;
    importance[static_cast<std::size_t>(node.feature)] += std::max(0.0, reduction);
  }
  const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  }
  return importance;
}

std::vector<BoundaryRecord> RegressionTree::boundaries() const {
  std::vector<BoundaryRecord> records;
  std::function<void(std::size_t, const char*)> walk = [&](std::size_t k, const char* side) {
    const TreeNode& node = nodes_[k];
    if (node.is_leaf()) return;
    records.push_back({static_cast<std::size_t>(node.feature), node.threshold, node.depth, side, node.value});
    walk(static_cast<std::size_t>(node.left), "left");
    walk(static_cast<std::size_t>(node.right), "right");
  };
  if (!nodes_.empty()) walk(0, "root");
  return records;
}

std::size_t RegressionTree::depth() const {
  std::size_t d = 0;
  for (const auto& node : nodes_) d = std::max(d, node.depth);
  return d;
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

nlohmann::ordered_json RegressionTree::to_json() const {
  std::function<nlohmann::ordered_json(std::size_t)> node_json = [&](std::size_t k) {
    const TreeNode& node = nodes_[k];
    nlohmann::ordered_json j;
    if (!node.is_leaf()) {
      j["feature"] = node.feature;
      j["threshold"] = node.threshold;
    }
    j["value"] = node.value;
    j["samples"] = node.samples;
    j["sse"] = node.sse;
    j["depth"] = node.depth;
    if (!node.is_leaf()) {
      j["left"] = node_json(static_cast<std::size_t>(node.left));
      j["right"] = node_json(static_cast<std::size_t>(node.right));
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["max_depth"] = options_.max_depth;
  j["min_samples_leaf"] = options_.min_samples_leaf;
  j["num_features"] = num_features_;
  j["root"] = node_json(0);
  return j;
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree tree;
  try {
    tree.options_.max_depth = j.at("max_depth").get<std::size_t>();
    tree.options_.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    tree.num_features_ = j.at("num_features").get<std::size_t>();
    std::function<std::size_t(const nlohmann::json&)> load = [&](const nlohmann::json& n) {
      const std::size_t index = tree.nodes_.size();
      tree.nodes_.push_back(TreeNode{});
      TreeNode node;
      node.value = n.at("value").get<double>();
      node.samples = n.at("samples").get<std::size_t>();
      node.sse = n.at("sse").get<double>();
      node.depth = n.at("depth").get<std::size_t>();
      if (n.contains("feature")) {
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= tree.num_features_) {
          throw DataError("tree JSON: feature index out of range");
        }
        node.left = static_cast<int>(load(n.at("left")));
        node.right = static_cast<int>(load(n.at("right")));
      }
      tree.nodes_[index] = node;
      return index;
    };
    load(j.at("root"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tree JSON: ") + e.what());
  }
  return tree;
}

FitMetrics fit_metrics(const RegressionTree& tree, const DesignMatrix& x, std::span<const double> y) {
  if (x.rows() != y.size() || y.empty()) throw UsageError("fit_metrics: size mismatch");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double e = y[r] - tree.predict(x.row(r));
    ss_res += e * e;
    ss_tot += (y[r] - mean) * (y[r] - mean);
  }
  FitMetrics m;
  m.mse = ss_res / n;
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - ss_res / ss_tot;
  } else {
    m.r2 = ss_res == 0.0 ? 1.0 : 0.0;
  }
  return m;
}

}  // namespace idm
