#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace idm {

/// Row-major sample matrix.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct TreeOptions {
  std::size_t max_depth = 8;
  std::size_t min_samples_leaf = 5;
};

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Mean target of the node's samples.
  double value = 0.0;
  std::size_t samples = 0;
  /// Sum of squared deviations from `value`.
  double sse = 0.0;
  std::size_t depth = 0;

  bool is_leaf() const { return feature < 0; }
};

struct BoundaryRecord {
  std::size_t feature;
  double threshold;
  std::size_t depth;
  /// "root", "left" or "right": which branch of its parent the node is on.
  std::string side;
  /// Mean target of the samples reaching the split.
  double leaf_value;
};

struct FitMetrics {
  double r2 = 0.0;
  double mse = 0.0;
};

/// Greedy CART regression tree with the squared-error criterion.
///
/// Each node takes the (feature, threshold) minimizing the children's total
/// squared error; thresholds are midpoints between consecutive distinct
/// values and samples with x[feature] < threshold go left. Ties prefer the
/// lowest feature index, then the lowest threshold.
class RegressionTree {
 public:
  static RegressionTree fit(const DesignMatrix& x, std::span<const double> y,
                            const TreeOptions& options);

  static RegressionTree from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  double predict(std::span<const double> x) const;

  /// Normalized total squared-error reduction per feature; all zero for a
  /// single leaf.
  std::vector<double> feature_importance() const;

  /// One record per internal node, pre-order.
  std::vector<BoundaryRecord> boundaries() const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t num_features() const { return num_features_; }
  std::size_t depth() const;
  std::size_t num_leaves() const;
  const TreeOptions& options() const { return options_; }

 private:
  std::size_t grow(const DesignMatrix& x, std::span<const double> y, std::vector<std::size_t>& rows,
                   std::size_t begin, std::size_t end, std::size_t depth);

  std::vector<TreeNode> nodes_;
  std::size_t num_features_ = 0;
  TreeOptions options_;
};

/// In-sample or held-out fit quality. R^2 on a constant target is 1 when
/// every residual is zero and 0 otherwise.
FitMetrics fit_metrics(const RegressionTree& tree, const DesignMatrix& x, std::span<const double> y);

}  // namespace idm
