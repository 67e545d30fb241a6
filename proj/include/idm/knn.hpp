#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/similarity.hpp"

namespace idm {

struct KnnOptions {
  std::size_t k = 60;
  SimilarityOptions similarity;

  bool operator==(const KnnOptions&) const = default;
};

struct Neighbor {
  UserIndex user;
  double similarity;

  bool operator==(const Neighbor&) const = default;
};

/// Orders neighbors by similarity descending, then user index ascending.
inline bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.user < b.user;
}

/// Fitted User-kNN model.
///
/// For every user the model keeps min(k + 1, n - 1) ranked candidates; the
/// first min(k, n - 1) form the neighborhood N_u. The extra candidate lets a
/// neighborhood be repaired exactly when one user is removed.
class KnnModel {
 public:
  /// k >= n is reduced to n - 1 (see k_was_reduced()).
  static KnnModel train(std::shared_ptr<const RatingsDataset> data, const KnnOptions& options,
                        std::size_t workers = 1);

  /// Rebuilds a model from stored candidate lists (see model_io).
  static KnnModel from_candidates(std::shared_ptr<const RatingsDataset> data,
                                  const KnnOptions& options,
                                  std::vector<std::vector<Neighbor>> candidates);

  const RatingsDataset& dataset() const { return *data_; }
  const std::shared_ptr<const RatingsDataset>& dataset_ptr() const { return data_; }
  const KnnOptions& options() const { return options_; }

  /// Neighborhood size actually used: min(k, n - 1).
  std::size_t k() const { return effective_k_; }
  bool k_was_reduced() const { return effective_k_ < options_.k; }

  std::span<const Neighbor> neighbors(UserIndex u) const {
    const auto& c = candidates_[u];
    return {c.data(), std::min(effective_k_, c.size())};
  }
  std::span<const Neighbor> candidates(UserIndex u) const { return candidates_[u]; }

  double item_mean(ItemIndex i) const { return item_mean_[i]; }
  std::span<const double> item_means() const { return item_mean_; }
  double global_mean() const { return global_mean_; }

  /// r'(u, i) = sum sigma(u,v) r(v,i) / sum |sigma(u,v)| over neighbors v of u
  /// that rated i. Falls back to the item's mean rating when no neighbor
  /// rated i or every such neighbor has zero similarity.
  double predict(UserIndex u, ItemIndex i) const;

 private:
  KnnModel() = default;

  std::shared_ptr<const RatingsDataset> data_;
  KnnOptions options_;
  std::size_t effective_k_ = 0;
  std::vector<std::vector<Neighbor>> candidates_;
  std::vector<double> item_mean_;
  double global_mean_ = 0.0;
};

/// Mean rating of each item over all its raters, summed in ascending user
/// order.
std::vector<double> item_means(const RatingsDataset& ds);

/// Weighted-average scores of every item for a user with the given neighborhood.
/// Items with no contributing neighbor get item_means[i]. Scores for items
/// the user rated are computed but meaningless.
void knn_score_items(const RatingsDataset& ds, std::span<const Neighbor> neighborhood,
                     std::span<const double> item_means, std::vector<double>& scores);

}  // namespace idm
