#include "idm/knn.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "idm/parallel.hpp"

namespace idm {

std::vector<double> item_means(const RatingsDataset& ds) {
  std::vector<double> means(ds.num_items(), 0.0);
  for (ItemIndex i = 0; i < ds.num_items(); ++i) {
    const auto ratings = ds.item_ratings(i);
    double sum = 0.0;
    for (double r : ratings) sum += r;
    means[i] = ratings.empty() ? 0.0 : sum / static_cast<double>(ratings.size());
  }
  return means;
}

KnnModel KnnModel::train(std::shared_ptr<const RatingsDataset> data, const KnnOptions& options,
                         std::size_t workers) {
  if (!data) throw UsageError("train_knn: no dataset");
  if (options.k < 1) throw UsageError("train_knn: k must be >= 1");
  const RatingsDataset& ds = *data;
  const std::size_t n = ds.num_users();

  KnnModel model;
  model.data_ = std::move(data);
  model.options_ = options;
  model.effective_k_ = std::min(options.k, n - 1);
  if (model.k_was_reduced()) {
    std::clog << "warning: k = " << options.k << " >= number of users " << n << "; using k = "
              << model.effective_k_ << '\n';
  }
  const std::size_t keep = std::min(options.k + 1, n - 1);
  model.candidates_.resize(n);
  parallel_for(n, workers, [&](std::size_t u) {
    const auto row = similarity_row(ds, static_cast<UserIndex>(u), options.similarity);
    std::vector<Neighbor> all;
    all.reserve(n - 1);
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u) all.push_back({static_cast<UserIndex>(v), row[v]});
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      neighbor_before);
    all.resize(keep);
    model.candidates_[u] = std::move(all);
  });

  model.item_mean_ = ::idm::item_means(ds);
  double total = 0.0;
  for (const auto& t : ds.triplets()) total += t.rating;
  model.global_mean_ = total / static_cast<double>(ds.num_ratings());
  return model;
}

KnnModel KnnModel::from_candidates(std::shared_ptr<const RatingsDataset> data,
                                   const KnnOptions& options,
                                   std::vector<std::vector<Neighbor>> candidates) {
  if (!data) throw UsageError("KnnModel: no dataset");
  const std::size_t n = data->num_users();
  if (candidates.size() != n) throw DataError("KnnModel: candidate table does not match dataset");
  for (std::size_t u = 0; u < n; ++u) {
    for (const auto& nb : candidates[u]) {
      if (nb.user >= n || nb.user == u) throw DataError("KnnModel: invalid neighbor entry");
    }
  }
  KnnModel model;
  model.data_ = std::move(data);
  model.options_ = options;
  model.effective_k_ = std::min(options.k, n - 1);
  model.candidates_ = std::move(candidates);
  model.item_mean_ = ::idm::item_means(*model.data_);
  double total = 0.0;
  for (const auto& t : model.data_->triplets()) total += t.rating;
  model.global_mean_ = total / static_cast<double>(model.data_->num_ratings());
  return model;
}

double KnnModel::predict(UserIndex u, ItemIndex i) const {
  double num = 0.0;
  double den = 0.0;
  bool covered = false;
  for (const auto& nb : neighbors(u)) {
    if (auto r = data_->rating(nb.user, i)) {
      num += nb.similarity * *r;
      den += std::abs(nb.similarity);
      covered = true;
    }
  }
  if (covered && den > 0.0) return num / den;
  if (data_->item_users(i).empty()) return global_mean_;
  return item_mean_[i];
}

void knn_score_items(const RatingsDataset& ds, std::span<const Neighbor> neighborhood,
                     std::span<const double> means, std::vector<double>& scores) {
  const std::size_t m = ds.num_items();
  scores.assign(m, 0.0);
  std::vector<double> den(m, 0.0);
  std::vector<char> covered(m, 0);
  for (const auto& nb : neighborhood) {
    const auto items = ds.user_items(nb.user);
    const auto ratings = ds.user_ratings(nb.user);
    const double weight = std::abs(nb.similarity);
    for (std::size_t k = 0; k < items.size(); ++k) {
      scores[items[k]] += nb.similarity * ratings[k];
      den[items[k]] += weight;
      covered[items[k]] = 1;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (covered[i] && den[i] > 0.0) {
      scores[i] /= den[i];
    } else {
      scores[i] = means[i];
    }
  }
}

}  // namespace idm
