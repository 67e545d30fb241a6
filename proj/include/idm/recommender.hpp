#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/knn.hpp"
#include "idm/nmf.hpp"

namespace idm {

enum class Algorithm { knn, nmf };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

/// Everything needed to retrain a recommender deterministically.
struct AlgoConfig {
  Algorithm algorithm = Algorithm::knn;
  KnnOptions knn;
  NmfOptions nmf;

  bool operator==(const AlgoConfig&) const = default;
};

using TrainedModel = std::variant<KnnModel, NmfModel>;

TrainedModel train(std::shared_ptr<const RatingsDataset> data, const AlgoConfig& config,
                   std::size_t workers = 1);

const RatingsDataset& dataset_of(const TrainedModel& model);

double predict(const TrainedModel& model, UserIndex u, ItemIndex i);

/// Predicted score of every item for user u (rated items included).
void score_items(const TrainedModel& model, UserIndex u, std::vector<double>& scores);

struct RecommendationList {
  UserIndex user = 0;
  std::vector<ItemIndex> items;
  std::vector<double> scores;
};

/// Top-l items by score descending, ties by ascending item index, among
/// items where eligible[i] is true.
RecommendationList top_items(UserIndex user, std::span<const double> scores,
                             std::span<const char> eligible, std::size_t l);

/// Top-l unrated items for u. Empty when u has rated every item.
RecommendationList recommend(const TrainedModel& model, UserIndex u, std::size_t l);
RecommendationList recommend(const KnnModel& model, UserIndex u, std::size_t l);
RecommendationList recommend(const NmfModel& model, UserIndex u, std::size_t l);

std::vector<RecommendationList> recommend_all(const TrainedModel& model, std::size_t l,
                                              std::size_t workers = 1);

struct AccuracyResult {
  double precision = 0.0;
  double recall = 0.0;
  /// Users with at least one relevant held-out item.
  std::size_t users_evaluated = 0;
};

/// P@l and R@l averaged over users with at least one relevant test item
/// (rating >= relevance_threshold). Test triplets index the model's dataset
/// and must not overlap its ratings.
AccuracyResult evaluate(const TrainedModel& model, std::span<const Triplet> test, std::size_t l,
                        double relevance_threshold, std::size_t workers = 1);

}  // namespace idm
