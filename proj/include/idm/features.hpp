#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/influence.hpp"
#include "idm/knn.hpp"
#include "idm/similarity.hpp"

namespace idm {

inline constexpr std::size_t kNumFeatures = 8;

/// Column names beta1..beta8.
const std::array<std::string, kNumFeatures>& feature_names();

struct FeatureConfig {
  /// Neighborhood size for the standalone kNN structure behind beta3 (used
  /// when no kNN recommender is under study).
  std::size_t k = 60;
  /// sigma for beta2 and beta7.
  SimilarityOptions similarity;
  Distance user_distance = Distance::cosine;
  Distance item_distance = Distance::cosine;
  /// Density radius for beta4; derived from `epsilon_quantile` when absent.
  std::optional<double> epsilon;
  double epsilon_quantile = 0.25;
  /// Pair budget for the quantile estimate; all pairs are used below it.
  std::size_t epsilon_max_pairs = 200000;
  std::uint64_t seed = 42;
  std::size_t l = 10;
  std::size_t workers = 1;
};

/// One row of beta1..beta8 per user.
struct FeatureTable {
  std::vector<std::string> user_ids;
  std::vector<std::array<double, kNumFeatures>> rows;
  FeatureConfig config;
  double epsilon = 0.0;
  std::size_t k = 0;
};

/// |I_u|
std::size_t beta1_profile_size(const RatingsDataset& ds, UserIndex u);

/// Mean sigma(u, v) over v != u.
double beta2_centrality(const RatingsDataset& ds, UserIndex u, const SimilarityOptions& similarity);

/// Number of users v != u with u in N_v.
std::size_t beta3_neighborhood_membership(const KnnModel& model, UserIndex u);

/// Number of users v != u with dist(u, v) < epsilon.
std::size_t beta4_density(const RatingsDataset& ds, UserIndex u, double epsilon, Distance distance);

/// Mean over v != u of Jaccard similarity between I_u and R_v.
double beta5_profile_recommendation_overlap(const RatingsDataset& ds, UserIndex u,
                                            std::span<const ItemSet> lists);

/// Median rater count of the items in I_u (mean of the middle two when even).
double beta6_median_popularity(const RatingsDataset& ds, UserIndex u);

/// sigma between u's ratings and the centroid user (item i -> mean rating
/// of i) over u's rated items. Pearson ignores significance weighting here.
double beta7_similarity_to_centroid(const RatingsDataset& ds, UserIndex u, Similarity similarity);

/// Mean item-item distance over unordered pairs of I_u; 0 when |I_u| < 2.
double beta8_intra_list_distance(const RatingsDataset& ds, UserIndex u, Distance item_distance);

/// The `quantile` of pairwise user distances; pairs are sampled (seeded)
/// when there are more than `max_pairs`.
double distance_quantile(const RatingsDataset& ds, Distance distance, double quantile,
                         std::size_t max_pairs, std::uint64_t seed);

/// Every feature for every user. `neighborhoods` supplies N_v for beta3,
/// `lists` the top-l sets R_v for beta5.
FeatureTable extract_all(const RatingsDataset& ds, const KnnModel& neighborhoods,
                         std::span<const ItemSet> lists, const FeatureConfig& config);

}  // namespace idm
