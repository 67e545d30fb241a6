#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idm/dataset.hpp"

namespace idm {

enum class Similarity { pearson, cosine };

std::string to_string(Similarity s);
Similarity similarity_from_string(const std::string& name);

struct SimilarityOptions {
  Similarity kind = Similarity::pearson;
  /// Pearson significance weighting: similarities over c co-rated items are
  /// scaled by min(c, shrinkage) / shrinkage. 0 disables it.
  std::size_t shrinkage = 50;

  bool operator==(const SimilarityOptions&) const = default;
};

/// A sparse vector with ascending indices.
struct SparseView {
  std::span<const std::uint32_t> index;
  std::span<const double> value;
};

inline SparseView user_vector(const RatingsDataset& ds, UserIndex u) {
  return {ds.user_items(u), ds.user_ratings(u)};
}
inline SparseView item_vector(const RatingsDataset& ds, ItemIndex i) {
  return {ds.item_users(i), ds.item_ratings(i)};
}

double squared_norm(SparseView v);

/// Running sums over the co-rated coordinates of two sparse vectors.
struct CoRatingSums {
  std::size_t count = 0;
  double sum_a = 0, sum_b = 0, sum_ab = 0, sum_aa = 0, sum_bb = 0;

  void add(double a, double b) {
    ++count;
    sum_a += a;
    sum_b += b;
    sum_ab += a * b;
    sum_aa += a * a;
    sum_bb += b * b;
  }
};

/// Pearson correlation over co-rated coordinates, scaled by the
/// significance weight. Zero overlap or zero variance gives 0.
double pearson_from_sums(const CoRatingSums& s, std::size_t shrinkage);

/// Cosine over the full sparse vectors (absent coordinates are zero).
double cosine_from_sums(const CoRatingSums& s, double norm2_a, double norm2_b);

CoRatingSums co_rating_sums(SparseView a, SparseView b);

double similarity(SparseView a, SparseView b, const SimilarityOptions& options);

/// sigma(u, v) for one user pair.
double user_similarity(const RatingsDataset& ds, UserIndex u, UserIndex v,
                       const SimilarityOptions& options);

/// sigma(u, v) for every v (entry u is 0). Bit-identical to
/// user_similarity, computed through the item-major index.
std::vector<double> similarity_row(const RatingsDataset& ds, UserIndex u,
                                   const SimilarityOptions& options);

enum class Distance { cosine, pearson };

std::string to_string(Distance d);
Distance distance_from_string(const std::string& name);

/// 1 - cosine (range [0, 2], [0, 1] for nonnegative ratings) or
/// 1 - Pearson without significance weighting (range [0, 2]).
double distance(SparseView a, SparseView b, Distance kind);

}  // namespace idm
