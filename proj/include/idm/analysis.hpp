#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/influence.hpp"
#include "idm/similarity.hpp"

namespace idm {

struct RankedInfluence {
  /// 1-based.
  std::size_t rank;
  UserIndex user;
  double influence;
};

/// Successful users by influence descending (ties by index).
std::vector<RankedInfluence> influence_ranking_curve(const InfluenceReport& report);

/// Dense symmetric n x n matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

using Point2 = std::array<double, 2>;

/// Torgerson scaling: top two components of the double-centered squared
/// distances. Output columns are centered; each axis is flipped so that its
/// largest-magnitude coordinate is positive.
std::vector<Point2> classical_mds(const SquareMatrix& distances);

/// Guttman-transform iterations (unit weights), recentered at the end.
std::vector<Point2> smacof_refine(const SquareMatrix& distances, std::vector<Point2> start,
                                  std::size_t iterations);

/// sum (dhat - d)^2 / sum d^2 over pairs i < j; 0 for an all-zero input that
/// is reproduced exactly.
double embedding_stress(const SquareMatrix& distances, std::span<const Point2> points);

/// Pairwise user distances among `users`.
SquareMatrix user_distance_matrix(const RatingsDataset& ds, std::span<const UserIndex> users,
                                  Distance kind, std::size_t workers = 1);

struct MdsOptions {
  Distance distance = Distance::cosine;
  std::size_t max_points = 2000;
  std::uint64_t seed = 42;
  std::size_t smacof_iters = 0;
  std::size_t workers = 1;
};

struct MdsEmbedding {
  /// Embedded users, ascending.
  std::vector<UserIndex> users;
  std::vector<Point2> coordinates;
  double stress = 0.0;
  Distance distance = Distance::cosine;
};

/// Embeds every user, or a seeded sample of max_points users.
MdsEmbedding mds_embed(const RatingsDataset& ds, const MdsOptions& options);

/// Label per user: the position of the user in the report's ranking cut into
/// n_segments contiguous blocks; 0 is the most influential.
std::vector<std::size_t> segment_by_influence(const InfluenceReport& report, std::size_t n_segments);

struct SegmentDispersion {
  std::size_t segment;
  std::size_t count;
  double mean_radius;
  double mean_pairwise_distance;
};

/// Per segment: mean distance to the origin and mean distance between its
/// members. `labels` holds one label per point.
std::vector<SegmentDispersion> centrality_dispersion(std::span<const Point2> points,
                                                     std::span<const std::size_t> labels,
                                                     std::size_t n_segments);

}  // namespace idm
