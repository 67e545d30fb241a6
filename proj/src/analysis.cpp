#include "idm/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "idm/parallel.hpp"
#include "idm/random.hpp"

namespace idm {

std::vector<RankedInfluence> influence_ranking_curve(const InfluenceReport& report) {
  std::vector<RankedInfluence> curve;
  for (UserIndex u : report.ranking) {
    if (report.failed(u)) continue;
    curve.push_back({curve.size() + 1, u, report.influence[u]});
  }
  return curve;
}

namespace {

void check_finite(const SquareMatrix& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (!std::isfinite(d(i, j))) throw ComputationError("mds: non-finite distance");
    }
  }
}

void center(std::vector<Point2>& points) {
  if (points.empty()) return;
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[c];
    mean /= static_cast<double>(points.size());
    for (auto& p : points) p[c] -= mean;
  }
}

double euclid(const Point2& a, const Point2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace

std::vector<Point2> classical_mds(const SquareMatrix& distances) {
  check_finite(distances);
  const std::size_t n = distances.size();
  std::vector<Point2> points(n, Point2{0.0, 0.0});
  if (n < 2) return points;

  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd b(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      const double d = distances(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      b(i, j) = d * d;
    }
  }
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const Eigen::VectorXd col_mean = b.colwise().mean().transpose();
  const double grand = b.mean();
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      b(i, j) = -0.5 * (b(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw ComputationError("mds: eigendecomposition failed");

  // Eigenvalues come in ascending order.
  for (std::size_t axis = 0; axis < 2 && axis < n; ++axis) {
    const Eigen::Index col = size - 1 - static_cast<Eigen::Index>(axis);
    const double scale = std::sqrt(std::max(0.0, solver.eigenvalues()(col)));
    std::size_t largest = 0;
    for (std::size_t i = 0; i < n; ++i) {
      points[i][axis] = solver.eigenvectors()(static_cast<Eigen::Index>(i), col) * scale;
      if (std::abs(points[i][axis]) > std::abs(points[largest][axis])) largest = i;
    }
    if (points[largest][axis] < 0.0) {
      for (auto& p : points) p[axis] = -p[axis];
    }
  }
  center(points);
  return points;
}

std::vector<Point2> smacof_refine(const SquareMatrix& distances, std::vector<Point2> start,
                                  std::size_t iterations) {
  check_finite(distances);
  const std::size_t n = distances.size();
  if (start.size() != n) throw UsageError("smacof: point count differs from matrix size");
  std::vector<Point2> next(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      Point2 acc{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dhat = euclid(start[i], start[j]);
        const double ratio = dhat > 0.0 ? distances(i, j) / dhat : 0.0;
        acc[0] += ratio * (start[i][0] - start[j][0]);
        acc[1] += ratio * (start[i][1] - start[j][1]);
      }
      next[i] = {acc[0] / static_cast<double>(n), acc[1] / static_cast<double>(n)};
    }
    std::swap(start, next);
  }
  center(start);
  return start;
}

double embedding_stress(const SquareMatrix& distances, std::span<const Point2> points) {
  if (points.size() != distances.size()) throw UsageError("stress: point count differs from matrix size");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = distances(i, j);
      const double e = euclid(points[i], points[j]) - d;
      num += e * e;
      den += d * d;
    }
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
  return num / den;
}

SquareMatrix user_distance_matrix(const RatingsDataset& ds, std::span<const UserIndex> users,
                                  Distance kind, std::size_t workers) {
  const std::size_t n = users.size();
  SquareMatrix d(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto a = user_vector(ds, users[i]);
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = distance(a, user_vector(ds, users[j]), kind);
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) d(i, j) = d(j, i);
  }
  return d;
}

MdsEmbedding mds_embed(const RatingsDataset& ds, const MdsOptions& options) {
  const std::size_t n = ds.num_users();
  if (n < 3) throw UsageError("mds: at least three users required");
  if (options.max_points < 3) throw UsageError("mds: max_points must be >= 3");

  MdsEmbedding result;
  result.distance = options.distance;
  if (n > options.max_points) {
    Rng rng(options.seed);
    for (std::size_t i : sample_indices(n, options.max_points, rng)) {
      result.users.push_back(static_cast<UserIndex>(i));
    }
    std::sort(result.users.begin(), result.users.end());
  } else {
    result.users.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.users[i] = static_cast<UserIndex>(i);
  }
  const SquareMatrix d = user_distance_matrix(ds, result.users, options.distance, options.workers);
  result.coordinates = classical_mds(d);
  if (options.smacof_iters > 0) {
    result.coordinates = smacof_refine(d, std::move(result.coordinates), options.smacof_iters);
  }
  result.stress = embedding_stress(d, result.coordinates);
  return result;
}

std::vector<std::size_t> segment_by_influence(const InfluenceReport& report, std::size_t n_segments) {
  if (n_segments < 1) throw UsageError("segments: n_segments must be >= 1");
  const std::size_t n = report.ranking.size();
  std::vector<std::size_t> labels(report.influence.size(), 0);
  for (std::size_t pos = 0; pos < n; ++pos) labels[report.ranking[pos]] = pos * n_segments / n;
  return labels;
}

std::vector<SegmentDispersion> centrality_dispersion(std::span<const Point2> points,
                                                     std::span<const std::size_t> labels,
                                                     std::size_t n_segments) {
  if (points.size() != labels.size()) throw UsageError("dispersion: one label per point required");
  std::vector<std::vector<std::size_t>> members(n_segments);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_segments) throw UsageError("dispersion: label out of range");
    members[labels[i]].push_back(i);
  }
  std::vector<SegmentDispersion> out;
  for (std::size_t s = 0; s < n_segments; ++s) {
    SegmentDispersion row{s, members[s].size(), 0.0, 0.0};
    const auto& m = members[s];
    for (std::size_t i : m) row.mean_radius += std::hypot(points[i][0], points[i][1]);
    if (!m.empty()) row.mean_radius /= static_cast<double>(m.size());
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      for (std::size_t b = a + 1; b < m.size(); ++b) {
        row.mean_pairwise_distance += euclid(points[m[a]], points[m[b]]);
        ++pairs;
      }
    }
    if (pairs > 0) row.mean_pairwise_distance /= static_cast<double>(pairs);
    out.push_back(row);
  }
  return out;
}

}  // namespace idm
