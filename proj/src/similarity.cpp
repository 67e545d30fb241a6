#include "idm/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace idm {

std::string to_string(Similarity s) { return s == Similarity::pearson ? "pearson" : "cosine"; }

Similarity similarity_from_string(const std::string& name) {
  if (name == "pearson") return Similarity::pearson;
  if (name == "cosine") return Similarity::cosine;
  throw UsageError("unknown similarity '" + name + "' (expected pearson or cosine)");
}

std::string to_string(Distance d) { return d == Distance::cosine ? "cosine" : "pearson"; }

Distance distance_from_string(const std::string& name) {
  if (name == "cosine") return Distance::cosine;
  if (name == "pearson") return Distance::pearson;
  throw UsageError("unknown distance '" + name + "' (expected cosine or pearson)");
}

double squared_norm(SparseView v) {
  double s = 0.0;
  for (double x : v.value) s += x * x;
  return s;
}

double pearson_from_sums(const CoRatingSums& s, std::size_t shrinkage) {
  if (s.count < 2) return 0.0;
  const double c = static_cast<double>(s.count);
  const double cov = s.sum_ab - s.sum_a * s.sum_b / c;
  const double var_a = s.sum_aa - s.sum_a * s.sum_a / c;
  const double var_b = s.sum_bb - s.sum_b * s.sum_b / c;
  // Cancellation leaves tiny residues on constant vectors.
  if (var_a <= 1e-12 * s.sum_aa || var_b <= 1e-12 * s.sum_bb) return 0.0;
  double r = std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
  if (shrinkage > 0) {
    r *= static_cast<double>(std::min(s.count, shrinkage)) / static_cast<double>(shrinkage);
  }
  return r;
}

double cosine_from_sums(const CoRatingSums& s, double norm2_a, double norm2_b) {
  if (s.count == 0) return 0.0;
  const double denom = std::sqrt(norm2_a * norm2_b);
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(s.sum_ab / denom, -1.0, 1.0);
}

CoRatingSums co_rating_sums(SparseView a, SparseView b) {
  CoRatingSums sums;
  std::size_t x = 0, y = 0;
  while (x < a.index.size() && y < b.index.size()) {
    if (a.index[x] < b.index[y]) {
      ++x;
    } else if (b.index[y] < a.index[x]) {
      ++y;
    } else {
      sums.add(a.value[x], b.value[y]);
      ++x;
      ++y;
    }
  }
  return sums;
}

double similarity(SparseView a, SparseView b, const SimilarityOptions& options) {
  const CoRatingSums sums = co_rating_sums(a, b);
  if (options.kind == Similarity::pearson) return pearson_from_sums(sums, options.shrinkage);
  return cosine_from_sums(sums, squared_norm(a), squared_norm(b));
}

double user_similarity(const RatingsDataset& ds, UserIndex u, UserIndex v,
                       const SimilarityOptions& options) {
  return similarity(user_vector(ds, u), user_vector(ds, v), options);
}

std::vector<double> similarity_row(const RatingsDataset& ds, UserIndex u,
                                   const SimilarityOptions& options) {
  const std::size_t n = ds.num_users();
  std::vector<CoRatingSums> sums(n);
  const auto items = ds.user_items(u);
  const auto ratings = ds.user_ratings(u);
  // Items ascending, so every pair accumulates in the same order as the
  // pairwise merge in co_rating_sums.
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto raters = ds.item_users(items[k]);
    const auto values = ds.item_ratings(items[k]);
    for (std::size_t r = 0; r < raters.size(); ++r) sums[raters[r]].add(ratings[k], values[r]);
  }
  std::vector<double> row(n, 0.0);
  if (options.kind == Similarity::pearson) {
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u) row[v] = pearson_from_sums(sums[v], options.shrinkage);
    }
  } else {
    const double norm_u = squared_norm(user_vector(ds, u));
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u || sums[v].count == 0) continue;
      row[v] = cosine_from_sums(sums[v], norm_u, squared_norm(user_vector(ds, static_cast<UserIndex>(v))));
    }
  }
  return row;
}

double distance(SparseView a, SparseView b, Distance kind) {
  const CoRatingSums sums = co_rating_sums(a, b);
  if (kind == Distance::cosine) return 1.0 - cosine_from_sums(sums, squared_norm(a), squared_norm(b));
  return 1.0 - pearson_from_sums(sums, 0);
}

}  // namespace idm
