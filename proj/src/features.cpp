#include "idm/features.hpp"

#include <algorithm>
#include <cmath>

#include "idm/parallel.hpp"
#include "idm/random.hpp"

namespace idm {

const std::array<std::string, kNumFeatures>& feature_names() {
  static const std::array<std::string, kNumFeatures> names = {
      "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "beta7", "beta8"};
  return names;
}

namespace {

// dist(u, v) for every v through the item-major index; entry u is 0.
std::vector<double> distance_row(const RatingsDataset& ds, UserIndex u, Distance kind) {
  const std::size_t n = ds.num_users();
  std::vector<CoRatingSums> sums(n);
  const auto items = ds.user_items(u);
  const auto ratings = ds.user_ratings(u);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto raters = ds.item_users(items[k]);
    const auto values = ds.item_ratings(items[k]);
    for (std::size_t r = 0; r < raters.size(); ++r) sums[raters[r]].add(ratings[k], values[r]);
  }
  std::vector<double> row(n, 0.0);
  const double norm_u = squared_norm(user_vector(ds, u));
  for (std::size_t v = 0; v < n; ++v) {
    if (v == u) continue;
    if (kind == Distance::cosine) {
      row[v] = 1.0 - cosine_from_sums(sums[v], norm_u,
                                      squared_norm(user_vector(ds, static_cast<UserIndex>(v))));
    } else {
      row[v] = 1.0 - pearson_from_sums(sums[v], 0);
    }
  }
  return row;
}

double mean_of_row_excluding(const std::vector<double>& row, UserIndex u) {
  if (row.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t v = 0; v < row.size(); ++v) {
    if (v != u) total += row[v];
  }
  return total / static_cast<double>(row.size() - 1);
}

}  // namespace

std::size_t beta1_profile_size(const RatingsDataset& ds, UserIndex u) {
  return ds.user_items(u).size();
}

double beta2_centrality(const RatingsDataset& ds, UserIndex u, const SimilarityOptions& similarity) {
  return mean_of_row_excluding(similarity_row(ds, u, similarity), u);
}

std::size_t beta3_neighborhood_membership(const KnnModel& model, UserIndex u) {
  std::size_t count = 0;
  for (UserIndex v = 0; v < model.dataset().num_users(); ++v) {
    if (v == u) continue;
    const auto nbs = model.neighbors(v);
    count += std::any_of(nbs.begin(), nbs.end(), [u](const Neighbor& nb) { return nb.user == u; });
  }
  return count;
}

std::size_t beta4_density(const RatingsDataset& ds, UserIndex u, double epsilon, Distance distance) {
  if (!(epsilon > 0.0)) throw UsageError("beta4: epsilon must be > 0");
  const auto row = distance_row(ds, u, distance);
  std::size_t count = 0;
  for (std::size_t v = 0; v < row.size(); ++v) {
    if (v != u && row[v] < epsilon) ++count;
  }
  return count;
}

double beta5_profile_recommendation_overlap(const RatingsDataset& ds, UserIndex u,
                                            std::span<const ItemSet> lists) {
  if (lists.size() != ds.num_users()) throw UsageError("beta5: one list per user required");
  if (ds.num_users() < 2) return 0.0;
  const auto profile = ds.user_items(u);
  double total = 0.0;
  for (UserIndex v = 0; v < ds.num_users(); ++v) {
    if (v != u) total += jaccard_similarity(profile, lists[v]);
  }
  return total / static_cast<double>(ds.num_users() - 1);
}

double beta6_median_popularity(const RatingsDataset& ds, UserIndex u) {
  std::vector<std::size_t> pop;
  for (ItemIndex i : ds.user_items(u)) pop.push_back(ds.item_users(i).size());
  std::sort(pop.begin(), pop.end());
  const std::size_t mid = pop.size() / 2;
  if (pop.size() % 2 == 1) return static_cast<double>(pop[mid]);
  return (static_cast<double>(pop[mid - 1]) + static_cast<double>(pop[mid])) / 2.0;
}

double beta7_similarity_to_centroid(const RatingsDataset& ds, UserIndex u, Similarity similarity) {
  const auto items = ds.user_items(u);
  const auto ratings = ds.user_ratings(u);
  CoRatingSums sums;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto column = ds.item_ratings(items[k]);
    double total = 0.0;
    for (double r : column) total += r;
    sums.add(ratings[k], total / static_cast<double>(column.size()));
  }
  if (similarity == Similarity::pearson) return pearson_from_sums(sums, 0);
  return cosine_from_sums(sums, sums.sum_aa, sums.sum_bb);
}

double beta8_intra_list_distance(const RatingsDataset& ds, UserIndex u, Distance item_distance) {
  const auto items = ds.user_items(u);
  if (items.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < items.size(); ++a) {
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      total += distance(item_vector(ds, items[a]), item_vector(ds, items[b]), item_distance);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double distance_quantile(const RatingsDataset& ds, Distance kind, double quantile,
                         std::size_t max_pairs, std::uint64_t seed) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw UsageError("epsilon quantile must lie in [0, 1]");
  const std::size_t n = ds.num_users();
  if (n < 2) throw UsageError("epsilon quantile needs at least two users");
  std::vector<double> values;
  const double total_pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  if (total_pairs <= static_cast<double>(max_pairs)) {
    for (UserIndex u = 0; u < n; ++u) {
      for (UserIndex v = u + 1; v < n; ++v) {
        values.push_back(distance(user_vector(ds, u), user_vector(ds, v), kind));
      }
    }
  } else {
    Rng rng(seed);
    values.reserve(max_pairs);
    while (values.size() < max_pairs) {
      const auto u = static_cast<UserIndex>(rng.below(n));
      const auto v = static_cast<UserIndex>(rng.below(n));
      if (u == v) continue;
      values.push_back(distance(user_vector(ds, u), user_vector(ds, v), kind));
    }
  }
  std::sort(values.begin(), values.end());
  const double pos = quantile * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

FeatureTable extract_all(const RatingsDataset& ds, const KnnModel& neighborhoods,
                         std::span<const ItemSet> lists, const FeatureConfig& config) {
  if (&neighborhoods.dataset() != &ds && !(neighborhoods.dataset() == ds)) {
    throw UsageError("extract_all: neighborhood model was fitted on another dataset");
  }
  if (lists.size() != ds.num_users()) throw UsageError("extract_all: one list per user required");
  const std::size_t n = ds.num_users();

  FeatureTable table;
  table.config = config;
  table.k = neighborhoods.k();
  table.user_ids = ds.user_ids();
  table.epsilon = config.epsilon ? *config.epsilon
                                 : distance_quantile(ds, config.user_distance, config.epsilon_quantile,
                                                     config.epsilon_max_pairs, config.seed);
  if (!(table.epsilon > 0.0)) {
    // A zero quantile (many identical users) still needs a positive radius.
    table.epsilon = std::nextafter(0.0, 1.0);
  }

  std::vector<std::size_t> membership(n, 0);
  for (UserIndex v = 0; v < n; ++v) {
    for (const auto& nb : neighborhoods.neighbors(v)) ++membership[nb.user];
  }

  table.rows.resize(n);
  parallel_for(n, config.workers, [&](std::size_t index) {
    const auto u = static_cast<UserIndex>(index);
    auto& row = table.rows[u];
    row[0] = static_cast<double>(beta1_profile_size(ds, u));
    row[1] = beta2_centrality(ds, u, config.similarity);
    row[2] = static_cast<double>(membership[u]);
    const auto dist = distance_row(ds, u, config.user_distance);
    std::size_t dense = 0;
    for (std::size_t v = 0; v < n; ++v) dense += (v != u && dist[v] < table.epsilon) ? 1 : 0;
    row[3] = static_cast<double>(dense);
    row[4] = beta5_profile_recommendation_overlap(ds, u, lists);
    row[5] = beta6_median_popularity(ds, u);
    row[6] = beta7_similarity_to_centroid(ds, u, config.similarity.kind);
    row[7] = beta8_intra_list_distance(ds, u, config.item_distance);
  });
  return table;
}

}  // namespace idm
