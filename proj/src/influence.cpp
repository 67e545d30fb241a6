#include "idm/influence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idm/parallel.hpp"

namespace idm {

ItemSet as_item_set(const RecommendationList& list) {
  ItemSet set = list.items;
  std::sort(set.begin(), set.end());
  return set;
}

namespace {

std::size_t intersection_size(std::span<const ItemIndex> a, std::span<const ItemIndex> b) {
  std::size_t common = 0;
  std::size_t x = 0, y = 0;
  while (x < a.size() && y < b.size()) {
    if (a[x] < b[y]) {
      ++x;
    } else if (b[y] < a[x]) {
      ++y;
    } else {
      ++common;
      ++x;
      ++y;
    }
  }
  return common;
}

double sum_distances(const std::vector<double>& distance) {
  double total = 0.0;
  for (double d : distance) total += d;
  return total;
}

// Top-l lists of a model trained on a reduced dataset, mapped back to the
// original item indices.
std::vector<ItemSet> reduced_lists(const TrainedModel& model, const ReducedDataset& reduced,
                                   std::size_t l) {
  std::vector<ItemSet> lists(reduced.data.num_users());
  for (UserIndex v = 0; v < reduced.data.num_users(); ++v) {
    const auto list = recommend(model, v, l);
    ItemSet set;
    set.reserve(list.items.size());
    for (ItemIndex i : list.items) set.push_back(reduced.item_origin[i]);
    std::sort(set.begin(), set.end());
    lists[v] = std::move(set);
  }
  return lists;
}

LeaveOneOutResult compare_lists(UserIndex u, const std::vector<ItemSet>& base,
                                const ReducedDataset& reduced,
                                const std::vector<ItemSet>& without) {
  LeaveOneOutResult result;
  result.removed = u;
  result.distance.assign(base.size(), 0.0);
  for (UserIndex v = 0; v < reduced.user_origin.size(); ++v) {
    const UserIndex original = reduced.user_origin[v];
    result.distance[original] = jaccard_distance(base[original], without[v]);
  }
  result.influence = sum_distances(result.distance);
  return result;
}

std::vector<ItemSet> all_lists(const TrainedModel& model, std::size_t l, std::size_t workers) {
  const auto lists = recommend_all(model, l, workers);
  std::vector<ItemSet> sets(lists.size());
  for (std::size_t v = 0; v < lists.size(); ++v) sets[v] = as_item_set(lists[v]);
  return sets;
}

}  // namespace

double jaccard_distance(std::span<const ItemIndex> a, std::span<const ItemIndex> b) {
  if (a.empty() && b.empty()) return 0.0;
  const std::size_t common = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

double jaccard_similarity(std::span<const ItemIndex> a, std::span<const ItemIndex> b) {
  if (a.empty() && b.empty()) return 1.0;
  const std::size_t common = intersection_size(a, b);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

LeaveOneOutResult leave_one_out_oracle(const RatingsDataset& ds, const AlgoConfig& config,
                                       UserIndex u, std::size_t l) {
  if (u >= ds.num_users()) throw UsageError("influence: user index out of range");
  auto full_data = std::make_shared<const RatingsDataset>(ds);
  const TrainedModel full = train(full_data, config);
  const auto base = all_lists(full, l, 1);

  const ReducedDataset reduced = remove_user(ds, u);
  auto reduced_data = std::make_shared<const RatingsDataset>(reduced.data);
  const TrainedModel without = train(reduced_data, config);
  return compare_lists(u, base, reduced, reduced_lists(without, reduced, l));
}

double influence_oracle(const RatingsDataset& ds, const AlgoConfig& config, UserIndex u,
                        std::size_t l) {
  return leave_one_out_oracle(ds, config, u, l).influence;
}

// ---------------------------------------------------------------------------

LeaveOneOutEngine::LeaveOneOutEngine(std::shared_ptr<const RatingsDataset> data,
                                     const AlgoConfig& config, const InfluenceOptions& options)
    : LeaveOneOutEngine(train(std::move(data), config, options.workers), config, options) {}

LeaveOneOutEngine::LeaveOneOutEngine(TrainedModel full_model, const AlgoConfig& config,
                                     const InfluenceOptions& options)
    : model_(std::move(full_model)), config_(config), options_(options) {
  if (options_.l < 1) throw UsageError("influence: l must be >= 1");
  const bool is_knn = std::holds_alternative<KnnModel>(model_);
  if (is_knn != (config_.algorithm == Algorithm::knn)) {
    throw UsageError("influence: model does not match the configured algorithm");
  }
  base_ = all_lists(model_, options_.l, options_.workers);
}

LeaveOneOutResult LeaveOneOutEngine::run(UserIndex u) const {
  if (u >= dataset().num_users()) throw UsageError("influence: user index out of range");
  if (dataset().num_users() < 2) throw UsageError("influence: need at least two users");
  return config_.algorithm == Algorithm::knn ? run_knn(u) : run_nmf(u);
}

LeaveOneOutResult LeaveOneOutEngine::run_knn(UserIndex u) const {
  const auto& model = std::get<KnnModel>(model_);
  const RatingsDataset& ds = model.dataset();
  const std::size_t n = ds.num_users();
  const std::size_t m = ds.num_items();
  const std::size_t reduced_k = std::min(config_.knn.k, n - 2);
  const auto removed_items = ds.user_items(u);

  // Item means without u, summed in the same order a fresh model would use.
  std::vector<double> means(model.item_means().begin(), model.item_means().end());
  std::vector<char> orphaned(m, 0);
  for (ItemIndex i : removed_items) {
    const auto raters = ds.item_users(i);
    const auto ratings = ds.item_ratings(i);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < raters.size(); ++r) {
      if (raters[r] == u) continue;
      sum += ratings[r];
      ++count;
    }
    if (count == 0) {
      orphaned[i] = 1;
    } else {
      means[i] = sum / static_cast<double>(count);
    }
  }

  LeaveOneOutResult result;
  result.removed = u;
  result.distance.assign(n, 0.0);
  std::vector<Neighbor> neighborhood;
  std::vector<double> scores;
  std::vector<char> eligible(m);
  for (UserIndex v = 0; v < n; ++v) {
    if (v == u) continue;
    const auto current = model.neighbors(v);
    bool affected = std::any_of(current.begin(), current.end(),
                                [u](const Neighbor& nb) { return nb.user == u; });
    if (!affected) {
      // Only fallback-scored items rated by u can move.
      for (ItemIndex i : removed_items) {
        if (ds.has_rated(v, i)) continue;
        const bool scored = std::any_of(current.begin(), current.end(), [&](const Neighbor& nb) {
          return nb.similarity != 0.0 && ds.has_rated(nb.user, i);
        });
        if (!scored) {
          affected = true;
          break;
        }
      }
    }
    if (!affected) continue;

    neighborhood.clear();
    for (const auto& nb : model.candidates(v)) {
      if (neighborhood.size() == reduced_k) break;
      if (nb.user != u) neighborhood.push_back(nb);
    }
    knn_score_items(ds, neighborhood, means, scores);
    std::fill(eligible.begin(), eligible.end(), 1);
    for (ItemIndex i : ds.user_items(v)) eligible[i] = 0;
    for (ItemIndex i : removed_items) {
      if (orphaned[i]) eligible[i] = 0;
    }
    const auto list = top_items(v, scores, eligible, options_.l);
    result.distance[v] = jaccard_distance(base_[v], as_item_set(list));
  }
  result.influence = sum_distances(result.distance);
  return result;
}

LeaveOneOutResult LeaveOneOutEngine::run_nmf(UserIndex u) const {
  const auto& model = std::get<NmfModel>(model_);
  const ReducedDataset reduced = remove_user(model.dataset(), u);
  auto reduced_data = std::make_shared<const RatingsDataset>(reduced.data);
  TrainedModel without = [&]() -> TrainedModel {
    if (!options_.warm_start) return NmfModel::train(reduced_data, config_.nmf);
    const std::size_t f = model.factors();
    FactorMatrix p{reduced.user_origin.size(), f, {}};
    FactorMatrix q{reduced.item_origin.size(), f, {}};
    for (UserIndex r : reduced.user_origin) {
      const auto row = model.user_factors().row(r);
      p.values.insert(p.values.end(), row.begin(), row.end());
    }
    for (ItemIndex i : reduced.item_origin) {
      const auto row = model.item_factors().row(i);
      q.values.insert(q.values.end(), row.begin(), row.end());
    }
    return NmfModel::train_from(reduced_data, config_.nmf, std::move(p), std::move(q),
                                options_.warm_start_iters);
  }();
  return compare_lists(u, base_, reduced, reduced_lists(without, reduced, options_.l));
}

// ---------------------------------------------------------------------------

std::size_t InfluenceReport::num_failed() const {
  return static_cast<std::size_t>(
      std::count_if(failure.begin(), failure.end(), [](const std::string& f) { return !f.empty(); }));
}

void rank_report(InfluenceReport& report) {
  const std::size_t n = report.influence.size();
  report.failure.resize(n);
  report.ranking.resize(n);
  std::iota(report.ranking.begin(), report.ranking.end(), UserIndex{0});
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](UserIndex a, UserIndex b) {
    const bool fa = report.failed(a), fb = report.failed(b);
    if (fa != fb) return fb;
    if (fa) return false;
    return report.influence[a] > report.influence[b];
  });
}

InfluenceReport influence_all(const LeaveOneOutEngine& engine, std::size_t workers) {
  const std::size_t n = engine.dataset().num_users();
  InfluenceReport report;
  report.influence.assign(n, 0.0);
  report.failure.assign(n, {});
  parallel_for(n, workers, [&](std::size_t u) {
    try {
      report.influence[u] = engine.run(static_cast<UserIndex>(u)).influence;
    } catch (const std::exception& e) {
      report.influence[u] = std::numeric_limits<double>::quiet_NaN();
      report.failure[u] = e.what();
      if (report.failure[u].empty()) report.failure[u] = "unknown error";
    }
  });
  report.config = engine.config();
  report.l = engine.options().l;
  report.approximate = engine.approximate();
  rank_report(report);
  return report;
}

InfluenceReport influence_all(std::shared_ptr<const RatingsDataset> data, const AlgoConfig& config,
                              const InfluenceOptions& options) {
  const LeaveOneOutEngine engine(std::move(data), config, options);
  return influence_all(engine, options.workers);
}

std::vector<double> default_thresholds() {
  std::vector<double> grid;
  for (int k = 1; k <= 9; ++k) grid.push_back(k / 10.0);
  return grid;
}

GroupInfluenceCurve percent_influenced(std::span<const LeaveOneOutResult> group,
                                       std::size_t num_users, std::span<const double> thresholds) {
  GroupInfluenceCurve curve;
  curve.top_k = group.size();
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  // The largest change any group member caused to v decides v's membership
  // at every threshold, which counts each user at most once.
  std::vector<double> strongest(num_users, -1.0);
  for (const auto& run : group) {
    for (std::size_t v = 0; v < num_users; ++v) {
      if (v != run.removed) strongest[v] = std::max(strongest[v], run.distance[v]);
    }
  }
  for (double theta : thresholds) {
    const auto counted = std::count_if(strongest.begin(), strongest.end(),
                                       [theta](double d) { return d >= 0.0 && d >= theta; });
    curve.fraction.push_back(num_users == 0 ? 0.0
                                            : static_cast<double>(counted) / static_cast<double>(num_users));
  }
  return curve;
}

std::vector<UserIndex> top_influencers(const InfluenceReport& report, std::size_t top_k) {
  std::vector<UserIndex> top;
  for (UserIndex u : report.ranking) {
    if (top.size() == top_k) break;
    if (!report.failed(u)) top.push_back(u);
  }
  return top;
}

std::vector<GroupInfluenceCurve> group_influence_sweep(const LeaveOneOutEngine& engine,
                                                       const InfluenceReport& report,
                                                       std::span<const std::size_t> top_ks,
                                                       std::span<const double> thresholds,
                                                       std::size_t workers) {
  const std::size_t n = engine.dataset().num_users();
  std::size_t largest = 0;
  for (std::size_t k : top_ks) {
    if (k > n) throw UsageError("group_influence: top_k exceeds the number of users");
    largest = std::max(largest, k);
  }
  const auto top = top_influencers(report, largest);
  std::vector<LeaveOneOutResult> runs(top.size());
  parallel_for(top.size(), workers, [&](std::size_t k) { runs[k] = engine.run(top[k]); });

  std::vector<GroupInfluenceCurve> curves;
  for (std::size_t k : top_ks) {
    const std::size_t size = std::min(k, runs.size());
    auto curve = percent_influenced(std::span<const LeaveOneOutResult>(runs.data(), size), n, thresholds);
    curve.top_k = k;
    curves.push_back(std::move(curve));
  }
  return curves;
}

GroupInfluenceCurve group_influence(const LeaveOneOutEngine& engine, const InfluenceReport& report,
                                    std::size_t top_k, std::span<const double> thresholds,
                                    std::size_t workers) {
  const std::size_t sizes[] = {top_k};
  return group_influence_sweep(engine, report, sizes, thresholds, workers).front();
}

double prediction_shift_oracle(const RatingsDataset& ds, const AlgoConfig& config, UserIndex u) {
  if (u >= ds.num_users()) throw UsageError("prediction shift: user index out of range");
  const TrainedModel full = train(std::make_shared<const RatingsDataset>(ds), config);
  const ReducedDataset reduced = remove_user(ds, u);
  const TrainedModel without = train(std::make_shared<const RatingsDataset>(reduced.data), config);
  double total = 0.0;
  std::size_t count = 0;
  for (UserIndex v = 0; v < reduced.data.num_users(); ++v) {
    const UserIndex original_v = reduced.user_origin[v];
    for (ItemIndex i = 0; i < reduced.data.num_items(); ++i) {
      if (reduced.data.has_rated(v, i)) continue;
      const ItemIndex original_i = reduced.item_origin[i];
      total += std::abs(predict(full, original_v, original_i) - predict(without, v, i));
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace idm
