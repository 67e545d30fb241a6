#include <algorithm>
#include <numeric>

#include "idm/parallel.hpp"
#include "idm/recommender.hpp"

namespace idm {

std::string to_string(Algorithm a) { return a == Algorithm::knn ? "knn" : "nmf"; }

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "knn") return Algorithm::knn;
  if (name == "nmf") return Algorithm::nmf;
  throw UsageError("unknown algorithm '" + name + "' (expected knn or nmf)");
}

TrainedModel train(std::shared_ptr<const RatingsDataset> data, const AlgoConfig& config,
                   std::size_t workers) {
  if (config.algorithm == Algorithm::knn) return KnnModel::train(std::move(data), config.knn, workers);
  return NmfModel::train(std::move(data), config.nmf);
}

const RatingsDataset& dataset_of(const TrainedModel& model) {
  return std::visit([](const auto& m) -> const RatingsDataset& { return m.dataset(); }, model);
}

double predict(const TrainedModel& model, UserIndex u, ItemIndex i) {
  return std::visit([&](const auto& m) { return m.predict(u, i); }, model);
}

void score_items(const TrainedModel& model, UserIndex u, std::vector<double>& scores) {
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    knn_score_items(knn->dataset(), knn->neighbors(u), knn->item_means(), scores);
    return;
  }
  const auto& nmf = std::get<NmfModel>(model);
  scores.resize(nmf.dataset().num_items());
  for (ItemIndex i = 0; i < scores.size(); ++i) scores[i] = nmf.predict(u, i);
}

RecommendationList top_items(UserIndex user, std::span<const double> scores,
                             std::span<const char> eligible, std::size_t l) {
  std::vector<ItemIndex> candidates;
  candidates.reserve(scores.size());
  for (ItemIndex i = 0; i < scores.size(); ++i) {
    if (eligible[i]) candidates.push_back(i);
  }
  const std::size_t take = std::min(l, candidates.size());
  auto before = [&](ItemIndex a, ItemIndex b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), before);
  candidates.resize(take);
  RecommendationList list;
  list.user = user;
  list.items = std::move(candidates);
  list.scores.reserve(take);
  for (ItemIndex i : list.items) list.scores.push_back(scores[i]);
  return list;
}

namespace {

std::vector<char> unrated_mask(const RatingsDataset& ds, UserIndex u) {
  std::vector<char> eligible(ds.num_items(), 1);
  for (ItemIndex i : ds.user_items(u)) eligible[i] = 0;
  return eligible;
}

}  // namespace

RecommendationList recommend(const TrainedModel& model, UserIndex u, std::size_t l) {
  if (l < 1) throw UsageError("recommend: l must be >= 1");
  const RatingsDataset& ds = dataset_of(model);
  if (u >= ds.num_users()) throw UsageError("recommend: user index out of range");
  std::vector<double> scores;
  score_items(model, u, scores);
  return top_items(u, scores, unrated_mask(ds, u), l);
}

RecommendationList recommend(const KnnModel& model, UserIndex u, std::size_t l) {
  if (l < 1) throw UsageError("recommend: l must be >= 1");
  std::vector<double> scores;
  knn_score_items(model.dataset(), model.neighbors(u), model.item_means(), scores);
  return top_items(u, scores, unrated_mask(model.dataset(), u), l);
}

RecommendationList recommend(const NmfModel& model, UserIndex u, std::size_t l) {
  if (l < 1) throw UsageError("recommend: l must be >= 1");
  std::vector<double> scores(model.dataset().num_items());
  for (ItemIndex i = 0; i < scores.size(); ++i) scores[i] = model.predict(u, i);
  return top_items(u, scores, unrated_mask(model.dataset(), u), l);
}

std::vector<RecommendationList> recommend_all(const TrainedModel& model, std::size_t l,
                                              std::size_t workers) {
  const std::size_t n = dataset_of(model).num_users();
  std::vector<RecommendationList> lists(n);
  parallel_for(n, workers, [&](std::size_t u) {
    lists[u] = recommend(model, static_cast<UserIndex>(u), l);
  });
  return lists;
}

AccuracyResult evaluate(const TrainedModel& model, std::span<const Triplet> test, std::size_t l,
                        double relevance_threshold, std::size_t workers) {
  if (test.empty()) throw UsageError("evaluate: empty test set");
  const RatingsDataset& ds = dataset_of(model);
  std::vector<std::vector<ItemIndex>> relevant(ds.num_users());
  for (const auto& t : test) {
    if (t.user >= ds.num_users() || t.item >= ds.num_items()) {
      throw UsageError("evaluate: test rating outside the model's index space");
    }
    if (ds.has_rated(t.user, t.item)) {
      throw UsageError("evaluate: test rating overlaps the training data");
    }
    if (t.rating >= relevance_threshold) relevant[t.user].push_back(t.item);
  }
  std::vector<double> precision(ds.num_users(), 0.0), recall(ds.num_users(), 0.0);
  parallel_for(ds.num_users(), workers, [&](std::size_t u) {
    auto& rel = relevant[u];
    if (rel.empty()) return;
    std::sort(rel.begin(), rel.end());
    const auto list = recommend(model, static_cast<UserIndex>(u), l);
    std::size_t hits = 0;
    for (ItemIndex i : list.items) hits += std::binary_search(rel.begin(), rel.end(), i) ? 1 : 0;
    precision[u] = static_cast<double>(hits) / static_cast<double>(l);
    recall[u] = static_cast<double>(hits) / static_cast<double>(rel.size());
  });
  AccuracyResult result;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    if (relevant[u].empty()) continue;
    result.precision += precision[u];
    result.recall += recall[u];
    ++result.users_evaluated;
  }
  if (result.users_evaluated == 0) throw UsageError("evaluate: no user has a relevant test item");
  result.precision /= static_cast<double>(result.users_evaluated);
  result.recall /= static_cast<double>(result.users_evaluated);
  return result;
}

}  // namespace idm
