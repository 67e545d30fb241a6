#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/recommender.hpp"

namespace idm {

/// Item set of a top-l list, ascending.
using ItemSet = std::vector<ItemIndex>;

ItemSet as_item_set(const RecommendationList& list);

/// 1 - |a n b| / |a u b| over ascending item sets; 0 when both are empty.
double jaccard_distance(std::span<const ItemIndex> a, std::span<const ItemIndex> b);

/// |a n b| / |a u b| over ascending item sets; 1 when both are empty.
double jaccard_similarity(std::span<const ItemIndex> a, std::span<const ItemIndex> b);

/// Outcome of removing one user from the system.
struct LeaveOneOutResult {
  UserIndex removed = 0;
  /// distance[v] = JaccardDist(R_v, R_v without `removed`); 0 at v = removed.
  std::vector<double> distance;
  /// Sum of `distance` in ascending user order.
  double influence = 0.0;
};

/// Reference leave-one-out: retrains from scratch on the dataset without u
/// (same hyperparameters and seed) and compares every other user's top-l
/// list against the full-data list.
LeaveOneOutResult leave_one_out_oracle(const RatingsDataset& ds, const AlgoConfig& config,
                                       UserIndex u, std::size_t l);

/// influence(u) by the reference route.
double influence_oracle(const RatingsDataset& ds, const AlgoConfig& config, UserIndex u,
                        std::size_t l);

struct InfluenceOptions {
  std::size_t l = 10;
  std::size_t workers = 1;
  /// NMF only: continue from the full-data factors instead of retraining
  /// from scratch. Approximate.
  bool warm_start = false;
  std::size_t warm_start_iters = 20;
};

/// Leave-one-out runner sharing one full-data model across jobs.
///
/// For kNN the reduced model is derived from the full one: similarities
/// between remaining users do not depend on the removed user, so each
/// neighborhood is repaired from the stored spare candidate and only the
/// lists that can change are rescored. The result is bit-identical to the
/// reference route. For NMF each job retrains on its own reduced copy.
/// run() is safe to call concurrently.
class LeaveOneOutEngine {
 public:
  LeaveOneOutEngine(std::shared_ptr<const RatingsDataset> data, const AlgoConfig& config,
                    const InfluenceOptions& options);
  LeaveOneOutEngine(TrainedModel full_model, const AlgoConfig& config,
                    const InfluenceOptions& options);

  const RatingsDataset& dataset() const { return dataset_of(model_); }
  const TrainedModel& full_model() const { return model_; }
  const AlgoConfig& config() const { return config_; }
  const InfluenceOptions& options() const { return options_; }
  const std::vector<ItemSet>& base_lists() const { return base_; }
  bool approximate() const { return config_.algorithm == Algorithm::nmf && options_.warm_start; }

  LeaveOneOutResult run(UserIndex u) const;

 private:
  LeaveOneOutResult run_knn(UserIndex u) const;
  LeaveOneOutResult run_nmf(UserIndex u) const;

  TrainedModel model_;
  AlgoConfig config_;
  InfluenceOptions options_;
  std::vector<ItemSet> base_;
};

struct InfluenceReport {
  AlgoConfig config;
  std::size_t l = 10;
  bool approximate = false;
  /// Per-user influence; NaN where the job failed.
  std::vector<double> influence;
  /// Per-user failure message; empty when the job succeeded.
  std::vector<std::string> failure;
  /// All users: successful ones by influence descending (ties by index),
  /// then failed ones by index.
  std::vector<UserIndex> ranking;

  bool failed(UserIndex u) const { return !failure[u].empty(); }
  std::size_t num_failed() const;
};

/// Computes the ranking from `influence` and `failure`.
void rank_report(InfluenceReport& report);

/// influence(u) for every user, up to options.workers jobs in parallel. A
/// failing job marks only its own user as failed.
InfluenceReport influence_all(std::shared_ptr<const RatingsDataset> data, const AlgoConfig& config,
                              const InfluenceOptions& options);
InfluenceReport influence_all(const LeaveOneOutEngine& engine, std::size_t workers);

struct GroupInfluenceCurve {
  std::size_t top_k = 0;
  std::vector<double> thresholds;
  /// Fraction of all users influenced at each threshold.
  std::vector<double> fraction;
};

/// {0.1, 0.2, ..., 0.9}
std::vector<double> default_thresholds();

/// Percent influenced by a group: a user v is counted once if any group
/// member u != v changed v's list by a Jaccard distance >= theta. The count
/// is divided by the number of users.
GroupInfluenceCurve percent_influenced(std::span<const LeaveOneOutResult> group,
                                       std::size_t num_users, std::span<const double> thresholds);

/// The `top_k` most influential users of `report` (failed users skipped).
std::vector<UserIndex> top_influencers(const InfluenceReport& report, std::size_t top_k);

/// Group-influence curve of the report's top_k users; their leave-one-out
/// runs are recomputed with the engine.
GroupInfluenceCurve group_influence(const LeaveOneOutEngine& engine, const InfluenceReport& report,
                                    std::size_t top_k, std::span<const double> thresholds,
                                    std::size_t workers = 1);

/// Curves for several group sizes from one set of leave-one-out runs.
std::vector<GroupInfluenceCurve> group_influence_sweep(const LeaveOneOutEngine& engine,
                                                       const InfluenceReport& report,
                                                       std::span<const std::size_t> top_ks,
                                                       std::span<const double> thresholds,
                                                       std::size_t workers = 1);

/// Older influence notion kept for comparison: mean |r'(v,i) with u -
/// r'(v,i) without u| over users v != u and their unrated items that remain
/// in the reduced dataset.
double prediction_shift_oracle(const RatingsDataset& ds, const AlgoConfig& config, UserIndex u);

}  // namespace idm
