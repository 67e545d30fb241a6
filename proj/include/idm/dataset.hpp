#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idm/common.hpp"

namespace idm {

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
  bool operator==(const RatingScale&) const = default;
};

struct Triplet {
  UserIndex user;
  ItemIndex item;
  double rating;

  bool operator==(const Triplet&) const = default;
};

/// Immutable sparse user x item rating matrix with dense indices.
///
/// Ratings are stored twice: user-major (items ascending per user) and
/// item-major (users ascending per item). Every user and every item has at
/// least one rating, and at most one rating exists per (user, item).
class RatingsDataset {
 public:
  /// Builds a dataset over the given id tables. Triplets are taken in log
  /// order: a later rating for the same (user, item) replaces an earlier
  /// one. Users and items without ratings are dropped and the remaining
  /// indices are compacted in their original relative order; the surviving
  /// original indices are written to `kept_users` / `kept_items` if given.
  static RatingsDataset from_triplets(std::vector<std::string> user_ids,
                                      std::vector<std::string> item_ids,
                                      std::vector<Triplet> triplets, RatingScale scale,
                                      std::vector<UserIndex>* kept_users = nullptr,
                                      std::vector<ItemIndex>* kept_items = nullptr);

  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_items() const { return item_ids_.size(); }
  std::size_t num_ratings() const { return user_items_.size(); }

  std::span<const ItemIndex> user_items(UserIndex u) const {
    return {user_items_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const double> user_ratings(UserIndex u) const {
    return {user_ratings_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const UserIndex> item_users(ItemIndex i) const {
    return {item_users_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }
  std::span<const double> item_ratings(ItemIndex i) const {
    return {item_ratings_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }

  std::optional<double> rating(UserIndex u, ItemIndex i) const;
  bool has_rated(UserIndex u, ItemIndex i) const { return rating(u, i).has_value(); }

  const std::string& user_id(UserIndex u) const { return user_ids_[u]; }
  const std::string& item_id(ItemIndex i) const { return item_ids_[i]; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  std::optional<UserIndex> find_user(const std::string& id) const;
  std::optional<ItemIndex> find_item(const std::string& id) const;

  const RatingScale& scale() const { return scale_; }

  /// All ratings, user-major with items ascending.
  std::vector<Triplet> triplets() const;

  bool operator==(const RatingsDataset& other) const;

 private:
  RatingsDataset() = default;

  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  RatingScale scale_;
  std::vector<std::size_t> user_offsets_;
  std::vector<ItemIndex> user_items_;
  std::vector<double> user_ratings_;
  std::vector<std::size_t> item_offsets_;
  std::vector<UserIndex> item_users_;
  std::vector<double> item_ratings_;
};

struct DatasetStats {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_ratings = 0;
  double sparsity = 0.0;
  /// profile size -> number of users with that many ratings
  std::map<std::size_t, std::size_t> per_user_count;
  /// rater count -> number of items with that many raters
  std::map<std::size_t, std::size_t> per_item_count;
};

DatasetStats compute_stats(const RatingsDataset& ds);

// ---------------------------------------------------------------------------
// Ingestion

enum class InputFormat { delimited, movielens_dat };

struct LoadOptions {
  InputFormat format = InputFormat::delimited;
  std::string separator = ",";
  /// Zero-based column positions of user id, item id and rating.
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t rating_column = 2;
  bool has_header = false;
  /// Rating bounds; inferred from the data when absent.
  std::optional<RatingScale> scale;
  /// Ordinal mapping for non-numeric rating fields (interaction label ->
  /// rating value). Consulted before numeric parsing.
  std::map<std::string, double> label_map;
};

/// Parses one rating per line. Errors carry the source name and line number.
RatingsDataset parse_ratings(std::istream& in, const LoadOptions& options,
                             const std::string& source_name = "<stream>");

RatingsDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options);

/// Canonical dump: `user_idx<TAB>item_idx<TAB>rating` plus a JSON sidecar
/// holding the id maps, scale and stats.
void save_dataset(const RatingsDataset& ds, const std::filesystem::path& tsv_path,
                  const std::filesystem::path& json_path);
RatingsDataset load_dataset_dump(const std::filesystem::path& tsv_path,
                                 const std::filesystem::path& json_path);

/// Hex FNV-1a over the canonical dump text.
std::string content_hash(const RatingsDataset& ds);

// ---------------------------------------------------------------------------
// Sampling and derived datasets

/// Uniform user subset without replacement; items left unrated are pruned.
RatingsDataset sample_users(const RatingsDataset& ds, std::size_t count, std::uint64_t seed);

enum class ItemSampling { random, popular };

/// Item subset (uniform, or the `count` most-rated items with ties broken
/// by index); users left without ratings are pruned.
RatingsDataset sample_items(const RatingsDataset& ds, std::size_t count, std::uint64_t seed,
                            ItemSampling mode);

/// Dataset with one user removed, and the maps from the reduced indices
/// back to the original ones.
struct ReducedDataset {
  RatingsDataset data;
  std::vector<UserIndex> user_origin;
  std::vector<ItemIndex> item_origin;
};

ReducedDataset remove_user(const RatingsDataset& ds, UserIndex u);

struct TrainTestSplit {
  RatingsDataset train;
  /// Held-out ratings, indexed in `train`'s index space.
  std::vector<Triplet> test;
};

/// Per-user seeded random split. Each user keeps at least one training
/// rating; round(test_fraction * |I_u|) ratings are held out. Held-out
/// ratings whose item disappears from the training set are dropped.
TrainTestSplit split_train_test(const RatingsDataset& ds, double test_fraction,
                                std::uint64_t seed);

}  // namespace idm
