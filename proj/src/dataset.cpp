#include "idm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "idm/random.hpp"

namespace idm {

RatingsDataset RatingsDataset::from_triplets(std::vector<std::string> user_ids,
                                             std::vector<std::string> item_ids,
                                             std::vector<Triplet> triplets, RatingScale scale,
                                             std::vector<UserIndex>* kept_users,
                                             std::vector<ItemIndex>* kept_items) {
  if (!(scale.min <= scale.max)) throw DataError("rating scale has min > max");
  const std::size_t n = user_ids.size();
  const std::size_t m = item_ids.size();
  for (const auto& t : triplets) {
    if (t.user >= n || t.item >= m) throw DataError("rating refers to an unknown user or item");
    if (!std::isfinite(t.rating) || !scale.contains(t.rating)) {
      throw DataError("rating " + format_double(t.rating) + " for user '" + user_ids[t.user] +
                      "' lies outside the scale [" + format_double(scale.min) + ", " +
                      format_double(scale.max) + "]");
    }
  }

  // Stable sort keeps log order within a (user, item) run; keep the last.
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  });
  std::vector<Triplet> unique;
  unique.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const bool last_of_run = k + 1 == triplets.size() || triplets[k + 1].user != triplets[k].user ||
                             triplets[k + 1].item != triplets[k].item;
    if (last_of_run) unique.push_back(triplets[k]);
  }
  if (unique.empty()) throw DataError("dataset is empty after pruning");

  std::vector<char> user_seen(n, 0), item_seen(m, 0);
  for (const auto& t : unique) {
    user_seen[t.user] = 1;
    item_seen[t.item] = 1;
  }
  std::vector<UserIndex> user_map(n);
  std::vector<ItemIndex> item_map(m);
  RatingsDataset ds;
  ds.scale_ = scale;
  std::vector<UserIndex> users_kept;
  std::vector<ItemIndex> items_kept;
  for (std::size_t u = 0; u < n; ++u) {
    if (!user_seen[u]) continue;
    user_map[u] = static_cast<UserIndex>(ds.user_ids_.size());
    ds.user_ids_.push_back(std::move(user_ids[u]));
    users_kept.push_back(static_cast<UserIndex>(u));
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!item_seen[i]) continue;
    item_map[i] = static_cast<ItemIndex>(ds.item_ids_.size());
    ds.item_ids_.push_back(std::move(item_ids[i]));
    items_kept.push_back(static_cast<ItemIndex>(i));
  }

  const std::size_t nu = ds.user_ids_.size();
  const std::size_t ni = ds.item_ids_.size();
  ds.user_offsets_.assign(nu + 1, 0);
  ds.item_offsets_.assign(ni + 1, 0);
  ds.user_items_.reserve(unique.size());
  ds.user_ratings_.reserve(unique.size());
  for (const auto& t : unique) {
    const UserIndex u = user_map[t.user];
    const ItemIndex i = item_map[t.item];
    ++ds.user_offsets_[u + 1];
    ++ds.item_offsets_[i + 1];
    ds.user_items_.push_back(i);
    ds.user_ratings_.push_back(t.rating);
  }
  std::partial_sum(ds.user_offsets_.begin(), ds.user_offsets_.end(), ds.user_offsets_.begin());
  std::partial_sum(ds.item_offsets_.begin(), ds.item_offsets_.end(), ds.item_offsets_.begin());

  // User-major traversal visits users ascending, so each item column fills
  // in ascending user order.
  ds.item_users_.resize(unique.size());
  ds.item_ratings_.resize(unique.size());
  std::vector<std::size_t> cursor(ds.item_offsets_.begin(), ds.item_offsets_.end() - 1);
  for (std::size_t u = 0; u < nu; ++u) {
    for (std::size_t k = ds.user_offsets_[u]; k < ds.user_offsets_[u + 1]; ++k) {
      const ItemIndex i = ds.user_items_[k];
      ds.item_users_[cursor[i]] = static_cast<UserIndex>(u);
      ds.item_ratings_[cursor[i]] = ds.user_ratings_[k];
      ++cursor[i];
    }
  }

  if (kept_users) *kept_users = std::move(users_kept);
  if (kept_items) *kept_items = std::move(items_kept);
  return ds;
}

std::optional<double> RatingsDataset::rating(UserIndex u, ItemIndex i) const {
  const auto items = user_items(u);
  const auto it = std::lower_bound(items.begin(), items.end(), i);
  if (it == items.end() || *it != i) return std::nullopt;
  return user_ratings(u)[static_cast<std::size_t>(it - items.begin())];
}

std::optional<UserIndex> RatingsDataset::find_user(const std::string& id) const {
  const auto it = std::find(user_ids_.begin(), user_ids_.end(), id);
  if (it == user_ids_.end()) return std::nullopt;
  return static_cast<UserIndex>(it - user_ids_.begin());
}

std::optional<ItemIndex> RatingsDataset::find_item(const std::string& id) const {
  const auto it = std::find(item_ids_.begin(), item_ids_.end(), id);
  if (it == item_ids_.end()) return std::nullopt;
  return static_cast<ItemIndex>(it - item_ids_.begin());
}

std::vector<Triplet> RatingsDataset::triplets() const {
  std::vector<Triplet> out;
  out.reserve(num_ratings());
  for (UserIndex u = 0; u < num_users(); ++u) {
    const auto items = user_items(u);
    const auto ratings = user_ratings(u);
    for (std::size_t k = 0; k < items.size(); ++k) out.push_back({u, items[k], ratings[k]});
  }
  return out;
}

bool RatingsDataset::operator==(const RatingsDataset& other) const {
  return user_ids_ == other.user_ids_ && item_ids_ == other.item_ids_ && scale_ == other.scale_ &&
         user_offsets_ == other.user_offsets_ && user_items_ == other.user_items_ &&
         user_ratings_ == other.user_ratings_;
}

DatasetStats compute_stats(const RatingsDataset& ds) {
  DatasetStats stats;
  stats.n_users = ds.num_users();
  stats.n_items = ds.num_items();
  stats.n_ratings = ds.num_ratings();
  stats.sparsity = 1.0 - static_cast<double>(stats.n_ratings) /
                             (static_cast<double>(stats.n_users) * static_cast<double>(stats.n_items));
  for (UserIndex u = 0; u < ds.num_users(); ++u) ++stats.per_user_count[ds.user_items(u).size()];
  for (ItemIndex i = 0; i < ds.num_items(); ++i) ++stats.per_item_count[ds.item_users(i).size()];
  return stats;
}

namespace {

RatingsDataset subset(const RatingsDataset& ds, const std::vector<char>& keep_user,
                      const std::vector<char>& keep_item) {
  std::vector<Triplet> kept;
  kept.reserve(ds.num_ratings());
  for (const auto& t : ds.triplets()) {
    if (keep_user[t.user] && keep_item[t.item]) kept.push_back(t);
  }
  return RatingsDataset::from_triplets(ds.user_ids(), ds.item_ids(), std::move(kept), ds.scale());
}

}  // namespace

RatingsDataset sample_users(const RatingsDataset& ds, std::size_t count, std::uint64_t seed) {
  if (count < 1 || count > ds.num_users()) {
    throw UsageError("sample_users: count " + std::to_string(count) + " outside [1, " +
                     std::to_string(ds.num_users()) + "]");
  }
  Rng rng(seed);
  std::vector<char> keep_user(ds.num_users(), 0);
  for (std::size_t u : sample_indices(ds.num_users(), count, rng)) keep_user[u] = 1;
  return subset(ds, keep_user, std::vector<char>(ds.num_items(), 1));
}

RatingsDataset sample_items(const RatingsDataset& ds, std::size_t count, std::uint64_t seed,
                            ItemSampling mode) {
  if (count < 1 || count > ds.num_items()) {
    throw UsageError("sample_items: count " + std::to_string(count) + " outside [1, " +
                     std::to_string(ds.num_items()) + "]");
  }
  std::vector<char> keep_item(ds.num_items(), 0);
  if (mode == ItemSampling::random) {
    Rng rng(seed);
    for (std::size_t i : sample_indices(ds.num_items(), count, rng)) keep_item[i] = 1;
  } else {
    std::vector<ItemIndex> order(ds.num_items());
    std::iota(order.begin(), order.end(), ItemIndex{0});
    std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
      return ds.item_users(a).size() > ds.item_users(b).size();
    });
    for (std::size_t k = 0; k < count; ++k) keep_item[order[k]] = 1;
  }
  return subset(ds, std::vector<char>(ds.num_users(), 1), keep_item);
}

ReducedDataset remove_user(const RatingsDataset& ds, UserIndex u) {
  if (u >= ds.num_users()) throw UsageError("remove_user: user index out of range");
  if (ds.num_users() < 2) throw UsageError("remove_user: cannot remove the only user");
  std::vector<Triplet> kept;
  kept.reserve(ds.num_ratings());
  for (const auto& t : ds.triplets()) {
    if (t.user != u) kept.push_back(t);
  }
  std::vector<UserIndex> user_origin;
  std::vector<ItemIndex> item_origin;
  auto data = RatingsDataset::from_triplets(ds.user_ids(), ds.item_ids(), std::move(kept),
                                            ds.scale(), &user_origin, &item_origin);
  return ReducedDataset{std::move(data), std::move(user_origin), std::move(item_origin)};
}

TrainTestSplit split_train_test(const RatingsDataset& ds, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw UsageError("split_train_test: test_fraction must lie in [0, 1)");
  }
  Rng rng(seed);
  std::vector<Triplet> train;
  std::vector<Triplet> held;
  for (UserIndex u = 0; u < ds.num_users(); ++u) {
    const auto items = ds.user_items(u);
    const auto ratings = ds.user_ratings(u);
    const std::size_t size = items.size();
    std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(size) + 0.5));
    n_test = std::min(n_test, size - 1);
    std::vector<char> is_test(size, 0);
    for (std::size_t k : sample_indices(size, n_test, rng)) is_test[k] = 1;
    for (std::size_t k = 0; k < size; ++k) {
      (is_test[k] ? held : train).push_back({u, items[k], ratings[k]});
    }
  }
  std::vector<UserIndex> kept_users;
  std::vector<ItemIndex> kept_items;
  auto train_ds = RatingsDataset::from_triplets(ds.user_ids(), ds.item_ids(), std::move(train),
                                                ds.scale(), &kept_users, &kept_items);
  // Every user keeps a training rating, so users map one-to-one.
  constexpr ItemIndex kMissing = ~ItemIndex{0};
  std::vector<ItemIndex> item_map(ds.num_items(), kMissing);
  for (std::size_t k = 0; k < kept_items.size(); ++k) item_map[kept_items[k]] = static_cast<ItemIndex>(k);
  std::vector<Triplet> test;
  for (const auto& t : held) {
    if (item_map[t.item] == kMissing) continue;
    test.push_back({t.user, item_map[t.item], t.rating});
  }
  return TrainTestSplit{std::move(train_ds), std::move(test)};
}

}  // namespace idm
