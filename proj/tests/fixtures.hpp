#pragma once

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "idm/dataset.hpp"
#include "idm/random.hpp"

namespace fixtures {

using idm::RatingsDataset;

struct Rating {
  std::string user;
  std::string item;
  double value;
};

/// Dataset from string-keyed ratings; ids are indexed in first-appearance order.
inline RatingsDataset make(const std::vector<Rating>& ratings, idm::RatingScale scale = {1.0, 5.0}) {
  std::vector<std::string> users, items;
  std::vector<idm::Triplet> triplets;
  auto index = [](std::vector<std::string>& ids, const std::string& id) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] == id) return static_cast<std::uint32_t>(k);
    }
    ids.push_back(id);
    return static_cast<std::uint32_t>(ids.size() - 1);
  };
  for (const auto& r : ratings) {
    const auto u = index(users, r.user);
    const auto i = index(items, r.item);
    triplets.push_back({u, i, r.value});
  }
  return RatingsDataset::from_triplets(users, items, triplets, scale);
}

/// Five users, six items, three ratings each.
inline RatingsDataset toy5x6() {
  return make({{"u1", "i1", 5}, {"u1", "i2", 4}, {"u1", "i3", 1},
               {"u2", "i1", 4}, {"u2", "i2", 5}, {"u2", "i4", 2},
               {"u3", "i3", 5}, {"u3", "i4", 4}, {"u3", "i5", 3},
               {"u4", "i5", 5}, {"u4", "i6", 4}, {"u4", "i1", 2},
               {"u5", "i2", 3}, {"u5", "i3", 4}, {"u5", "i6", 5}});
}

inline std::shared_ptr<const RatingsDataset> shared(RatingsDataset ds) {
  return std::make_shared<const RatingsDataset>(std::move(ds));
}

/// Users x items grid where each cell is rated with probability `density`
/// (integer ratings 1..5). Every user gets at least one rating; unrated
/// items are pruned.
inline RatingsDataset random_dataset(std::uint64_t seed, std::size_t users = 50, std::size_t items = 100,
                                     double density = 0.1) {
  idm::Rng rng(seed);
  std::vector<std::string> uid, iid;
  for (std::size_t u = 0; u < users; ++u) uid.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) iid.push_back("i" + std::to_string(i));
  std::vector<idm::Triplet> triplets;
  for (std::size_t u = 0; u < users; ++u) {
    bool any = false;
    for (std::size_t i = 0; i < items; ++i) {
      if (rng.uniform() < density) {
        triplets.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i),
                            static_cast<double>(1 + rng.below(5))});
        any = true;
      }
    }
    if (!any) {
      triplets.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(rng.below(items)),
                          static_cast<double>(1 + rng.below(5))});
    }
  }
  return RatingsDataset::from_triplets(uid, iid, triplets, {1.0, 5.0});
}

}  // namespace fixtures
