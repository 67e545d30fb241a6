#include <doctest.h>

#include <limits>

#include "fixtures.hpp"
#include "idm/features.hpp"
#include "idm/recommender.hpp"

using namespace idm;

namespace {

const SimilarityOptions kCosine{Similarity::cosine, 50};

std::vector<ItemSet> lists_of(const TrainedModel& model, std::size_t l) {
  std::vector<ItemSet> out;
  for (const auto& list : recommend_all(model, l)) out.push_back(as_item_set(list));
  return out;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("profile size and popularity") {
    const auto ds = fixtures::toy5x6();
    std::size_t total = 0;
    for (UserIndex u = 0; u < 5; ++u) total += beta1_profile_size(ds, u);
    CHECK(total == ds.num_ratings());
    const double median_pop[] = {3, 3, 2, 2, 3};
    for (UserIndex u = 0; u < 5; ++u) CHECK(beta6_median_popularity(ds, u) == median_pop[u]);
    const auto even = fixtures::make({{"a", "x", 1}, {"a", "y", 1}, {"b", "x", 1}});
    CHECK(beta6_median_popularity(even, 0) == 1.5);
  }

  TEST_CASE("centrality") {
    const auto ds = fixtures::toy5x6();
    const double cosine[] = {0.4020917087665436, 0.3956869411983504, 0.24849787991928693, 0.2864161045661294,
                             0.3717533529375524};
    const double pearson[] = {-0.02, -0.01, 0.0, 0.0, -0.01};
    for (UserIndex u = 0; u < 5; ++u) {
      CHECK(beta2_centrality(ds, u, kCosine) == doctest::Approx(cosine[u]).epsilon(1e-13));
      CHECK(beta2_centrality(ds, u, {Similarity::pearson, 50}) == doctest::Approx(pearson[u]).epsilon(1e-13));
    }
    const auto same = fixtures::make({{"a", "x", 2}, {"a", "y", 4}, {"b", "x", 2}, {"b", "y", 4}, {"c", "x", 2},
                                      {"c", "y", 4}});
    for (UserIndex u = 0; u < 3; ++u) CHECK(beta2_centrality(same, u, kCosine) == doctest::Approx(1.0));
  }

  TEST_CASE("neighborhood membership") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = KnnModel::train(ds, {2, kCosine});
    const std::size_t expected[] = {1, 1, 2, 2, 4};
    for (UserIndex u = 0; u < 5; ++u) CHECK(beta3_neighborhood_membership(model, u) == expected[u]);
    const auto pair = fixtures::shared(fixtures::make({{"a", "x", 1}, {"b", "y", 2}}));
    const auto forced = KnnModel::train(pair, {1, kCosine});
    CHECK(beta3_neighborhood_membership(forced, 0) == 1);
    CHECK(beta3_neighborhood_membership(forced, 1) == 1);
  }

  TEST_CASE("density") {
    const auto ds = fixtures::toy5x6();
    const std::size_t expected[] = {2, 2, 2, 2, 4};
    for (UserIndex u = 0; u < 5; ++u) CHECK(beta4_density(ds, u, 0.7, Distance::cosine) == expected[u]);
    const double huge = std::numeric_limits<double>::max();
    for (UserIndex u = 0; u < 5; ++u) CHECK(beta4_density(ds, u, huge, Distance::cosine) == 4);
    CHECK_THROWS_AS(beta4_density(ds, 0, 0.0, Distance::cosine), UsageError);
  }

  TEST_CASE("distance quantile interpolates the sorted pair distances") {
    const auto ds = fixtures::toy5x6();
    // Sorted cosine distances of the 10 pairs; the median averages the 5th and 6th.
    CHECK(distance_quantile(ds, Distance::cosine, 0.5, 1000, 1) == doctest::Approx(0.683772233983162).epsilon(1e-13));
    CHECK(distance_quantile(ds, Distance::cosine, 0.0, 1000, 1) == doctest::Approx(0.0799125875435277).epsilon(1e-13));
    CHECK(distance_quantile(ds, Distance::cosine, 1.0, 1000, 1) == doctest::Approx(0.8908910548820038).epsilon(1e-13));
    const double sampled = distance_quantile(fixtures::random_dataset(2), Distance::cosine, 0.25, 300, 7);
    CHECK(sampled == distance_quantile(fixtures::random_dataset(2), Distance::cosine, 0.25, 300, 7));
  }

  TEST_CASE("profile-recommendation overlap") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const TrainedModel model = KnnModel::train(ds, {2, kCosine});
    const auto lists = lists_of(model, 2);
    const double expected[] = {0.125, 0.1875, 0.45833333333333326, 0.4583333333333333, 0.35416666666666663};
    for (UserIndex u = 0; u < 5; ++u) {
      CHECK(beta5_profile_recommendation_overlap(*ds, u, lists) == doctest::Approx(expected[u]).epsilon(1e-13));
    }
    std::vector<ItemSet> disjoint(5, ItemSet{});
    CHECK(beta5_profile_recommendation_overlap(*ds, 0, disjoint) == 0.0);
    std::vector<ItemSet> same(5, ItemSet{0, 1, 2});
    CHECK(beta5_profile_recommendation_overlap(*ds, 0, same) == 1.0);
  }

  TEST_CASE("similarity to the centroid user") {
    const auto ds = fixtures::toy5x6();
    const double cosine[] = {0.9126565311774456, 0.9777223082298347, 0.9570467394743383, 0.9586442614176915,
                             0.9829574144348143};
    const double pearson[] = {0.7205766921228917, 1.0, -0.654653670707977, 0.563621480190678, 0.42712109808862464};
    for (UserIndex u = 0; u < 5; ++u) {
      CHECK(beta7_similarity_to_centroid(ds, u, Similarity::cosine) == doctest::Approx(cosine[u]).epsilon(1e-12));
      CHECK(beta7_similarity_to_centroid(ds, u, Similarity::pearson) == doctest::Approx(pearson[u]).epsilon(1e-12));
    }
  }

  TEST_CASE("intra-profile diversity") {
    const auto ds = fixtures::toy5x6();
    const double expected[] = {0.5641888021179283, 0.5246105082016425, 0.4842711181101671, 0.6741417802800251,
                               0.6125313682286643};
    for (UserIndex u = 0; u < 5; ++u) {
      CHECK(beta8_intra_list_distance(ds, u, Distance::cosine) == doctest::Approx(expected[u]).epsilon(1e-12));
    }
    const auto single = fixtures::make({{"a", "x", 1}, {"b", "x", 2}, {"b", "y", 3}});
    CHECK(beta8_intra_list_distance(single, 0, Distance::cosine) == 0.0);
  }

  TEST_CASE("extract_all agrees with the single-feature functions") {
    const auto ds = fixtures::shared(fixtures::random_dataset(31));
    const auto knn = KnnModel::train(ds, {10, kCosine});
    const TrainedModel model = knn;
    const auto lists = lists_of(model, 5);
    FeatureConfig config;
    config.similarity = kCosine;
    config.l = 5;
    config.workers = 3;
    const auto table = extract_all(*ds, knn, lists, config);
    REQUIRE(table.rows.size() == ds->num_users());
    CHECK(table.epsilon > 0.0);
    for (UserIndex u = 0; u < ds->num_users(); u += 3) {
      const auto& row = table.rows[u];
      CHECK(row[0] == static_cast<double>(beta1_profile_size(*ds, u)));
      CHECK(row[1] == beta2_centrality(*ds, u, kCosine));
      CHECK(row[2] == static_cast<double>(beta3_neighborhood_membership(knn, u)));
      CHECK(row[3] == static_cast<double>(beta4_density(*ds, u, table.epsilon, Distance::cosine)));
      CHECK(row[4] == beta5_profile_recommendation_overlap(*ds, u, lists));
      CHECK(row[5] == beta6_median_popularity(*ds, u));
      CHECK(row[6] == beta7_similarity_to_centroid(*ds, u, Similarity::cosine));
      CHECK(row[7] == beta8_intra_list_distance(*ds, u, Distance::cosine));
      CHECK(row[0] >= 1.0);
      CHECK(row[4] >= 0.0);
      CHECK(row[4] <= 1.0);
      CHECK(row[5] >= 1.0);
    }
  }
}
