#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "idm/knn.hpp"
#include "idm/nmf.hpp"
#include "idm/recommender.hpp"
#include "idm/similarity.hpp"
#include "oracles.hpp"

using namespace idm;

namespace {

const SimilarityOptions kCosine{Similarity::cosine, 50};
const SimilarityOptions kPearson{Similarity::pearson, 50};

AlgoConfig knn_config(std::size_t k, SimilarityOptions sim) {
  AlgoConfig c;
  c.algorithm = Algorithm::knn;
  c.knn.k = k;
  c.knn.similarity = sim;
  return c;
}

}  // namespace

TEST_SUITE("recommender") {
  TEST_CASE("toy similarities match the pairwise definitions") {
    const auto ds = fixtures::toy5x6();
    // u1 = (5,4,1,-,-,-), u2 = (4,5,-,2,-,-): co-rated i1, i2 anti-correlate.
    CHECK(user_similarity(ds, 0, 1, {Similarity::pearson, 0}) == doctest::Approx(-1.0));
    CHECK(user_similarity(ds, 0, 1, kPearson) == doctest::Approx(-0.04));
    CHECK(user_similarity(ds, 0, 2, kPearson) == 0.0);
    CHECK(user_similarity(ds, 0, 1, kCosine) == doctest::Approx(0.9200874124564723).epsilon(1e-14));
    CHECK(user_similarity(ds, 2, 4, kCosine) == doctest::Approx(0.4).epsilon(1e-14));
  }

  TEST_CASE("similarity row equals the pairwise similarity bit for bit") {
    const auto ds = fixtures::random_dataset(7);
    const auto m = oracle::dense(ds);
    for (const auto& opts : {kCosine, kPearson, SimilarityOptions{Similarity::pearson, 0}}) {
      for (UserIndex u = 0; u < ds.num_users(); u += 7) {
        const auto row = similarity_row(ds, u, opts);
        for (UserIndex v = 0; v < ds.num_users(); ++v) {
          if (v == u) continue;
          CHECK(row[v] == user_similarity(ds, u, v, opts));
          CHECK(row[v] == doctest::Approx(oracle::sigma(m, u, v, opts)).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("identical users are perfectly similar without significance weighting") {
    const auto ds = fixtures::make({{"a", "x", 1}, {"a", "y", 3}, {"b", "x", 1}, {"b", "y", 3}});
    CHECK(user_similarity(ds, 0, 1, {Similarity::pearson, 0}) == doctest::Approx(1.0));
    CHECK(user_similarity(ds, 0, 1, kCosine) == doctest::Approx(1.0));
  }

  TEST_CASE("constant profiles have zero pearson similarity") {
    const auto ds = fixtures::make({{"a", "x", 3}, {"a", "y", 3}, {"b", "x", 1}, {"b", "y", 5}});
    CHECK(user_similarity(ds, 0, 1, {Similarity::pearson, 0}) == 0.0);
  }

  TEST_CASE("distances") {
    const auto ds = fixtures::make({{"a", "x", 1}, {"b", "y", 1}});
    CHECK(distance(user_vector(ds, 0), user_vector(ds, 1), Distance::cosine) == 1.0);
    CHECK(distance(user_vector(ds, 0), user_vector(ds, 0), Distance::cosine) == doctest::Approx(0.0));
  }

  TEST_CASE("knn neighborhoods: similarity descending, ties by index") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = KnnModel::train(ds, {2, kCosine});
    const auto nb = model.neighbors(0);
    REQUIRE(nb.size() == 2);
    CHECK(nb[0].user == 1);
    CHECK(nb[1].user == 4);
    CHECK(model.candidates(0).size() == 3);
    // Pearson: u1's non-negative candidates u3 and u4 tie at 0.
    const auto pmodel = KnnModel::train(ds, {2, kPearson});
    CHECK(pmodel.neighbors(0)[0].user == 2);
    CHECK(pmodel.neighbors(0)[1].user == 3);
  }

  TEST_CASE("k at least n is reduced to n - 1") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = KnnModel::train(ds, {60, kCosine});
    CHECK(model.k() == 4);
    CHECK(model.k_was_reduced());
  }

  TEST_CASE("knn predictions of the toy fixture") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = KnnModel::train(ds, {2, kCosine});
    // Values replayed by hand from the neighbor lists.
    CHECK(model.predict(0, 5) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(model.predict(1, 1) == doctest::Approx(3.7442175170838405).epsilon(1e-14));
    CHECK(model.predict(1, 2) == doctest::Approx(1.7673474487484782).epsilon(1e-14));
    CHECK(model.predict(2, 5) == doctest::Approx(4.558481559887747).epsilon(1e-14));
    CHECK(model.predict(4, 4) == doctest::Approx(4.026334038989724).epsilon(1e-14));
    // u4 neighbors (u5, u3) never rated i1: item-mean fallback (5 + 4 + 2) / 3.
    CHECK(model.predict(3, 0) == doctest::Approx(11.0 / 3.0).epsilon(1e-14));
  }

  TEST_CASE("pearson neighborhoods with zero weight fall back to item means") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = KnnModel::train(ds, {2, kPearson});
    const double means[] = {11.0 / 3.0, 4.0, 10.0 / 3.0, 3.0, 4.0, 4.5};
    for (UserIndex u = 0; u < 5; ++u) {
      for (ItemIndex i = 0; i < 6; ++i) CHECK(model.predict(u, i) == doctest::Approx(means[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("knn predictions equal the dense replay on random data") {
    const auto ds = fixtures::shared(fixtures::random_dataset(13));
    const auto m = oracle::dense(*ds);
    const auto model = KnnModel::train(ds, {10, kPearson});
    std::vector<char> active(ds->num_users(), 1);
    for (UserIndex u = 0; u < ds->num_users(); u += 5) {
      const auto nbrs = oracle::neighborhood(ds->num_users(), u, 10, active,
                                             [&](std::size_t a, std::size_t b) { return user_similarity(*ds, a, b, kPearson); });
      for (ItemIndex i = 0; i < ds->num_items(); ++i) {
        const double expected = oracle::eq1(m, nbrs, i, oracle::item_mean(m, i, active));
        CHECK(model.predict(u, i) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("training is independent of the worker count") {
    const auto ds = fixtures::shared(fixtures::random_dataset(17));
    const auto a = KnnModel::train(ds, {5, kCosine}, 1);
    const auto b = KnnModel::train(ds, {5, kCosine}, 4);
    for (UserIndex u = 0; u < ds->num_users(); ++u) {
      CHECK(std::equal(a.candidates(u).begin(), a.candidates(u).end(), b.candidates(u).begin(), b.candidates(u).end()));
    }
  }

  TEST_CASE("recommend excludes rated items and breaks ties by index") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const TrainedModel model = KnnModel::train(ds, {2, kPearson});
    // All scores are item means: i6 (4.5), then i2/i5 (4.0) tie.
    const auto list = recommend(model, 2, 2);
    CHECK(list.items == std::vector<ItemIndex>{5, 1});
    CHECK(recommend(model, 0, 10).items.size() == 3);
    CHECK_THROWS_AS(recommend(model, 0, 0), UsageError);
  }

  TEST_CASE("top_items honours eligibility") {
    const std::vector<double> scores = {1.0, 3.0, 3.0, 2.0};
    const std::vector<char> eligible = {1, 0, 1, 1};
    CHECK(top_items(0, scores, eligible, 2).items == std::vector<ItemIndex>{2, 3});
  }

  TEST_CASE("nmf objective never increases and is seeded") {
    const auto ds = fixtures::shared(fixtures::random_dataset(19));
    NmfOptions o;
    o.factors = 5;
    o.max_iters = 200;
    o.tolerance = 0.0;
    const auto model = NmfModel::train(ds, o);
    const auto& h = model.objective_history();
    CHECK(h.size() == 201);
    for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1] * (1 + 1e-12) + 1e-9);
    const auto again = NmfModel::train(ds, o);
    CHECK(again.user_factors() == model.user_factors());
    CHECK(again.item_factors() == model.item_factors());
    for (double v : model.user_factors().values) CHECK(v >= 0.0);
  }

  TEST_CASE("nmf stops early on the tolerance") {
    const auto ds = fixtures::shared(fixtures::random_dataset(19));
    NmfOptions o;
    o.factors = 3;
    o.tolerance = 1e-3;
    const auto model = NmfModel::train(ds, o);
    CHECK(model.iterations() < o.max_iters);
  }

  TEST_CASE("nmf recovers an exact rank-2 matrix") {
    std::vector<fixtures::Rating> ratings;
    const double p[4][2] = {{1, 0.5}, {0.2, 1}, {1, 1}, {0.5, 0.1}};
    const double q[5][2] = {{1, 2}, {2, 0.5}, {0.5, 0.5}, {1.5, 1}, {0.3, 2}};
    for (int u = 0; u < 4; ++u) {
      for (int i = 0; i < 5; ++i) {
        ratings.push_back({"u" + std::to_string(u), "i" + std::to_string(i), p[u][0] * q[i][0] + p[u][1] * q[i][1]});
      }
    }
    const auto ds = fixtures::shared(fixtures::make(ratings, {0.0, 10.0}));
    NmfOptions o;
    o.factors = 2;
    o.max_iters = 20000;
    o.tolerance = 0.0;
    const auto model = NmfModel::train(ds, o);
    CHECK(model.final_objective() / 20.0 < 1e-6);
  }

  TEST_CASE("zero-imputed nmf fits the full matrix") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    NmfOptions o;
    o.factors = 2;
    o.mask_missing = false;
    const auto model = NmfModel::train(ds, o);
    CHECK(model.final_objective() == doctest::Approx(nmf_objective(*ds, model.user_factors(), model.item_factors(), false)));
  }

  TEST_CASE("removing a user leaves other rows' random draws unchanged") {
    const auto ds = fixtures::random_dataset(23);
    const auto reduced = remove_user(ds, 4);
    NmfOptions o;
    o.factors = 4;
    FactorMatrix p, q, rp, rq;
    nmf_initialize(ds, o, p, q);
    nmf_initialize(reduced.data, o, rp, rq);
    // Only the mean-based scale may change; the per-id draws must not.
    const double ratio = p.row(reduced.user_origin[0])[0] / rp.row(0)[0];
    for (std::size_t r = 0; r < reduced.data.num_users(); ++r) {
      const auto full_row = p.row(reduced.user_origin[r]);
      const auto row = rp.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) CHECK(full_row[c] == doctest::Approx(row[c] * ratio).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < rq.rows; ++i) {
      const auto full_row = q.row(reduced.item_origin[i]);
      for (std::size_t c = 0; c < rq.cols; ++c) CHECK(full_row[c] == doctest::Approx(rq.row(i)[c] * ratio).epsilon(1e-12));
    }
  }

  TEST_CASE("precision and recall on a hand-made split") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const TrainedModel model = KnnModel::train(ds, {2, kPearson});
    // u3's list at l = 2 is {i6, i2}; i2 relevant (5), i1 relevant (4).
    const std::vector<Triplet> test = {{2, 1, 5.0}, {2, 0, 4.0}, {0, 3, 1.0}};
    const auto acc = evaluate(model, test, 2, 4.0);
    CHECK(acc.users_evaluated == 1);
    CHECK(acc.precision == doctest::Approx(0.5));
    CHECK(acc.recall == doctest::Approx(0.5));
    CHECK_THROWS_AS(evaluate(model, {}, 2, 4.0), UsageError);
    const std::vector<Triplet> overlapping = {{0, 0, 5.0}};
    CHECK_THROWS_AS(evaluate(model, overlapping, 2, 4.0), UsageError);
  }

  TEST_CASE("knn config round trip through the variant") {
    const auto ds = fixtures::shared(fixtures::toy5x6());
    const auto model = train(ds, knn_config(2, kCosine));
    CHECK(std::holds_alternative<KnnModel>(model));
    CHECK(&dataset_of(model) == ds.get());
    CHECK(predict(model, 1, 2) == doctest::Approx(1.7673474487484782));
  }
}
