#include <doctest.h>

#include <map>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "regconv/cluster.hpp"

using namespace regconv;

namespace {

// Relabel clusters by order of first member so partitions compare directly.
std::vector<std::size_t> canonical(const std::vector<std::size_t>& a) {
  std::map<std::size_t, std::size_t> relabel;
  std::vector<std::size_t> out;
  for (auto c : a) {
    auto it = relabel.try_emplace(c, relabel.size()).first;
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::size_t> canonical(const std::vector<int>& a) {
  return canonical(std::vector<std::size_t>(a.begin(), a.end()));
}

const std::vector<oracle::Vec> kFour = {{1.0, 0.0}, {0.981, 0.196}, {0.0, 1.0}, {0.196, 0.981}};

Matrix four_points() {
  Matrix m = oracle::to_matrix(kFour);
  for (std::size_t i = 0; i < m.rows(); ++i) normalize_in_place(m.row(i));
  return m;
}

}  // namespace

TEST_CASE("four-point example matches the brute-force partition") {
  std::vector<oracle::Vec> rows;
  for (const auto& v : kFour) rows.push_back(oracle::unit(v));
  const auto best = oracle::exhaustive_min_wcss(rows, 2);
  CHECK(canonical(best.labels) == std::vector<std::size_t>{0, 0, 1, 1});

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ClusterModel m = kmeans_fit(four_points(), 2, seed);
    CHECK(canonical(m.assignments) == std::vector<std::size_t>{0, 0, 1, 1});
    CHECK(m.wcss == doctest::Approx(best.wcss).epsilon(1e-9));
  }
  const auto seeds = seed_range(1, 50);
  ClusterModel r = kmeans_restarts(four_points(), 2, seeds);
  CHECK(canonical(r.assignments) == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("k = 1 and k = n") {
  Matrix x = four_points();
  ClusterModel one = kmeans_fit(x, 1, 3);
  CHECK(one.assignments == std::vector<std::size_t>{0, 0, 0, 0});
  std::vector<double> mean(2, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) mean[j] += x(i, j);
  normalize_in_place(mean);
  CHECK(one.centroids(0, 0) == doctest::Approx(mean[0]).epsilon(1e-12));
  CHECK(one.centroids(0, 1) == doctest::Approx(mean[1]).epsilon(1e-12));

  ClusterModel all = kmeans_fit(x, 4, 3);
  CHECK(std::set<std::size_t>(all.assignments.begin(), all.assignments.end()).size() == 4);
  CHECK(std::abs(all.wcss) <= 1e-12);
}

TEST_CASE("argument errors") {
  Matrix x = four_points();
  CHECK_THROWS_AS(kmeans_fit(x, 0, 1), ConfigError);
  CHECK_THROWS_AS(kmeans_fit(x, 5, 1), ConfigError);
  Matrix bad = x;
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(kmeans_fit(bad, 2, 1), NumericError);
  CHECK_THROWS_AS(kmeans_restarts(x, 2, std::vector<std::uint64_t>{}), ConfigError);
  CHECK_THROWS_AS(elbow_select_k(x, 3, 3, seed_range(0, 2)), ConfigError);
  CHECK_THROWS_AS(elbow_select_k(x, 1, 5, seed_range(0, 2)), ConfigError);
}

TEST_CASE("restart wrapper semantics") {
  auto rows = oracle::random_unit_rows(30, 4, 17);
  Matrix x = oracle::to_matrix(rows);
  const std::vector<std::uint64_t> one{9};
  CHECK(kmeans_restarts(x, 3, one) == kmeans_fit(x, 3, 9));
  const std::vector<std::uint64_t> dup{4, 4, 2, 2, 7};
  const std::vector<std::uint64_t> dedup{4, 2, 7};
  CHECK(kmeans_restarts(x, 3, dup) == kmeans_restarts(x, 3, dedup));
  ClusterModel best = kmeans_restarts(x, 3, dedup);
  for (auto s : dedup) CHECK(best.wcss <= kmeans_fit(x, 3, s).wcss);
}

TEST_CASE("model invariants and monotone objective") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rows = oracle::random_unit_rows(40, 5, 100 + seed);
    Matrix x = oracle::to_matrix(rows);
    ClusterModel m = kmeans_fit(x, 4, seed);
    for (auto a : m.assignments) CHECK(a < 4);
    for (std::size_t c = 0; c < 4; ++c) CHECK(l2_norm(m.centroids.row(c)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.wcss == doctest::Approx(cosine_wcss(x, m.centroids, m.assignments)).epsilon(1e-12));
    CHECK(m.wcss >= 0.0);
    REQUIRE_FALSE(m.wcss_trace.empty());
    for (std::size_t i = 1; i < m.wcss_trace.size(); ++i) CHECK(m.wcss_trace[i] <= m.wcss_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("rescaling and permuting rows") {
  auto rows = oracle::gaussian_blobs({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 8, 0.1, 4);
  Matrix x = oracle::to_matrix(rows);
  ClusterModel base = kmeans_fit(x, 3, 5);

  // Positive rescaling followed by re-normalization leaves assignments alone.
  Matrix scaled = x;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    for (double& v : scaled.row(i)) v *= 1.0 + static_cast<double>(i);
    normalize_in_place(scaled.row(i));
  }
  CHECK(canonical(kmeans_restarts(scaled, 3, seed_range(0, 10)).assignments) ==
        canonical(kmeans_restarts(x, 3, seed_range(0, 10)).assignments));

  std::vector<std::size_t> perm(x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(1);
  std::shuffle(perm.begin(), perm.end(), gen);
  Matrix px(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), px.row(i).begin());
  ClusterModel pm = kmeans_restarts(px, 3, seed_range(0, 10));
  ClusterModel bm = kmeans_restarts(x, 3, seed_range(0, 10));
  std::vector<std::size_t> back(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = pm.assignments[i];
  CHECK(canonical(back) == canonical(bm.assignments));
  (void)base;
}

TEST_CASE("thread count does not change the model") {
  auto rows = oracle::random_unit_rows(200, 8, 3);
  Matrix x = oracle::to_matrix(rows);
  set_thread_count(1);
  ClusterModel a = kmeans_restarts(x, 5, seed_range(0, 10));
  set_thread_count(8);
  ClusterModel b = kmeans_restarts(x, 5, seed_range(0, 10));
  set_thread_count(0);
  CHECK(a == b);
}

TEST_CASE("empty clusters are reseeded") {
  // Five copies of one direction and one other point; k = 3 forces reseeding.
  Matrix x = oracle::to_matrix({{1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}, {0, 1}});
  for (std::uint64_t s = 0; s < 10; ++s) {
    ClusterModel m = kmeans_fit(x, 3, s);
    for (auto a : m.assignments) CHECK(a < 3);
    CHECK(std::isfinite(m.wcss));
  }
}

TEST_CASE("elbow on the hand curve") {
  // Normalized points: (0,1), (1/3, 3/83), (2/3, 1/83), (1,0); chord x + y = 1.
  // Distances: 0, 0.4459, 0.2271, 0 -> K = 2.
  ElbowCurve c = select_elbow({1, 2, 3, 4}, {100, 20, 18, 17});
  CHECK(c.selected_k == 2);
  CHECK_FALSE(c.degenerate);
  CHECK(c.distances[1] == doctest::Approx((1.0 - 1.0 / 3.0 - 3.0 / 83.0) / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(oracle::chord_knee({1, 2, 3, 4}, {100, 20, 18, 17}) == 1);
}

TEST_CASE("linear curve is degenerate") {
  ElbowCurve c = select_elbow({2, 3, 4, 5, 6}, {10, 8, 6, 4, 2});
  CHECK(c.degenerate);
  CHECK(c.selected_k == 2);
  ElbowCurve flat = select_elbow({1, 2, 3}, {5, 5, 5});
  CHECK(flat.degenerate);
  CHECK(flat.selected_k == 1);
}

TEST_CASE("elbow on three separated clusters agrees with the chord oracle") {
  std::vector<int> truth;
  auto rows = oracle::gaussian_blobs({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}, 10, 0.05, 12, &truth);
  ElbowCurve c = elbow_select_k(oracle::to_matrix(rows), 1, 8, seed_range(0, 10));
  CHECK(c.k_values.size() == 8);
  std::vector<double> ks(c.k_values.begin(), c.k_values.end());
  CHECK(c.k_values[oracle::chord_knee(ks, c.wcss_values)] == c.selected_k);
  CHECK(c.selected_k == 3);
}

TEST_CASE("model json round trip") {
  auto rows = oracle::random_unit_rows(12, 3, 9);
  Matrix x = oracle::to_matrix(rows);
  ClusterModel m = kmeans_fit(x, 3, 2);
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("r" + std::to_string(i));
  auto j = cluster_model_to_json(m, ids);
  CHECK(j.at("assignments").at("r4").get<std::size_t>() == m.assignments[4]);
  ClusterModel back = cluster_model_from_json(nlohmann::json::parse(j.dump()), ids);
  CHECK(back.assignments == m.assignments);
  CHECK(back.k == m.k);
  CHECK(back.wcss == m.wcss);
  for (std::size_t i = 0; i < m.centroids.data().size(); ++i)
    CHECK(back.centroids.data()[i] == m.centroids.data()[i]);
  std::vector<std::string> short_ids(ids.begin(), ids.end() - 1);
  CHECK_THROWS_AS(cluster_model_from_json(j, short_ids), DataError);
}
