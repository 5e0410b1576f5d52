#include "regconv/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace regconv {

using nlohmann::json;

namespace {

void check_inputs(const Matrix& x, std::size_t k) {
  if (x.rows() == 0) throw DataError("k-means: no input rows");
  if (k < 1 || k > x.rows())
    throw ConfigError(fmt::format("k-means: k={} out of range [1, {}]", k, x.rows()));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double n = l2_norm(x.row(i));
    if (!(std::abs(n - 1.0) <= 1e-6))
      throw NumericError(fmt::format("k-means: row {} is not unit-norm (norm {})", i, n));
  }
}

std::size_t nearest(std::span<const double> row, const Matrix& centroids) {
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    double s = dot(row, centroids.row(j));
    if (s > best_sim) {
      best_sim = s;
      best = j;
    }
  }
  return best;
}

std::vector<std::size_t> assign_all(const Matrix& x, const Matrix& centroids) {
  std::vector<std::size_t> a(x.rows());
  parallel_for(x.rows(), [&](std::size_t i) { a[i] = nearest(x.row(i), centroids); });
  return a;
}

// Re-normalized member means. Empty clusters first take over the row farthest
// from its own centroid (drawn from clusters that keep at least one member).
Matrix update_centroids(const Matrix& x, const Matrix& previous, std::vector<std::size_t>& assign) {
  const std::size_t k = previous.rows();
  const std::size_t n = x.rows();
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t a : assign) ++counts[a];

  std::vector<char> taken(n, 0);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] != 0) continue;
    std::size_t far = n;
    double far_sim = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i] || counts[assign[i]] < 2) continue;
      double s = dot(x.row(i), previous.row(assign[i]));
      if (s < far_sim) {
        far_sim = s;
        far = i;
      }
    }
    if (far == n) throw NumericError("k-means: cannot reseed an empty cluster");
    --counts[assign[far]];
    assign[far] = j;
    counts[j] = 1;
    taken[far] = 1;
  }

  Matrix c(k, x.cols());
  std::vector<std::size_t> first_member(k, n);
  for (std::size_t i = 0; i < n; ++i) {  // fixed row order per cluster
    auto dst = c.row(assign[i]);
    auto src = x.row(i);
    for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += src[d];
    if (first_member[assign[i]] == n) first_member[assign[i]] = i;
  }
  for (std::size_t j = 0; j < k; ++j) {
    auto row = c.row(j);
    if (!normalize_in_place(row)) {
      auto src = x.row(first_member[j]);
      std::copy(src.begin(), src.end(), row.begin());
    }
  }
  return c;
}

}  // namespace

double cosine_wcss(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    total += 1.0 - dot(x.row(i), centroids.row(assignments[i]));
  return total;
}

ClusterModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  check_inputs(x, k);
  const std::size_t n = x.rows();

  // k distinct data rows via a partial Fisher-Yates shuffle.
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t j = 0; j < k; ++j) std::swap(order[j], order[j + rng.index(n - j)]);

  ClusterModel model;
  model.k = k;
  model.seed = seed;
  model.centroids = Matrix(k, x.cols());
  for (std::size_t j = 0; j < k; ++j) {
    auto src = x.row(order[j]);
    std::copy(src.begin(), src.end(), model.centroids.row(j).begin());
  }
  model.assignments = assign_all(x, model.centroids);

  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    Matrix updated = update_centroids(x, model.centroids, model.assignments);
    double movement = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      movement = std::max(movement, 1.0 - dot(model.centroids.row(j), updated.row(j)));
    auto reassigned = assign_all(x, updated);
    const bool changed = reassigned != model.assignments;
    model.centroids = std::move(updated);
    model.assignments = std::move(reassigned);
    model.wcss_trace.push_back(cosine_wcss(x, model.centroids, model.assignments));
    model.iterations = it;
    if (!changed || movement < options.tol) {
      model.converged = true;
      break;
    }
  }
  model.wcss = cosine_wcss(x, model.centroids, model.assignments);
  if (!std::isfinite(model.wcss)) throw NumericError("k-means: non-finite objective");
  return model;
}

ClusterModel kmeans_fit(const EmbeddingMatrix& x, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options) {
  return kmeans_fit(x.rows, k, seed, options);
}

ClusterModel kmeans_restarts(const Matrix& x, std::size_t k, std::span<const std::uint64_t> seeds,
                             const KMeansOptions& options) {
  if (seeds.empty()) throw ConfigError("k-means restarts: at least one seed is required");
  std::vector<ClusterModel> runs;
  runs.reserve(seeds.size());
  for (auto s : seeds) runs.push_back(kmeans_fit(x, k, s, options));
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].wcss < runs[best].wcss ||
        (runs[r].wcss == runs[best].wcss && runs[r].seed < runs[best].seed))
      best = r;
  }
  return std::move(runs[best]);
}

ElbowCurve select_elbow(std::vector<std::size_t> k_values, std::vector<double> wcss_values) {
  if (k_values.size() != wcss_values.size() || k_values.size() < 2)
    throw ConfigError("elbow: need at least two (k, wcss) points");
  ElbowCurve curve;
  curve.k_values = std::move(k_values);
  curve.wcss_values = std::move(wcss_values);

  const double k0 = static_cast<double>(curve.k_values.front());
  const double k1 = static_cast<double>(curve.k_values.back());
  const auto [wmin_it, wmax_it] = std::minmax_element(curve.wcss_values.begin(), curve.wcss_values.end());
  const double wmin = *wmin_it, wmax = *wmax_it;

  curve.distances.assign(curve.k_values.size(), 0.0);
  if (wmax > wmin && k1 > k0) {
    auto nx = [&](std::size_t i) { return (static_cast<double>(curve.k_values[i]) - k0) / (k1 - k0); };
    auto ny = [&](std::size_t i) { return (curve.wcss_values[i] - wmin) / (wmax - wmin); };
    const std::size_t last = curve.k_values.size() - 1;
    const double ax = nx(0), ay = ny(0), bx = nx(last), by = ny(last);
    const double len = std::hypot(bx - ax, by - ay);
    if (len > 0.0) {
      for (std::size_t i = 0; i < curve.k_values.size(); ++i)
        curve.distances[i] = std::abs((bx - ax) * (ay - ny(i)) - (ax - nx(i)) * (by - ay)) / len;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.distances.size(); ++i)
    if (curve.distances[i] > curve.distances[best]) best = i;
  if (curve.distances[best] < 0.01) {
    curve.degenerate = true;
    curve.selected_k = curve.k_values.front();
  } else {
    curve.selected_k = curve.k_values[best];
  }
  return curve;
}

ElbowCurve elbow_select_k(const Matrix& x, std::size_t k_min, std::size_t k_max,
                          std::span<const std::uint64_t> seeds, const KMeansOptions& options) {
  if (k_min < 1 || k_max > x.rows() || k_min >= k_max)
    throw ConfigError(fmt::format("elbow: invalid K range [{}, {}] for {} rows", k_min, k_max, x.rows()));
  std::vector<std::size_t> ks;
  std::vector<double> ws;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    ks.push_back(k);
    ws.push_back(kmeans_restarts(x, k, seeds, options).wcss);
  }
  return select_elbow(std::move(ks), std::move(ws));
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), base);
  return s;
}

json cluster_model_to_json(const ClusterModel& model, std::span<const std::string> ids) {
  if (ids.size() != model.assignments.size()) throw DataError("cluster dump: id count mismatch");
  json assignments = json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) assignments[ids[i]] = model.assignments[i];
  json centroids = json::array();
  for (std::size_t j = 0; j < model.centroids.rows(); ++j) {
    auto r = model.centroids.row(j);
    centroids.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"k", model.k},
          {"seed", model.seed},
          {"iterations", model.iterations},
          {"converged", model.converged},
          {"wcss", model.wcss},
          {"wcss_trace", model.wcss_trace},
          {"assignments", assignments},
          {"centroids", centroids}};
}

ClusterModel cluster_model_from_json(const json& doc, std::span<const std::string> ids) {
  try {
    ClusterModel m;
    m.k = doc.at("k").get<std::size_t>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.iterations = doc.at("iterations").get<std::size_t>();
    m.converged = doc.at("converged").get<bool>();
    m.wcss = doc.at("wcss").get<double>();
    m.wcss_trace = doc.at("wcss_trace").get<std::vector<double>>();
    const auto& a = doc.at("assignments");
    if (a.size() != ids.size()) throw DataError("cluster model: assignment count does not match embeddings");
    for (const auto& id : ids) {
      auto it = a.find(id);
      if (it == a.end()) throw DataError(fmt::format("cluster model: no assignment for '{}'", id));
      std::size_t c = it->get<std::size_t>();
      if (c >= m.k) throw DataError(fmt::format("cluster model: assignment {} out of range", c));
      m.assignments.push_back(c);
    }
    const auto& c = doc.at("centroids");
    if (c.size() != m.k || m.k == 0) throw DataError("cluster model: centroid count does not match k");
    m.centroids = Matrix(m.k, c.at(0).size());
    for (std::size_t j = 0; j < m.k; ++j) {
      auto row = c.at(j).get<std::vector<double>>();
      if (row.size() != m.centroids.cols()) throw DataError("cluster model: ragged centroid matrix");
      std::copy(row.begin(), row.end(), m.centroids.row(j).begin());
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("cluster model: {}", e.what()));
  }
}

json elbow_to_json(const ElbowCurve& curve) {
  return {{"k_values", curve.k_values},
          {"wcss_values", curve.wcss_values},
          {"chord_distances", curve.distances},
          {"selected_k", curve.selected_k},
          {"degenerate", curve.degenerate}};
}

}  // namespace regconv
