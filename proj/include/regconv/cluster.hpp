#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regconv/common.hpp"
#include "regconv/embed.hpp"

namespace regconv {

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;                     // k x dim, unit rows
  std::vector<std::size_t> assignments;  // per input row
  double wcss = 0.0;                    // sum of (1 - cos) to the assigned centroid
  std::size_t iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  std::vector<double> wcss_trace;  // objective after each Lloyd iteration

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct KMeansOptions {
  std::size_t max_iters = 300;
  double tol = 1e-6;
};

struct ElbowCurve {
  std::vector<std::size_t> k_values;
  std::vector<double> wcss_values;
  std::size_t selected_k = 0;
  bool degenerate = false;
  std::vector<double> distances;  // normalized distance of each point to the chord
};

/// Cosine WCSS of an assignment against the given centroids.
double cosine_wcss(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> assignments);

/// Spherical K-means (Lloyd iterations on the unit sphere).
///
/// Initial centroids are k distinct data rows drawn with `seed`. Each row is
/// assigned to its most cosine-similar centroid (ties to the lowest index);
/// each centroid becomes the re-normalized mean of its members. An empty
/// cluster takes over the row farthest from its own centroid. Stops when no
/// assignment changes, the largest centroid movement (1 - cos) drops below
/// `tol`, or after `max_iters` iterations.
ClusterModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options = {});
ClusterModel kmeans_fit(const EmbeddingMatrix& x, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& options = {});

/// Best run over `seeds` by wcss; ties go to the lowest seed.
ClusterModel kmeans_restarts(const Matrix& x, std::size_t k, std::span<const std::uint64_t> seeds,
                             const KMeansOptions& options = {});

/// Picks the K whose (k, wcss) point lies farthest from the chord between the
/// curve's end points after min-max normalizing both axes. A maximum distance
/// below 0.01 marks the curve degenerate and selects k_values.front().
ElbowCurve select_elbow(std::vector<std::size_t> k_values, std::vector<double> wcss_values);

ElbowCurve elbow_select_k(const Matrix& x, std::size_t k_min, std::size_t k_max,
                          std::span<const std::uint64_t> seeds, const KMeansOptions& options = {});

/// Seeds base, base + 1, ..., base + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);

nlohmann::json cluster_model_to_json(const ClusterModel& model, std::span<const std::string> ids);
/// Inverse of cluster_model_to_json; assignments are read in `ids` order.
ClusterModel cluster_model_from_json(const nlohmann::json& doc, std::span<const std::string> ids);
nlohmann::json elbow_to_json(const ElbowCurve& curve);

}  // namespace regconv
