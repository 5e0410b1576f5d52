#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "regconv/common.hpp"
#include "regconv/embed.hpp"

namespace regconv {

struct TsneParams {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
};

struct Projection2D {
  std::vector<std::string> provision_ids;
  Matrix coords;  // n x 2
  double kl_initial = 0.0;  // KL when early exaggeration is switched off
  double kl_final = 0.0;
  TsneParams params;
};

/// Largest perplexity strictly below (n - 1) / 3, capped at `requested`.
double clamp_perplexity(double requested, std::size_t n);

/// Squared Euclidean distances between rows.
Matrix squared_distances(const Matrix& x);

/// Conditional affinities p(j|i) with a per-row precision found by bisection
/// so that each row's entropy (bits) matches log2(perplexity). Optionally
/// returns the per-row entropies.
Matrix conditional_affinities(const Matrix& sq_dist, double perplexity,
                              std::vector<double>* entropies = nullptr);

/// Symmetrized joint affinities P = (P_cond + P_cond^T) / (2n).
Matrix joint_affinities(const Matrix& x, double perplexity);

/// KL(P || Q(Y)) with Student-t Q.
double tsne_kl(const Matrix& p, const Matrix& y);

/// Exact gradient of tsne_kl with respect to Y (n x 2).
Matrix tsne_gradient(const Matrix& p, const Matrix& y);

/// Exact O(n^2) t-SNE to two dimensions.
///
/// Momentum 0.5 switches to 0.8 at iteration 250; P is exaggerated 4x for
/// the first 100 iterations; per-coordinate gains as in the reference
/// implementation; Y starts as seeded Gaussian noise scaled by 1e-4.
Projection2D tsne_project(const EmbeddingMatrix& x, const TsneParams& params);

struct ScatterOutput {
  std::string svg;
  std::string csv;
};

/// SVG scatter (color = cluster, marker shape = corpus, with legend) plus a
/// CSV with columns id,x,y,cluster,corpus.
ScatterOutput emit_scatter(const Projection2D& proj, std::span<const std::size_t> assignments,
                           const std::map<std::string, std::string>& corpus_of);

}  // namespace regconv
