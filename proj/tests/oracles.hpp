// Reference computations used by the tests. Written independently of the
// library code they check: brute force where feasible, textbook formulas
// otherwise.
#pragma once

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "regconv/common.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline regconv::Matrix to_matrix(const std::vector<Vec>& rows) {
  regconv::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline Vec unit(Vec v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x /= s;
  return v;
}

/// Cosine WCSS of one partition with the optimal (normalized-mean) centroids.
inline double partition_wcss(const std::vector<Vec>& x, const std::vector<int>& labels, int k) {
  const std::size_t d = x[0].size();
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    Vec sum(d, 0.0);
    std::size_t members = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (labels[i] == c) {
        ++members;
        for (std::size_t j = 0; j < d; ++j) sum[j] += x[i][j];
      }
    double norm = 0.0;
    for (double v : sum) norm += v * v;
    norm = std::sqrt(norm);
    // sum_i (1 - cos(x_i, mean)) = members - |sum|
    total += static_cast<double>(members) - norm;
  }
  return total;
}

struct BestPartition {
  double wcss = std::numeric_limits<double>::infinity();
  std::vector<int> labels;
};

/// Exhaustive search over all assignments of n rows to k non-empty clusters.
inline BestPartition exhaustive_min_wcss(const std::vector<Vec>& x, int k) {
  const std::size_t n = x.size();
  BestPartition best;
  std::vector<int> labels(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(k);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::vector<int> used(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(c % k);
      used[labels[i]] = 1;
      c /= k;
    }
    bool all = true;
    for (int u : used) all = all && u;
    if (!all) continue;
    const double w = partition_wcss(x, labels, k);
    if (w < best.wcss) {
      best.wcss = w;
      best.labels = labels;
    }
  }
  return best;
}

/// Knee by maximum distance to the end-point chord after min-max scaling.
/// Distance taken as the rejection of (p - a) from the chord direction.
inline std::size_t chord_knee(const std::vector<double>& ks, const std::vector<double>& ws, double* max_dist = nullptr) {
  double kmin = ks.front(), kmax = ks.back();
  double wmin = ws[0], wmax = ws[0];
  for (double w : ws) {
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
  }
  std::vector<double> px, py;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    px.push_back((ks[i] - kmin) / (kmax - kmin));
    py.push_back(wmax > wmin ? (ws[i] - wmin) / (wmax - wmin) : 0.0);
  }
  const double ux0 = px.back() - px.front(), uy0 = py.back() - py.front();
  const double len = std::sqrt(ux0 * ux0 + uy0 * uy0);
  const double ux = ux0 / len, uy = uy0 / len;
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double vx = px[i] - px.front(), vy = py[i] - py.front();
    const double along = vx * ux + vy * uy;
    const double d = std::sqrt(std::max(0.0, vx * vx + vy * vy - along * along));
    if (d > best_d + 1e-15) {
      best_d = d;
      best = i;
    }
  }
  if (max_dist) *max_dist = best_d;
  return best;
}

/// Central finite-difference gradient of f at x.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(|b|, floor)
inline double max_relative_error(const Vec& a, const Vec& b, double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  return worst;
}

/// Relative error of the whole vector: |a - b| / |b|.
inline double vector_relative_error(const Vec& a, const Vec& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

/// Mean silhouette with Euclidean distance on 2D points.
inline double silhouette(const std::vector<std::array<double, 2>>& y, const std::vector<int>& labels) {
  const std::size_t n = y.size();
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum[labels[j]] += std::hypot(y[i][0] - y[j][0], y[i][1] - y[j][1]);
      ++cnt[labels[j]];
    }
    if (cnt[labels[i]] == 0) continue;
    const double a = sum[labels[i]] / cnt[labels[i]];
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != labels[i] && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

/// Unit rows around `centers` with Gaussian noise of scale `spread`.
inline std::vector<Vec> gaussian_blobs(const std::vector<Vec>& centers, std::size_t per_center, double spread,
                                       std::uint64_t seed, std::vector<int>* labels = nullptr) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<Vec> rows;
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t p = 0; p < per_center; ++p) {
      Vec v = centers[c];
      for (double& x : v) x += noise(gen);
      rows.push_back(unit(v));
      if (labels) labels->push_back(static_cast<int>(c));
    }
  return rows;
}

/// Random unit vectors (independent generator).
inline std::vector<Vec> random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec> rows(n, Vec(d));
  for (auto& r : rows) {
    for (double& x : r) x = g(gen);
    r = unit(r);
  }
  return rows;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("regconv-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace oracle
