#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace regconv {

// Error categories map onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Scales `v` to unit L2 norm. Returns false (leaving `v` untouched) when the norm is zero.
bool normalize_in_place(std::span<double> v);

/// Seeded generator with platform-independent derived distributions.
///
/// std::uniform_int_distribution and std::normal_distribution are
/// implementation-defined, so indices and Gaussians are derived here from the
/// raw mt19937_64 stream to keep artifacts identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound), rejection-sampled (no modulo bias).
  std::size_t index(std::size_t bound);
  /// Standard normal via Box-Muller.
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Number of worker threads used by parallel loops (>= 1).
unsigned thread_count();
void set_thread_count(unsigned n);

/// Calls fn(i) for i in [0, n), split in contiguous chunks across
/// thread_count() workers. Callers write results into per-index slots so the
/// output never depends on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
/// Writes the file, creating parent directories.
void write_file(const std::string& path, std::string_view contents);

std::string_view trim(std::string_view s);

/// Fixed-point formatting with `decimals` digits; negative zero printed as zero.
std::string format_fixed(double value, int decimals);

}  // namespace regconv
