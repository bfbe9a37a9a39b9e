// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nae {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  void fill(double v);
  Matrix transposed() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b. Throws ConfigError on a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ * b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * bᵀ.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// out += a * b (shapes must already agree).
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out);
/// out += aᵀ * b.
void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& out);

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }
double sigmoid(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

/// Sentinel used for masked gate entries. Never participates in arithmetic.
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-feature expert mask: entry k is either 0 (active) or kNegInf (masked).
class MaskVector {
 public:
  MaskVector() = default;
  /// All-active mask of length k.
  explicit MaskVector(std::size_t k) : active_(k, 1) {}
  /// Builds from explicit {0, kNegInf} values; any other value is a ConfigError.
  static MaskVector from_values(std::span<const double> values);

  std::size_t size() const noexcept { return active_.size(); }
  bool active(std::size_t k) const noexcept { return active_[k] != 0; }
  void set_active(std::size_t k, bool on) noexcept { active_[k] = on ? 1 : 0; }
  double value(std::size_t k) const noexcept { return active_[k] ? 0.0 : kNegInf; }
  std::size_t active_count() const noexcept;

  friend bool operator==(const MaskVector&, const MaskVector&) = default;

 private:
  std::vector<std::uint8_t> active_;
};

/// Softmax over the active entries; masked entries come out exactly 0.
std::vector<double> softmax_masked(std::span<const double> logits, const MaskVector& mask);
/// Same as softmax_masked, writing into `out`.
void softmax_masked_into(std::span<const double> logits, const MaskVector& mask, std::span<double> out);

/// Mask keeping the c largest logits; ties go to the lower index.
MaskVector top_c_mask(std::span<const double> logits, std::size_t c);

/// xoshiro256** seeded through splitmix64. The integer stream is identical on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; the spare variate is cached.
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Derives an independent stream for a named purpose (data, init, dropout, ...).
  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t offset) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Inverse-transform Gumbel(0,1): -log(-log(u)).
inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

/// rows x cols matrix of independent Gumbel(0,1) draws.
Matrix sample_gumbel(SeededRng& rng, std::size_t rows, std::size_t cols);

/// Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, SeededRng& rng);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

/// Standard normal quantile (Acklam's rational approximation, relative error < 1.15e-9).
double normal_quantile(double p);

}  // namespace nae
