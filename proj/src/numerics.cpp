// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <string>

#include "nae/errors.hpp"

namespace nae {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigError("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// out[r, :] += a[r, k] * b[k, :]; the inner loop is a contiguous axpy.
void gemm_rowmajor(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    double* __restrict orow = out + r * n;
    const double* arow = a + r * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      if (s == 0.0) continue;
      const double* __restrict brow = b + p * n;
      for (std::size_t c = 0; c < n; ++c) orow[c] += s * brow[c];
    }
  }
}

}  // namespace

void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
    throw ConfigError("matmul: incompatible shapes " + shape(a) + " * " + shape(b) + " -> " +
                      shape(out));
  gemm_rowmajor(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ConfigError("matmul: incompatible shapes " + shape(a) + " * " + shape(b));
  Matrix out(a.rows(), b.cols());
  gemm_rowmajor(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
    throw ConfigError("matmul_tn: incompatible shapes " + shape(a) + "^T * " + shape(b));
  const std::size_t n = b.cols();
  for (std::size_t t = 0; t < a.rows(); ++t) {
    const double* arow = a.data() + t * a.cols();
    const double* __restrict brow = b.data() + t * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      double* __restrict orow = out.data() + i * n;
      for (std::size_t c = 0; c < n; ++c) orow[c] += s * brow[c];
    }
  }
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols(), b.cols());
  matmul_tn_accumulate(a, b, out);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ConfigError("matmul_nt: incompatible shapes " + shape(a) + " * " + shape(b) + "^T");
  const Matrix bt = b.transposed();
  return matmul(a, bt);
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

MaskVector MaskVector::from_values(std::span<const double> values) {
  MaskVector m(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] == 0.0)
      m.set_active(k, true);
    else if (values[k] == kNegInf)
      m.set_active(k, false);
    else
      throw ConfigError("mask entries must be 0 or NEG_INF");
  }
  return m;
}

std::size_t MaskVector::active_count() const noexcept {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), std::uint8_t{1}));
}

void softmax_masked_into(std::span<const double> logits, const MaskVector& mask,
                         std::span<double> out) {
  const std::size_t k = logits.size();
  if (mask.size() != k || out.size() != k) throw ConfigError("softmax_masked: length mismatch");
  double peak = kNegInf;
  for (std::size_t i = 0; i < k; ++i)
    if (mask.active(i)) peak = std::max(peak, logits[i]);
  if (peak == kNegInf) throw ConfigError("softmax_masked: every entry is masked");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = mask.active(i) ? std::exp(logits[i] - peak) : 0.0;
    total += out[i];
  }
  for (std::size_t i = 0; i < k; ++i) out[i] /= total;
}

std::vector<double> softmax_masked(std::span<const double> logits, const MaskVector& mask) {
  std::vector<double> out(logits.size());
  softmax_masked_into(logits, mask, out);
  return out;
}

MaskVector top_c_mask(std::span<const double> logits, std::size_t c) {
  const std::size_t k = logits.size();
  if (c < 1 || c > k)
    throw ConfigError("top_c_mask: c=" + std::to_string(c) + " outside [1, " + std::to_string(k) +
                      "]");
  MaskVector mask(k);
  if (c == k) return mask;
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  for (std::size_t i = 0; i < k; ++i) mask.set_active(i, false);
  for (std::size_t i = 0; i < c; ++i) mask.set_active(order[i], true);
  return mask;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t SeededRng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t SeededRng::below(std::uint64_t n) noexcept {
  // Rejection on the top of the range keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double SeededRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t SeededRng::derive_seed(std::uint64_t base, std::uint64_t offset) noexcept {
  std::uint64_t x = base ^ (0xD1B54A32D192ED03ULL * (offset + 1));
  return splitmix64(x);
}

Matrix sample_gumbel(SeededRng& rng, std::size_t rows, std::size_t cols) {
  Matrix g(rows, cols);
  for (double& v : g.values()) v = gumbel_from_uniform(rng.uniform_open());
  return g;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, SeededRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace nae
