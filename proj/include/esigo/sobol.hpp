#pragma once

#include <Eigen/Core>

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "esigo/errors.hpp"
#include "esigo/math.hpp"

namespace esigo {

namespace detail {

// Primitive polynomials (coefficient bit masks, including both end bits) and
// initial direction numbers for the first 32 Sobol dimensions, Joe-Kuo order.
// Dimension 0 is the van der Corput sequence and uses no table entry.
inline constexpr int sobol_max_dim = 32;

inline constexpr std::uint32_t sobol_poly[sobol_max_dim] = {
    1,   3,   7,   11,  13,  19,  25,  37,  41,  47,  55,  59,  61,  67,  91,  97,
    103, 109, 115, 131, 137, 143, 145, 157, 167, 171, 185, 191, 193, 203, 211, 213};

inline constexpr std::uint32_t sobol_vinit[sobol_max_dim][8] = {
    {1},
    {1},
    {1, 3},
    {1, 3, 1},
    {1, 1, 1},
    {1, 1, 3, 3},
    {1, 3, 5, 13},
    {1, 1, 5, 5, 17},
    {1, 1, 5, 5, 5},
    {1, 1, 7, 11, 19},
    {1, 1, 5, 1, 1},
    {1, 1, 1, 3, 11},
    {1, 3, 5, 5, 31},
    {1, 3, 3, 9, 7, 49},
    {1, 1, 1, 15, 21, 21},
    {1, 3, 1, 13, 27, 49},
    {1, 1, 1, 15, 7, 5},
    {1, 3, 1, 15, 13, 25},
    {1, 1, 5, 5, 19, 61},
    {1, 3, 7, 11, 23, 15, 103},
    {1, 3, 7, 13, 13, 15, 69},
    {1, 1, 3, 13, 7, 35, 63},
    {1, 3, 5, 9, 1, 25, 53},
    {1, 3, 1, 13, 9, 35, 107},
    {1, 3, 1, 5, 27, 61, 31},
    {1, 1, 5, 11, 19, 41, 61},
    {1, 3, 5, 3, 3, 13, 69},
    {1, 1, 7, 13, 1, 19, 1},
    {1, 3, 7, 5, 13, 19, 59},
    {1, 1, 3, 9, 25, 29, 41},
    {1, 3, 5, 13, 23, 1, 55},
    {1, 3, 7, 3, 13, 59, 17}};

}  // namespace detail

/// Unscrambled 32-bit Sobol sequence in Gray-code order.
///
/// Point 0 is the origin; callers that map points through the inverse normal
/// CDF should skip it.  Supports up to 32 dimensions.
class SobolSequence {
 public:
  static constexpr int max_dim = detail::sobol_max_dim;

  explicit SobolSequence(int dim) : dim_(dim), v_(dim), x_(dim, 0) {
    if (dim < 1 || dim > max_dim)
      throw ConfigError("SobolSequence: dim must lie in [1, " + std::to_string(max_dim) + "]");
    for (int j = 0; j < dim; ++j) {
      auto& v = v_[j];
      if (j == 0) {
        for (int k = 0; k < 32; ++k) v[k] = 1u << (31 - k);
        continue;
      }
      const std::uint32_t poly = detail::sobol_poly[j];
      const int s = 31 - std::countl_zero(poly);  // polynomial degree
      for (int k = 0; k < s; ++k) v[k] = detail::sobol_vinit[j][k] << (31 - k);
      for (int k = s; k < 32; ++k) {
        std::uint32_t val = v[k - s] ^ (v[k - s] >> s);
        for (int i = 1; i < s; ++i)
          if ((poly >> (s - i)) & 1u) val ^= v[k - i];
        v[k] = val;
      }
    }
  }

  int dim() const { return dim_; }
  std::uint64_t index() const { return index_; }

  /// Write the current point as doubles in [0,1) and advance.
  void next(double* out) {
    for (int j = 0; j < dim_; ++j) out[j] = x_[j] * 0x1.0p-32;
    advance();
  }

  /// Advance past n points without emitting them.
  void skip(std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) advance();
  }

 private:
  void advance() {
    if (index_ == 0xffffffffULL) throw NumericalError("SobolSequence: 2^32 point budget exhausted");
    const int c = std::countr_zero(~index_);  // rightmost zero bit of the index
    for (int j = 0; j < dim_; ++j) x_[j] ^= v_[j][c];
    ++index_;
  }

  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, 32>> v_;
  std::vector<std::uint32_t> x_;
};

/// First n Sobol points (skipping the origin) as an n x dim matrix.
inline Eigen::MatrixXd sobol_uniform(int n, int dim) {
  if (n < 1) throw ConfigError("sobol_uniform: n must be >= 1");
  SobolSequence seq(dim);
  seq.skip(1);
  Eigen::MatrixXd out(n, dim);
  std::vector<double> row(dim);
  for (int r = 0; r < n; ++r) {
    seq.next(row.data());
    for (int j = 0; j < dim; ++j) out(r, j) = row[j];
  }
  return out;
}

/// Standard-normal quasi-random point set: Sobol points (origin skipped)
/// mapped through the inverse normal CDF.  Deterministic in (n, dim).
inline Eigen::MatrixXd sobol_normal_points(int n, int dim) {
  Eigen::MatrixXd u = sobol_uniform(n, dim);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < dim; ++j) u(r, j) = normal_quantile(u(r, j));
  return u;
}

}  // namespace esigo
