#pragma once

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "esigo/errors.hpp"

namespace esigo {

inline constexpr double pi = 3.14159265358979323846;

/// Standard normal density.
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
}

/// Standard normal CDF, accurate in both tails.
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// Inverse standard normal CDF for u in (0,1).
inline double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal_quantile: u must lie in (0,1)");
  // erfc_inv keeps full precision in the tail that matters.
  if (u < 0.5) return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * (1.0 - u));
}

/// Regularized lower incomplete gamma P(a, x); CDF of chi-square with
/// 2a degrees of freedom evaluated at 2x.
inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

/// 64-bit finalizing mixer (splitmix64 style); bijective on uint64.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1,1],
/// computed by Newton iteration on the Legendre polynomial.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    if (n < 1) throw DomainError("GaussLegendre: n must be >= 1");
    for (int i = 0; i < n; ++i) {
      double x = std::cos(pi * (i + 0.75) / (n + 0.5));  // Chebyshev-like initial guess
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        // Evaluate P_n and P_n' by the three-term recurrence.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = x;
      weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

/// Integrate fn over [a,b] with an n-point Gauss-Legendre rule.
template <class Fn>
double gauss_legendre_panel(Fn&& fn, double a, double b, const GaussLegendre& rule) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * fn(mid + half * rule.nodes[i]);
  return half * acc;
}

/// Controls for the adaptive panel-doubling quadrature used by alpha_b2.
struct QuadratureSettings {
  double abs_tol = 1e-10;
  int nodes_per_panel = 16;
  int initial_panels = 8;
  int max_panels = 1 << 16;
};

/// Composite Gauss-Legendre quadrature of fn over [a,b]; the panel count
/// doubles until two successive estimates agree within abs_tol.
template <class Fn>
double adaptive_quadrature(Fn&& fn, double a, double b, const QuadratureSettings& qs) {
  const GaussLegendre rule(qs.nodes_per_panel);
  auto composite = [&](int panels) {
    const double h = (b - a) / panels;
    double acc = 0.0;
    for (int j = 0; j < panels; ++j)
      acc += gauss_legendre_panel(fn, a + j * h, a + (j + 1) * h, rule);
    return acc;
  };
  double prev = composite(qs.initial_panels);
  for (int panels = 2 * qs.initial_panels; panels <= qs.max_panels; panels *= 2) {
    const double cur = composite(panels);
    if (std::abs(cur - prev) <= qs.abs_tol) return cur;
    prev = cur;
  }
  throw NumericalError("adaptive_quadrature: no convergence within panel budget");
}

/// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("fit_line: need two samples of equal length");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw DomainError("fit_line: degenerate abscissae");
  const double slope = (n * sxy - sx * sy) / denom;
  return {slope, (sy - slope * sx) / n};
}

}  // namespace esigo
