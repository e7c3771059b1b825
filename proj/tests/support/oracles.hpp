#pragma once

// Independent reference implementations used to cross-check the library's
// numerics.  Deliberately simple and slow: plain Monte Carlo with the
// standard-library generator, composite Simpson quadrature, and central
// finite differences.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>

namespace oracles {

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Monte Carlo estimate of E[w(Phi(Z)) (Z^2 - 1)] for Z ~ N(0,1).
inline McEstimate mc_alpha(const std::function<double(double)>& w, std::int64_t samples,
                           std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  double s = 0.0, s2 = 0.0;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double z = normal(gen);
    const double q = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double term = w(q) * (z * z - 1.0);
    s += term;
    s2 += term * term;
  }
  const double n = static_cast<double>(samples);
  const double mean = s / n;
  const double var = (s2 - n * mean * mean) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

/// Composite Simpson quadrature of w(Phi(z)) (z^2 - 1) phi(z) over [-8, 8].
inline double simpson_alpha(const std::function<double(double)>& w, int intervals = 40000) {
  const double a = -8.0, b = 8.0;
  const double h = (b - a) / intervals;
  auto f = [&](double z) {
    const double q = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
    return w(q) * (z * z - 1.0) * phi;
  };
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// Central finite-difference gradient of a scalar field.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (long i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Monte Carlo estimate of P[|Z + delta e_1|^2 <= x] with Z ~ N(0, I_dof),
/// |delta|^2 = lam.
inline McEstimate mc_ncx2(double x, int dof, double lam, std::int64_t draws,
                          std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const double shift = std::sqrt(lam);
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < draws; ++i) {
    double s = 0.0;
    for (int c = 0; c < dof; ++c) {
      double z = normal(gen);
      if (c == 0) z += shift;
      s += z * z;
    }
    if (s <= x) ++count;
  }
  const double p = static_cast<double>(count) / static_cast<double>(draws);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(draws))};
}

}  // namespace oracles
