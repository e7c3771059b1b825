#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "esigo/errors.hpp"
#include "esigo/math.hpp"

namespace esigo {

/// Preference weight function w: [0,1] -> R assigning selection weight to a
/// quantile.  Named analytic kinds are shipped with declared Lipschitz
/// constants; the finite kind evaluates the Bernstein polynomial
/// sum_i w_i C(lambda-1, i-1) p^(i-1) (1-p)^(lambda-i), which is the expected
/// selection weight of a point at quantile p inside a ranked population of
/// size lambda.
class Weight {
 public:
  enum class Kind { TruncationLinear, Power, ShiftedSigmoid, Finite };

  /// w(q) = max(0, 1 - 2q).
  static Weight truncation_linear() { return Weight(Kind::TruncationLinear, 2.0); }

  /// w(q) = (1 - q)^k, k >= 1.  B2 holds strictly for k > 1.
  static Weight power(double k) {
    if (!(k >= 1.0) || !std::isfinite(k)) throw ConfigError("Weight::power: k must be >= 1");
    Weight w(Kind::Power, k);
    w.k_ = k;
    return w;
  }

  /// w(q) = 1 / (1 + exp(slope * (q - shift))).
  static Weight shifted_sigmoid(double slope = 10.0, double shift = 0.25) {
    if (!(slope > 0.0) || !std::isfinite(slope))
      throw ConfigError("Weight::shifted_sigmoid: slope must be > 0");
    if (!std::isfinite(shift)) throw ConfigError("Weight::shifted_sigmoid: shift must be finite");
    Weight w(Kind::ShiftedSigmoid, slope / 4.0);
    w.slope_ = slope;
    w.shift_ = shift;
    return w;
  }

  /// Bernstein form of a finite rank-weight vector (w_1, ..., w_lambda).
  static Weight from_finite_weights(std::vector<double> weights) {
    if (weights.empty()) throw ConfigError("Weight: finite weight vector must be non-empty");
    for (double x : weights)
      if (!std::isfinite(x)) throw ConfigError("Weight: finite weights must be finite");
    double max_step = 0.0;
    for (std::size_t i = 1; i < weights.size(); ++i)
      max_step = std::max(max_step, std::abs(weights[i] - weights[i - 1]));
    // |B'(p)| <= (lambda - 1) * max |w_{i+1} - w_i|.
    Weight w(Kind::Finite, (weights.size() - 1) * max_step);
    w.finite_ = std::move(weights);
    return w;
  }

  Kind kind() const { return kind_; }

  /// Population size of the finite form; 0 for analytic kinds.
  int lambda() const { return static_cast<int>(finite_.size()); }

  const std::vector<double>& finite_weights() const { return finite_; }

  /// Declared (analytic kinds) or derived (finite kind) Lipschitz bound.
  double lipschitz() const { return lipschitz_; }

  double operator()(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("Weight: quantile outside [0,1]");
    switch (kind_) {
      case Kind::TruncationLinear:
        return std::max(0.0, 1.0 - 2.0 * q);
      case Kind::Power:
        return std::pow(1.0 - q, k_);
      case Kind::ShiftedSigmoid:
        return 1.0 / (1.0 + std::exp(slope_ * (q - shift_)));
      case Kind::Finite:
        return bernstein(q);
    }
    return 0.0;  // unreachable
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::TruncationLinear:
        os << "truncation-linear";
        break;
      case Kind::Power:
        os << "power(k=" << k_ << ")";
        break;
      case Kind::ShiftedSigmoid:
        os << "shifted-sigmoid(slope=" << slope_ << ", shift=" << shift_ << ")";
        break;
      case Kind::Finite:
        os << "finite(lambda=" << lambda() << ")";
        break;
    }
    return os.str();
  }

 private:
  Weight(Kind kind, double lipschitz) : kind_(kind), lipschitz_(lipschitz) {}

  // O(lambda) evaluation through the binomial pmf recurrence, run from the
  // endpoint that keeps the seed term away from underflow.
  double bernstein(double p) const {
    const int n = lambda();
    if (n == 1 || p == 0.0) return finite_.front();
    if (p == 1.0) return finite_.back();
    double acc = 0.0;
    if (p <= 0.5) {
      double b = std::pow(1.0 - p, n - 1);  // weight of rank 1
      const double r = p / (1.0 - p);
      for (int i = 1; i <= n; ++i) {
        acc += finite_[i - 1] * b;
        b *= r * static_cast<double>(n - i) / static_cast<double>(i);
      }
    } else {
      double b = std::pow(p, n - 1);  // weight of rank lambda
      const double r = (1.0 - p) / p;
      for (int i = n; i >= 1; --i) {
        acc += finite_[i - 1] * b;
        b *= r * static_cast<double>(i - 1) / static_cast<double>(n - i + 1);
      }
    }
    return acc;
  }

  Kind kind_;
  double lipschitz_ = 0.0;
  double k_ = 2.0;
  double slope_ = 10.0;
  double shift_ = 0.25;
  std::vector<double> finite_;
};

/// Alias matching the construction's role in the discrete-to-flow story: the
/// ODE driven by this weight is the one the finite-weight algorithm tracks.
inline Weight bernstein_from_finite(std::vector<double> weights) {
  return Weight::from_finite_weights(std::move(weights));
}

/// Grid report for condition B1 (w non-increasing, Lipschitz, w(0) > w(1)).
/// The Lipschitz estimate is advisory: a grid cannot certify continuity.
struct B1Report {
  bool non_increasing = false;
  double gap = 0.0;                 // w(0) - w(1)
  double lipschitz_estimate = 0.0;  // max adjacent |slope| over the grid
  bool pass = false;
};

inline B1Report check_b1(const Weight& w, int grid_size) {
  if (grid_size < 2) throw ConfigError("check_b1: grid_size must be >= 2");
  B1Report rep;
  rep.non_increasing = true;
  double prev = w(0.0);
  double scale = std::abs(prev);
  const double h = 1.0 / (grid_size - 1);
  for (int i = 1; i < grid_size; ++i) {
    const double q = (i == grid_size - 1) ? 1.0 : i * h;
    const double cur = w(q);
    scale = std::max(scale, std::abs(cur));
    if (cur > prev + 1e-12 * (1.0 + scale)) rep.non_increasing = false;
    rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, std::abs(cur - prev) / h);
    prev = cur;
  }
  rep.gap = w(0.0) - w(1.0);
  rep.pass = rep.non_increasing && rep.gap > 0.0;
  return rep;
}

/// Variance growth rate on linear objectives:
///   alpha = integral of w(Phi(z)) (z^2 - 1)/d dPhi(z).
/// Condition B2 is alpha > 0.  Computed with deterministic panel-doubling
/// Gauss-Legendre quadrature; the integrand is damped by the normal density,
/// so truncation to |z| <= 8 is below the tolerance target.
inline double alpha_b2(const Weight& w, int dim, const QuadratureSettings& qs = {}) {
  if (dim < 1) throw ConfigError("alpha_b2: dim must be >= 1");
  auto integrand = [&](double z) { return w(normal_cdf(z)) * (z * z - 1.0) * normal_pdf(z); };
  return adaptive_quadrature(integrand, -8.0, 8.0, qs) / dim;
}

}  // namespace esigo
