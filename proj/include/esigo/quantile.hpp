#pragma once

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "esigo/errors.hpp"
#include "esigo/math.hpp"
#include "esigo/objectives.hpp"
#include "esigo/theta.hpp"

namespace esigo {

/// CDF of the noncentral chi-square distribution with `dof` degrees of
/// freedom and noncentrality `lam`, via the Poisson mixture
///   F(x) = sum_k e^{-lam/2} (lam/2)^k / k! * F_chi2(dof + 2k, x).
/// The sum is swept outward from the Poisson mode with stable recurrences for
/// both the Poisson weights and the central chi-square CDFs and truncated when
/// the remaining Poisson mass is below 1e-14; absolute error <= 1e-12.
inline double ncx2_cdf(double x, int dof, double lam) {
  if (dof < 1) throw DomainError("ncx2_cdf: dof must be >= 1");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("ncx2_cdf: x must be finite and >= 0");
  if (!(lam >= 0.0) || !std::isfinite(lam))
    throw DomainError("ncx2_cdf: noncentrality must be finite and >= 0");
  if (x == 0.0) return 0.0;

  const double x2 = 0.5 * x;
  const double a = 0.5 * dof;
  if (lam == 0.0) return gamma_p(a, x2);

  const double hl = 0.5 * lam;
  const long long j0 = static_cast<long long>(std::floor(hl));  // Poisson mode

  // Seed values at the mode: Poisson pmf, chi-square CDF, and the term
  // T(s) = x2^s e^{-x2} / Gamma(s+1) linking consecutive CDFs through
  // P(s+1, x2) = P(s, x2) - T(s).
  const double lp0 = (j0 == 0) ? -hl : (-hl + j0 * std::log(hl) - std::lgamma(j0 + 1.0));
  const double p0 = std::exp(lp0);
  const double f0 = gamma_p(a + j0, x2);
  const double t0 = std::exp((a + j0) * std::log(x2) - x2 - std::lgamma(a + j0 + 1.0));

  double sum = p0 * f0;
  double mass = p0;

  // Downward sweep (finite, F grows toward 1, Poisson mass decays).
  {
    double pj = p0, fj = f0, tj = t0;
    for (long long j = j0; j >= 1; --j) {
      tj *= (a + j) / x2;  // T(a + j - 1)
      fj = std::min(1.0, fj + tj);
      pj *= j / hl;
      sum += pj * fj;
      mass += pj;
      if (pj < 1e-20) break;
    }
  }

  // Upward sweep until the neglected Poisson mass is below target.
  {
    double pj = p0, fj = f0, tj = t0;
    const long long budget = j0 + 10'000'000;
    for (long long j = j0 + 1; mass < 1.0 - 1e-14; ++j) {
      if (j > budget) throw NumericalError("ncx2_cdf: series budget exhausted");
      pj *= hl / j;
      fj = std::max(0.0, fj - tj);  // P(a + j, x2)
      tj *= x2 / (a + j);
      sum += pj * fj;
      mass += pj;
      // Above the mode pj decays monotonically; once it underflows the
      // remaining tail is < 1e-19 while rounding in `mass` (a few ulps per
      // term for large lam) can keep the sum pinned just below the target.
      if (pj < 1e-20) break;
    }
  }
  return std::min(1.0, std::max(0.0, sum));
}

/// Quantile map q_theta(x) = P_theta[y : f(y) <= f(x)] under N(m, v I_d).
///
/// Exact kinds exist for linear objectives (normal CDF of the projected
/// coordinate) and isotropic quadratics (noncentral chi-square CDF); both
/// ignore the monotone transform g by construction.  The empirical kind
/// counts over a fixed base point set transported affinely to theta.
class QuantileModel {
 public:
  enum class Kind { ExactLinear, ExactIsotropicQuadratic, Empirical };

  /// Exact model for the objective's declared shape.
  static QuantileModel exact_for(const Objective& obj) {
    if (obj.is_linear()) {
      QuantileModel qm(Kind::ExactLinear, obj);
      qm.unit_a_ = obj.linear_coefficients().normalized();
      return qm;
    }
    if (obj.is_isotropic_quadratic()) {
      QuantileModel qm(Kind::ExactIsotropicQuadratic, obj);
      qm.xstar_ = *obj.optimum();
      return qm;
    }
    throw CapabilityError("exact quantile: objective is neither linear nor an isotropic quadratic");
  }

  /// Empirical model over base_points (rows are standard-normal draws or QMC
  /// points); each query transports them to m + sqrt(v) * u.
  static QuantileModel empirical(const Objective& obj, Eigen::MatrixXd base_points) {
    if (base_points.rows() < 1) throw ConfigError("empirical quantile: empty sample set");
    if (base_points.cols() != obj.dim())
      throw ConfigError("empirical quantile: sample dimension mismatch");
    QuantileModel qm(Kind::Empirical, obj);
    qm.base_points_ = std::move(base_points);
    return qm;
  }

  Kind kind() const { return kind_; }
  bool exact() const { return kind_ != Kind::Empirical; }
  const Objective& objective() const { return obj_; }

  double operator()(const ThetaIso& theta, const Eigen::VectorXd& x) const {
    if (theta.dim() != obj_.dim() || x.size() != obj_.dim())
      throw DomainError("quantile: dimension mismatch");
    if (!theta.interior() ) throw DomainError("quantile: theta must have v > 0");
    if (!x.allFinite()) throw DomainError("quantile: non-finite query point");
    const double sv = std::sqrt(theta.v);
    switch (kind_) {
      case Kind::ExactLinear:
        return normal_cdf(unit_a_.dot(x - theta.m) / sv);
      case Kind::ExactIsotropicQuadratic:
        return ncx2_cdf((x - xstar_).squaredNorm() / theta.v, obj_.dim(),
                        (theta.m - xstar_).squaredNorm() / theta.v);
      case Kind::Empirical: {
        const double fx = obj_(x);
        const long long m = base_points_.rows();
        long long count = 0;
        Eigen::VectorXd y(obj_.dim());
        for (long long k = 0; k < m; ++k) {
          y = theta.m + sv * base_points_.row(k).transpose();
          if (obj_(y) <= fx) ++count;
        }
        return static_cast<double>(count) / static_cast<double>(m);
      }
    }
    return 0.0;  // unreachable
  }

 private:
  QuantileModel(Kind kind, Objective obj) : kind_(kind), obj_(std::move(obj)) {}

  Kind kind_;
  Objective obj_;
  Eigen::VectorXd unit_a_;       // ExactLinear
  Eigen::VectorXd xstar_;        // ExactIsotropicQuadratic
  Eigen::MatrixXd base_points_;  // Empirical
};

/// Exact quantile; requires an exact-kind model.
inline double exact_quantile(const QuantileModel& qm, const ThetaIso& theta,
                             const Eigen::VectorXd& x) {
  if (!qm.exact()) throw CapabilityError("exact_quantile: model kind is empirical");
  return qm(theta, x);
}

/// Empirical quantile; requires an empirical-kind model.
inline double empirical_quantile(const QuantileModel& qm, const ThetaIso& theta,
                                 const Eigen::VectorXd& x) {
  if (qm.exact()) throw CapabilityError("empirical_quantile: model kind is exact");
  return qm(theta, x);
}

}  // namespace esigo
