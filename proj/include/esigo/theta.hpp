#pragma once

#include <Eigen/Core>

#include <cmath>

#include "esigo/errors.hpp"

namespace esigo {

/// Parameters of the isotropic search distribution N(m, v I_d).
///
/// The dynamics live on v > 0; v = 0 is admitted in the data type only so the
/// boundary behavior of the vector field and of the Lyapunov function can be
/// evaluated.
struct ThetaIso {
  Eigen::VectorXd m;
  double v = 1.0;

  ThetaIso() = default;
  ThetaIso(Eigen::VectorXd mean, double variance) : m(std::move(mean)), v(variance) {}

  int dim() const { return static_cast<int>(m.size()); }

  bool finite() const { return m.allFinite() && std::isfinite(v); }

  /// Valid point of the closed domain (v >= 0, all entries finite).
  bool valid() const { return dim() >= 1 && finite() && v >= 0.0; }

  /// Valid point of the open domain the flow lives on (v > 0).
  bool interior() const { return valid() && v > 0.0; }
};

/// Lyapunov candidate V(theta) = ||m - x*||^2 + d * v.
inline double lyapunov(const ThetaIso& theta, const Eigen::VectorXd& xstar) {
  if (theta.dim() != xstar.size()) throw DomainError("lyapunov: dimension mismatch");
  if (!theta.m.allFinite() || !xstar.allFinite() || !std::isfinite(theta.v))
    throw DomainError("lyapunov: non-finite input");
  return (theta.m - xstar).squaredNorm() + theta.dim() * theta.v;
}

}  // namespace esigo
