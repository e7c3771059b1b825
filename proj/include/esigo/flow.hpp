#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "esigo/errors.hpp"
#include "esigo/math.hpp"
#include "esigo/objectives.hpp"
#include "esigo/quantile.hpp"
#include "esigo/theta.hpp"
#include "esigo/weights.hpp"

namespace esigo {

/// How the selection weight of each sample is obtained when estimating the
/// vector field: from ranks within the sample (the algorithmic view) or from
/// the exact quantile map (the idealized flow).
enum class RhsMode { Rank, Exact };

/// How the variance coordinate is carried by the integrator.
enum class VParam { LogV, DirectV };

/// Estimated vector field (g^m, g^v) at one theta.
///
/// se_gm is the norm-combined standard error of the mean-vector estimate,
/// sqrt(sum_c Var_c / N); se_gv is the scalar analogue.  Both are IID-style
/// proxies: with a fixed deterministic point set the estimate itself is
/// deterministic, and exact-mode evaluation reports zero.
struct RhsEstimate {
  Eigen::VectorXd gm;
  double gv = 0.0;
  double se_gm = 0.0;
  double se_gv = 0.0;
  int n_points = 0;
};

namespace detail {

/// Ranks by the <=-counting rule: R_j = |{k : f_k <= f_j}| (each point counts
/// itself; tied values share the higher count).
inline std::vector<int> le_ranks(const Eigen::VectorXd& f) {
  const int n = static_cast<int>(f.size());
  std::vector<double> sorted(f.data(), f.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> ranks(n);
  for (int j = 0; j < n; ++j)
    ranks[j] = static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), f(j)) -
                                sorted.begin());
  return ranks;
}

/// Selection weights u_j for the sample x_j = m + sqrt(v) z_j under the
/// requested mode.
inline Eigen::VectorXd selection_weights(const ThetaIso& theta, const Objective& obj,
                                         const Weight& w, const Eigen::MatrixXd& points,
                                         RhsMode mode, const QuantileModel* qm) {
  const int n = static_cast<int>(points.rows());
  const double sv = std::sqrt(theta.v);
  Eigen::VectorXd u(n);
  Eigen::VectorXd x(obj.dim());
  if (mode == RhsMode::Rank) {
    Eigen::VectorXd f(n);
    for (int j = 0; j < n; ++j) {
      x = theta.m + sv * points.row(j).transpose();
      f(j) = obj(x);
      if (std::isnan(f(j))) throw DomainError("rhs: objective returned NaN");
    }
    const std::vector<int> ranks = le_ranks(f);
    for (int j = 0; j < n; ++j) u(j) = w((ranks[j] - 0.5) / n);
  } else {
    if (!qm || !qm->exact())
      throw CapabilityError("rhs_exact: an exact quantile model is required");
    for (int j = 0; j < n; ++j) {
      x = theta.m + sv * points.row(j).transpose();
      u(j) = w((*qm)(theta, x));
    }
  }
  return u;
}

inline void check_rhs_inputs(const ThetaIso& theta, const Objective& obj,
                             const Eigen::MatrixXd& points) {
  if (!theta.valid()) throw DomainError("rhs: invalid theta");
  if (theta.dim() != obj.dim()) throw DomainError("rhs: theta/objective dimension mismatch");
  if (points.cols() != obj.dim()) throw DomainError("rhs: point set dimension mismatch");
  if (points.rows() < 2) throw DomainError("rhs: need at least 2 points");
}

/// Shared averaging: g^m = sqrt(v) mean(u_j z_j),
/// g^v = v mean(u_j (|z_j|^2/d - 1)); per-point spreads feed the SEs.
inline RhsEstimate assemble_rhs(const ThetaIso& theta, const Eigen::VectorXd& u,
                                const Eigen::MatrixXd& points, bool deterministic) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  const double sv = std::sqrt(theta.v);

  RhsEstimate est;
  est.n_points = n;
  est.gm = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd gv_terms(n);
  for (int j = 0; j < n; ++j) {
    est.gm += u(j) * points.row(j).transpose();
    gv_terms(j) = u(j) * (points.row(j).squaredNorm() / d - 1.0);
  }
  est.gm *= sv / n;
  est.gv = theta.v * gv_terms.mean();

  if (!deterministic) {
    double var_m = 0.0;
    for (int c = 0; c < d; ++c) {
      const double mean_c = est.gm(c) / sv;  // mean of u_j z_jc
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const double dev = u(j) * points(j, c) - mean_c;
        acc += dev * dev;
      }
      var_m += acc / (n - 1);
    }
    est.se_gm = sv * std::sqrt(var_m / n);
    const double mean_v = gv_terms.mean();
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double dev = gv_terms(j) - mean_v;
      acc += dev * dev;
    }
    est.se_gv = theta.v * std::sqrt(acc / (n - 1) / n);
  }
  return est;
}

inline RhsEstimate boundary_rhs(int d, int n) {
  RhsEstimate est;
  est.gm = Eigen::VectorXd::Zero(d);
  est.n_points = n;
  return est;
}

}  // namespace detail

/// Vector-field estimate with rank-derived selection weights
/// u_j = w((R_j - 1/2)/N); deterministic given the point set.
inline RhsEstimate rhs_rank(const ThetaIso& theta, const Objective& obj, const Weight& w,
                            const Eigen::MatrixXd& points) {
  detail::check_rhs_inputs(theta, obj, points);
  if (theta.v == 0.0)  // boundary: the field vanishes identically
    return detail::boundary_rhs(obj.dim(), static_cast<int>(points.rows()));
  const Eigen::VectorXd u =
      detail::selection_weights(theta, obj, w, points, RhsMode::Rank, nullptr);
  return detail::assemble_rhs(theta, u, points, /*deterministic=*/false);
}

/// Vector-field estimate with exact quantile weights u_j = w(q_theta(x_j));
/// the only error source is the cubature of the fixed point set, so the
/// reported standard errors are zero.
inline RhsEstimate rhs_exact(const ThetaIso& theta, const Objective& obj, const Weight& w,
                             const QuantileModel& qm, const Eigen::MatrixXd& points) {
  detail::check_rhs_inputs(theta, obj, points);
  if (theta.v == 0.0)
    return detail::boundary_rhs(obj.dim(), static_cast<int>(points.rows()));
  const Eigen::VectorXd u = detail::selection_weights(theta, obj, w, points, RhsMode::Exact, &qm);
  return detail::assemble_rhs(theta, u, points, /*deterministic=*/true);
}

inline RhsEstimate rhs_exact(const ThetaIso& theta, const Objective& obj, const Weight& w,
                             const Eigen::MatrixXd& points) {
  const QuantileModel qm = QuantileModel::exact_for(obj);
  return rhs_exact(theta, obj, w, qm, points);
}

/// Estimated Lyapunov drift dV/dt = 2 (m - x*)' g^m + d g^v with a standard
/// error propagated from per-point contributions (rank mode; exact mode is
/// deterministic and reports zero).
struct DriftEstimate {
  double value = 0.0;
  double se = 0.0;
  int n_points = 0;
};

inline DriftEstimate drift(const ThetaIso& theta, const Objective& obj, const Weight& w,
                           RhsMode mode, const Eigen::MatrixXd& points,
                           const Eigen::VectorXd& xstar, const QuantileModel* qm = nullptr) {
  detail::check_rhs_inputs(theta, obj, points);
  if (xstar.size() != theta.dim()) throw DomainError("drift: xstar dimension mismatch");
  const int n = static_cast<int>(points.rows());
  const int d = theta.dim();
  DriftEstimate est;
  est.n_points = n;
  if (theta.v == 0.0) return est;

  std::optional<QuantileModel> owned;
  if (mode == RhsMode::Exact && !qm) {
    owned.emplace(QuantileModel::exact_for(obj));
    qm = &*owned;
  }
  const Eigen::VectorXd u = detail::selection_weights(theta, obj, w, points, mode, qm);
  const double sv = std::sqrt(theta.v);
  const Eigen::VectorXd delta = theta.m - xstar;
  Eigen::VectorXd terms(n);
  for (int j = 0; j < n; ++j)
    terms(j) = 2.0 * sv * u(j) * delta.dot(points.row(j).transpose()) +
               d * theta.v * u(j) * (points.row(j).squaredNorm() / d - 1.0);
  est.value = terms.mean();
  if (mode == RhsMode::Rank) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += (terms(j) - est.value) * (terms(j) - est.value);
    est.se = std::sqrt(acc / (n - 1) / n);
  }
  return est;
}

/// Status of a finished run.
enum class RunStatus { Converged, Diverged, BudgetExhausted, DomainErrorStatus };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::Diverged:
      return "diverged";
    case RunStatus::BudgetExhausted:
      return "budget-exhausted";
    case RunStatus::DomainErrorStatus:
      return "domain-error";
  }
  return "budget-exhausted";
}

struct TrajectoryRecord {
  double t = 0.0;
  ThetaIso theta;
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
  double gv_over_v = std::numeric_limits<double>::quiet_NaN();
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  RunStatus status = RunStatus::BudgetExhausted;

  const TrajectoryRecord& front() const { return records.front(); }
  const TrajectoryRecord& back() const { return records.back(); }
};

/// ODE solver controls.  The adaptive method is the Dormand-Prince embedded
/// 4(5) pair; the alternative is fixed-step classical RK4.
struct SolverSettings {
  bool adaptive = true;
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 1e-3;
  double fixed_step = 1e-3;
  VParam coordinates = VParam::LogV;
  long long max_steps = 50'000'000;
};

/// Run termination controls.  Thresholds scale with the initial state:
/// convergence triggers at V < convergence_factor * V(theta0) (needs a
/// declared optimum), divergence at v > divergence_factor * v0; a factor of 0
/// disables the corresponding check.
struct StopCriteria {
  double horizon = 100.0;
  int records = 101;
  double convergence_factor = 1e-10;
  double divergence_factor = 1e12;
};

namespace detail {

struct FlowField {
  const Objective& obj;
  const Weight& w;
  RhsMode mode;
  const Eigen::MatrixXd& points;
  const QuantileModel* qm;
  VParam coords;
  int d;

  ThetaIso unpack(const Eigen::VectorXd& y) const {
    return ThetaIso(y.head(d), coords == VParam::LogV ? std::exp(y(d)) : y(d));
  }

  // State layout: y = [m; v] or [m; ln v].  The last slot of dy/dt is g^v
  // (direct) or g^v / v (log).
  Eigen::VectorXd operator()(const Eigen::VectorXd& y) const {
    const ThetaIso theta = unpack(y);
    if (!(theta.v > 0.0) || !theta.finite()) throw DomainError("flow: state left the domain");
    const RhsEstimate est = mode == RhsMode::Rank ? rhs_rank(theta, obj, w, points)
                                                  : rhs_exact(theta, obj, w, *qm, points);
    Eigen::VectorXd dy(d + 1);
    dy.head(d) = est.gm;
    dy(d) = coords == VParam::LogV ? est.gv / theta.v : est.gv;
    return dy;
  }

  double gv_over_v(const Eigen::VectorXd& y, const Eigen::VectorXd& dy) const {
    return coords == VParam::LogV ? dy(d) : dy(d) / y(d);
  }
};

}  // namespace detail

/// Integrate the flow from theta0; records `stop.records` evenly spaced
/// states over [0, stop.horizon], plus the final state when a stop condition
/// fires between record times.  Domain failures truncate the trajectory with
/// a domain-error status instead of throwing.
inline Trajectory integrate(const ThetaIso& theta0, const Objective& obj, const Weight& w,
                            RhsMode mode, const Eigen::MatrixXd& points,
                            const SolverSettings& solver = {}, const StopCriteria& stop = {},
                            const QuantileModel* qm = nullptr) {
  if (!theta0.interior()) throw DomainError("integrate: theta0 must have v > 0");
  if (theta0.dim() != obj.dim()) throw DomainError("integrate: dimension mismatch");
  if (stop.records < 2) throw ConfigError("integrate: need at least 2 records");
  if (!(stop.horizon > 0.0)) throw ConfigError("integrate: horizon must be > 0");
  if (!(solver.initial_step > 0.0) || !(solver.fixed_step > 0.0))
    throw ConfigError("integrate: step sizes must be > 0");

  std::optional<QuantileModel> owned_qm;
  if (mode == RhsMode::Exact && !qm) {
    owned_qm.emplace(QuantileModel::exact_for(obj));  // CapabilityError when unsupported
    qm = &*owned_qm;
  }

  const int d = obj.dim();
  const detail::FlowField field{obj, w, mode, points, qm, solver.coordinates, d};

  const std::optional<Eigen::VectorXd>& xstar = obj.optimum();
  const double v0 = theta0.v;
  const double eps_V = (stop.convergence_factor > 0.0 && xstar)
                           ? stop.convergence_factor * lyapunov(theta0, *xstar)
                           : 0.0;
  const double v_ceiling = stop.divergence_factor > 0.0
                               ? stop.divergence_factor * v0
                               : std::numeric_limits<double>::infinity();

  Trajectory tr;
  Eigen::VectorXd y(d + 1);
  y.head(d) = theta0.m;
  y(d) = solver.coordinates == VParam::LogV ? std::log(theta0.v) : theta0.v;

  auto record = [&](double t, const Eigen::VectorXd& state, const Eigen::VectorXd& dy) {
    if (!tr.records.empty() && t <= tr.records.back().t + 1e-12 * std::max(1.0, t)) return;
    TrajectoryRecord rec;
    rec.t = t;
    rec.theta = field.unpack(state);
    rec.lyapunov = xstar ? lyapunov(rec.theta, *xstar) : std::numeric_limits<double>::quiet_NaN();
    rec.gv_over_v = field.gv_over_v(state, dy);
    tr.records.push_back(std::move(rec));
  };

  // Returns true when a stop condition fired (and records the final state).
  auto stopped = [&](double t, const Eigen::VectorXd& state, const Eigen::VectorXd& dy) -> bool {
    const ThetaIso theta = field.unpack(state);
    if (!theta.finite() || !(theta.v > 0.0)) {
      tr.status = RunStatus::DomainErrorStatus;
      return true;
    }
    if (eps_V > 0.0 && lyapunov(theta, *xstar) < eps_V) {
      tr.status = RunStatus::Converged;
      record(t, state, dy);
      return true;
    }
    if (theta.v > v_ceiling) {
      tr.status = RunStatus::Diverged;
      record(t, state, dy);
      return true;
    }
    return false;
  };

  const double dt_rec = stop.horizon / (stop.records - 1);
  const double horizon_edge = stop.horizon * (1.0 - 1e-12);
  int next_rec = 1;

  // Dormand-Prince coefficients.
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  try {
    Eigen::VectorXd k1 = field(y);
    record(0.0, y, k1);
    if (stopped(0.0, y, k1)) return tr;

    double t = 0.0;
    double h = solver.adaptive ? solver.initial_step : solver.fixed_step;

    for (long long step_count = 0;; ++step_count) {
      if (t >= horizon_edge) {
        tr.status = RunStatus::BudgetExhausted;  // horizon reached
        record(stop.horizon, y, k1);
        return tr;
      }
      if (step_count >= solver.max_steps) {
        tr.status = RunStatus::BudgetExhausted;  // step budget, trajectory truncated
        record(t, y, k1);
        return tr;
      }
      // Aim exactly at the next record time (the final one is the horizon).
      const double t_target = (next_rec >= stop.records - 1) ? stop.horizon : next_rec * dt_rec;
      h = std::min(h, t_target - t);

      if (!solver.adaptive) {
        const Eigen::VectorXd k2 = field(y + (0.5 * h) * k1);
        const Eigen::VectorXd k3 = field(y + (0.5 * h) * k2);
        const Eigen::VectorXd k4 = field(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        if (solver.coordinates == VParam::DirectV && !(y(d) > 0.0))
          throw DomainError("flow: variance left the domain");
        k1 = field(y);
        h = solver.fixed_step;
      } else {
        bool reject = false;
        double err = std::numeric_limits<double>::infinity();
        Eigen::VectorXd y5, k7;
        try {
          const Eigen::VectorXd k2 = field(y + h * (a21 * k1));
          const Eigen::VectorXd k3 = field(y + h * (a31 * k1 + a32 * k2));
          const Eigen::VectorXd k4 = field(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
          const Eigen::VectorXd k5 =
              field(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
          const Eigen::VectorXd k6 =
              field(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
          y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
          if (!y5.allFinite() || (solver.coordinates == VParam::DirectV && !(y5(d) > 0.0))) {
            reject = true;
          } else {
            k7 = field(y5);
            const Eigen::VectorXd err_vec =
                h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double acc = 0.0;
            for (int i = 0; i <= d; ++i) {
              const double sc =
                  solver.atol + solver.rtol * std::max(std::abs(y(i)), std::abs(y5(i)));
              acc += (err_vec(i) / sc) * (err_vec(i) / sc);
            }
            err = std::sqrt(acc / (d + 1));
            reject = !(err <= 1.0);
          }
        } catch (const Error&) {
          reject = true;  // trial state left the domain; shrink and retry
        }

        if (!reject) {
          t += h;
          y = y5;
          k1 = k7;  // first-same-as-last
        }
        const double grow = std::isfinite(err)
                                ? (err > 0.0 ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0)
                                             : 5.0)
                                : 0.2;
        h *= grow;
        if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
          tr.status = RunStatus::DomainErrorStatus;  // step size collapsed
          record(t, y, k1);
          return tr;
        }
        if (reject) continue;
      }

      const bool at_record = t >= t_target - 1e-12 * std::max(1.0, t_target);
      if (at_record) {
        record(t, y, k1);
        ++next_rec;
      }
      if (stopped(t, y, k1)) return tr;
    }
  } catch (const Error&) {
    tr.status = RunStatus::DomainErrorStatus;
    return tr;
  }
}

}  // namespace esigo
