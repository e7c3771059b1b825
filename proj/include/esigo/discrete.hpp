#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "esigo/errors.hpp"
#include "esigo/flow.hpp"
#include "esigo/objectives.hpp"
#include "esigo/rng.hpp"
#include "esigo/theta.hpp"
#include "esigo/weights.hpp"

namespace esigo {

/// One rejected variance update (v' <= 0); the step is re-sampled.
struct StepEvent {
  std::int64_t iteration = 0;
  int retry = 0;
  double v_proposed = 0.0;
};

namespace detail {

// Draw stream layout: the iteration indexes the stream, (retry, sample,
// coordinate) pack into the counter, so every (iteration, retry) pair sees an
// independent population and sub-streams never overlap.
inline std::uint64_t draw_counter(int retry, int sample, int coord) {
  return (static_cast<std::uint64_t>(retry) << 48) |
         (static_cast<std::uint64_t>(sample) << 20) | static_cast<std::uint64_t>(coord);
}

/// Raw update increment before scaling by eta:
///   dm = sum_i (u_i / n)(x_i - m),  dv = sum_i (u_i / n)(|x_i - m|^2/d - v)
/// for one sampled population.
inline std::pair<Eigen::VectorXd, double> step_increment(const ThetaIso& theta,
                                                         const Objective& obj, const Weight& w,
                                                         int n, const CounterRng& rng,
                                                         std::int64_t iteration, int retry) {
  const int d = theta.dim();
  const double sv = std::sqrt(theta.v);
  Eigen::MatrixXd z(n, d);
  Eigen::VectorXd f(n);
  Eigen::VectorXd x(d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c)
      z(i, c) = rng.normal(static_cast<std::uint64_t>(iteration), draw_counter(retry, i, c));
    x = theta.m + sv * z.row(i).transpose();
    f(i) = obj(x);
    if (std::isnan(f(i))) throw DomainError("step: objective returned NaN");
  }
  const std::vector<int> ranks = le_ranks(f);
  Eigen::VectorXd dm = Eigen::VectorXd::Zero(d);
  double dv = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = w((ranks[i] - 0.5) / n);
    dm += (u / n) * (sv * z.row(i).transpose());
    dv += (u / n) * (theta.v * z.row(i).squaredNorm() / d - theta.v);
  }
  return {std::move(dm), dv};
}

}  // namespace detail

/// One update of the stochastic algorithm:
///   m' = m + eta sum_i (u_i/n)(x_i - m),
///   v' = v + eta sum_i (u_i/n)(|x_i - m|^2/d - v),
/// with x_i ~ N(m, v I) drawn from the counter generator and u_i the weight
/// of the <=-counting rank.  A proposal with v' <= 0 is rejected, flagged in
/// `events`, and re-sampled (fresh draws) up to max_retries times, after
/// which a domain error is thrown.
inline ThetaIso step(const ThetaIso& theta, const Objective& obj, const Weight& w, int n,
                     double eta, const CounterRng& rng, std::int64_t iteration = 0,
                     int max_retries = 10, std::vector<StepEvent>* events = nullptr) {
  if (!theta.interior()) throw DomainError("step: theta must have v > 0");
  if (theta.dim() != obj.dim()) throw DomainError("step: dimension mismatch");
  if (n < 2) throw DomainError("step: population size must be >= 2");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw DomainError("step: eta must be finite and >= 0");

  for (int retry = 0;; ++retry) {
    auto [dm, dv] = detail::step_increment(theta, obj, w, n, rng, iteration, retry);
    const double v_new = theta.v + eta * dv;
    if (v_new > 0.0) return ThetaIso(theta.m + eta * dm, v_new);
    if (events) events->push_back({iteration, retry, v_new});
    if (retry >= max_retries)
      throw DomainError("step: variance update rejected beyond the retry budget");
  }
}

/// Controls for a full stochastic run.  eta = 0 is admitted (the chain is
/// frozen; useful as a degenerate reference).  A convergence_factor of 0
/// disables early convergence detection.
struct RunConfig {
  ThetaIso theta0;
  double eta = 0.01;
  int n = 50;
  std::int64_t iterations = 1000;
  std::uint64_t seed = 0;
  int record_stride = 1;
  int max_retries = 10;
  double convergence_factor = 0.0;
  double divergence_factor = 1e12;
};

/// Iterate `step` from cfg.theta0; records (t = k eta, theta_k, V) every
/// record_stride iterations (always the first and last states).  Bit-for-bit
/// reproducible from the seed.  Retry exhaustion truncates the run with
/// domain-error status.
inline Trajectory run(const RunConfig& cfg, const Objective& obj, const Weight& w,
                      std::vector<StepEvent>* events = nullptr) {
  if (!cfg.theta0.interior()) throw ConfigError("run: theta0 must have v > 0");
  if (cfg.theta0.dim() != obj.dim()) throw ConfigError("run: dimension mismatch");
  if (cfg.n < 2) throw ConfigError("run: population size must be >= 2");
  if (cfg.iterations < 1) throw ConfigError("run: iterations must be >= 1");
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta))
    throw ConfigError("run: eta must be finite and >= 0");
  if (cfg.record_stride < 1) throw ConfigError("run: record_stride must be >= 1");

  const CounterRng rng(cfg.seed);
  const std::optional<Eigen::VectorXd>& xstar = obj.optimum();
  const double V0 = xstar ? lyapunov(cfg.theta0, *xstar) : std::numeric_limits<double>::quiet_NaN();
  const double eps_V = (cfg.convergence_factor > 0.0 && xstar) ? cfg.convergence_factor * V0 : 0.0;
  const double v_ceiling = cfg.divergence_factor > 0.0
                               ? cfg.divergence_factor * cfg.theta0.v
                               : std::numeric_limits<double>::infinity();

  Trajectory tr;
  auto record = [&](std::int64_t k, const ThetaIso& theta) {
    if (!tr.records.empty() && cfg.eta == 0.0) return;  // times would not advance
    TrajectoryRecord rec;
    rec.t = k * cfg.eta;
    rec.theta = theta;
    rec.lyapunov = xstar ? lyapunov(theta, *xstar) : std::numeric_limits<double>::quiet_NaN();
    tr.records.push_back(std::move(rec));
  };

  ThetaIso theta = cfg.theta0;
  record(0, theta);
  for (std::int64_t k = 1; k <= cfg.iterations; ++k) {
    try {
      theta = step(theta, obj, w, cfg.n, cfg.eta, rng, k - 1, cfg.max_retries, events);
    } catch (const DomainError&) {
      tr.status = RunStatus::DomainErrorStatus;  // retry budget exhausted; truncate
      return tr;
    }
    const bool due = (k % cfg.record_stride == 0) || k == cfg.iterations;
    if (due) record(k, theta);
    if (eps_V > 0.0 && lyapunov(theta, *xstar) < eps_V) {
      if (!due) record(k, theta);
      tr.status = RunStatus::Converged;
      return tr;
    }
    if (theta.v > v_ceiling) {
      if (!due) record(k, theta);
      tr.status = RunStatus::Diverged;
      return tr;
    }
  }
  tr.status = RunStatus::BudgetExhausted;
  return tr;
}

/// The deterministic weight whose flow the finite-weight algorithm tracks:
/// the Bernstein transform of (w_1, ..., w_lambda).
inline Weight expected_weight(const std::vector<double>& finite_weights) {
  return Weight::from_finite_weights(finite_weights);
}

/// Finite rank weights induced by a continuous weight at population size n:
/// w_i = w((i - 1/2)/n).
inline std::vector<double> rank_weights(const Weight& w, int n) {
  if (n < 1) throw ConfigError("rank_weights: n must be >= 1");
  std::vector<double> out(n);
  for (int i = 1; i <= n; ++i) out[i - 1] = w((i - 0.5) / n);
  return out;
}

}  // namespace esigo
