#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "esigo/config.hpp"
#include "esigo/discrete.hpp"
#include "esigo/flow.hpp"
#include "esigo/sobol.hpp"
#include "esigo/svg.hpp"
#include "esigo/trajectory_io.hpp"
#include "esigo/weights.hpp"

namespace esigo {

/// Outcome of one experiment: verdict, findings, output files, timing.
struct ExperimentReport {
  std::string id;
  std::string mode;
  bool passed = false;
  double seconds = 0.0;
  std::vector<std::string> notes;
  std::vector<std::string> files;
  std::string error;  // non-empty when an exception aborted the run

  std::string summary() const {
    std::string line = (passed ? "[PASS] " : "[FAIL] ") + id + " (" + mode + ", ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1fs)", seconds);
    line += buf;
    if (!error.empty()) line += " error: " + error;
    for (const std::string& n : notes) line += "\n    " + n;
    return line;
  }
};

namespace expdetail {

inline std::string strf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return buf;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::vector<double> record_times(const Trajectory& tr) {
  std::vector<double> t;
  t.reserve(tr.records.size());
  for (const auto& r : tr.records) t.push_back(r.t);
  return t;
}

inline std::vector<double> record_lyapunov(const Trajectory& tr) {
  std::vector<double> v;
  v.reserve(tr.records.size());
  for (const auto& r : tr.records) v.push_back(r.lyapunov);
  return v;
}

inline std::vector<double> record_lnv(const Trajectory& tr) {
  std::vector<double> v;
  v.reserve(tr.records.size());
  for (const auto& r : tr.records) v.push_back(std::log(r.theta.v));
  return v;
}

inline void write_csv(const std::string& path, const Trajectory& tr, ExperimentReport& rep) {
  write_trajectory_csv(path, tr);
  rep.files.push_back(path);
}

/// Standard plot pair: Lyapunov value on a log axis (when an optimum is
/// declared) and ln v on a linear axis, one series per trajectory.
inline void write_plots(const std::string& dir, const std::string& stem,
                        const std::vector<std::pair<std::string, const Trajectory*>>& runs,
                        ExperimentReport& rep) {
  bool any_V = false;
  for (const auto& [name, tr] : runs)
    for (const auto& r : tr->records)
      if (std::isfinite(r.lyapunov) && r.lyapunov > 0.0) any_V = true;
  if (any_V) {
    LinePlot plot(stem + ": Lyapunov value", "t", "V");
    plot.set_log_y(true);
    for (const auto& [name, tr] : runs)
      plot.add_series(name, record_times(*tr), record_lyapunov(*tr));
    const std::string path = join_path(dir, stem + "_V.svg");
    plot.write(path);
    rep.files.push_back(path);
  }
  LinePlot plot(stem + ": variance", "t", "ln v");
  for (const auto& [name, tr] : runs)
    plot.add_series(name, record_times(*tr), record_lnv(*tr));
  const std::string path = join_path(dir, stem + "_lnv.svg");
  plot.write(path);
  rep.files.push_back(path);
}

inline bool trajectories_identical(const Trajectory& a, const Trajectory& b) {
  if (a.status != b.status || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.t != rb.t || ra.theta.v != rb.theta.v) return false;
    if (ra.theta.m.size() != rb.theta.m.size()) return false;
    for (long c = 0; c < ra.theta.m.size(); ++c)
      if (ra.theta.m(c) != rb.theta.m(c)) return false;
  }
  return true;
}

/// Linearly interpolate the (m, v) state of a trajectory at time t,
/// clamping outside the recorded range.
inline Eigen::VectorXd state_at(const Trajectory& tr, double t) {
  const auto& rs = tr.records;
  const int d = rs.front().theta.dim();
  auto pack = [&](const TrajectoryRecord& r) {
    Eigen::VectorXd y(d + 1);
    y.head(d) = r.theta.m;
    y(d) = r.theta.v;
    return y;
  };
  if (t <= rs.front().t) return pack(rs.front());
  if (t >= rs.back().t) return pack(rs.back());
  auto it = std::upper_bound(rs.begin(), rs.end(), t,
                             [](double val, const TrajectoryRecord& r) { return val < r.t; });
  const TrajectoryRecord& hi = *it;
  const TrajectoryRecord& lo = *(it - 1);
  const double a = (t - lo.t) / (hi.t - lo.t);
  return (1.0 - a) * pack(lo) + a * pack(hi);
}

/// Type-7 quantile (linear interpolation) of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double a = pos - static_cast<double>(i);
  return (1.0 - a) * sorted[i] + a * sorted[i + 1];
}

inline bool strictly_decreasing(const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] < xs[i - 1])) return false;
  return true;
}

}  // namespace expdetail

/// One row of the discretization-error ladder: the sup-distance (over a
/// shared time grid, Euclidean in the stacked (m, v) state) between the
/// stochastic run and the deterministic flow, summarized over seeds.
struct LadderRow {
  double eta = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int seeds = 0;
};

/// Runs the flow once as a reference, then the stochastic algorithm for each
/// step size and seed, and reports per-eta sup-distance quartiles.  Needs at
/// least two step sizes to say anything about the trend.  eta = 0 rows
/// degenerate to the frozen initial state.
inline std::vector<LadderRow> compare_discrete_ode(const ExperimentSpec& spec,
                                                   Trajectory* reference = nullptr) {
  if (spec.etas.size() < 2)
    throw ConfigError("compare_discrete_ode: eta ladder needs at least 2 values");
  const Objective& obj = *spec.objective;
  const Weight& w = *spec.weight;
  const Eigen::MatrixXd pts = sobol_normal_points(spec.points_n, obj.dim());

  StopCriteria ref_stop = spec.stop;
  ref_stop.records = spec.grid_points;
  ref_stop.convergence_factor = 0.0;  // the comparison needs the full grid
  ref_stop.divergence_factor = 0.0;
  Trajectory ref = integrate(*spec.theta0, obj, w, RhsMode::Rank, pts, spec.solver, ref_stop);
  if (ref.status == RunStatus::DomainErrorStatus)
    throw NumericalError("compare_discrete_ode: flow reference left the domain");

  std::vector<LadderRow> rows;
  for (double eta : spec.etas) {
    std::vector<double> dists;
    for (std::uint64_t seed : spec.seeds) {
      RunConfig cfg;
      cfg.theta0 = *spec.theta0;
      cfg.eta = eta;
      cfg.n = spec.population;
      cfg.iterations =
          eta > 0.0 ? std::max<std::int64_t>(1, std::llround(spec.stop.horizon / eta)) : 1;
      cfg.seed = seed;
      cfg.divergence_factor = 0.0;
      Trajectory run_tr = run(cfg, obj, w);
      double sup = 0.0;
      for (const auto& rec : ref.records) {
        const Eigen::VectorXd gap =
            expdetail::state_at(run_tr, rec.t) - expdetail::state_at(ref, rec.t);
        sup = std::max(sup, gap.norm());
      }
      dists.push_back(sup);
    }
    std::sort(dists.begin(), dists.end());
    LadderRow row;
    row.eta = eta;
    row.median = expdetail::quantile_sorted(dists, 0.5);
    row.q25 = expdetail::quantile_sorted(dists, 0.25);
    row.q75 = expdetail::quantile_sorted(dists, 0.75);
    row.seeds = static_cast<int>(dists.size());
    rows.push_back(row);
  }
  if (reference) *reference = std::move(ref);
  return rows;
}

namespace expdetail {

/// Shared verdict checks for trajectory-producing modes.
inline bool check_trajectory_verdict(const ExperimentSpec& spec, const Trajectory& tr,
                                     ExperimentReport& rep) {
  const VerdictSpec& v = spec.verdict;
  bool ok = true;
  rep.notes.push_back(strf("status: %s, records: %zu, final t: %g", to_string(tr.status),
                           tr.records.size(), tr.records.back().t));
  if (v.status && tr.status != *v.status) {
    rep.notes.push_back(strf("expected status %s", to_string(*v.status)));
    ok = false;
  }
  if (v.lyapunov_decreasing) {
    bool dec = true;
    for (std::size_t i = 1; i < tr.records.size(); ++i)
      if (!(tr.records[i].lyapunov < tr.records[i - 1].lyapunov)) dec = false;
    rep.notes.push_back(strf("V strictly decreasing: %s", dec ? "yes" : "NO"));
    ok = ok && dec;
  }
  if (v.final_v_ratio_max) {
    const double V0 = tr.records.front().lyapunov;
    const double VT = tr.records.back().lyapunov;
    const bool hit = std::isfinite(V0) && VT <= *v.final_v_ratio_max * V0;
    rep.notes.push_back(strf("V(T)/V(0) = %.3e (limit %.1e)", VT / V0, *v.final_v_ratio_max));
    ok = ok && hit;
  }
  if (v.final_m_dist_max) {
    const auto& xstar = spec.objective->optimum();
    if (!xstar) {
      rep.notes.push_back("final_m_dist_max set but the objective declares no optimum");
      ok = false;
    } else {
      const double dist = (tr.records.back().theta.m - *xstar).norm();
      rep.notes.push_back(strf("|m(T) - x*| = %.3e (limit %.1e)", dist, *v.final_m_dist_max));
      ok = ok && dist <= *v.final_m_dist_max;
    }
  }
  if (v.lnv_slope_min || v.slope_rel_tol) {
    const auto [slope, icept] = fit_line(record_times(tr), record_lnv(tr));
    (void)icept;
    if (v.lnv_slope_min) {
      rep.notes.push_back(strf("ln v slope = %.6g (min %.6g)", slope, *v.lnv_slope_min));
      ok = ok && slope > *v.lnv_slope_min;
    }
    if (v.slope_rel_tol) {
      const double alpha = alpha_b2(*spec.weight, spec.objective->dim());
      const double err =
          alpha != 0.0 ? std::abs(slope - alpha) / std::abs(alpha) : std::abs(slope);
      rep.notes.push_back(
          strf("ln v slope = %.8g vs alpha = %.8g (rel err %.2e, tol %.1e)", slope, alpha, err,
               *v.slope_rel_tol));
      ok = ok && err <= *v.slope_rel_tol;
    }
  }
  return ok;
}

inline void run_ode(const ExperimentSpec& spec, const std::string& out, ExperimentReport& rep) {
  const RhsMode mode = spec.mode == ExperimentMode::OdeExact ? RhsMode::Exact : RhsMode::Rank;
  const Objective& base = *spec.objective;
  const Eigen::MatrixXd pts = sobol_normal_points(spec.points_n, base.dim());

  std::vector<Objective> variants;
  if (spec.transforms.empty())
    variants.push_back(base);
  else
    for (Transform g : spec.transforms) variants.push_back(base.with_transform(g));

  std::vector<Trajectory> trs;
  for (const Objective& obj : variants)
    trs.push_back(integrate(*spec.theta0, obj, *spec.weight, mode, pts, spec.solver, spec.stop));

  bool ok = check_trajectory_verdict(spec, trs.front(), rep);

  if (base.is_linear() && !spec.verdict.slope_rel_tol && trs.front().records.size() >= 2) {
    const double slope =
        fit_line(record_times(trs.front()), record_lnv(trs.front())).first;
    const double alpha = alpha_b2(*spec.weight, base.dim());
    rep.notes.push_back(strf("ln v slope = %.8g vs alpha = %.8g (deviation %.2e)", slope,
                             alpha, std::abs(slope - alpha)));
  }

  if (spec.transforms.size() >= 2) {
    bool same = true;
    for (std::size_t i = 1; i < trs.size(); ++i)
      same = same && trajectories_identical(trs.front(), trs[i]);
    rep.notes.push_back(strf("trajectories identical: %s", same ? "true" : "false"));
    if (spec.verdict.identical_trajectories) ok = ok && same;
  }

  if (spec.parameterizations.size() >= 2) {
    std::vector<Trajectory> ptrs;
    for (VParam coords : spec.parameterizations) {
      SolverSettings s = spec.solver;
      s.coordinates = coords;
      ptrs.push_back(integrate(*spec.theta0, variants.front(), *spec.weight, mode, pts, s,
                               spec.stop));
    }
    double worst = 0.0;
    bool aligned = true;
    const std::size_t nrec =
        std::min_element(ptrs.begin(), ptrs.end(), [](const auto& a, const auto& b) {
          return a.records.size() < b.records.size();
        })->records.size();
    for (std::size_t i = 0; i < nrec; ++i) {
      const double t0 = ptrs.front().records[i].t;
      const double v0 = ptrs.front().records[i].theta.v;
      for (std::size_t k = 1; k < ptrs.size(); ++k) {
        const auto& r = ptrs[k].records[i];
        if (std::abs(r.t - t0) > 1e-9 * std::max(1.0, std::abs(t0))) aligned = false;
        worst = std::max(worst, std::abs(r.theta.v - v0) / std::max(std::abs(v0), 1e-300));
      }
    }
    rep.notes.push_back(strf("parameterization max rel v gap over %zu records: %.3e", nrec,
                             worst));
    if (spec.verdict.param_agreement_rtol)
      ok = ok && aligned && worst <= *spec.verdict.param_agreement_rtol;
  }

  write_csv(join_path(out, spec.id + ".csv"), trs.front(), rep);
  for (std::size_t i = 1; i < variants.size(); ++i)
    write_csv(join_path(out, spec.id + "_" + transform_name(spec.transforms[i]) + ".csv"),
              trs[i], rep);
  write_plots(out, spec.id, {{spec.solver.coordinates == VParam::LogV ? "log-v" : "direct-v",
                              &trs.front()}},
              rep);
  rep.passed = ok;
}

inline void write_events_jsonl(const std::string& path,
                               const std::vector<std::pair<std::uint64_t, StepEvent>>& events,
                               ExperimentReport& rep) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open event log for writing: " + path);
  for (const auto& [seed, ev] : events) {
    nlohmann::json j;
    j["event"] = "variance-proposal-rejected";
    j["seed"] = seed;
    j["iteration"] = ev.iteration;
    j["retry"] = ev.retry;
    j["v_proposed"] = ev.v_proposed;
    os << j.dump() << "\n";
  }
  rep.files.push_back(path);
}

inline void run_discrete_single(const ExperimentSpec& spec, const std::string& out,
                                ExperimentReport& rep) {
  const Objective& base = *spec.objective;
  std::vector<Objective> variants;
  if (spec.transforms.empty())
    variants.push_back(base);
  else
    for (Transform g : spec.transforms) variants.push_back(base.with_transform(g));

  RunConfig cfg;
  cfg.theta0 = *spec.theta0;
  cfg.eta = spec.eta;
  cfg.n = spec.population;
  cfg.iterations = spec.iterations;
  cfg.record_stride = spec.record_stride;
  cfg.convergence_factor = spec.stop.convergence_factor;
  cfg.divergence_factor = spec.stop.divergence_factor;

  std::vector<std::pair<std::uint64_t, StepEvent>> all_events;
  std::vector<Trajectory> per_seed;
  for (std::uint64_t seed : spec.seeds) {
    cfg.seed = seed;
    std::vector<StepEvent> events;
    per_seed.push_back(run(cfg, variants.front(), *spec.weight, &events));
    for (const StepEvent& ev : events) all_events.emplace_back(seed, ev);
  }

  // With a min_success quota the per-seed ratio check below is authoritative;
  // the front-seed summary must not gate on it alone.
  ExperimentSpec head = spec;
  if (spec.verdict.min_success) head.verdict.final_v_ratio_max.reset();
  bool ok = check_trajectory_verdict(head, per_seed.front(), rep);

  const VerdictSpec& v = spec.verdict;
  if (v.status && spec.seeds.size() > 1) {
    for (std::size_t s = 1; s < spec.seeds.size(); ++s)
      if (per_seed[s].status != *v.status) {
        rep.notes.push_back(strf("seed %llu ended with status %s",
                                 static_cast<unsigned long long>(spec.seeds[s]),
                                 to_string(per_seed[s].status)));
        ok = false;
      }
  }
  if (v.final_v_ratio_max) {
    int success = 0;
    for (const Trajectory& tr : per_seed) {
      const double V0 = tr.records.front().lyapunov;
      if (tr.records.back().lyapunov <= *v.final_v_ratio_max * V0) ++success;
    }
    const int need = v.min_success ? *v.min_success : static_cast<int>(per_seed.size());
    rep.notes.push_back(strf("seeds meeting V(T) <= %.1e V(0): %d / %zu (need %d)",
                             *v.final_v_ratio_max, success, per_seed.size(), need));
    ok = ok && success >= need;
  }
  if (v.lnv_slope_min && per_seed.size() > 1) {
    double worst = std::numeric_limits<double>::infinity();
    for (const Trajectory& tr : per_seed)
      worst = std::min(worst, fit_line(record_times(tr), record_lnv(tr)).first);
    rep.notes.push_back(strf("worst-seed ln v slope = %.6g (min %.6g)", worst,
                             *v.lnv_slope_min));
    ok = ok && worst > *v.lnv_slope_min;
  }

  if (spec.transforms.size() >= 2) {
    cfg.seed = spec.seeds.front();
    bool same = true;
    for (std::size_t i = 1; i < variants.size(); ++i) {
      Trajectory tr = run(cfg, variants[i], *spec.weight);
      same = same && trajectories_identical(per_seed.front(), tr);
    }
    rep.notes.push_back(strf("trajectories identical: %s", same ? "true" : "false"));
    if (v.identical_trajectories) ok = ok && same;
  }

  write_csv(join_path(out, spec.id + ".csv"), per_seed.front(), rep);
  for (std::size_t s = 1; s < per_seed.size(); ++s)
    write_csv(join_path(out,
                        spec.id + "_seed" + std::to_string(spec.seeds[s]) + ".csv"),
              per_seed[s], rep);
  std::vector<std::pair<std::string, const Trajectory*>> runs;
  for (std::size_t s = 0; s < per_seed.size(); ++s)
    runs.emplace_back("seed " + std::to_string(spec.seeds[s]), &per_seed[s]);
  write_plots(out, spec.id, runs, rep);
  write_events_jsonl(join_path(out, spec.id + "_events.jsonl"), all_events, rep);
  rep.notes.push_back(strf("variance-proposal rejections: %zu", all_events.size()));
  rep.passed = ok;
}

inline void run_discrete_ladder(const ExperimentSpec& spec, const std::string& out,
                                ExperimentReport& rep) {
  Trajectory ref;
  const std::vector<LadderRow> rows = compare_discrete_ode(spec, &ref);

  const std::string table = join_path(out, spec.id + "_table.csv");
  {
    std::ofstream os(table, std::ios::binary);
    if (!os) throw ConfigError("cannot open table for writing: " + table);
    os << "eta,median_supdist,q25,q75,seeds\n";
    for (const LadderRow& r : rows)
      os << detail::format_g17(r.eta) << "," << detail::format_g17(r.median) << ","
         << detail::format_g17(r.q25) << "," << detail::format_g17(r.q75) << "," << r.seeds
         << "\n";
  }
  rep.files.push_back(table);
  write_csv(join_path(out, spec.id + "_ode_ref.csv"), ref, rep);

  std::vector<double> etas, medians;
  for (const LadderRow& r : rows) {
    etas.push_back(r.eta);
    medians.push_back(r.median);
    rep.notes.push_back(strf("eta %-8g median sup-distance %.4e  [q25 %.3e, q75 %.3e]", r.eta,
                             r.median, r.q25, r.q75));
  }
  {
    LinePlot plot(spec.id + ": discretization error", "eta", "median sup-distance");
    plot.set_log_y(true);
    plot.add_series("median", etas, medians);
    const std::string path = join_path(out, spec.id + "_ladder.svg");
    plot.write(path);
    rep.files.push_back(path);
  }

  bool ok = true;
  if (spec.verdict.medians_decreasing) {
    const bool dec = strictly_decreasing(medians);
    rep.notes.push_back(strf("medians strictly decreasing along the ladder: %s",
                             dec ? "yes" : "NO"));
    ok = dec;
  }
  rep.passed = ok;
}

inline void run_expected_update(const ExperimentSpec& spec, const std::string& out,
                                ExperimentReport& rep) {
  const Objective& obj = *spec.objective;
  const int d = obj.dim();
  const int n = spec.population;
  for (const ThetaIso& th : spec.thetas)
    if (th.dim() != d) throw ConfigError(spec.id + ": theta/objective dimension mismatch");

  // The deterministic side: the flow field under the Bernstein transform of
  // the induced rank weights, cubatured on a fixed QMC point set.
  const Weight smooth = expected_weight(rank_weights(*spec.weight, n));
  const Eigen::MatrixXd pts = sobol_normal_points(spec.points_n, d);
  const CounterRng rng(spec.seeds.front());
  const double sigma = spec.verdict.sigma;

  const std::string table = join_path(out, spec.id + "_table.csv");
  std::ofstream os(table, std::ios::binary);
  if (!os) throw ConfigError("cannot open table for writing: " + table);
  os << "theta,v,dm_gap,dm_tol,dv_gap,dv_tol,pass\n";

  bool ok = true;
  double worst_ratio = 0.0;
  for (std::size_t ti = 0; ti < spec.thetas.size(); ++ti) {
    const ThetaIso& theta = spec.thetas[ti];
    const RhsEstimate ref = rhs_rank(theta, obj, smooth, pts);

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
    double sum_v = 0.0, sumsq_v = 0.0;
    for (std::int64_t r = 0; r < spec.reps; ++r) {
      const std::int64_t stream = static_cast<std::int64_t>(ti) * spec.reps + r;
      const auto [dm, dv] = detail::step_increment(theta, obj, *spec.weight, n, rng, stream, 0);
      sum += dm;
      sumsq += dm.cwiseAbs2();
      sum_v += dv;
      sumsq_v += dv * dv;
    }
    const double k = static_cast<double>(spec.reps);
    const Eigen::VectorXd mean = sum / k;
    double var_norm = 0.0;  // norm-combined standard error of the mean of dm
    for (int c = 0; c < d; ++c)
      var_norm += (sumsq(c) - k * mean(c) * mean(c)) / (k - 1.0) / k;
    const double se_dm = std::sqrt(var_norm);
    const double mean_v = sum_v / k;
    const double se_dv = std::sqrt((sumsq_v - k * mean_v * mean_v) / (k - 1.0) / k);

    const double dm_gap = (mean - ref.gm).norm();
    const double dm_tol = sigma * std::sqrt(se_dm * se_dm + ref.se_gm * ref.se_gm);
    const double dv_gap = std::abs(mean_v - ref.gv);
    const double dv_tol = sigma * std::sqrt(se_dv * se_dv + ref.se_gv * ref.se_gv);
    const bool pass = dm_gap <= dm_tol && dv_gap <= dv_tol;
    ok = ok && pass;
    worst_ratio = std::max({worst_ratio, dm_gap / dm_tol, dv_gap / dv_tol});
    os << ti << "," << detail::format_g17(theta.v) << "," << detail::format_g17(dm_gap) << ","
       << detail::format_g17(dm_tol) << "," << detail::format_g17(dv_gap) << ","
       << detail::format_g17(dv_tol) << "," << (pass ? 1 : 0) << "\n";
  }
  rep.files.push_back(table);
  rep.notes.push_back(strf("%zu states x %lld populations of %d: worst gap/tolerance = %.3f",
                           spec.thetas.size(), static_cast<long long>(spec.reps), n,
                           worst_ratio));
  rep.passed = ok;
}

inline void run_b2_report(const ExperimentSpec& spec, const std::string& out,
                          ExperimentReport& rep) {
  const Weight& w = *spec.weight;
  const B1Report b1 = check_b1(w, 2001);
  const double alpha = alpha_b2(w, spec.b2_dim);
  const bool b2 = alpha > 0.0;

  rep.notes.push_back("weight: " + w.describe());
  rep.notes.push_back(strf("B1: %s (non-increasing: %s, w(0)-w(1) = %.6g, Lipschitz <= %.6g)",
                           b1.pass ? "pass" : "fail", b1.non_increasing ? "yes" : "no", b1.gap,
                           b1.lipschitz_estimate));
  rep.notes.push_back(strf("alpha(w, d=%d) = %.12g -> B2: %s", spec.b2_dim, alpha,
                           b2 ? "pass" : "fail"));

  bool ok = spec.verdict.expect_b2_positive ? (b2 == *spec.verdict.expect_b2_positive) : b2;

  nlohmann::json j;
  j["weight"] = w.describe();
  j["dim"] = spec.b2_dim;
  j["alpha"] = alpha;
  j["b1"] = {{"pass", b1.pass},
             {"non_increasing", b1.non_increasing},
             {"gap", b1.gap},
             {"lipschitz_estimate", b1.lipschitz_estimate}};
  j["b2_pass"] = b2;

  if (spec.mc_samples) {
    std::mt19937_64 gen(spec.mc_seed);
    std::normal_distribution<double> N01;
    const std::int64_t K = *spec.mc_samples;
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < K; ++i) {
      const double z = N01(gen);
      const double term = w(normal_cdf(z)) * (z * z - 1.0);
      s += term;
      s2 += term * term;
    }
    const double mc = s / static_cast<double>(K) / spec.b2_dim;
    const double var = (s2 - s * s / static_cast<double>(K)) / (static_cast<double>(K) - 1.0);
    const double se = std::sqrt(var / static_cast<double>(K)) / spec.b2_dim;
    const bool agree = std::abs(alpha - mc) <= spec.verdict.sigma * se;
    rep.notes.push_back(strf("Monte Carlo alpha = %.8g +- %.2g (%lld draws): %s", mc, se,
                             static_cast<long long>(K), agree ? "consistent" : "INCONSISTENT"));
    j["mc"] = {{"samples", K}, {"estimate", mc}, {"se", se}, {"consistent", agree}};
    ok = ok && agree;
  }

  const std::string path = join_path(out, spec.id + "_report.json");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open report for writing: " + path);
  os << j.dump(2) << "\n";
  rep.files.push_back(path);
  rep.passed = ok;
}

inline void run_property_check(const ExperimentSpec& spec, const std::string& out,
                               ExperimentReport& rep) {
  const double sigma = spec.verdict.sigma;
  const std::string table = join_path(out, spec.id + "_table.csv");
  std::ofstream os(table, std::ios::binary);
  if (!os) throw ConfigError("cannot open table for writing: " + table);
  bool ok = true;

  if (spec.check == "ncx2-grid") {
    os << "dof,noncentrality,x,cdf,mc_estimate,mc_se,pass\n";
    std::mt19937_64 gen(spec.scan_seed);
    std::normal_distribution<double> N01;
    double worst = 0.0;
    for (int dof : spec.dofs) {
      for (double lam : spec.noncentralities) {
        const double x = dof + lam;
        const double shift = std::sqrt(lam);
        std::int64_t count = 0;
        for (std::int64_t i = 0; i < spec.draws; ++i) {
          double s = 0.0;
          const double z0 = N01(gen) + shift;
          s += z0 * z0;
          for (int c = 1; c < dof; ++c) {
            const double z = N01(gen);
            s += z * z;
          }
          if (s <= x) ++count;
        }
        const double phat = static_cast<double>(count) / static_cast<double>(spec.draws);
        const double se = std::sqrt(phat * (1.0 - phat) / static_cast<double>(spec.draws));
        const double cdf = ncx2_cdf(x, dof, lam);
        const bool pass = std::abs(cdf - phat) <= sigma * se;
        ok = ok && pass;
        worst = std::max(worst, std::abs(cdf - phat) / se);
        os << dof << "," << detail::format_g17(lam) << "," << detail::format_g17(x) << ","
           << detail::format_g17(cdf) << "," << detail::format_g17(phat) << ","
           << detail::format_g17(se) << "," << (pass ? 1 : 0) << "\n";
      }
    }
    rep.notes.push_back(strf("ncx2 grid %zux%zu vs %lld-draw Monte Carlo: worst gap %.2f SE",
                             spec.dofs.size(), spec.noncentralities.size(),
                             static_cast<long long>(spec.draws), worst));
    // Exact special case: dof = 2, lam = 0 is Exp(1/2).
    double worst_abs = 0.0;
    for (int i = 1; i <= 100; ++i) {
      const double xx = 0.1 * i;
      worst_abs = std::max(worst_abs,
                           std::abs(ncx2_cdf(xx, 2, 0.0) - (1.0 - std::exp(-xx / 2.0))));
    }
    rep.notes.push_back(strf("chi-square(2) closed form: max |gap| = %.3e (tol 1e-12)",
                             worst_abs));
    ok = ok && worst_abs <= 1e-12;
  } else if (spec.check == "drift-scan") {
    os << "index,v,dist,drift,se,margin,pass\n";
    const Objective& obj = *spec.objective;
    const int d = obj.dim();
    const Eigen::VectorXd& xstar = *obj.optimum();
    const Eigen::MatrixXd pts = sobol_normal_points(spec.points_n, d);
    const CounterRng rng(spec.scan_seed);
    const double llo = std::log10(spec.v_log_lo), lhi = std::log10(spec.v_log_hi);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.n_thetas; ++i) {
      const double v = std::pow(10.0, llo + (lhi - llo) * rng.uniform(i, 0));
      Eigen::VectorXd m(d);
      for (int c = 0; c < d; ++c)
        m(c) = xstar(c) + spec.box_radius * (2.0 * rng.uniform(i, 1 + c) - 1.0);
      const ThetaIso theta(m, v);
      const DriftEstimate de = drift(theta, obj, *spec.weight, RhsMode::Rank, pts, xstar);
      const double margin = de.value + sigma * de.se;
      const bool pass = margin < 0.0;
      ok = ok && pass;
      worst = std::max(worst, margin);
      os << i << "," << detail::format_g17(v) << ","
         << detail::format_g17((m - xstar).norm()) << "," << detail::format_g17(de.value) << ","
         << detail::format_g17(de.se) << "," << detail::format_g17(margin) << ","
         << (pass ? 1 : 0) << "\n";
    }
    rep.notes.push_back(strf(
        "Lyapunov drift at %d sampled states: worst upper confidence bound %.4g (want < 0)",
        spec.n_thetas, worst));
  } else if (spec.check == "gv-scan") {
    os << "index,dist,gv,se,margin,pass\n";
    const Objective& obj = *spec.objective;
    const int d = obj.dim();
    const Eigen::VectorXd& xstar = *obj.optimum();
    const Eigen::MatrixXd pts = sobol_normal_points(spec.points_n, d);
    const CounterRng rng(spec.scan_seed);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.n_scan_points; ++i) {
      Eigen::VectorXd m(d);
      for (int c = 0; c < d; ++c)
        m(c) = spec.box_lo + (spec.box_hi - spec.box_lo) * rng.uniform(i, c);
      if ((m - xstar).norm() < spec.exclude_radius) m.array() += 0.5;
      const ThetaIso theta(m, spec.scan_v);
      const RhsEstimate est = rhs_rank(theta, obj, *spec.weight, pts);
      const double margin = est.gv - sigma * est.se_gv;
      const bool pass = margin > 0.0;
      ok = ok && pass;
      worst = std::min(worst, est.se_gv > 0.0 ? est.gv / est.se_gv
                                              : std::numeric_limits<double>::infinity());
      os << i << "," << detail::format_g17((m - xstar).norm()) << ","
         << detail::format_g17(est.gv) << "," << detail::format_g17(est.se_gv) << ","
         << detail::format_g17(margin) << "," << (pass ? 1 : 0) << "\n";
    }
    rep.notes.push_back(
        strf("g^v at %d states away from the optimum, v = %.1e: worst estimate %.2f SE above 0 "
             "(want > %.1f)",
             spec.n_scan_points, spec.scan_v, worst, sigma));
  } else {
    throw ConfigError(spec.id + ": unknown property check '" + spec.check + "'");
  }
  os.close();
  rep.files.push_back(table);
  rep.passed = ok;
}

}  // namespace expdetail

/// Execute one experiment, writing its artifacts under out_dir.  Exceptions
/// are converted into a failed report with the message preserved, so that one
/// broken experiment does not take down a batch.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
  ExperimentReport rep;
  rep.id = spec.id;
  rep.mode = to_string(spec.mode);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::filesystem::create_directories(out_dir);
    switch (spec.mode) {
      case ExperimentMode::OdeRank:
      case ExperimentMode::OdeExact:
        expdetail::run_ode(spec, out_dir, rep);
        break;
      case ExperimentMode::Discrete:
        if (!spec.etas.empty())
          expdetail::run_discrete_ladder(spec, out_dir, rep);
        else
          expdetail::run_discrete_single(spec, out_dir, rep);
        break;
      case ExperimentMode::ExpectedUpdateCheck:
        expdetail::run_expected_update(spec, out_dir, rep);
        break;
      case ExperimentMode::B2Report:
        expdetail::run_b2_report(spec, out_dir, rep);
        break;
      case ExperimentMode::PropertyCheck:
        expdetail::run_property_check(spec, out_dir, rep);
        break;
    }
  } catch (const std::exception& e) {
    rep.passed = false;
    rep.error = e.what();
  }
  rep.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace esigo
