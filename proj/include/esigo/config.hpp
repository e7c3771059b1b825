#pragma once

#include <json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "esigo/discrete.hpp"
#include "esigo/errors.hpp"
#include "esigo/flow.hpp"
#include "esigo/objectives.hpp"
#include "esigo/quantile.hpp"
#include "esigo/theta.hpp"
#include "esigo/weights.hpp"

namespace esigo {

/// Experiment kinds the runner understands.
///
/// The first five are run modes; PropertyCheck hosts the statistical
/// sign/oracle scans (noncentral chi-square vs Monte Carlo, drift-negativity,
/// variance-growth at small v) so that every acceptance property is runnable
/// from a config file.
enum class ExperimentMode { OdeRank, OdeExact, Discrete, ExpectedUpdateCheck, B2Report,
                            PropertyCheck };

inline const char* to_string(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::OdeRank:
      return "ode-rank";
    case ExperimentMode::OdeExact:
      return "ode-exact";
    case ExperimentMode::Discrete:
      return "discrete";
    case ExperimentMode::ExpectedUpdateCheck:
      return "expected-update-check";
    case ExperimentMode::B2Report:
      return "b2-report";
    case ExperimentMode::PropertyCheck:
      return "property-check";
  }
  return "?";
}

/// Pass/fail conditions evaluated against a finished experiment; unset
/// members are not checked.
struct VerdictSpec {
  std::optional<RunStatus> status;
  bool lyapunov_decreasing = false;
  std::optional<double> final_v_ratio_max;  // V(T) <= ratio * V(0)
  std::optional<double> final_m_dist_max;   // |m(T) - x*| <= this
  std::optional<double> slope_rel_tol;      // fitted ln v slope vs alpha_b2
  bool identical_trajectories = false;      // across the transform list
  std::optional<double> param_agreement_rtol;
  bool medians_decreasing = false;  // eta ladder
  std::optional<int> min_success;   // seeds meeting final_v_ratio_max
  std::optional<double> lnv_slope_min;
  std::optional<bool> expect_b2_positive;
  double sigma = 3.0;  // SE multiplier for statistical checks
};

struct ExperimentSpec {
  std::string id;
  ExperimentMode mode = ExperimentMode::OdeRank;

  std::optional<Objective> objective;
  std::vector<Transform> transforms;  // >= 2 entries triggers comparison runs
  std::optional<Weight> weight;
  std::optional<ThetaIso> theta0;

  int points_n = 4096;
  SolverSettings solver;
  std::vector<VParam> parameterizations;  // >= 2 entries triggers comparison
  StopCriteria stop;

  // discrete
  double eta = 0.01;
  int population = 50;
  std::int64_t iterations = 1000;
  std::vector<std::uint64_t> seeds{0};
  int record_stride = 1;
  std::vector<double> etas;  // non-empty -> ladder comparison vs the ODE
  int grid_points = 101;

  // expected-update-check
  std::vector<ThetaIso> thetas;
  std::int64_t reps = 100000;

  // b2-report
  int b2_dim = 1;
  std::optional<std::int64_t> mc_samples;
  std::uint64_t mc_seed = 1;

  // property-check
  std::string check;  // "ncx2-grid" | "drift-scan" | "gv-scan"
  std::vector<int> dofs{1, 2, 5, 10, 20};
  std::vector<double> noncentralities{0.0, 0.5, 3.0, 10.0, 50.0};
  std::int64_t draws = 1'000'000;
  std::uint64_t scan_seed = 1;
  int n_thetas = 100;
  double v_log_lo = 1e-3, v_log_hi = 10.0;
  double box_radius = 10.0;
  int n_scan_points = 20;
  double scan_v = 1e-6;
  double box_lo = -2.0, box_hi = 2.0;
  double exclude_radius = 0.3;

  VerdictSpec verdict;
};

struct ConfigFile {
  std::string name;
  std::vector<ExperimentSpec> experiments;
};

namespace cfg {

using nlohmann::json;

/// JSON accessor carrying a breadcrumb path so that validation failures point
/// at the offending element.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(&j), where_(std::move(where)) {}

  const json& raw() const { return *j_; }
  const std::string& where() const { return where_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(where_ + ": " + msg);
  }

  bool has(const char* key) const { return j_->is_object() && j_->contains(key); }

  Reader child(const char* key) const {
    if (!has(key)) fail(std::string("missing field '") + key + "'");
    return Reader((*j_)[key], where_ + "." + key);
  }

  std::optional<Reader> maybe(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Reader((*j_)[key], where_ + "." + key);
  }

  Reader element(std::size_t i) const {
    return Reader((*j_)[i], where_ + "[" + std::to_string(i) + "]");
  }

  std::size_t size() const { return j_->size(); }
  bool is_array() const { return j_->is_array(); }
  bool is_object() const { return j_->is_object(); }
  bool is_string() const { return j_->is_string(); }

  double as_number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  std::int64_t as_integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<std::int64_t>();
  }
  bool as_bool() const {
    if (!j_->is_boolean()) fail("expected a boolean");
    return j_->get<bool>();
  }
  std::string as_string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  double number(const char* key) const { return child(key).as_number(); }
  double number(const char* key, double dflt) const {
    return has(key) ? child(key).as_number() : dflt;
  }
  std::int64_t integer(const char* key) const { return child(key).as_integer(); }
  std::int64_t integer(const char* key, std::int64_t dflt) const {
    return has(key) ? child(key).as_integer() : dflt;
  }
  bool boolean(const char* key, bool dflt) const {
    return has(key) ? child(key).as_bool() : dflt;
  }
  std::string str(const char* key) const { return child(key).as_string(); }
  std::string str(const char* key, const std::string& dflt) const {
    return has(key) ? child(key).as_string() : dflt;
  }

  std::vector<double> number_list(const char* key) const {
    Reader arr = child(key);
    if (!arr.is_array()) arr.fail("expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(arr.element(i).as_number());
    return out;
  }

  Eigen::VectorXd vector(const char* key) const {
    const std::vector<double> v = number_list(key);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  }

  /// Square matrix given as an array of rows.
  Eigen::MatrixXd matrix(const char* key) const {
    Reader arr = child(key);
    if (!arr.is_array() || arr.size() == 0) arr.fail("expected a non-empty array of rows");
    const std::size_t n = arr.size();
    Eigen::MatrixXd out(static_cast<long>(n), 0);
    for (std::size_t r = 0; r < n; ++r) {
      Reader row = arr.element(r);
      if (!row.is_array()) row.fail("expected an array (matrix row)");
      if (r == 0) out.resize(static_cast<long>(n), static_cast<long>(row.size()));
      if (static_cast<long>(row.size()) != out.cols()) row.fail("ragged matrix rows");
      for (std::size_t c = 0; c < row.size(); ++c)
        out(static_cast<long>(r), static_cast<long>(c)) = row.element(c).as_number();
    }
    return out;
  }

 private:
  const json* j_;
  std::string where_;
};

inline Weight parse_weight(const Reader& r) {
  const std::string kind = r.str("kind");
  if (kind == "truncation-linear") return Weight::truncation_linear();
  if (kind == "power") return Weight::power(r.number("k", 2.0));
  if (kind == "shifted-sigmoid")
    return Weight::shifted_sigmoid(r.number("slope", 10.0), r.number("shift", 0.25));
  if (kind == "finite") {
    if (!r.has("weights")) r.fail("finite weight needs a 'weights' array");
    return Weight::from_finite_weights(r.number_list("weights"));
  }
  r.fail("unknown weight kind '" + kind + "'");
}

inline Objective parse_objective(const Reader& r) {
  const std::string name = r.str("name");
  const int dim = static_cast<int>(r.integer("dim"));
  ObjectiveParams p;
  if (r.has("a")) p.a = r.vector("a");
  if (r.has("A")) p.A = r.matrix("A");
  if (r.has("xstar")) p.xstar = r.vector("xstar");
  p.transform = transform_from_name(r.str("transform", "identity"));
  try {
    return make_builtin(name, dim, p);
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

inline ThetaIso parse_theta(const Reader& r) {
  ThetaIso theta(r.vector("m"), r.number("v"));
  if (!theta.valid()) r.fail("invalid theta (needs finite m and v >= 0)");
  return theta;
}

inline VParam parse_coordinates(const Reader& r, const std::string& s) {
  if (s == "log-v") return VParam::LogV;
  if (s == "direct-v") return VParam::DirectV;
  r.fail("unknown coordinates '" + s + "' (expected 'log-v' or 'direct-v')");
}

inline RunStatus parse_status(const Reader& r, const std::string& s) {
  if (s == "converged") return RunStatus::Converged;
  if (s == "diverged") return RunStatus::Diverged;
  if (s == "budget-exhausted") return RunStatus::BudgetExhausted;
  if (s == "domain-error") return RunStatus::DomainErrorStatus;
  r.fail("unknown status '" + s + "'");
}

inline SolverSettings parse_solver(const std::optional<Reader>& r) {
  SolverSettings s;
  if (!r) return s;
  s.adaptive = r->boolean("adaptive", s.adaptive);
  s.rtol = r->number("rtol", s.rtol);
  s.atol = r->number("atol", s.atol);
  s.initial_step = r->number("initial_step", s.initial_step);
  s.fixed_step = r->number("fixed_step", s.fixed_step);
  s.max_steps = r->integer("max_steps", s.max_steps);
  if (r->has("coordinates")) s.coordinates = parse_coordinates(*r, r->str("coordinates"));
  return s;
}

inline StopCriteria parse_stop(const std::optional<Reader>& r) {
  StopCriteria s;
  if (!r) return s;
  s.horizon = r->number("horizon", s.horizon);
  s.records = static_cast<int>(r->integer("records", s.records));
  s.convergence_factor = r->number("convergence_factor", s.convergence_factor);
  s.divergence_factor = r->number("divergence_factor", s.divergence_factor);
  return s;
}

inline VerdictSpec parse_verdict(const std::optional<Reader>& r) {
  VerdictSpec v;
  if (!r) return v;
  if (r->has("status")) v.status = parse_status(*r, r->str("status"));
  v.lyapunov_decreasing = r->boolean("lyapunov_decreasing", false);
  if (r->has("final_v_ratio_max")) v.final_v_ratio_max = r->number("final_v_ratio_max");
  if (r->has("final_m_dist_max")) v.final_m_dist_max = r->number("final_m_dist_max");
  if (r->has("slope_rel_tol")) v.slope_rel_tol = r->number("slope_rel_tol");
  v.identical_trajectories = r->boolean("identical_trajectories", false);
  if (r->has("param_agreement_rtol")) v.param_agreement_rtol = r->number("param_agreement_rtol");
  v.medians_decreasing = r->boolean("medians_decreasing", false);
  if (r->has("min_success")) v.min_success = static_cast<int>(r->integer("min_success"));
  if (r->has("lnv_slope_min")) v.lnv_slope_min = r->number("lnv_slope_min");
  if (r->has("expect_b2_positive")) v.expect_b2_positive = r->boolean("expect_b2_positive", true);
  v.sigma = r->number("sigma", 3.0);
  return v;
}

inline ExperimentMode parse_mode(const Reader& r, const std::string& s) {
  if (s == "ode-rank") return ExperimentMode::OdeRank;
  if (s == "ode-exact") return ExperimentMode::OdeExact;
  if (s == "discrete") return ExperimentMode::Discrete;
  if (s == "expected-update-check") return ExperimentMode::ExpectedUpdateCheck;
  if (s == "b2-report") return ExperimentMode::B2Report;
  if (s == "property-check") return ExperimentMode::PropertyCheck;
  r.fail("unknown mode '" + s + "'");
}

inline ExperimentSpec parse_experiment(const Reader& r) {
  ExperimentSpec spec;
  spec.id = r.str("id");
  Reader rr(r.raw(), r.where() + " (id '" + spec.id + "')");
  spec.mode = parse_mode(rr, rr.str("mode"));

  if (auto obj = rr.maybe("objective")) spec.objective = parse_objective(*obj);
  if (auto w = rr.maybe("weight")) spec.weight = parse_weight(*w);
  if (auto th = rr.maybe("theta0")) spec.theta0 = parse_theta(*th);
  if (auto pts = rr.maybe("points")) spec.points_n = static_cast<int>(pts->integer("n"));
  spec.solver = parse_solver(rr.maybe("solver"));
  spec.stop = parse_stop(rr.maybe("stop"));
  spec.verdict = parse_verdict(rr.maybe("verdict"));

  if (auto tf = rr.maybe("transforms")) {
    if (!tf->is_array()) tf->fail("expected an array of transform names");
    for (std::size_t i = 0; i < tf->size(); ++i)
      spec.transforms.push_back(transform_from_name(tf->element(i).as_string()));
  }
  if (auto pr = rr.maybe("parameterizations")) {
    if (!pr->is_array()) pr->fail("expected an array of coordinate names");
    for (std::size_t i = 0; i < pr->size(); ++i)
      spec.parameterizations.push_back(parse_coordinates(*pr, pr->element(i).as_string()));
  }

  spec.eta = rr.number("eta", spec.eta);
  spec.population = static_cast<int>(rr.integer("population", spec.population));
  spec.iterations = rr.integer("iterations", spec.iterations);
  spec.record_stride = static_cast<int>(rr.integer("record_stride", spec.record_stride));
  if (rr.has("seeds")) {
    spec.seeds.clear();
    Reader arr = rr.child("seeds");
    if (!arr.is_array() || arr.size() == 0) arr.fail("expected a non-empty array of seeds");
    for (std::size_t i = 0; i < arr.size(); ++i)
      spec.seeds.push_back(static_cast<std::uint64_t>(arr.element(i).as_integer()));
  }
  if (rr.has("etas")) {
    spec.etas = rr.number_list("etas");
    if (spec.etas.size() < 2) rr.child("etas").fail("eta ladder needs at least 2 values");
  }
  spec.grid_points = static_cast<int>(rr.integer("grid_points", spec.grid_points));

  if (auto ths = rr.maybe("thetas")) {
    if (!ths->is_array() || ths->size() == 0) ths->fail("expected a non-empty array of thetas");
    for (std::size_t i = 0; i < ths->size(); ++i)
      spec.thetas.push_back(parse_theta(ths->element(i)));
  }
  spec.reps = rr.integer("reps", spec.reps);

  spec.b2_dim = static_cast<int>(rr.integer("dim", spec.b2_dim));
  if (rr.has("mc_samples")) spec.mc_samples = rr.integer("mc_samples");
  spec.mc_seed = static_cast<std::uint64_t>(rr.integer("mc_seed", 1));

  spec.check = rr.str("check", "");
  if (rr.has("dofs")) {
    spec.dofs.clear();
    Reader arr = rr.child("dofs");
    for (std::size_t i = 0; i < arr.size(); ++i)
      spec.dofs.push_back(static_cast<int>(arr.element(i).as_integer()));
  }
  if (rr.has("noncentralities")) spec.noncentralities = rr.number_list("noncentralities");
  spec.draws = rr.integer("draws", spec.draws);
  spec.scan_seed = static_cast<std::uint64_t>(rr.integer("scan_seed", 1));
  spec.n_thetas = static_cast<int>(rr.integer("n_thetas", spec.n_thetas));
  spec.v_log_lo = rr.number("v_log_lo", spec.v_log_lo);
  spec.v_log_hi = rr.number("v_log_hi", spec.v_log_hi);
  spec.box_radius = rr.number("box_radius", spec.box_radius);
  spec.n_scan_points = static_cast<int>(rr.integer("n_scan_points", spec.n_scan_points));
  spec.scan_v = rr.number("scan_v", spec.scan_v);
  spec.box_lo = rr.number("box_lo", spec.box_lo);
  spec.box_hi = rr.number("box_hi", spec.box_hi);
  spec.exclude_radius = rr.number("exclude_radius", spec.exclude_radius);

  // Mode-driven structural validation.
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) rr.fail(what);
  };
  switch (spec.mode) {
    case ExperimentMode::OdeRank:
    case ExperimentMode::OdeExact:
      require(spec.objective.has_value(), "needs an objective");
      require(spec.weight.has_value(), "needs a weight");
      require(spec.theta0.has_value(), "needs theta0");
      require(spec.theta0->dim() == spec.objective->dim(), "theta0/objective dimension mismatch");
      if (spec.mode == ExperimentMode::OdeExact) {
        try {
          (void)QuantileModel::exact_for(*spec.objective);
        } catch (const Error& e) {
          rr.fail(std::string("ode-exact requires an exact quantile: ") + e.what());
        }
      }
      break;
    case ExperimentMode::Discrete:
      require(spec.objective.has_value(), "needs an objective");
      require(spec.weight.has_value(), "needs a weight");
      require(spec.theta0.has_value(), "needs theta0");
      require(spec.theta0->dim() == spec.objective->dim(), "theta0/objective dimension mismatch");
      require(spec.population >= 2, "population must be >= 2");
      require(spec.eta >= 0.0, "eta must be >= 0");
      break;
    case ExperimentMode::ExpectedUpdateCheck:
      require(spec.objective.has_value(), "needs an objective");
      require(spec.weight.has_value(), "needs a weight");
      require(!spec.thetas.empty(), "needs a 'thetas' list");
      require(spec.population >= 2, "population must be >= 2");
      require(spec.reps >= 1, "reps must be >= 1");
      break;
    case ExperimentMode::B2Report:
      require(spec.weight.has_value(), "needs a weight");
      require(spec.b2_dim >= 1, "dim must be >= 1");
      break;
    case ExperimentMode::PropertyCheck:
      require(spec.check == "ncx2-grid" || spec.check == "drift-scan" || spec.check == "gv-scan",
              "check must be one of 'ncx2-grid', 'drift-scan', 'gv-scan'");
      if (spec.check == "drift-scan" || spec.check == "gv-scan") {
        require(spec.objective.has_value(), "needs an objective");
        require(spec.weight.has_value(), "needs a weight");
        require(spec.objective->optimum().has_value(), "objective must declare an optimum");
      }
      break;
  }
  if (!spec.transforms.empty()) {
    require(spec.mode == ExperimentMode::OdeRank || spec.mode == ExperimentMode::Discrete,
            "transform comparisons apply to ode-rank and discrete modes");
  }
  return spec;
}

}  // namespace cfg

inline ConfigFile parse_config(const std::string& text, const std::string& name) {
  cfg::json root;
  try {
    root = cfg::json::parse(text);
  } catch (const cfg::json::parse_error& e) {
    // Translate the byte offset into line:column for the message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(name + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON parse error: " + e.what());
  }

  cfg::Reader r(root, name);
  ConfigFile out;
  out.name = name;
  cfg::Reader exps = r.child("experiments");
  if (!exps.is_array() || exps.size() == 0) exps.fail("expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    ExperimentSpec spec = cfg::parse_experiment(exps.element(i));
    if (!ids.insert(spec.id).second)
      exps.element(i).fail("duplicate experiment id '" + spec.id + "'");
    out.experiments.push_back(std::move(spec));
  }
  return out;
}

inline ConfigFile parse_config_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace esigo
