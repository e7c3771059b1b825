#include <catch2/catch_amalgamated.hpp>

#include <esigo/config.hpp>
#include <esigo/errors.hpp>
#include <esigo/experiment.hpp>
#include <esigo/objectives.hpp>
#include <esigo/theta.hpp>
#include <esigo/weights.hpp>

#include <json.hpp>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace esigo;

namespace {

std::string fresh_dir(const std::string& tag) {
  const auto dir = std::filesystem::path("experiment-test-out") / tag;
  std::filesystem::remove_all(dir);
  return dir.string();
}

bool has_note(const ExperimentReport& rep, const std::string& needle) {
  for (const std::string& n : rep.notes)
    if (n.find(needle) != std::string::npos) return true;
  return false;
}

bool has_file(const ExperimentReport& rep, const std::string& suffix) {
  for (const std::string& f : rep.files)
    if (f.size() >= suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0)
      return true;
  return false;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ThetaIso theta_of(std::initializer_list<double> m, double v) {
  ThetaIso theta;
  theta.m = Eigen::VectorXd(static_cast<long>(m.size()));
  int i = 0;
  for (double c : m) theta.m(i++) = c;
  theta.v = v;
  return theta;
}

}  // namespace

TEST_CASE("b2 report experiment", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "rate";
  spec.mode = ExperimentMode::B2Report;
  spec.weight = Weight::truncation_linear();
  spec.b2_dim = 1;

  const std::string out = fresh_dir("b2");
  const ExperimentReport rep = run_experiment(spec, out);
  INFO(rep.summary());
  REQUIRE(rep.error.empty());
  CHECK(rep.passed);
  CHECK(has_note(rep, "B2: pass"));
  CHECK(has_note(rep, "B1: pass"));
  CHECK(rep.summary().rfind("[PASS] rate", 0) == 0);

  REQUIRE(has_file(rep, "rate_report.json"));
  const nlohmann::json j = nlohmann::json::parse(slurp(rep.files.front()));
  CHECK(std::abs(j["alpha"].get<double>() - 0.15915494309189535) <= 1e-12);
  CHECK(j["b2_pass"].get<bool>());
  CHECK(j["b1"]["pass"].get<bool>());
}

TEST_CASE("b2 report flags flat weights", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "flat";
  spec.mode = ExperimentMode::B2Report;
  spec.weight = Weight::from_finite_weights({1.0, 1.0});

  const ExperimentReport rep = run_experiment(spec, fresh_dir("b2flat"));
  CHECK(!rep.passed);
  CHECK(has_note(rep, "B2: fail"));

  spec.verdict.expect_b2_positive = false;  // the failure itself is the expectation
  const ExperimentReport rep2 = run_experiment(spec, fresh_dir("b2flat2"));
  CHECK(rep2.passed);
}

TEST_CASE("ode-exact linear experiment reports the slope", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "slope";
  spec.mode = ExperimentMode::OdeExact;
  spec.objective = make_builtin("linear", 1);
  spec.weight = Weight::truncation_linear();
  spec.theta0 = theta_of({0.0}, 1.0);
  spec.points_n = 2048;
  spec.stop.horizon = 2.0;
  spec.stop.records = 21;
  spec.stop.convergence_factor = 0.0;
  spec.stop.divergence_factor = 0.0;
  spec.verdict.status = RunStatus::BudgetExhausted;
  spec.verdict.slope_rel_tol = 0.05;

  const std::string out = fresh_dir("slope");
  const ExperimentReport rep = run_experiment(spec, out);
  INFO(rep.summary());
  REQUIRE(rep.error.empty());
  CHECK(rep.passed);
  CHECK(has_note(rep, "ln v slope"));
  REQUIRE(has_file(rep, "slope.csv"));
  CHECK(has_file(rep, "slope_lnv.svg"));
  CHECK(!has_file(rep, "slope_V.svg"));  // no optimum, no Lyapunov panel
  const std::string csv = slurp(expdetail::join_path(out, "slope.csv"));
  CHECK(csv.rfind("t,m_1,v,V,gv_over_v\n", 0) == 0);
  CHECK(csv.find("# status: budget-exhausted") != std::string::npos);
}

TEST_CASE("transform comparisons annotate the report", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "tf";
  spec.mode = ExperimentMode::OdeRank;
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::truncation_linear();
  spec.theta0 = theta_of({2.0, -1.0}, 1.0);
  spec.points_n = 512;
  spec.transforms = {Transform::Identity, Transform::Exp, Transform::Arctan};
  spec.stop.horizon = 2.0;
  spec.stop.records = 11;
  spec.stop.convergence_factor = 0.0;
  spec.verdict.status = RunStatus::BudgetExhausted;
  spec.verdict.identical_trajectories = true;

  const ExperimentReport rep = run_experiment(spec, fresh_dir("tf"));
  INFO(rep.summary());
  CHECK(rep.passed);
  CHECK(has_note(rep, "trajectories identical: true"));
  CHECK(has_file(rep, "tf.csv"));
  CHECK(has_file(rep, "tf_exp.csv"));
  CHECK(has_file(rep, "tf_arctan.csv"));
}

TEST_CASE("experiments are byte-reproducible", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "repro";
  spec.mode = ExperimentMode::OdeRank;
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::power(2);
  spec.theta0 = theta_of({1.0, 1.0}, 0.5);
  spec.points_n = 512;
  spec.stop.horizon = 1.0;
  spec.stop.records = 11;
  spec.stop.convergence_factor = 0.0;

  const std::string out1 = fresh_dir("repro1");
  const std::string out2 = fresh_dir("repro2");
  const ExperimentReport r1 = run_experiment(spec, out1);
  const ExperimentReport r2 = run_experiment(spec, out2);
  REQUIRE(r1.error.empty());
  REQUIRE(r2.error.empty());
  CHECK(slurp(expdetail::join_path(out1, "repro.csv")) ==
        slurp(expdetail::join_path(out2, "repro.csv")));
}

TEST_CASE("discrete experiments write per-seed artifacts", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "chain";
  spec.mode = ExperimentMode::Discrete;
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::truncation_linear();
  spec.theta0 = theta_of({1.0, -1.0}, 1.0);
  spec.eta = 0.05;
  spec.population = 16;
  spec.iterations = 50;
  spec.record_stride = 5;
  spec.seeds = {1, 2};
  spec.transforms = {Transform::Identity, Transform::Cube};
  spec.verdict.identical_trajectories = true;

  const std::string out = fresh_dir("chain");
  const ExperimentReport rep = run_experiment(spec, out);
  INFO(rep.summary());
  REQUIRE(rep.error.empty());
  CHECK(rep.passed);
  CHECK(has_note(rep, "trajectories identical: true"));
  CHECK(has_note(rep, "variance-proposal rejections"));
  CHECK(has_file(rep, "chain.csv"));
  CHECK(has_file(rep, "chain_seed2.csv"));
  CHECK(has_file(rep, "chain_events.jsonl"));
  CHECK(has_file(rep, "chain_lnv.svg"));
  CHECK(has_file(rep, "chain_V.svg"));
}

TEST_CASE("eta ladder rows shrink with the step size", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "ladder";
  spec.mode = ExperimentMode::Discrete;
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::truncation_linear();
  spec.theta0 = theta_of({2.0, 1.0}, 1.0);
  spec.points_n = 1024;
  spec.population = 30;
  spec.seeds = {0, 1, 2};
  spec.etas = {0.2, 0.05};
  spec.grid_points = 21;
  spec.stop.horizon = 1.0;

  const std::string out = fresh_dir("ladder");
  const ExperimentReport rep = run_experiment(spec, out);
  INFO(rep.summary());
  REQUIRE(rep.error.empty());
  CHECK(rep.passed);
  CHECK(has_file(rep, "ladder_table.csv"));
  CHECK(has_file(rep, "ladder_ode_ref.csv"));
  CHECK(has_file(rep, "ladder_ladder.svg"));
  const std::string table = slurp(expdetail::join_path(out, "ladder_table.csv"));
  CHECK(table.rfind("eta,median_supdist,q25,q75,seeds\n", 0) == 0);
}

TEST_CASE("a frozen chain measures the distance to the flow", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "frozen";
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::truncation_linear();
  spec.theta0 = theta_of({2.0, 1.0}, 1.0);
  spec.points_n = 1024;
  spec.population = 20;
  spec.seeds = {0};
  spec.etas = {0.1, 0.0};
  spec.grid_points = 11;
  spec.stop.horizon = 1.0;

  Trajectory ref;
  const std::vector<LadderRow> rows = compare_discrete_ode(spec, &ref);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].eta == 0.1);
  CHECK(rows[1].eta == 0.0);
  CHECK(rows[0].seeds == 1);

  // eta = 0 freezes theta at theta0, so the sup-distance is directly the
  // largest gap between theta0 and the reference flow.
  double expected = 0.0;
  Eigen::VectorXd frozen(3);
  frozen << 2.0, 1.0, 1.0;
  for (const TrajectoryRecord& rec : ref.records) {
    Eigen::VectorXd state(3);
    state << rec.theta.m(0), rec.theta.m(1), rec.theta.v;
    expected = std::max(expected, (frozen - state).norm());
  }
  CHECK_THAT(rows[1].median, Catch::Matchers::WithinRel(expected, 1e-12));

  ExperimentSpec bad = spec;
  bad.etas = {0.1};
  CHECK_THROWS_AS(compare_discrete_ode(bad), ConfigError);
}

TEST_CASE("expected-update check experiment", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "eu";
  spec.mode = ExperimentMode::ExpectedUpdateCheck;
  spec.objective = make_builtin("sphere", 2);
  spec.weight = Weight::truncation_linear();
  spec.population = 8;
  spec.reps = 4000;
  spec.points_n = 4096;
  spec.seeds = {3};
  spec.thetas = {theta_of({0.0, 0.0}, 1.0), theta_of({1.0, -1.0}, 0.25)};

  const ExperimentReport rep = run_experiment(spec, fresh_dir("eu"));
  INFO(rep.summary());
  REQUIRE(rep.error.empty());
  CHECK(rep.passed);
  CHECK(has_note(rep, "worst gap/tolerance"));
  CHECK(has_file(rep, "eu_table.csv"));
}

TEST_CASE("property checks run from specs", "[experiment]") {
  ExperimentSpec ncx2;
  ncx2.id = "grid";
  ncx2.mode = ExperimentMode::PropertyCheck;
  ncx2.check = "ncx2-grid";
  ncx2.dofs = {2};
  ncx2.noncentralities = {1.0};
  ncx2.draws = 20000;
  ncx2.scan_seed = 5;
  const ExperimentReport r1 = run_experiment(ncx2, fresh_dir("grid"));
  INFO(r1.summary());
  REQUIRE(r1.error.empty());
  CHECK(r1.passed);
  CHECK(has_file(r1, "grid_table.csv"));

  ExperimentSpec ds;
  ds.id = "drift";
  ds.mode = ExperimentMode::PropertyCheck;
  ds.check = "drift-scan";
  ds.objective = make_builtin("sphere", 2);
  ds.weight = Weight::truncation_linear();
  ds.points_n = 2048;
  ds.n_thetas = 5;
  ds.box_radius = 3.0;
  ds.scan_seed = 9;
  const ExperimentReport r2 = run_experiment(ds, fresh_dir("drift"));
  INFO(r2.summary());
  REQUIRE(r2.error.empty());
  CHECK(r2.passed);

  ExperimentSpec gs;
  gs.id = "gv";
  gs.mode = ExperimentMode::PropertyCheck;
  gs.check = "gv-scan";
  gs.objective = make_builtin("rosenbrock", 2);
  gs.weight = Weight::truncation_linear();
  gs.points_n = 2048;
  gs.n_scan_points = 3;
  gs.scan_v = 1e-6;
  gs.scan_seed = 11;
  const ExperimentReport r3 = run_experiment(gs, fresh_dir("gv"));
  INFO(r3.summary());
  REQUIRE(r3.error.empty());
  CHECK(r3.passed);
}

TEST_CASE("failures become reports, not exceptions", "[experiment]") {
  ExperimentSpec spec;
  spec.id = "broken";
  spec.mode = ExperimentMode::PropertyCheck;
  spec.check = "bogus";  // bypasses config validation on purpose
  const ExperimentReport rep = run_experiment(spec, fresh_dir("broken"));
  CHECK(!rep.passed);
  CHECK(rep.error.find("unknown property check") != std::string::npos);
  CHECK(rep.summary().rfind("[FAIL]", 0) == 0);
}
