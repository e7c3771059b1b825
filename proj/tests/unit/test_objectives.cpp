#include <catch2/catch_amalgamated.hpp>

#include <esigo/errors.hpp>
#include <esigo/flow.hpp>
#include <esigo/objectives.hpp>

#include "../support/oracles.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

using namespace esigo;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd x(2);
  x << a, b;
  return x;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd x(3);
  x << a, b, c;
  return x;
}

}  // namespace

TEST_CASE("transform evaluation and lookup", "[objectives]") {
  CHECK(apply_transform(Transform::Identity, 3.5) == 3.5);
  CHECK_THAT(apply_transform(Transform::Exp, 1.0),
             Catch::Matchers::WithinRel(std::exp(1.0), 1e-15));
  CHECK_THAT(apply_transform(Transform::Arctan, 1.0),
             Catch::Matchers::WithinRel(std::atan(1.0), 1e-15));
  CHECK(apply_transform(Transform::Cube, 2.0) == 8.0);

  for (Transform g :
       {Transform::Identity, Transform::Exp, Transform::Arctan, Transform::Cube})
    CHECK(transform_from_name(transform_name(g)) == g);
  CHECK_THROWS_AS(transform_from_name("log"), ConfigError);
}

TEST_CASE("objective evaluation examples", "[objectives]") {
  const Objective sphere = Objective::sphere(2);
  CHECK(sphere(vec2(3.0, 4.0)) == 12.5);

  const Objective sphere_exp = Objective::sphere(2, std::nullopt, Transform::Exp);
  CHECK_THAT(sphere_exp(vec2(3.0, 4.0)),
             Catch::Matchers::WithinRel(std::exp(12.5), 1e-15));

  const Objective lin = Objective::linear(vec2(1.0, 0.0));
  CHECK(lin(vec2(2.0, 7.0)) == 2.0);

  CHECK(Objective::rosenbrock(2)(vec2(1.0, 1.0)) == 0.0);
  CHECK(Objective::double_well(2)(vec2(1.0, 0.0)) == 0.0);
  CHECK(Objective::double_well(2)(vec2(-1.0, 0.0)) == 0.0);

  Eigen::MatrixXd A(2, 2);
  A << 2.0, 0.3, 0.3, 1.0;
  const Objective quad = Objective::quadratic(A, vec2(1.0, -1.0));
  // y = (1, 2), f = y'Ay/2 = (2 + 1.2 + 4)/2.
  CHECK_THAT(quad(vec2(2.0, 1.0)), Catch::Matchers::WithinRel(3.6, 1e-15));
}

TEST_CASE("gradient examples and finite-difference agreement", "[objectives]") {
  const Objective sphere = Objective::sphere(2);
  CHECK(sphere.inner_gradient(vec2(3.0, 4.0)) == vec2(3.0, 4.0));

  const Objective lin = Objective::linear(vec2(1.0, 0.0));
  CHECK(lin.inner_gradient(vec2(5.0, -2.0)) == vec2(1.0, 0.0));

  const Objective dw = Objective::double_well(2);
  CHECK(dw.inner_gradient(vec2(1.0, 0.0)) == vec2(0.0, 0.0));

  Eigen::MatrixXd A(3, 3);
  A << 2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5;
  const std::vector<Objective> objs = {Objective::quadratic(A, vec3(0.5, -0.3, 1.0)),
                                       Objective::double_well(3)};
  const std::vector<Eigen::VectorXd> points = {vec3(0.7, -1.2, 0.4),
                                               vec3(-0.3, 0.8, 1.5)};
  for (const Objective& obj : objs) {
    for (const Eigen::VectorXd& x : points) {
      const Eigen::VectorXd fd =
          oracles::fd_gradient([&](const Eigen::VectorXd& y) { return obj.inner_value(y); }, x);
      const Eigen::VectorXd g = obj.inner_gradient(x);
      CHECK((g - fd).norm() <= 1e-6 * (1.0 + g.norm()));
    }
  }

  const Objective ros = Objective::rosenbrock(3);
  const Eigen::VectorXd x = vec3(0.4, -0.7, 1.3);
  const Eigen::VectorXd fd =
      oracles::fd_gradient([&](const Eigen::VectorXd& y) { return ros.inner_value(y); }, x);
  CHECK((ros.inner_gradient(x) - fd).norm() <= 1e-4);
}

TEST_CASE("builtin factory", "[objectives]") {
  const Objective sphere = make_builtin("sphere", 3);
  REQUIRE(sphere.optimum().has_value());
  CHECK(sphere.optimum()->isZero(0.0));
  REQUIRE(sphere.hessian_at_optimum().has_value());
  CHECK(sphere.hessian_at_optimum()->isIdentity(0.0));
  CHECK(sphere.is_isotropic_quadratic());

  const Objective lin = make_builtin("linear", 2);
  CHECK(!lin.optimum().has_value());
  CHECK(lin.is_linear());
  CHECK(lin.linear_coefficients() == Eigen::VectorXd::Ones(2));

  const Objective ros = make_builtin("rosenbrock", 2);
  REQUIRE(ros.optimum().has_value());
  CHECK(*ros.optimum() == Eigen::VectorXd::Ones(2));
  REQUIRE(ros.hessian_at_optimum().has_value());
  Eigen::MatrixXd H(2, 2);
  H << 802.0, -400.0, -400.0, 200.0;
  CHECK(*ros.hessian_at_optimum() == H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*ros.hessian_at_optimum());
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("builtin factory validation", "[objectives]") {
  CHECK_THROWS_AS(make_builtin("banana", 2), ConfigError);
  CHECK_THROWS_AS(make_builtin("sphere", 0), ConfigError);
  CHECK_THROWS_AS(make_builtin("quadratic", 2), ConfigError);  // missing A
  CHECK_THROWS_AS(make_builtin("rosenbrock", 1), ConfigError);

  ObjectiveParams p;
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.5, -0.5, 1.0;  // not symmetric
  p.A = bad;
  CHECK_THROWS_AS(make_builtin("quadratic", 2, p), ConfigError);

  bad << 1.0, 2.0, 2.0, 1.0;  // symmetric but indefinite
  p.A = bad;
  CHECK_THROWS_AS(make_builtin("quadratic", 2, p), ConfigError);

  ObjectiveParams q;
  q.a = vec3(1.0, 0.0, 0.0);
  CHECK_THROWS_AS(make_builtin("linear", 2, q), ConfigError);
  CHECK_THROWS_AS(Objective::linear(Eigen::VectorXd::Zero(2)), ConfigError);
}

TEST_CASE("ranks are invariant under monotone transforms", "[objectives]") {
  Eigen::VectorXd f(6);
  f << 0.3, -1.2, 0.3, 2.5, -1.2, 0.0;  // two tied pairs
  const std::vector<int> base = detail::le_ranks(f);
  // R_j counts every k with f_k <= f_j, so ties share the higher count:
  // values <= 0.3 are {0.3, -1.2, 0.3, -1.2, 0.0}.
  CHECK(base == std::vector<int>{5, 2, 5, 6, 2, 3});

  for (Transform g : {Transform::Exp, Transform::Arctan, Transform::Cube}) {
    Eigen::VectorXd tf(f.size());
    for (int i = 0; i < f.size(); ++i) tf(i) = apply_transform(g, f(i));
    CHECK(detail::le_ranks(tf) == base);
  }
}

TEST_CASE("objective input validation", "[objectives]") {
  const Objective sphere = Objective::sphere(2);
  CHECK_THROWS_AS(sphere(vec3(1.0, 2.0, 3.0)), DomainError);
  Eigen::VectorXd bad = vec2(1.0, std::nan(""));
  CHECK_THROWS_AS(sphere(bad), DomainError);
  CHECK_THROWS_AS(sphere.inner_gradient(bad), DomainError);
}

TEST_CASE("custom objectives are derivative-free", "[objectives]") {
  const Objective obj =
      Objective::custom(2, [](const Eigen::VectorXd& x) { return x(0) + 2.0 * x(1); });
  CHECK(obj(vec2(1.0, 3.0)) == 7.0);
  CHECK(!obj.has_gradient());
  CHECK(!obj.is_linear());
  CHECK_THROWS_AS(obj.inner_gradient(vec2(1.0, 3.0)), CapabilityError);
  CHECK_THROWS_AS(obj.linear_coefficients(), CapabilityError);
  CHECK_THROWS_AS(Objective::custom(0, [](const Eigen::VectorXd&) { return 0.0; }),
                  ConfigError);
}

TEST_CASE("with_transform keeps geometry", "[objectives]") {
  const Objective sphere = Objective::sphere(3);
  const Objective warped = sphere.with_transform(Transform::Exp);
  CHECK(warped.dim() == 3);
  REQUIRE(warped.optimum().has_value());
  CHECK(*warped.optimum() == *sphere.optimum());
  CHECK(warped.transform() == Transform::Exp);
  CHECK_THAT(warped(vec3(1.0, 0.0, 0.0)),
             Catch::Matchers::WithinRel(std::exp(0.5), 1e-15));
  CHECK(warped.describe().find("under exp") != std::string::npos);
  CHECK(sphere.describe().find("sphere") != std::string::npos);
}
