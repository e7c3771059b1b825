#include <catch2/catch_amalgamated.hpp>

#include <esigo/errors.hpp>
#include <esigo/weights.hpp>

#include "../support/oracles.hpp"

#include <cmath>
#include <vector>

using namespace esigo;

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

// Frozen reference values of alpha(w, 1), cross-checked below against two
// independent oracles (Simpson quadrature and plain Monte Carlo).
constexpr double kAlphaTruncationLinear = 0.159154943092;  // = 1/(2 pi)
constexpr double kAlphaPower2 = 0.091888149237;
constexpr double kAlphaPower3 = 0.137832223855;
constexpr double kAlphaSigmoid = 0.143803694306;  // slope 10, shift 0.25
}  // namespace

TEST_CASE("named weight evaluation", "[weights]") {
  const Weight w = Weight::truncation_linear();
  CHECK(w(0.0) == 1.0);
  CHECK(w(0.25) == 0.5);
  CHECK(w(0.5) == 0.0);
  CHECK(w(1.0) == 0.0);

  const Weight p3 = Weight::power(3.0);
  CHECK(p3(0.0) == 1.0);
  CHECK(p3(0.5) == Catch::Approx(0.125).epsilon(1e-15));
  CHECK(p3(1.0) == 0.0);

  const Weight sg = Weight::shifted_sigmoid();
  CHECK(sg(0.25) == Catch::Approx(0.5).epsilon(1e-15));
  CHECK(sg(0.0) > sg(1.0));
}

TEST_CASE("weight evaluation rejects out-of-range quantiles", "[weights]") {
  const Weight w = Weight::truncation_linear();
  CHECK_THROWS_AS(w(-0.01), DomainError);
  CHECK_THROWS_AS(w(1.01), DomainError);
  CHECK_THROWS_AS(w(std::nan("")), DomainError);
}

TEST_CASE("bernstein form of finite weights", "[weights]") {
  const Weight two = bernstein_from_finite({1.0, 0.0});
  CHECK(two(0.3) == Catch::Approx(0.7).margin(1e-15));  // polynomial 1 - p
  CHECK(two(0.0) == 1.0);
  CHECK(two(1.0) == 0.0);

  const Weight three = bernstein_from_finite({1.0, 0.0, 0.0});
  for (double p = 0.0; p <= 1.0; p += 0.05)
    CHECK(three(p) == Catch::Approx((1.0 - p) * (1.0 - p)).margin(1e-14));

  const Weight constant = bernstein_from_finite({0.4, 0.4, 0.4, 0.4});
  for (double p : {0.0, 0.17, 0.5, 0.83, 1.0})
    CHECK(constant(p) == Catch::Approx(0.4).margin(1e-14));

  CHECK_THROWS_AS(bernstein_from_finite({}), ConfigError);
}

TEST_CASE("bernstein transform preserves monotonicity", "[weights]") {
  const std::vector<double> finite{2.0, 1.5, 1.5, 0.3, 0.0, -0.5};
  const Weight w = bernstein_from_finite(finite);
  double prev = w(0.0);
  for (int i = 1; i <= 200; ++i) {
    const double cur = w(i / 200.0);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("declared lipschitz metadata", "[weights]") {
  CHECK(Weight::truncation_linear().lipschitz() == 2.0);
  CHECK(Weight::power(3.0).lipschitz() == 3.0);
  CHECK(Weight::shifted_sigmoid(10.0, 0.25).lipschitz() == Catch::Approx(2.5));
  // (lambda - 1) * max adjacent gap
  CHECK(bernstein_from_finite({1.0, 0.0}).lipschitz() == 1.0);
  CHECK(bernstein_from_finite({1.0, 0.2, 0.0}).lipschitz() == Catch::Approx(1.6));
}

TEST_CASE("b1 grid report", "[weights]") {
  const B1Report good = check_b1(Weight::truncation_linear(), 1001);
  CHECK(good.pass);
  CHECK(good.non_increasing);
  CHECK(good.gap == 1.0);
  CHECK(good.lipschitz_estimate == Catch::Approx(2.0).margin(0.01));

  const B1Report flat = check_b1(bernstein_from_finite({1.0, 1.0, 1.0}), 101);
  CHECK_FALSE(flat.pass);  // gap = 0 even though non-increasing
  CHECK(flat.non_increasing);
  CHECK(flat.gap == Catch::Approx(0.0).margin(1e-14));

  const B1Report rising = check_b1(bernstein_from_finite({0.0, 1.0}), 101);
  CHECK_FALSE(rising.pass);
  CHECK_FALSE(rising.non_increasing);

  CHECK_THROWS_AS(check_b1(Weight::truncation_linear(), 1), ConfigError);
}

TEST_CASE("alpha of degenerate weights is zero", "[weights]") {
  CHECK(std::abs(alpha_b2(bernstein_from_finite({0.7, 0.7, 0.7}), 1)) < 1e-12);
  // (1,0) at lambda=2 is the linear polynomial 1-p: the boundary case.
  CHECK(std::abs(alpha_b2(bernstein_from_finite({1.0, 0.0}), 1)) < 1e-12);
  CHECK(std::abs(alpha_b2(Weight::power(1.0), 1)) < 1e-12);
}

TEST_CASE("alpha matches frozen references", "[weights]") {
  CHECK(alpha_b2(Weight::truncation_linear(), 1) ==
        Catch::Approx(kAlphaTruncationLinear).margin(1e-11));
  CHECK(alpha_b2(Weight::truncation_linear(), 1) ==
        Catch::Approx(1.0 / kTwoPi).margin(1e-12));
  CHECK(alpha_b2(Weight::power(2.0), 1) == Catch::Approx(kAlphaPower2).margin(1e-11));
  CHECK(alpha_b2(Weight::power(3.0), 1) == Catch::Approx(kAlphaPower3).margin(1e-11));
  CHECK(alpha_b2(Weight::shifted_sigmoid(10.0, 0.25), 1) ==
        Catch::Approx(kAlphaSigmoid).margin(1e-11));
}

TEST_CASE("alpha agrees with the simpson oracle", "[weights]") {
  const std::vector<Weight> ws{Weight::truncation_linear(), Weight::power(2.0),
                               Weight::power(3.5), Weight::shifted_sigmoid(6.0, 0.4),
                               bernstein_from_finite({1.0, 0.6, 0.0, 0.0})};
  for (const Weight& w : ws) {
    const double quad = alpha_b2(w, 1);
    const double simp = oracles::simpson_alpha([&](double q) { return w(q); });
    CHECK(quad == Catch::Approx(simp).margin(1e-9));
  }
}

TEST_CASE("alpha agrees with monte carlo within 3 SE", "[weights]") {
  const std::vector<Weight> ws{Weight::truncation_linear(), Weight::power(2.0),
                               Weight::power(3.0), Weight::shifted_sigmoid(10.0, 0.25)};
  std::uint64_t seed = 11;
  for (const Weight& w : ws) {
    const auto mc = oracles::mc_alpha([&](double q) { return w(q); }, 1000000, seed++);
    CHECK(std::abs(alpha_b2(w, 1) - mc.value) <= 3.0 * mc.se);
  }
}

TEST_CASE("alpha scales exactly with dimension", "[weights]") {
  const Weight w = Weight::truncation_linear();
  const double a1 = alpha_b2(w, 1);
  CHECK(alpha_b2(w, 5) == a1 / 5.0);
  CHECK(alpha_b2(w, 7) == a1 / 7.0);
  CHECK_THROWS_AS(alpha_b2(w, 0), ConfigError);
}

TEST_CASE("alpha is affine-equivariant in the weight", "[weights]") {
  // alpha(c w + b) = c alpha(w): the constant shift integrates away.
  const std::vector<double> base{1.0, 0.4, 0.1};
  std::vector<double> scaled;
  for (double x : base) scaled.push_back(2.5 * x + 3.0);
  const double a = alpha_b2(bernstein_from_finite(base), 1);
  const double b = alpha_b2(bernstein_from_finite(scaled), 1);
  CHECK(b == Catch::Approx(2.5 * a).margin(1e-10));
}

TEST_CASE("weight descriptions name the family", "[weights]") {
  CHECK(Weight::truncation_linear().describe().find("truncation-linear") != std::string::npos);
  CHECK(Weight::power(2.0).describe().find("power") != std::string::npos);
  CHECK(bernstein_from_finite({1.0, 0.0}).describe().find("finite") != std::string::npos);
}

TEST_CASE("power weight requires k >= 1", "[weights]") {
  CHECK_THROWS_AS(Weight::power(0.5), ConfigError);
  CHECK_NOTHROW(Weight::power(1.0));
}
