#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "esigo/errors.hpp"

namespace esigo {

/// Strictly increasing scalar transform g applied on top of the inner
/// function h; rank-based dynamics must be invariant to the choice.
enum class Transform { Identity, Exp, Arctan, Cube };

inline double apply_transform(Transform g, double y) {
  switch (g) {
    case Transform::Identity:
      return y;
    case Transform::Exp:
      return std::exp(y);
    case Transform::Arctan:
      return std::atan(y);
    case Transform::Cube:
      return y * y * y;
  }
  return y;  // unreachable
}

inline const char* transform_name(Transform g) {
  switch (g) {
    case Transform::Identity:
      return "identity";
    case Transform::Exp:
      return "exp";
    case Transform::Arctan:
      return "arctan";
    case Transform::Cube:
      return "cube";
  }
  return "identity";
}

inline Transform transform_from_name(const std::string& name) {
  if (name == "identity") return Transform::Identity;
  if (name == "exp") return Transform::Exp;
  if (name == "arctan") return Transform::Arctan;
  if (name == "cube") return Transform::Cube;
  throw ConfigError("unknown transform '" + name + "'");
}

namespace detail {

struct LinearInner {
  Eigen::VectorXd a;
};

struct QuadraticInner {
  Eigen::MatrixXd A;
  Eigen::VectorXd xstar;
  bool isotropic = false;  // A = c I
  double iso_scale = 0.0;
};

struct RosenbrockInner {};

struct DoubleWellInner {};

struct CustomInner {
  std::function<double(const Eigen::VectorXd&)> h;
};

using InnerFn = std::variant<LinearInner, QuadraticInner, RosenbrockInner, DoubleWellInner, CustomInner>;

}  // namespace detail

/// Monotone composite objective f = g(h(x)).
///
/// Comparison consumers (rank updates, quantiles) see only f; shape metadata
/// (linearity, isotropy, optimum, Hessian at the optimum) feeds exact
/// quantiles and convergence diagnostics.  Immutable after construction.
class Objective {
 public:
  static Objective linear(Eigen::VectorXd a, Transform g = Transform::Identity) {
    if (a.size() < 1) throw ConfigError("linear objective: empty coefficient vector");
    if (!a.allFinite()) throw ConfigError("linear objective: non-finite coefficients");
    if (a.norm() == 0.0) throw ConfigError("linear objective: zero coefficient vector");
    Objective obj(static_cast<int>(a.size()), g, "linear");
    obj.inner_ = detail::LinearInner{std::move(a)};
    return obj;
  }

  /// h(x) = (x - x*)^T A (x - x*) / 2 with A symmetric positive definite.
  static Objective quadratic(Eigen::MatrixXd A, Eigen::VectorXd xstar,
                             Transform g = Transform::Identity) {
    const int d = static_cast<int>(xstar.size());
    if (d < 1) throw ConfigError("quadratic objective: empty center");
    if (A.rows() != d || A.cols() != d)
      throw ConfigError("quadratic objective: matrix/center dimension mismatch");
    if (!A.allFinite() || !xstar.allFinite())
      throw ConfigError("quadratic objective: non-finite parameters");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ConfigError("quadratic objective: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("quadratic objective: matrix is not positive definite");

    detail::QuadraticInner inner{std::move(A), std::move(xstar), false, 0.0};
    const double c = inner.A(0, 0);
    inner.isotropic = true;
    for (int i = 0; i < d && inner.isotropic; ++i)
      for (int j = 0; j < d; ++j) {
        const double want = (i == j) ? c : 0.0;
        if (std::abs(inner.A(i, j) - want) > 1e-12 * scale) {
          inner.isotropic = false;
          break;
        }
      }
    inner.iso_scale = inner.isotropic ? c : 0.0;

    Objective obj(d, g, "quadratic");
    obj.optimum_ = inner.xstar;
    obj.hessian_at_optimum_ = inner.A;
    obj.inner_ = std::move(inner);
    obj.validate_declarations();
    return obj;
  }

  /// Quadratic with A = I; x* defaults to the origin.
  static Objective sphere(int dim, std::optional<Eigen::VectorXd> xstar = std::nullopt,
                          Transform g = Transform::Identity) {
    if (dim < 1) throw ConfigError("sphere objective: dim must be >= 1");
    Eigen::VectorXd c = xstar ? std::move(*xstar) : Eigen::VectorXd::Zero(dim).eval();
    if (c.size() != dim) throw ConfigError("sphere objective: center dimension mismatch");
    Objective obj = quadratic(Eigen::MatrixXd::Identity(dim, dim), std::move(c), g);
    obj.name_ = "sphere";
    return obj;
  }

  static Objective rosenbrock(int dim = 2, Transform g = Transform::Identity) {
    if (dim < 2) throw ConfigError("rosenbrock objective: dim must be >= 2");
    Objective obj(dim, g, "rosenbrock");
    obj.inner_ = detail::RosenbrockInner{};
    obj.optimum_ = Eigen::VectorXd::Ones(dim);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i + 1 < dim; ++i) {
      H(i, i) += 1200.0 - 400.0 + 2.0;  // from term i at x = 1
      H(i + 1, i + 1) += 200.0;
      H(i, i + 1) = H(i + 1, i) = -400.0;
    }
    obj.hessian_at_optimum_ = std::move(H);
    obj.validate_declarations();
    return obj;
  }

  /// h(x) = (x_1^2 - 1)^2 + sum_{i>1} x_i^2; two basins, declared optimum at
  /// (1, 0, ..., 0).
  static Objective double_well(int dim = 2, Transform g = Transform::Identity) {
    if (dim < 1) throw ConfigError("double-well objective: dim must be >= 1");
    Objective obj(dim, g, "double-well");
    obj.inner_ = detail::DoubleWellInner{};
    Eigen::VectorXd opt = Eigen::VectorXd::Zero(dim);
    opt(0) = 1.0;
    obj.optimum_ = std::move(opt);
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(dim, 2.0);
    diag(0) = 8.0;
    obj.hessian_at_optimum_ = diag.asDiagonal().toDenseMatrix();
    obj.validate_declarations();
    return obj;
  }

  /// Comparison-only inner function with no derivative or shape metadata.
  static Objective custom(int dim, std::function<double(const Eigen::VectorXd&)> h,
                          Transform g = Transform::Identity) {
    if (dim < 1) throw ConfigError("custom objective: dim must be >= 1");
    if (!h) throw ConfigError("custom objective: empty function");
    Objective obj(dim, g, "custom");
    obj.inner_ = detail::CustomInner{std::move(h)};
    return obj;
  }

  int dim() const { return dim_; }
  Transform transform() const { return transform_; }
  const std::string& name() const { return name_; }
  const std::optional<Eigen::VectorXd>& optimum() const { return optimum_; }
  const std::optional<Eigen::MatrixXd>& hessian_at_optimum() const { return hessian_at_optimum_; }

  /// Same inner function under a different monotone transform.
  Objective with_transform(Transform g) const {
    Objective obj = *this;
    obj.transform_ = g;
    return obj;
  }

  double operator()(const Eigen::VectorXd& x) const {
    return apply_transform(transform_, inner_value(x));
  }

  double inner_value(const Eigen::VectorXd& x) const {
    check_point(x);
    return std::visit(
        [&](const auto& inner) -> double { return eval_inner(inner, x); }, inner_);
  }

  bool has_gradient() const { return !std::holds_alternative<detail::CustomInner>(inner_); }

  /// Analytic gradient of the inner function h.
  Eigen::VectorXd inner_gradient(const Eigen::VectorXd& x) const {
    check_point(x);
    if (const auto* lin = std::get_if<detail::LinearInner>(&inner_)) return lin->a;
    if (const auto* quad = std::get_if<detail::QuadraticInner>(&inner_))
      return quad->A * (x - quad->xstar);
    if (std::holds_alternative<detail::RosenbrockInner>(inner_)) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
      for (int i = 0; i + 1 < dim_; ++i) {
        const double r = x(i + 1) - x(i) * x(i);
        g(i) += -400.0 * x(i) * r - 2.0 * (1.0 - x(i));
        g(i + 1) += 200.0 * r;
      }
      return g;
    }
    if (std::holds_alternative<detail::DoubleWellInner>(inner_)) {
      Eigen::VectorXd g = 2.0 * x;
      g(0) = 4.0 * x(0) * (x(0) * x(0) - 1.0);
      return g;
    }
    throw CapabilityError("inner_gradient: objective has a derivative-free inner function");
  }

  bool is_linear() const { return std::holds_alternative<detail::LinearInner>(inner_); }

  const Eigen::VectorXd& linear_coefficients() const {
    const auto* lin = std::get_if<detail::LinearInner>(&inner_);
    if (!lin) throw CapabilityError("linear_coefficients: objective is not linear");
    return lin->a;
  }

  /// True when h is quadratic with A proportional to the identity.
  bool is_isotropic_quadratic() const {
    const auto* quad = std::get_if<detail::QuadraticInner>(&inner_);
    return quad && quad->isotropic;
  }

  std::string describe() const {
    std::ostringstream os;
    os << name_ << "(d=" << dim_ << ")";
    if (transform_ != Transform::Identity) os << " under " << transform_name(transform_);
    return os.str();
  }

 private:
  Objective(int dim, Transform g, std::string name)
      : dim_(dim), transform_(g), name_(std::move(name)) {
    // Sanity sweep: the shipped transforms are strictly increasing; check a
    // coarse grid so a future transform cannot silently break rank logic.
    double prev = apply_transform(g, -5.0);
    for (int i = 1; i <= 40; ++i) {
      const double cur = apply_transform(g, -5.0 + 0.25 * i);
      if (!(cur > prev)) throw Error("transform is not strictly increasing");
      prev = cur;
    }
  }

  void check_point(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw DomainError("objective: point dimension mismatch");
    if (!x.allFinite()) throw DomainError("objective: non-finite coordinate");
  }

  void validate_declarations() const {
    if (optimum_) {
      const double gnorm = inner_gradient(*optimum_).norm();
      if (gnorm > 1e-12) throw Error("declared optimum is not a critical point");
    }
    if (hessian_at_optimum_) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*hessian_at_optimum_);
      if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
        throw Error("declared Hessian at optimum is not positive definite");
    }
  }

  static double eval_inner(const detail::LinearInner& inner, const Eigen::VectorXd& x) {
    return inner.a.dot(x);
  }
  static double eval_inner(const detail::QuadraticInner& inner, const Eigen::VectorXd& x) {
    const Eigen::VectorXd y = x - inner.xstar;
    if (inner.isotropic) return 0.5 * inner.iso_scale * y.squaredNorm();
    return 0.5 * y.dot(inner.A * y);
  }
  static double eval_inner(const detail::RosenbrockInner&, const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (int i = 0; i + 1 < x.size(); ++i) {
      const double r = x(i + 1) - x(i) * x(i);
      const double s = 1.0 - x(i);
      acc += 100.0 * r * r + s * s;
    }
    return acc;
  }
  static double eval_inner(const detail::DoubleWellInner&, const Eigen::VectorXd& x) {
    const double w = x(0) * x(0) - 1.0;
    return w * w + x.tail(x.size() - 1).squaredNorm();
  }
  static double eval_inner(const detail::CustomInner& inner, const Eigen::VectorXd& x) {
    return inner.h(x);
  }

  int dim_;
  Transform transform_;
  std::string name_;
  detail::InnerFn inner_;
  std::optional<Eigen::VectorXd> optimum_;
  std::optional<Eigen::MatrixXd> hessian_at_optimum_;
};

/// Parameter block for make_builtin; unset fields take documented defaults.
struct ObjectiveParams {
  std::optional<Eigen::VectorXd> a;      // linear coefficients (default: all ones)
  std::optional<Eigen::MatrixXd> A;      // quadratic matrix (required for "quadratic")
  std::optional<Eigen::VectorXd> xstar;  // optimum/center (default: origin)
  Transform transform = Transform::Identity;
};

inline Objective make_builtin(const std::string& name, int dim, const ObjectiveParams& p = {}) {
  if (dim < 1) throw ConfigError("make_builtin: dim must be >= 1");
  if (name == "linear") {
    Eigen::VectorXd a = p.a ? *p.a : Eigen::VectorXd::Ones(dim).eval();
    if (a.size() != dim) throw ConfigError("make_builtin: coefficient length != dim");
    return Objective::linear(std::move(a), p.transform);
  }
  if (name == "quadratic") {
    if (!p.A) throw ConfigError("make_builtin: quadratic requires matrix A");
    Eigen::VectorXd c = p.xstar ? *p.xstar : Eigen::VectorXd::Zero(dim).eval();
    if (p.A->rows() != dim || c.size() != dim)
      throw ConfigError("make_builtin: quadratic parameter dimension mismatch");
    return Objective::quadratic(*p.A, std::move(c), p.transform);
  }
  if (name == "sphere") return Objective::sphere(dim, p.xstar, p.transform);
  if (name == "rosenbrock") return Objective::rosenbrock(dim, p.transform);
  if (name == "double-well") return Objective::double_well(dim, p.transform);
  throw ConfigError("make_builtin: unknown objective name '" + name + "'");
}

}  // namespace esigo
