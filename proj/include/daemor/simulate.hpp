// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SIMULATE_HPP
#define DAEMOR_SIMULATE_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "daemor/balanced_truncation.hpp"
#include "daemor/system.hpp"

namespace daemor {

/// Scalar input signal u(t). Same closed grammar as the parameter
/// coefficients, extended with sin, cos, and exp and with the time variable
/// in place of parameter coordinates. Serializes to JSON; closed-form
/// derivatives are available for polynomial feedthrough evaluation.
class TimeExpr {
 public:
  TimeExpr() : node_(constant_node(0.0)) {}

  static TimeExpr constant(double c) { return TimeExpr(constant_node(c)); }

  static TimeExpr time() {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kTime;
    return TimeExpr(std::move(n));
  }

  static TimeExpr scale(double c, TimeExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kScale;
    n->value = c;
    n->args = {e.node_};
    return TimeExpr(std::move(n));
  }

  static TimeExpr power(TimeExpr e, int k) {
    if (k < 0) throw InvalidInput("TimeExpr: negative power");
    auto n = std::make_shared<Node>();
    n->kind = Kind::kPower;
    n->index = k;
    n->args = {e.node_};
    return TimeExpr(std::move(n));
  }

  static TimeExpr sum(std::vector<TimeExpr> terms) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kSum;
    for (auto& t : terms) n->args.push_back(t.node_);
    return TimeExpr(std::move(n));
  }

  static TimeExpr product(std::vector<TimeExpr> factors) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kProduct;
    for (auto& f : factors) n->args.push_back(f.node_);
    return TimeExpr(std::move(n));
  }

  /// c + e(t).
  static TimeExpr affine_shift(double c, TimeExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kAffineShift;
    n->value = c;
    n->args = {e.node_};
    return TimeExpr(std::move(n));
  }

  static TimeExpr sin_of(TimeExpr e) { return unary(Kind::kSin, std::move(e)); }
  static TimeExpr cos_of(TimeExpr e) { return unary(Kind::kCos, std::move(e)); }
  static TimeExpr exp_of(TimeExpr e) { return unary(Kind::kExp, std::move(e)); }

  /// Escape hatch outside the closed grammar. Not serializable, not
  /// differentiable.
  static TimeExpr callback(std::function<double(double)> f,
                           std::string label) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kCallback;
    n->fn = std::move(f);
    n->label = std::move(label);
    return TimeExpr(std::move(n));
  }

  double operator()(double t) const {
    const double v = eval(*node_, t);
    if (!std::isfinite(v))
      throw InvalidInput("TimeExpr: non-finite value at evaluation");
    return v;
  }

  TimeExpr derivative() const { return TimeExpr(diff(node_)); }

  bool serializable() const { return serializable(*node_); }

  nlohmann::json to_json() const { return to_json(*node_); }

  static TimeExpr from_json(const nlohmann::json& j) {
    return TimeExpr(parse(j));
  }

 private:
  enum class Kind {
    kConstant,
    kTime,
    kScale,
    kPower,
    kSum,
    kProduct,
    kAffineShift,
    kSin,
    kCos,
    kExp,
    kCallback
  };

  struct Node {
    Kind kind = Kind::kConstant;
    double value = 0.0;
    int index = 0;
    std::vector<std::shared_ptr<const Node>> args;
    std::function<double(double)> fn;
    std::string label;
  };

  using NodePtr = std::shared_ptr<const Node>;

  explicit TimeExpr(NodePtr n) : node_(std::move(n)) {}

  static NodePtr constant_node(double c) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kConstant;
    n->value = c;
    return n;
  }

  static TimeExpr unary(Kind k, TimeExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->args = {e.node_};
    return TimeExpr(std::move(n));
  }

  static double eval(const Node& n, double t) {
    switch (n.kind) {
      case Kind::kConstant:
        return n.value;
      case Kind::kTime:
        return t;
      case Kind::kScale:
        return n.value * eval(*n.args[0], t);
      case Kind::kPower:
        return std::pow(eval(*n.args[0], t), n.index);
      case Kind::kSum: {
        double s = 0.0;
        for (const auto& a : n.args) s += eval(*a, t);
        return s;
      }
      case Kind::kProduct: {
        double s = 1.0;
        for (const auto& a : n.args) s *= eval(*a, t);
        return s;
      }
      case Kind::kAffineShift:
        return n.value + eval(*n.args[0], t);
      case Kind::kSin:
        return std::sin(eval(*n.args[0], t));
      case Kind::kCos:
        return std::cos(eval(*n.args[0], t));
      case Kind::kExp:
        return std::exp(eval(*n.args[0], t));
      case Kind::kCallback:
        return n.fn(t);
    }
    throw InvalidInput("TimeExpr: corrupt node");
  }

  static NodePtr diff(const NodePtr& np) {
    const Node& n = *np;
    auto wrap = [](Kind k, std::vector<NodePtr> args, double value = 0.0,
                   int index = 0) {
      auto m = std::make_shared<Node>();
      m->kind = k;
      m->value = value;
      m->index = index;
      m->args = std::move(args);
      return NodePtr(m);
    };
    switch (n.kind) {
      case Kind::kConstant:
        return constant_node(0.0);
      case Kind::kTime:
        return constant_node(1.0);
      case Kind::kScale:
        return wrap(Kind::kScale, {diff(n.args[0])}, n.value);
      case Kind::kPower: {
        if (n.index == 0) return constant_node(0.0);
        auto inner = wrap(Kind::kPower, {n.args[0]}, 0.0, n.index - 1);
        auto prod = wrap(Kind::kProduct, {inner, diff(n.args[0])});
        return wrap(Kind::kScale, {prod}, static_cast<double>(n.index));
      }
      case Kind::kSum: {
        std::vector<NodePtr> d;
        for (const auto& a : n.args) d.push_back(diff(a));
        return wrap(Kind::kSum, std::move(d));
      }
      case Kind::kProduct: {
        std::vector<NodePtr> terms;
        for (std::size_t i = 0; i < n.args.size(); ++i) {
          std::vector<NodePtr> factors = n.args;
          factors[i] = diff(n.args[i]);
          terms.push_back(wrap(Kind::kProduct, std::move(factors)));
        }
        return wrap(Kind::kSum, std::move(terms));
      }
      case Kind::kAffineShift:
        return diff(n.args[0]);
      case Kind::kSin:
        return wrap(Kind::kProduct,
                    {wrap(Kind::kCos, {n.args[0]}), diff(n.args[0])});
      case Kind::kCos:
        return wrap(
            Kind::kScale,
            {wrap(Kind::kProduct,
                  {wrap(Kind::kSin, {n.args[0]}), diff(n.args[0])})},
            -1.0);
      case Kind::kExp:
        return wrap(Kind::kProduct,
                    {wrap(Kind::kExp, {n.args[0]}), diff(n.args[0])});
      case Kind::kCallback:
        throw InvalidInput("TimeExpr: callback node '" + n.label +
                           "' has no closed-form derivative");
    }
    throw InvalidInput("TimeExpr: corrupt node");
  }

  static bool serializable(const Node& n) {
    if (n.kind == Kind::kCallback) return false;
    for (const auto& a : n.args)
      if (!serializable(*a)) return false;
    return true;
  }

  static nlohmann::json to_json(const Node& n) {
    using nlohmann::json;
    switch (n.kind) {
      case Kind::kConstant:
        return json{{"op", "const"}, {"c", n.value}};
      case Kind::kTime:
        return json{{"op", "time"}};
      case Kind::kScale:
        return json{{"op", "scale"}, {"c", n.value}, {"arg", to_json(*n.args[0])}};
      case Kind::kPower:
        return json{{"op", "power"}, {"k", n.index}, {"arg", to_json(*n.args[0])}};
      case Kind::kSum:
      case Kind::kProduct: {
        json a = json::array();
        for (const auto& t : n.args) a.push_back(to_json(*t));
        return json{{"op", n.kind == Kind::kSum ? "sum" : "product"},
                    {"args", a}};
      }
      case Kind::kAffineShift:
        return json{{"op", "affine_shift"},
                    {"c", n.value},
                    {"arg", to_json(*n.args[0])}};
      case Kind::kSin:
        return json{{"op", "sin"}, {"arg", to_json(*n.args[0])}};
      case Kind::kCos:
        return json{{"op", "cos"}, {"arg", to_json(*n.args[0])}};
      case Kind::kExp:
        return json{{"op", "exp"}, {"arg", to_json(*n.args[0])}};
      case Kind::kCallback:
        throw SerializationError(
            "TimeExpr: callback node '" + n.label +
            "' is in-process only and cannot be serialized");
    }
    throw InvalidInput("TimeExpr: corrupt node");
  }

  static NodePtr parse(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("op"))
      throw SerializationError("TimeExpr: malformed JSON node");
    const std::string op = j.at("op").get<std::string>();
    auto n = std::make_shared<Node>();
    if (op == "const") {
      n->kind = Kind::kConstant;
      n->value = j.at("c").get<double>();
    } else if (op == "time") {
      n->kind = Kind::kTime;
    } else if (op == "scale") {
      n->kind = Kind::kScale;
      n->value = j.at("c").get<double>();
      n->args = {parse(j.at("arg"))};
    } else if (op == "power") {
      n->kind = Kind::kPower;
      n->index = j.at("k").get<int>();
      if (n->index < 0) throw SerializationError("TimeExpr: negative power");
      n->args = {parse(j.at("arg"))};
    } else if (op == "sum" || op == "product") {
      n->kind = op == "sum" ? Kind::kSum : Kind::kProduct;
      for (const auto& a : j.at("args")) n->args.push_back(parse(a));
    } else if (op == "affine_shift") {
      n->kind = Kind::kAffineShift;
      n->value = j.at("c").get<double>();
      n->args = {parse(j.at("arg"))};
    } else if (op == "sin" || op == "cos" || op == "exp") {
      n->kind = op == "sin" ? Kind::kSin : op == "cos" ? Kind::kCos : Kind::kExp;
      n->args = {parse(j.at("arg"))};
    } else {
      throw SerializationError("TimeExpr: unknown op '" + op + "'");
    }
    return n;
  }

  NodePtr node_;
};

struct Trajectory {
  Vec t;  // time grid, K+1 points
  Mat u;  // (K+1) x m sampled inputs
  Mat y;  // (K+1) x p outputs
};

struct SimulateOptions {
  double consistency_tol = 1e-10;
};

namespace detail {

/// Expands the input spec to one expression per channel (a single expression
/// broadcasts to all channels) and samples it on the grid.
inline Mat sample_inputs(const std::vector<TimeExpr>& input, Eigen::Index m,
                         const Vec& t) {
  if (input.size() != 1 && static_cast<Eigen::Index>(input.size()) != m)
    throw InvalidInput("simulate: input spec does not match input count");
  Mat u(t.size(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const TimeExpr& e = input[input.size() == 1 ? 0 : j];
    for (Eigen::Index k = 0; k < t.size(); ++k) u(k, j) = e(t(k));
  }
  return u;
}

/// Rows of E that are identically zero are exact left null vectors; the
/// corresponding rows of A z + B u are purely algebraic constraints. This
/// covers the saddle and nilpotent shapes produced here; a dense fallback
/// handles general small systems.
inline std::vector<Eigen::Index> zero_rows(const SpMat& E) {
  std::vector<int> hit(E.rows(), 0);
  for (int k = 0; k < E.outerSize(); ++k)
    for (SpMat::InnerIterator it(E, k); it; ++it)
      if (it.value() != 0.0) hit[it.row()] = 1;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < E.rows(); ++i)
    if (!hit[i]) rows.push_back(i);
  return rows;
}

/// Trapezoidal sweep given a prefactored solver for (E - dt/2 A).
template <typename Solve>
Mat trapezoid_sweep(const Solve& solve, const SpMat& E, const SpMat& A,
                    const Mat& Bu, double dt, const Vec& z0) {
  const Eigen::Index K = Bu.rows() - 1;
  Mat Z(E.rows(), K + 1);
  Z.col(0) = z0;
  Vec z = z0;
  for (Eigen::Index k = 0; k < K; ++k) {
    Vec rhs = E * z + 0.5 * dt * (A * z) +
              0.5 * dt * (Bu.row(k) + Bu.row(k + 1)).transpose();
    z = solve(rhs);
    Z.col(k + 1) = z;
  }
  return Z;
}

/// Polynomial feedthrough contribution: sum_k P_k u^(k)(t) added to y.
inline void add_poly_response(Mat& y, const std::vector<Mat>& poly,
                              const std::vector<TimeExpr>& input,
                              Eigen::Index m, const Vec& t) {
  if (poly.empty()) return;
  std::vector<TimeExpr> deriv = input;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    if (k > 0)
      for (auto& e : deriv) e = e.derivative();
    const Mat uk = sample_inputs(deriv, m, t);
    y += uk * poly[k].transpose();
  }
}

}  // namespace detail

/// Implicit trapezoidal integration of E(mu) z' = A(mu) z + B(mu) u(t),
/// y = C z, from the consistent zero initial state. One sparse
/// factorization of E - (dt/2) A is reused across all steps.
inline Trajectory simulate(const ParametricDaeSystem& sys, ParamView mu,
                           const std::vector<TimeExpr>& input, double T,
                           double dt, const SimulateOptions& opt = {}) {
  if (!(dt > 0) || !(T > 0) || input.empty())
    throw InvalidInput("simulate: need positive horizon, positive step, and "
                       "a nonempty input spec");
  const Eigen::Index K = static_cast<Eigen::Index>(std::ceil(T / dt - 1e-12));
  Trajectory out;
  out.t = Vec::LinSpaced(K + 1, 0.0, K * dt);
  out.u = detail::sample_inputs(input, sys.inputs(), out.t);

  const SpMat E = sys.E.evaluate(mu);
  const SpMat A = sys.A.evaluate(mu);
  const Mat B = sys.B.dense(mu);
  const Mat C = sys.C.dense(mu);

  // z(0) = 0 is consistent iff the purely algebraic rows annihilate B u(0).
  const Vec z0 = Vec::Zero(sys.order());
  const Vec r0 = B * out.u.row(0).transpose();
  double cres = 0.0;
  for (Eigen::Index i : detail::zero_rows(E))
    cres = std::max(cres, std::abs(r0(i)));
  const double bscale =
      B.size() > 0 ? std::max(1.0, B.cwiseAbs().maxCoeff()) : 1.0;
  if (cres > opt.consistency_tol * bscale)
    throw InvalidInput(
        "simulate: zero initial state violates the algebraic constraints at "
        "t = 0; residual " +
        std::to_string(cres));

  SpMat M = E - 0.5 * dt * A;
  M.makeCompressed();
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw SingularSystemError("simulate: trapezoidal pencil factorization failed");
  const Mat Bu = out.u * B.transpose();
  const Mat Z = detail::trapezoid_sweep(
      [&](const Vec& rhs) { return Vec(lu.solve(rhs)); }, E, A, Bu, dt, z0);
  out.y = Z.transpose() * C.transpose();
  detail::add_poly_response(out.y, sys.feedthrough_poly, input, sys.inputs(),
                            out.t);
  return out;
}

/// Same integrator on a reduced model. Dense factorization; the algebraic
/// check uses the exact left null space of the small E.
inline Trajectory simulate(const Rom& rom, const std::vector<TimeExpr>& input,
                           double T, double dt,
                           const SimulateOptions& opt = {}) {
  if (!(dt > 0) || !(T > 0) || input.empty())
    throw InvalidInput("simulate: need positive horizon, positive step, and "
                       "a nonempty input spec");
  const Eigen::Index K = static_cast<Eigen::Index>(std::ceil(T / dt - 1e-12));
  Trajectory out;
  out.t = Vec::LinSpaced(K + 1, 0.0, K * dt);
  out.u = detail::sample_inputs(input, rom.inputs(), out.t);

  const Eigen::Index r = rom.order();
  const double bscale =
      rom.B.size() > 0 ? std::max(1.0, rom.B.cwiseAbs().maxCoeff()) : 1.0;
  Vec z0 = Vec::Zero(r);
  if (r > 0) {
    Eigen::JacobiSVD<Mat> svd(rom.E, Eigen::ComputeFullU);
    const double emax = svd.singularValues().size() > 0
                            ? svd.singularValues()(0)
                            : 0.0;
    Eigen::Index rank = 0;
    while (rank < svd.singularValues().size() &&
           svd.singularValues()(rank) > std::max(emax, 1.0) * 1e-12)
      ++rank;
    if (rank < r) {
      const Mat S = svd.matrixU().rightCols(r - rank).transpose();
      const Vec rhs = S * (rom.B * out.u.row(0).transpose());
      if (rhs.norm() > opt.consistency_tol * bscale) {
        // Minimum-norm consistent start: solve (S A) z0 = -S B u(0).
        const Mat SA = S * rom.A;
        z0 = -SA.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
        const double post = (SA * z0 + rhs).norm();
        if (post > opt.consistency_tol * bscale)
          throw ConvergenceError(
              "simulate: consistency projection failed on the reduced "
              "algebraic constraints");
      }
    }
  }

  if (r > 0) {
    const Mat M = rom.E - 0.5 * dt * rom.A;
    Eigen::PartialPivLU<Mat> lu(M);
    if (!(lu.rcond() > 0))
      throw SingularSystemError(
          "simulate: trapezoidal pencil factorization failed");
    const SpMat Es = rom.E.sparseView();
    const SpMat As = rom.A.sparseView();
    const Mat Bu = out.u * rom.B.transpose();
    const Mat Z = detail::trapezoid_sweep(
        [&](const Vec& rhs) { return Vec(lu.solve(rhs)); }, Es, As, Bu, dt,
        z0);
    out.y = Z.transpose() * rom.C.transpose();
  } else {
    out.y = Mat::Zero(out.t.size(), rom.outputs());
  }
  detail::add_poly_response(out.y, rom.feedthrough_poly, input, rom.inputs(),
                            out.t);
  return out;
}

}  // namespace daemor

#endif  // DAEMOR_SIMULATE_HPP
