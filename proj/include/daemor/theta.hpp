// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_THETA_HPP
#define DAEMOR_THETA_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "daemor/core.hpp"
#include "daemor/errors.hpp"

namespace daemor {

/// Scalar coefficient function theta(mu) over the parameter vector.
///
/// The expression grammar is deliberately small: the literal one, real
/// constants, coordinate selectors mu_k, scaling, integer powers, sums,
/// products, and affine shifts c + theta(mu). Everything in the grammar
/// serializes to JSON and back. A native callback node exists as an escape
/// hatch for in-process use (for example parameter-dependent couplings that
/// fall outside the grammar); callbacks evaluate but refuse to serialize.
class ThetaExpr {
 public:
  ThetaExpr() : node_(one_node()) {}

  static ThetaExpr one() { return ThetaExpr(one_node()); }

  static ThetaExpr constant(double c) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kConstant;
    n->value = c;
    return ThetaExpr(std::move(n));
  }

  static ThetaExpr coordinate(int i) {
    if (i < 0) throw InvalidInput("ThetaExpr: negative coordinate index");
    auto n = std::make_shared<Node>();
    n->kind = Kind::kCoordinate;
    n->index = i;
    return ThetaExpr(std::move(n));
  }

  static ThetaExpr scale(double c, ThetaExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kScale;
    n->value = c;
    n->args = {e.node_};
    return ThetaExpr(std::move(n));
  }

  static ThetaExpr power(ThetaExpr e, int k) {
    if (k < 0) throw InvalidInput("ThetaExpr: negative power");
    auto n = std::make_shared<Node>();
    n->kind = Kind::kPower;
    n->index = k;
    n->args = {e.node_};
    return ThetaExpr(std::move(n));
  }

  static ThetaExpr sum(std::vector<ThetaExpr> terms) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kSum;
    for (auto& t : terms) n->args.push_back(t.node_);
    return ThetaExpr(std::move(n));
  }

  static ThetaExpr product(std::vector<ThetaExpr> factors) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kProduct;
    for (auto& f : factors) n->args.push_back(f.node_);
    return ThetaExpr(std::move(n));
  }

  /// c + e(mu).
  static ThetaExpr affine_shift(double c, ThetaExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kAffineShift;
    n->value = c;
    n->args = {e.node_};
    return ThetaExpr(std::move(n));
  }

  /// Escape hatch outside the closed grammar. Not serializable.
  static ThetaExpr callback(std::function<double(ParamView)> f,
                            std::string label) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::kCallback;
    n->fn = std::move(f);
    n->label = std::move(label);
    return ThetaExpr(std::move(n));
  }

  double operator()(ParamView mu) const {
    const double v = eval(*node_, mu);
    if (!std::isfinite(v))
      throw InvalidInput("ThetaExpr: non-finite value at evaluation");
    return v;
  }

  bool is_literal_one() const { return node_->kind == Kind::kOne; }

  bool serializable() const { return serializable(*node_); }

  nlohmann::json to_json() const { return to_json(*node_); }

  static ThetaExpr from_json(const nlohmann::json& j) {
    return ThetaExpr(parse(j));
  }

 private:
  enum class Kind {
    kOne,
    kConstant,
    kCoordinate,
    kScale,
    kPower,
    kSum,
    kProduct,
    kAffineShift,
    kCallback
  };

  struct Node {
    Kind kind = Kind::kOne;
    double value = 0.0;
    int index = 0;
    std::vector<std::shared_ptr<const Node>> args;
    std::function<double(ParamView)> fn;
    std::string label;
  };

  explicit ThetaExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<const Node> one_node() {
    static const auto n = [] {
      auto m = std::make_shared<Node>();
      m->kind = Kind::kOne;
      return m;
    }();
    return n;
  }

  static double eval(const Node& n, ParamView mu) {
    switch (n.kind) {
      case Kind::kOne:
        return 1.0;
      case Kind::kConstant:
        return n.value;
      case Kind::kCoordinate:
        if (static_cast<std::size_t>(n.index) >= mu.size())
          throw InvalidInput("ThetaExpr: coordinate index exceeds dim");
        return mu[n.index];
      case Kind::kScale:
        return n.value * eval(*n.args[0], mu);
      case Kind::kPower:
        return std::pow(eval(*n.args[0], mu), n.index);
      case Kind::kSum: {
        double s = 0.0;
        for (const auto& a : n.args) s += eval(*a, mu);
        return s;
      }
      case Kind::kProduct: {
        double s = 1.0;
        for (const auto& a : n.args) s *= eval(*a, mu);
        return s;
      }
      case Kind::kAffineShift:
        return n.value + eval(*n.args[0], mu);
      case Kind::kCallback:
        return n.fn(mu);
    }
    throw InvalidInput("ThetaExpr: corrupt node");
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
      case Kind::kOne:
        return json{{"op", "one"}};
      case Kind::kConstant:
        return json{{"op", "const"}, {"c", n.value}};
      case Kind::kCoordinate:
        return json{{"op", "coord"}, {"i", n.index}};
      case Kind::kScale:
        return json{{"op", "scale"}, {"c", n.value}, {"arg", to_json(*n.args[0])}};
      case Kind::kPower:
        return json{{"op", "power"}, {"k", n.index}, {"arg", to_json(*n.args[0])}};
      case Kind::kSum: {
        json a = json::array();
        for (const auto& t : n.args) a.push_back(to_json(*t));
        return json{{"op", "sum"}, {"args", a}};
      }
      case Kind::kProduct: {
        json a = json::array();
        for (const auto& t : n.args) a.push_back(to_json(*t));
        return json{{"op", "product"}, {"args", a}};
      }
      case Kind::kAffineShift:
        return json{{"op", "affine_shift"},
                    {"c", n.value},
                    {"arg", to_json(*n.args[0])}};
      case Kind::kCallback:
        throw SerializationError(
            "ThetaExpr: callback node '" + n.label +
            "' is in-process only and cannot be serialized");
    }
    throw InvalidInput("ThetaExpr: corrupt node");
  }

  static std::shared_ptr<const Node> parse(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("op"))
      throw SerializationError("ThetaExpr: malformed JSON node");
    const std::string op = j.at("op").get<std::string>();
    auto n = std::make_shared<Node>();
    if (op == "one") {
      n->kind = Kind::kOne;
    } else if (op == "const") {
      n->kind = Kind::kConstant;
      n->value = j.at("c").get<double>();
    } else if (op == "coord") {
      n->kind = Kind::kCoordinate;
      n->index = j.at("i").get<int>();
      if (n->index < 0) throw SerializationError("ThetaExpr: negative coord");
    } else if (op == "scale") {
      n->kind = Kind::kScale;
      n->value = j.at("c").get<double>();
      n->args = {parse(j.at("arg"))};
    } else if (op == "power") {
      n->kind = Kind::kPower;
      n->index = j.at("k").get<int>();
      if (n->index < 0) throw SerializationError("ThetaExpr: negative power");
      n->args = {parse(j.at("arg"))};
    } else if (op == "sum" || op == "product") {
      n->kind = op == "sum" ? Kind::kSum : Kind::kProduct;
      for (const auto& a : j.at("args")) n->args.push_back(parse(a));
    } else if (op == "affine_shift") {
      n->kind = Kind::kAffineShift;
      n->value = j.at("c").get<double>();
      n->args = {parse(j.at("arg"))};
    } else {
      throw SerializationError("ThetaExpr: unknown op '" + op + "'");
    }
    return n;
  }

  std::shared_ptr<const Node> node_;
};

}  // namespace daemor

#endif  // DAEMOR_THETA_HPP
