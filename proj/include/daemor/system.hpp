// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SYSTEM_HPP
#define DAEMOR_SYSTEM_HPP

#include <Eigen/SparseLU>
#include <optional>
#include <utility>
#include <vector>

#include "daemor/affine_operator.hpp"
#include "daemor/core.hpp"
#include "daemor/counters.hpp"

namespace daemor {

enum class SystemKind { kGeneral, kStokesLike, kMechanical };

/// Structural annotations carried by a system bundle: block sizes of the
/// saddle-point layout (when applicable) and the nilpotency index of the
/// pencil's infinite part.
struct KindInfo {
  SystemKind kind = SystemKind::kGeneral;
  Eigen::Index n = 0;  // differential block size (saddle-point layouts)
  Eigen::Index q = 0;  // constraint count
  int index = 0;       // Kronecker index of the pencil (0 = unknown)
};

/// Linear parameter-dependent descriptor system
///   E(mu) z'(t) = A(mu) z(t) + B(mu) u(t),  y(t) = C(mu) z(t),
/// with every operator affine in the parameter. An optional polynomial
/// feedthrough sum_k s^k P_k is carried by reduced models whose algebraic
/// part was realized directly on transfer-function level.
struct ParametricDaeSystem {
  AffineMatrixOperator E;  // N x N
  AffineMatrixOperator A;  // N x N
  AffineMatrixOperator B;  // N x m
  AffineMatrixOperator C;  // p x N
  ParamBox box;
  KindInfo info;
  std::vector<Mat> feedthrough_poly;  // p x m coefficients, degree = size-1

  Eigen::Index order() const { return E.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
  int dim() const { return box.dim(); }

  void validate() const {
    const Eigen::Index N = E.rows();
    if (E.cols() != N || A.rows() != N || A.cols() != N)
      throw InvalidInput("system: E/A must be square and matching");
    if (B.rows() != N || C.cols() != N)
      throw InvalidInput("system: B/C dimensions do not match the order");
    for (const auto& P : feedthrough_poly)
      if (P.rows() != outputs() || P.cols() != inputs())
        throw InvalidInput("system: feedthrough coefficient dimensions");
  }
};

/// Factorization of s E(mu) - A(mu) reusable across right-hand sides.
class ShiftedPencilSolver {
 public:
  ShiftedPencilSolver(const SpMat& E, const SpMat& A, Complex s) {
    CSpMat K = (s * E.cast<Complex>() - A.cast<Complex>()).pruned();
    K.makeCompressed();
    lu_.compute(K);
    if (lu_.info() != Eigen::Success)
      throw SingularSystemError("shifted pencil: factorization failed");
    solve_counters().shifted_full.fetch_add(1, std::memory_order_relaxed);
  }

  CMat solve(const CMat& rhs) const { return lu_.solve(rhs); }

 private:
  Eigen::SparseLU<CSpMat> lu_;
};

/// Transfer function G(mu, s) = C(mu) (s E(mu) - A(mu))^-1 B(mu) plus the
/// polynomial feedthrough, evaluated by a direct sparse factorization.
inline CMat transfer_function(const ParametricDaeSystem& sys, ParamView mu,
                              Complex s) {
  const SpMat E = sys.E.evaluate(mu);
  const SpMat A = sys.A.evaluate(mu);
  const Mat B = sys.B.dense(mu);
  const Mat C = sys.C.dense(mu);
  ShiftedPencilSolver solver(E, A, s);
  const CMat X = solver.solve(B.cast<Complex>());
  CMat G = C.cast<Complex>() * X;
  Complex sk(1.0, 0.0);
  for (const auto& P : sys.feedthrough_poly) {
    G += sk * P.cast<Complex>();
    sk *= s;
  }
  return G;
}

/// Evaluates G(mu, s) on many frequencies at a fixed parameter, assembling
/// the operators once. One full-order factorization per frequency.
class TransferSweep {
 public:
  TransferSweep(const ParametricDaeSystem& sys, ParamView mu)
      : E_(sys.E.evaluate(mu)),
        A_(sys.A.evaluate(mu)),
        B_(sys.B.dense(mu)),
        C_(sys.C.dense(mu)),
        poly_(sys.feedthrough_poly) {}

  CMat operator()(Complex s) const {
    ShiftedPencilSolver solver(E_, A_, s);
    CMat G = C_.cast<Complex>() * solver.solve(B_.cast<Complex>());
    Complex sk(1.0, 0.0);
    for (const auto& P : poly_) {
      G += sk * P.cast<Complex>();
      sk *= s;
    }
    return G;
  }

 private:
  SpMat E_, A_;
  Mat B_, C_;
  std::vector<Mat> poly_;
};

}  // namespace daemor

#endif  // DAEMOR_SYSTEM_HPP
