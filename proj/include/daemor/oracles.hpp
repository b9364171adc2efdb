// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0
//
// Slow, dense reference computations used to cross-check the structured
// fast paths. Everything here works from (E, A, B, C) alone: no saddle-point
// structure, no projector shortcuts, no ADI. Desk-scale instances only.

#ifndef DAEMOR_ORACLES_HPP
#define DAEMOR_ORACLES_HPP

#include <Eigen/LU>
#include <Eigen/QR>
#include <unsupported/Eigen/KroneckerProduct>

#include <vector>

#include "daemor/core.hpp"
#include "daemor/dense_lyapunov.hpp"
#include "daemor/errors.hpp"

namespace daemor::oracle {

/// Quasi-Weierstrass form computed from Wong sequences. For a regular pencil
/// (E, A) pick s0 with s0 E - A invertible and iterate the range of
/// Mr = (s0 E - A)^-1 E; the rank stabilizes after nu steps at the finite
/// deflating subspace. Kernels of Mr^nu and of the mirrored left operator
/// Ml = E (s0 E - A)^-1 give the infinite subspaces. The result satisfies
///
///   E = W diag(I, Nnil) T,   A = W diag(J, I) T,   T = Tinv^-1,
///
/// with Nnil nilpotent of index nu.
struct QwfForm {
  Mat W;       // N x N, invertible
  Mat Tinv;    // N x N, invertible; columns [finite | infinite]
  Mat J;       // nf x nf
  Mat Nnil;    // ninf x ninf, nilpotent
  Eigen::Index nf = 0, ninf = 0, nu = 0;

  Mat finite_right() const { return Tinv.leftCols(nf); }
  Mat infinite_right() const { return Tinv.rightCols(ninf); }

  Mat spectral_projector_right() const {
    Eigen::PartialPivLU<Mat> lu(Tinv);
    Mat rows = lu.inverse().topRows(nf);
    return Tinv.leftCols(nf) * rows;
  }
  Mat spectral_projector_left() const {
    Eigen::PartialPivLU<Mat> lu(W);
    Mat rows = lu.inverse().topRows(nf);
    return W.leftCols(nf) * rows;
  }

  /// Input in decoupled coordinates: W^-1 B = [B1; B2].
  Mat input_finite(const Mat& B) const {
    return Eigen::PartialPivLU<Mat>(W).solve(B).topRows(nf);
  }
  Mat input_infinite(const Mat& B) const {
    return Eigen::PartialPivLU<Mat>(W).solve(B).bottomRows(ninf);
  }

  /// Proper reachability Gramian: Tinv_f X1 Tinv_f^T with
  /// J X1 + X1 J^T + B1 B1^T = 0.
  Mat proper_gramian(const Mat& B) const {
    const Mat B1 = input_finite(B);
    const Mat X1 = lyapunov_dense(J, B1 * B1.transpose());
    return finite_right() * X1 * finite_right().transpose();
  }

  /// Improper reachability Gramian:
  /// Tinv_inf (sum_{k<nu} Nnil^k B2 B2^T Nnil^kT) Tinv_inf^T.
  Mat improper_gramian(const Mat& B) const {
    const Mat B2 = input_infinite(B);
    Mat Y2 = Mat::Zero(ninf, ninf);
    Mat Nk = Mat::Identity(ninf, ninf);
    for (Eigen::Index k = 0; k < nu; ++k) {
      const Mat NB = Nk * B2;
      Y2 += NB * NB.transpose();
      Nk = Nnil * Nk;
    }
    return infinite_right() * Y2 * infinite_right().transpose();
  }

  /// Coefficients of the polynomial part of the transfer function:
  /// M_k = -C2 Nnil^k B2, k = 0..nu-1.
  std::vector<Mat> polynomial_coefficients(const Mat& B, const Mat& C) const {
    const Mat B2 = input_infinite(B);
    const Mat C2 = C * infinite_right();
    std::vector<Mat> M;
    Mat Nk = Mat::Identity(ninf, ninf);
    for (Eigen::Index k = 0; k < nu; ++k) {
      M.push_back(-(C2 * Nk * B2));
      Nk = Nnil * Nk;
    }
    return M;
  }
};

namespace detail {

inline Mat orth_cols(const Mat& X, double tol = 1e-10) {
  if (X.cols() == 0) return Mat(X.rows(), 0);
  Eigen::ColPivHouseholderQR<Mat> qr(X);
  const auto& R = qr.matrixR();
  const double rmax = std::abs(R(0, 0));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < std::min(X.rows(), X.cols()); ++i)
    if (std::abs(R(i, i)) > tol * rmax) ++r;
  Mat Q = qr.householderQ() * Mat::Identity(X.rows(), r);
  return Q;
}

inline Mat orth_complement(const Mat& Q) {
  const Eigen::Index N = Q.rows(), r = Q.cols();
  Eigen::HouseholderQR<Mat> qr(Q);
  Mat full = qr.householderQ() * Mat::Identity(N, N);
  return full.rightCols(N - r);
}

}  // namespace detail

inline QwfForm quasi_weierstrass(const Mat& E, const Mat& A) {
  const Eigen::Index N = E.rows();
  if (E.cols() != N || A.rows() != N || A.cols() != N)
    throw InvalidInput("qwf: square matrices of equal size required");
  if (N > 2000) throw InvalidInput("qwf: dense oracle guarded to N <= 2000");

  const double candidates[] = {1.0, -1.0, 3.1415926, 0.5, -2.7182818, 7.389};
  Mat Mr, Ml;
  bool found = false;
  for (double s0 : candidates) {
    Mat P = s0 * E - A;
    Eigen::FullPivLU<Mat> lu(P);
    lu.setThreshold(1e-12);
    if (lu.rank() == N) {
      Mr = lu.solve(E);
      Ml = E * lu.inverse();
      found = true;
      break;
    }
  }
  if (!found)
    throw SingularSystemError("qwf: pencil appears singular (no valid shift)");

  // Wong iteration on the right operator; nu = first step with stable rank.
  Mat X = Mat::Identity(N, N);
  Eigen::Index nu = 0;
  for (Eigen::Index k = 1; k <= N + 1; ++k) {
    Mat Xn = detail::orth_cols(Mr * X);
    if (Xn.cols() == X.cols()) {
      nu = k - 1;
      break;
    }
    X = Xn;
    if (k == N + 1)
      throw ConvergenceError("qwf: Wong sequence failed to stabilize");
  }
  const Mat Vf = X;
  const Eigen::Index nf = Vf.cols(), ninf = N - nf;

  auto power_range = [&](const Mat& M, Eigen::Index steps) {
    Mat Q = Mat::Identity(N, N);
    for (Eigen::Index k = 0; k < steps; ++k) Q = detail::orth_cols(M * Q);
    return Q;
  };
  const Mat Vinf = detail::orth_complement(power_range(Mr.transpose(), nu));
  const Mat Wf = power_range(Ml, nu);
  const Mat Winf = detail::orth_complement(power_range(Ml.transpose(), nu));
  if (Vinf.cols() != ninf || Wf.cols() != nf || Winf.cols() != ninf)
    throw SingularSystemError("qwf: left/right subspace dimensions disagree");

  Mat V(N, N), Wt(N, N);
  V << Vf, Vinf;
  Wt << Wf, Winf;
  Eigen::FullPivLU<Mat> wlu(Wt);
  if (wlu.rank() < N)
    throw SingularSystemError("qwf: combined left basis singular");
  const Mat Et = wlu.solve(E * V);
  const Mat At = wlu.solve(A * V);

  const double off =
      Et.topRightCorner(nf, ninf).norm() + Et.bottomLeftCorner(ninf, nf).norm() +
      At.topRightCorner(nf, ninf).norm() + At.bottomLeftCorner(ninf, nf).norm();
  if (off > 1e-8 * (Et.norm() + At.norm()))
    throw ConvergenceError("qwf: transformed pencil not block diagonal");

  const Mat E11 = Et.topLeftCorner(nf, nf);
  const Mat E22 = Et.bottomRightCorner(ninf, ninf);
  const Mat A11 = At.topLeftCorner(nf, nf);
  const Mat A22 = At.bottomRightCorner(ninf, ninf);

  QwfForm f;
  f.nf = nf;
  f.ninf = ninf;
  f.nu = nu;
  f.Tinv = V;
  f.W = Mat(N, N);
  f.W.leftCols(nf) = Wt.leftCols(nf) * E11;
  f.W.rightCols(ninf) = Wt.rightCols(ninf) * A22;
  f.J = Eigen::PartialPivLU<Mat>(E11).solve(A11);
  f.Nnil = ninf > 0 ? Mat(Eigen::PartialPivLU<Mat>(A22).solve(E22))
                    : Mat(0, 0);

  // The nilpotency index of Nnil must reproduce the Wong step count.
  if (ninf > 0) {
    Mat Nk = f.Nnil;
    Eigen::Index idx = 1;
    const double scale = f.Nnil.norm() + 1.0;
    while (Nk.norm() > 1e-10 * scale && idx <= N) {
      Nk = f.Nnil * Nk;
      ++idx;
    }
    if (idx != nu)
      throw ConvergenceError("qwf: nilpotency index mismatch with Wong count");
  } else if (nu != 0) {
    throw ConvergenceError("qwf: empty infinite part but nonzero index");
  }
  return f;
}

/// Exact solution of the projected Lyapunov equation
///   A X E^T + E X A^T + Pl B B^T Pl^T = 0,  X = Pr X Pr^T,
/// by Galerkin restriction onto range(Pr) (trial) and range(Pl) (test),
/// vectorized through the Kronecker form. Exact because both sides of the
/// equation live entirely in range(Pl) x range(Pl).
inline Mat projected_lyapunov(const Mat& E, const Mat& A, const Mat& Pl,
                              const Mat& Pr, const Mat& B) {
  const Mat Q = detail::orth_cols(Pr);
  const Mat P = detail::orth_cols(Pl);
  const Eigen::Index r = Q.cols();
  if (r != P.cols())
    throw SingularSystemError("projected lyapunov: projector ranks disagree");
  if (r * r > 4000)
    throw InvalidInput("projected lyapunov: dense oracle too large");
  const Mat Et = P.transpose() * E * Q;
  const Mat At = P.transpose() * A * Q;
  const Mat Bt = P.transpose() * (Pl * B);
  const Mat Wt = Bt * Bt.transpose();
  Mat K = Eigen::kroneckerProduct(At, Et).eval() +
          Eigen::kroneckerProduct(Et, At).eval();
  Eigen::FullPivLU<Mat> lu(K);
  lu.setThreshold(1e-12);
  if (lu.rank() < r * r)
    throw SingularSystemError("projected lyapunov: restricted operator singular");
  Vec vecX = lu.solve(Vec(-Wt.reshaped()));
  Mat Xs = vecX.reshaped(r, r);
  Xs = 0.5 * (Xs + Xs.transpose()).eval();
  return Q * Xs * Q.transpose();
}

/// Transfer function C (sE - A)^-1 B + polynomial(s) evaluated densely.
inline CMat dense_transfer(const Mat& E, const Mat& A, const Mat& B,
                           const Mat& C, Complex s,
                           const std::vector<Mat>& poly = {}) {
  CMat P = s * E.cast<Complex>() - A.cast<Complex>();
  Eigen::PartialPivLU<CMat> lu(P);
  CMat G = C.cast<Complex>() * lu.solve(B.cast<Complex>());
  Complex sk = 1.0;
  for (const Mat& M : poly) {
    G += sk * M.cast<Complex>();
    sk *= s;
  }
  return G;
}

}  // namespace daemor::oracle

#endif  // DAEMOR_ORACLES_HPP
