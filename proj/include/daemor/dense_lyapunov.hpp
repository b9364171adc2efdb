// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_DENSE_LYAPUNOV_HPP
#define DAEMOR_DENSE_LYAPUNOV_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "daemor/core.hpp"
#include "daemor/counters.hpp"
#include "daemor/errors.hpp"

namespace daemor {

/// Solves F X + X F^T + W = 0 for symmetric W via complex Schur reduction.
/// With F = U T U^H and X = U Y U^T the equation becomes the triangular
/// system T Y + Y T^T = -U^H W conj(U), solved column by column from the
/// last: (T + T_jj I) y_j = rhs_j - sum_{k>j} T_jk y_k. Requires
/// lambda_i(F) + lambda_j(F) != 0 for all pairs.
inline Mat lyapunov_dense(const Mat& F, const Mat& W) {
  if (F.rows() != F.cols() || W.rows() != W.cols() || F.rows() != W.rows())
    throw InvalidInput("lyapunov_dense: dimension mismatch");
  solve_counters().dense_small.fetch_add(1, std::memory_order_relaxed);
  const Eigen::Index m = F.rows();
  if (m == 0) return Mat(0, 0);
  Eigen::ComplexSchur<Mat> schur(F);
  if (schur.info() != Eigen::Success)
    throw ConvergenceError("lyapunov_dense: Schur iteration failed");
  const CMat U = schur.matrixU();
  const CMat T = schur.matrixT();
  CMat Wc = -(U.adjoint() * W.cast<Complex>() * U.conjugate());
  CMat Y(m, m);
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    CVec rhs = Wc.col(j);
    for (Eigen::Index k = j + 1; k < m; ++k) rhs -= T(j, k) * Y.col(k);
    CMat Ts = T;
    Ts.diagonal().array() += T(j, j);
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::abs(Ts(i, i)) <
          1e-13 * (std::abs(T(i, i)) + std::abs(T(j, j)) + 1.0))
        throw SingularSystemError(
            "lyapunov_dense: lambda_i + lambda_j ~ 0, equation singular");
    Y.col(j) = Ts.triangularView<Eigen::Upper>().solve(rhs);
  }
  Mat X = (U * Y * U.transpose()).real();
  return 0.5 * (X + X.transpose());
}

/// Solves A X E^T + E X A^T + W = 0 with invertible E by reduction to the
/// standard equation for F = E^-1 A, Wt = E^-1 W E^-T.
inline Mat generalized_lyapunov_dense(const Mat& A, const Mat& E,
                                      const Mat& W) {
  Eigen::PartialPivLU<Mat> elu(E);
  const Mat F = elu.solve(A);
  const Mat Wt = elu.solve(elu.solve(W).transpose()).transpose();
  return lyapunov_dense(F, Wt);
}

inline double lyapunov_residual_fro(const Mat& A, const Mat& E, const Mat& X,
                                    const Mat& W) {
  return (A * X * E.transpose() + E * X * A.transpose() + W).norm();
}

}  // namespace daemor

#endif  // DAEMOR_DENSE_LYAPUNOV_HPP
