// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SMITH_HPP
#define DAEMOR_SMITH_HPP

#include <Eigen/SparseLU>

#include <vector>

#include "daemor/core.hpp"
#include "daemor/counters.hpp"
#include "daemor/errors.hpp"
#include "daemor/lradi.hpp"
#include "daemor/projectors.hpp"

namespace daemor {

struct SmithOptions {
  int max_blocks = 10;
  double tol = 1e-13;  // relative block-norm cutoff
};

struct SmithResult {
  Mat Y;              // factor, improper Gramian = Y Y^T
  int blocks = 0;     // number of nonzero blocks = nilpotency index
  Eigen::Index block_cols = 0;
  std::vector<double> block_norms;
};

/// Finite Smith iteration for the improper Gramian of the full pencil.
/// The factor stacks
///
///   Y_0 = (I - Pr) A^-1 R,   Y_k = (I - Pr) A^-1 E Y_{k-1},
///
/// which terminates after exactly nu blocks (nu the nilpotency index);
/// the trailing blocks vanish identically. The complement projection is
/// re-applied every step to strip roundoff leaking into the finite
/// subspace, where A^-1 E would otherwise amplify it geometrically.
/// Observability side: identical iteration on the transposed pencil with
/// the transposed projector complement.
inline SmithResult smith_improper(const ProjectorContext& ctx,
                                  EquationSide side, const Mat& rhs,
                                  const SmithOptions& opt = {}) {
  const Eigen::Index N = ctx.order();
  if (rhs.rows() != N) throw InvalidInput("smith: rhs row count mismatch");
  const bool ctrl = side == EquationSide::kControllability;
  SpMat bigE = detail::assemble_big_E(ctx.E_block(), ctx.q());
  SpMat bigA = detail::assemble_big_A(ctx.A_block(), ctx.G_block());
  if (!ctrl) {
    bigE = SpMat(bigE.transpose());
    bigA = SpMat(bigA.transpose());
  }
  Eigen::SparseLU<SpMat> alu(bigA);
  if (alu.info() != Eigen::Success)
    throw SingularSystemError("smith: pencil A-part factorization failed");
  solve_counters().shifted_full.fetch_add(1, std::memory_order_relaxed);

  auto complement = [&](const Mat& X) {
    return ctrl ? Mat(X - ctx.apply_pi_right(X))
                : Mat(X - ctx.apply_pi_left_T(X));
  };

  SmithResult res;
  const Eigen::Index m = rhs.cols();
  Mat block = complement(alu.solve(rhs));
  const double scale = block.norm();
  std::vector<Mat> kept;
  for (int k = 0; k < opt.max_blocks; ++k) {
    const double bn = block.norm();
    res.block_norms.push_back(bn);
    if (bn <= opt.tol * scale) break;
    kept.push_back(block);
    block = complement(alu.solve(Mat(bigE * block)));
  }
  res.blocks = static_cast<int>(kept.size());
  res.block_cols = m;
  res.Y = Mat(N, m * res.blocks);
  for (int k = 0; k < res.blocks; ++k)
    res.Y.middleCols(k * m, m) = kept[static_cast<std::size_t>(k)];
  return res;
}

/// Coupling matrix S^T A R of the two Smith factors. Its SVD carries the
/// improper characteristic values; in decoupled coordinates it is the block
/// Hankel matrix of the polynomial coefficients.
inline Mat improper_coupling(const ProjectorContext& ctx, const SmithResult& obs,
                             const SmithResult& reach) {
  const SpMat bigA =
      detail::assemble_big_A(ctx.A_block(), ctx.G_block());
  return obs.Y.transpose() * (bigA * reach.Y);
}

/// Closed-form improper coupling matrix for index-2 saddle systems with a
/// unit differential mass block. Its singular values are the improper
/// characteristic values, so a fixed-parameter evaluation can skip the Smith
/// iteration entirely; all pieces are parameter-affine and precomputable.
inline Mat improper_svd_matrix_index2(const StokesStructure& st, ParamView mu) {
  const SpMat Emu = st.E.evaluate(mu);
  SpMat eye(st.n(), st.n());
  eye.setIdentity();
  if (SpMat(Emu - eye).norm() > 1e-13 * Emu.norm())
    throw InvalidInput("improper svd: needs a unit mass block");
  const Mat G(st.G);
  Eigen::LLT<Mat> gram((G.transpose() * G).eval());
  if (gram.info() != Eigen::Success)
    throw SingularSystemError("improper svd: G^T G not positive definite");
  const Mat B1 = st.B1.dense(mu);
  const Mat A1(st.A.evaluate(mu));
  const Mat GtGiB2 = gram.solve(st.B2);
  const Mat B12 = B1 - A1 * (G * GtGiB2);
  const Mat B11 =
      st.C1 * (G * GtGiB2) + st.C2 * gram.solve(G.transpose() * B12);
  const Mat X = st.C2 * GtGiB2;
  Mat out(2 * B11.rows(), 2 * B11.cols());
  out << B11, X, X, Mat::Zero(B11.rows(), B11.cols());
  return out;
}

}  // namespace daemor

#endif  // DAEMOR_SMITH_HPP
