// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_MARKOV_HPP
#define DAEMOR_MARKOV_HPP

#include <Eigen/SVD>

#include <functional>
#include <vector>

#include "daemor/balanced_truncation.hpp"
#include "daemor/core.hpp"
#include "daemor/errors.hpp"

namespace daemor {

/// Coefficients of the polynomial part extracted from transfer samples on
/// the imaginary axis. At s = i w the strictly proper part decays like 1/w
/// with purely imaginary leading order, so real parts isolate the even
/// polynomial coefficients and imaginary parts the odd ones, each with an
/// O(w^-2) contamination.
struct MarkovEstimate {
  std::vector<Mat> M;   // M_0 .. M_{nu-1}
  double omega = 0;     // base sample frequency
  std::vector<double> consistency;  // per-matrix rel. deviation vs 4x omega
  double consistency_max = 0;
  bool accuracy_warning = false;    // contamination above 1e-4 relative
  double suggested_omega = 0;       // set when the warning fires
};

namespace detail {

inline std::vector<Mat> markov_at(const std::function<CMat(Complex)>& G,
                                  int index, double w) {
  std::vector<Mat> M;
  if (index <= 0) return M;
  const CMat G1 = G(Complex(0, w));
  if (index == 1) {
    M.push_back(G1.real());
  } else if (index == 2) {
    M.push_back(G1.real());
    M.push_back(G1.imag() / w);
  } else if (index == 3) {
    const double w2 = 2 * w;
    const CMat G2 = G(Complex(0, w2));
    const Mat M2 = (G1.real() - G2.real()) / (w2 * w2 - w * w);
    M.push_back(G1.real() + w * w * M2);
    M.push_back(G1.imag() / w);
    M.push_back(M2);
  } else {
    throw InvalidInput("markov extraction implemented for index <= 3");
  }
  return M;
}

}  // namespace detail

inline MarkovEstimate estimate_markov(const std::function<CMat(Complex)>& G,
                                      int index, double omega) {
  if (!(omega > 0)) throw InvalidInput("markov: omega must be positive");
  MarkovEstimate est;
  est.omega = omega;
  est.M = detail::markov_at(G, index, omega);
  const auto M4 = detail::markov_at(G, index, 4.0 * omega);
  for (std::size_t k = 0; k < est.M.size(); ++k) {
    const double scale = std::max(1.0, est.M[k].norm());
    est.consistency.push_back((est.M[k] - M4[k]).norm() / scale);
    est.consistency_max = std::max(est.consistency_max, est.consistency.back());
  }
  if (est.consistency_max > 1e-4) {
    est.accuracy_warning = true;
    est.suggested_omega = 100.0 * omega;
  }
  // The 4x sample sees a 16x smaller contamination; adopt it.
  est.M = M4;
  return est;
}

/// Sample frequency heuristic: far above the spectral content of the
/// differential part.
inline double suggest_markov_frequency(const SpMat& E11, const SpMat& A11) {
  const double scale = mat1_norm(A11) / std::max(mat1_norm(E11), 1e-300);
  return 1e6 * std::max(1.0, scale);
}

/// Minimal nilpotent realization of the polynomial p(s) = sum_k s^k M_k.
/// The constant coefficient rides along as explicit feedthrough. Each
/// degree-k term (k >= 1) with SVD M_k = U S V^T becomes k+1 blocks of its
/// rank, E carrying S^(1/k) on the block superdiagonal, A = I,
/// B = [0; ...; 0; V^T], C = [-U, 0, ..., 0], which yields
/// C (sE - A)^-1 B = s^k U S V^T.
inline Rom realize_polynomial(const std::vector<Mat>& M,
                              double rank_tol = 1e-12) {
  Rom rom;
  if (M.empty()) {
    rom.E = rom.A = Mat(0, 0);
    return rom;
  }
  const Eigen::Index p = M[0].rows(), m = M[0].cols();
  struct TermBlock {
    Mat D, U, V;
    Eigen::Index rank, blocks;
  };
  std::vector<TermBlock> terms;
  Eigen::Index total = 0;
  for (std::size_t k = 1; k < M.size(); ++k) {
    if (M[k].rows() != p || M[k].cols() != m)
      throw InvalidInput("realize_polynomial: inconsistent coefficient dims");
    Eigen::BDCSVD<Mat> svd(M[k], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * std::max(sv(0), 1e-300)) ++r;
    if (r == 0) continue;
    TermBlock tb;
    tb.rank = r;
    tb.blocks = static_cast<Eigen::Index>(k) + 1;
    tb.U = svd.matrixU().leftCols(r);
    tb.V = svd.matrixV().leftCols(r);
    tb.D = Mat(sv.head(r)
                   .array()
                   .pow(1.0 / static_cast<double>(k))
                   .matrix()
                   .asDiagonal());
    total += tb.blocks * r;
    terms.push_back(std::move(tb));
  }
  rom.E = Mat::Zero(total, total);
  rom.A = Mat::Identity(total, total);
  rom.B = Mat::Zero(total, m);
  rom.C = Mat::Zero(p, total);
  rom.r_i = total;
  Eigen::Index off = 0;
  for (const TermBlock& tb : terms) {
    for (Eigen::Index b = 0; b + 1 < tb.blocks; ++b)
      rom.E.block(off + b * tb.rank, off + (b + 1) * tb.rank, tb.rank,
                  tb.rank) = tb.D;
    rom.B.middleRows(off + (tb.blocks - 1) * tb.rank, tb.rank) =
        tb.V.transpose();
    rom.C.middleCols(off, tb.rank) = -tb.U;
    off += tb.blocks * tb.rank;
  }
  if (M[0].norm() > 0) rom.feedthrough_poly.push_back(M[0]);
  return rom;
}

/// Block-diagonal coupling of a proper reduced model with a polynomial
/// realization: transfer functions add. Any constant coefficient carried as
/// feedthrough is absorbed into one extra nilpotent block (E-block 0,
/// A-block I contributes -C B = M_0), so the result is a pure descriptor
/// model with no separate feedthrough term.
inline Rom combine_rom(const Rom& proper, const Rom& poly,
                       double rank_tol = 1e-12) {
  if (proper.inputs() != poly.inputs() && poly.order() > 0 &&
      proper.order() > 0)
    throw InvalidInput("combine_rom: input dimension mismatch");
  const Eigen::Index r1 = proper.order(), r2 = poly.order();
  const Eigen::Index m = std::max(proper.inputs(), poly.inputs());
  const Eigen::Index pp = std::max(proper.outputs(), poly.outputs());

  Mat M0 = Mat::Zero(pp, m);
  for (const Mat& Mk : proper.feedthrough_poly) M0 += Mk;
  for (const Mat& Mk : poly.feedthrough_poly) M0 += Mk;
  Mat U0, B0;
  Eigen::Index r0 = 0;
  if (M0.norm() > 0) {
    Eigen::BDCSVD<Mat> svd(M0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * sv(0)) ++r0;
    U0 = svd.matrixU().leftCols(r0);
    B0 = Mat(sv.head(r0).asDiagonal()) * svd.matrixV().leftCols(r0).transpose();
  }

  Rom rom;
  const Eigen::Index rt = r1 + r2 + r0;
  rom.E = Mat::Zero(rt, rt);
  rom.A = Mat::Zero(rt, rt);
  rom.B = Mat::Zero(rt, m);
  rom.C = Mat::Zero(pp, rt);
  rom.E.topLeftCorner(r1, r1) = proper.E;
  rom.E.block(r1, r1, r2, r2) = poly.E;
  rom.A.topLeftCorner(r1, r1) = proper.A;
  rom.A.block(r1, r1, r2, r2) = poly.A;
  rom.A.bottomRightCorner(r0, r0) = Mat::Identity(r0, r0);
  if (r1 > 0) {
    rom.B.topRows(r1) = proper.B;
    rom.C.leftCols(r1) = proper.C;
  }
  if (r2 > 0) {
    rom.B.middleRows(r1, r2) = poly.B;
    rom.C.middleCols(r1, r2) = poly.C;
  }
  if (r0 > 0) {
    rom.B.bottomRows(r0) = B0;
    rom.C.rightCols(r0) = -U0;
  }
  rom.r_p = proper.r_p;
  rom.r_i = proper.r_i + poly.r_i + r0;
  rom.sigma_proper = proper.sigma_proper;
  rom.sigma_improper = proper.sigma_improper;
  rom.error_bound = proper.error_bound;
  return rom;
}

}  // namespace daemor

#endif  // DAEMOR_MARKOV_HPP
