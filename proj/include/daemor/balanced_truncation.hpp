// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_BALANCED_TRUNCATION_HPP
#define DAEMOR_BALANCED_TRUNCATION_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <vector>

#include "daemor/core.hpp"
#include "daemor/errors.hpp"
#include "daemor/lradi.hpp"
#include "daemor/smith.hpp"

namespace daemor {

struct BtOptions {
  double sigma_rel_tol = 1e-8;  // proper truncation cutoff relative to sigma_1
  Eigen::Index max_order = -1;  // cap on the proper reduced order (-1: none)
  double improper_rel_tol = 1e-12;  // rank cutoff; improper part is kept exactly
};

/// Reduced-order model in decoupled form: E = diag(I, N), A = diag(J, I)
/// with N nilpotent, plus an optional explicit polynomial attachment used
/// when the improper part is carried as feedthrough coefficients instead of
/// reduced matrices.
struct Rom {
  Mat E, A, B, C;
  Eigen::Index r_p = 0, r_i = 0;
  Vec sigma_proper;    // characteristic values resolved by the factors
  Vec sigma_improper;  // nonzero improper characteristic values
  double error_bound = 0;      // 2 * (truncated proper tail)
  double coupling_defect = 0;  // worst measured deviation from the block form
  std::vector<Mat> feedthrough_poly;

  Eigen::Index order() const { return E.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

/// Transfer function of the reduced model, polynomial part included.
inline CMat rom_transfer(const Rom& r, Complex s) {
  CMat P = s * r.E.cast<Complex>() - r.A.cast<Complex>();
  Eigen::PartialPivLU<CMat> lu(P);
  CMat G = r.C.cast<Complex>() * lu.solve(r.B.cast<Complex>());
  Complex sk = 1.0;
  for (const Mat& M : r.feedthrough_poly) {
    G += sk * M.cast<Complex>();
    sk *= s;
  }
  return G;
}

/// All finite eigenvalues of the reduced pencil lie in the open left half
/// plane. Checks the proper block only; the improper block has no finite
/// eigenvalues by construction.
inline bool rom_is_stable(const Rom& r) {
  if (r.r_p == 0) return true;
  Eigen::EigenSolver<Mat> es(r.A.topLeftCorner(r.r_p, r.r_p), false);
  for (Eigen::Index i = 0; i < r.r_p; ++i)
    if (es.eigenvalues()(i).real() >= 0) return false;
  return true;
}

/// Balancing-based truncation from low-rank Gramian factors. The proper
/// part balances through the SVD of Zobs^T E Zreach; the improper part
/// through the SVD of Yobs^T A Yreach and is retained at full numerical
/// rank. Cross blocks W_p^T E T_i etc. vanish by projector algebra; they
/// are measured (coupling_defect) and then snapped to the exact decoupled
/// block form. The bound 2 * sum of truncated proper values covers the
/// transfer function error on the imaginary axis.
inline Rom balanced_truncation(const ProjectorContext& ctx, const Mat& Zobs,
                               const Mat& Zreach, const SmithResult& yobs,
                               const SmithResult& yreach, const Mat& bigB,
                               const Mat& bigC, const BtOptions& opt = {}) {
  const SpMat bigE = detail::assemble_big_E(ctx.E_block(), ctx.q());
  const SpMat bigA = detail::assemble_big_A(ctx.A_block(), ctx.G_block());

  // Proper part.
  Mat W_p(bigE.rows(), 0), T_p(bigE.rows(), 0);
  Rom rom;
  if (Zobs.cols() > 0 && Zreach.cols() > 0) {
    const Mat Mp = Zobs.transpose() * (bigE * Zreach);
    Eigen::BDCSVD<Mat> svd(Mp, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-14 * sv(0)) ++rank;
    rom.sigma_proper = sv.head(rank);
    Eigen::Index r_p = 0;
    for (Eigen::Index i = 0; i < rank; ++i)
      if (sv(i) > opt.sigma_rel_tol * sv(0)) ++r_p;
    if (opt.max_order >= 0) r_p = std::min(r_p, opt.max_order);
    rom.r_p = r_p;
    double tail = 0;
    for (Eigen::Index i = r_p; i < rank; ++i) tail += sv(i);
    rom.error_bound = 2.0 * tail;
    const Vec shalf = sv.head(r_p).cwiseSqrt().cwiseInverse();
    W_p = Zobs * svd.matrixU().leftCols(r_p) * shalf.asDiagonal();
    T_p = Zreach * svd.matrixV().leftCols(r_p) * shalf.asDiagonal();
  }

  // Improper part, full numerical rank.
  Mat W_i(bigE.rows(), 0), T_i(bigE.rows(), 0);
  if (yobs.Y.cols() > 0 && yreach.Y.cols() > 0) {
    const Mat Mi = yobs.Y.transpose() * (bigA * yreach.Y);
    Eigen::BDCSVD<Mat> svd(Mi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    Eigen::Index r_i = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > opt.improper_rel_tol * sv(0)) ++r_i;
    rom.r_i = r_i;
    rom.sigma_improper = sv.head(r_i);
    const Vec shalf = sv.head(r_i).cwiseSqrt().cwiseInverse();
    W_i = yobs.Y * svd.matrixU().leftCols(r_i) * shalf.asDiagonal();
    T_i = yreach.Y * svd.matrixV().leftCols(r_i) * shalf.asDiagonal();
  }

  const Eigen::Index rp = rom.r_p, ri = rom.r_i, r = rp + ri;
  const Mat J_R = W_p.transpose() * (bigA * T_p);
  const Mat N_R = W_i.transpose() * (bigE * T_i);

  // Invariants of the decoupled form, measured before snapping.
  double defect = 0;
  if (rp > 0)
    defect = std::max(defect, (W_p.transpose() * (bigE * T_p) -
                               Mat::Identity(rp, rp))
                                  .norm());
  if (ri > 0)
    defect = std::max(defect, (W_i.transpose() * (bigA * T_i) -
                               Mat::Identity(ri, ri))
                                  .norm());
  if (rp > 0 && ri > 0) {
    defect = std::max(defect, (W_p.transpose() * (bigE * T_i)).norm());
    defect = std::max(defect, (W_i.transpose() * (bigE * T_p)).norm());
    defect = std::max(defect, (W_p.transpose() * (bigA * T_i)).norm());
    defect = std::max(defect, (W_i.transpose() * (bigA * T_p)).norm());
  }
  rom.coupling_defect = defect;

  rom.E = Mat::Zero(r, r);
  rom.A = Mat::Zero(r, r);
  rom.E.topLeftCorner(rp, rp) = Mat::Identity(rp, rp);
  rom.E.bottomRightCorner(ri, ri) = N_R;
  rom.A.topLeftCorner(rp, rp) = J_R;
  rom.A.bottomRightCorner(ri, ri) = Mat::Identity(ri, ri);
  rom.B = Mat(r, bigB.cols());
  rom.B.topRows(rp) = W_p.transpose() * bigB;
  rom.B.bottomRows(ri) = W_i.transpose() * bigB;
  rom.C = Mat(bigC.rows(), r);
  rom.C.leftCols(rp) = bigC * T_p;
  rom.C.rightCols(ri) = bigC * T_i;
  return rom;
}

}  // namespace daemor

#endif  // DAEMOR_BALANCED_TRUNCATION_HPP
