// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SMW_HPP
#define DAEMOR_SMW_HPP

#include <string>
#include <vector>

#include "daemor/system.hpp"

namespace daemor {

/// Offline-precomputed blocks for low-rank transfer evaluation at fixed
/// sample frequencies. The shifted pencil splits as
///
///   i w E(mu) - A(mu) = F0(w) + U Omega(mu, w) V^T,
///   F0(w) = i w E_0 - A_0,
///   Omega = diag(i w Theta^E_k I, -Theta^A_k I),
///
/// so one factorization of F0 per frequency serves every parameter, and the
/// online cost is independent of the full order.
struct SmwPrecomputation {
  struct UpdateRef {
    bool from_e = false;   // E term or A term
    std::size_t term = 0;  // index into the operator's term list
    Eigen::Index rank = 0;
  };
  struct Blocks {
    std::vector<std::vector<CMat>> cb;  // [i][j] = C_i F0^-1 B_j
    std::vector<CMat> cu;               // [i]    = C_i F0^-1 U
    CMat vu;                            //          V^T F0^-1 U
    std::vector<CMat> vb;               // [j]    = V^T F0^-1 B_j
  };

  std::vector<double> omegas;
  std::vector<UpdateRef> updates;  // declared order: E terms, then A terms
  Eigen::Index total_rank = 0;
  std::vector<ThetaExpr> theta_e, theta_a;  // parametric update coefficients
  std::vector<ThetaExpr> theta_b, theta_c;  // all input/output coefficients
  std::vector<Blocks> per_omega;
  std::vector<Mat> feedthrough_poly;
  Eigen::Index m = 0, p = 0;
};

inline SmwPrecomputation precompute_smw(const ParametricDaeSystem& sys,
                                        const std::vector<double>& omegas) {
  sys.validate();
  SmwPrecomputation pre;
  pre.omegas = omegas;
  pre.feedthrough_poly = sys.feedthrough_poly;
  pre.m = sys.inputs();
  pre.p = sys.outputs();
  const Eigen::Index N = sys.order();

  auto gather = [&](const AffineMatrixOperator& op, bool from_e) {
    for (std::size_t k = 1; k < op.terms().size(); ++k) {
      const auto& t = op.terms()[k];
      if (!t.lowrank)
        throw InvalidInput(
            "smw: parametric term without a low-rank factorization");
      pre.updates.push_back({from_e, k, t.lowrank->U.cols()});
      pre.total_rank += t.lowrank->U.cols();
      (from_e ? pre.theta_e : pre.theta_a).push_back(t.theta);
    }
  };
  gather(sys.E, true);
  gather(sys.A, false);

  Mat U(N, pre.total_rank), V(N, pre.total_rank);
  {
    Eigen::Index off = 0;
    for (const auto& u : pre.updates) {
      const auto& t = (u.from_e ? sys.E : sys.A).terms()[u.term];
      U.middleCols(off, u.rank) = t.lowrank->U;
      V.middleCols(off, u.rank) = t.lowrank->V;
      off += u.rank;
    }
  }
  for (const auto& t : sys.B.terms()) pre.theta_b.push_back(t.theta);
  for (const auto& t : sys.C.terms()) pre.theta_c.push_back(t.theta);

  const SpMat& E0 = sys.E.terms()[0].matrix;
  const SpMat& A0 = sys.A.terms()[0].matrix;
  for (double w : omegas) {
    ShiftedPencilSolver f0(E0, A0, Complex(0, w));
    SmwPrecomputation::Blocks blk;
    std::vector<CMat> xb(sys.B.term_count());
    for (int j = 0; j < sys.B.term_count(); ++j)
      xb[j] = f0.solve(Mat(sys.B.terms()[j].matrix).cast<Complex>());
    CMat xu;
    if (pre.total_rank > 0) xu = f0.solve(U.cast<Complex>());
    blk.cb.resize(sys.C.term_count());
    blk.cu.resize(sys.C.term_count());
    for (int i = 0; i < sys.C.term_count(); ++i) {
      const CSpMat Ci = sys.C.terms()[i].matrix.cast<Complex>();
      blk.cb[i].resize(sys.B.term_count());
      for (int j = 0; j < sys.B.term_count(); ++j) blk.cb[i][j] = Ci * xb[j];
      if (pre.total_rank > 0) blk.cu[i] = Ci * xu;
    }
    if (pre.total_rank > 0) {
      blk.vu = V.cast<Complex>().transpose() * xu;
      blk.vb.resize(sys.B.term_count());
      for (int j = 0; j < sys.B.term_count(); ++j)
        blk.vb[j] = V.cast<Complex>().transpose() * xb[j];
    }
    pre.per_omega.push_back(std::move(blk));
  }
  return pre;
}

struct SmwEvaluation {
  CMat G;
  bool ok = false;
  std::string fallback_reason;  // set when the fast path must be abandoned
};

/// Low-rank transfer evaluation at a precomputed frequency. Signals fallback
/// instead of inverting a degenerate or ill-conditioned capacitance matrix;
/// the caller is expected to run the full solve in that case.
inline SmwEvaluation transfer_function_smw(const SmwPrecomputation& pre,
                                           ParamView mu,
                                           std::size_t omega_index) {
  if (omega_index >= pre.omegas.size())
    throw InvalidInput("smw: omega index out of range");
  const double w = pre.omegas[omega_index];
  const SmwPrecomputation::Blocks& blk = pre.per_omega[omega_index];
  SmwEvaluation out;

  CMat corr;  // K^-1-applied blocks, lazily built below
  std::vector<CMat> kinv_vb;
  if (pre.total_rank > 0) {
    CVec omega_diag(pre.total_rank);
    Eigen::Index off = 0;
    std::size_t ie = 0, ia = 0;
    for (const auto& u : pre.updates) {
      const double theta =
          u.from_e ? pre.theta_e[ie++](mu) : pre.theta_a[ia++](mu);
      if (std::abs(theta) < 1e-14) {
        out.fallback_reason = "vanishing update coefficient";
        return out;
      }
      const Complex val =
          u.from_e ? Complex(0, w) * theta : Complex(-theta, 0);
      for (Eigen::Index r = 0; r < u.rank; ++r) omega_diag(off++) = val;
    }
    CMat K = blk.vu;
    for (Eigen::Index i = 0; i < pre.total_rank; ++i)
      K(i, i) += 1.0 / omega_diag(i);
    Eigen::PartialPivLU<CMat> lu(K);
    // Cancellation-aware condition estimate: K is formed as a sum, so its
    // effective conditioning is ||K^-1|| times the magnitude of the addends,
    // not of K itself (a tiny K after cancellation has benign rcond but the
    // correction term is garbage).
    const double knorm = K.cwiseAbs().colwise().sum().maxCoeff();
    const double anorm =
        std::max(omega_diag.cwiseInverse().cwiseAbs().maxCoeff(),
                 blk.vu.cwiseAbs().colwise().sum().maxCoeff());
    const double rc = lu.rcond();
    if (!(rc > 0.0) || anorm / (rc * knorm) > 1e12) {
      out.fallback_reason = "ill-conditioned capacitance matrix";
      return out;
    }
    kinv_vb.resize(blk.vb.size());
    for (std::size_t j = 0; j < blk.vb.size(); ++j)
      kinv_vb[j] = lu.solve(blk.vb[j]);
  }

  CMat G = CMat::Zero(pre.p, pre.m);
  for (std::size_t i = 0; i < pre.theta_c.size(); ++i) {
    const double tc = pre.theta_c[i](mu);
    if (tc == 0.0) continue;
    for (std::size_t j = 0; j < pre.theta_b.size(); ++j) {
      const double tb = pre.theta_b[j](mu);
      if (tb == 0.0) continue;
      CMat term = blk.cb[i][j];
      if (pre.total_rank > 0) term -= blk.cu[i] * kinv_vb[j];
      G += (tc * tb) * term;
    }
  }
  Complex sk(1.0, 0.0);
  const Complex s(0, w);
  for (const Mat& P : pre.feedthrough_poly) {
    G += sk * P.cast<Complex>();
    sk *= s;
  }
  out.G = std::move(G);
  out.ok = true;
  return out;
}

}  // namespace daemor

#endif  // DAEMOR_SMW_HPP
