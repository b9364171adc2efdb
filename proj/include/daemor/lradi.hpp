// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_LRADI_HPP
#define DAEMOR_LRADI_HPP

#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseLU>

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "daemor/core.hpp"
#include "daemor/counters.hpp"
#include "daemor/errors.hpp"
#include "daemor/projectors.hpp"

namespace daemor {

enum class EquationSide {
  kControllability,  // A X E^T + E X A^T + Pl B B^T Pl^T = 0
  kObservability     // A^T X E + E^T X A + Pr^T C^T C Pr = 0
};

struct LradiOptions {
  double tol = 1e-10;        // relative Gram residual target
  int max_iter = 200;
  double defect_tol = 1e-8;  // subspace drift triggering a re-projection
  double compress_tol = 0;   // 0: keep the raw factor
};

struct LradiResult {
  Mat Z;  // real factor, X ~ Z Z^T
  std::vector<double> rel_residuals;
  int iterations = 0;
  bool converged = false;
  int reprojections = 0;
  double final_relres = 0;
  double verified_relres = 0;  // recomputed from the factor, independent route
};

/// Column compression of a low-rank factor: Z Z^T is preserved up to the
/// discarded singular values (relative cutoff tol).
inline Mat compress_factor(const Mat& Z, double tol) {
  if (Z.cols() == 0 || tol <= 0) return Z;
  Eigen::HouseholderQR<Mat> qr(Z);
  const Eigen::Index k = std::min(Z.rows(), Z.cols());
  Mat R = Mat(qr.matrixQR().topRows(k).triangularView<Eigen::Upper>());
  Eigen::BDCSVD<Mat> svd(R, Eigen::ComputeThinU);
  const Vec& sv = svd.singularValues();
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * sv(0)) ++keep;
  if (keep == 0) return Mat(Z.rows(), 0);
  Mat Q = qr.householderQ() * Mat::Identity(Z.rows(), k);
  return Q * (svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal());
}

/// Frobenius norm of A Z Z^T E^T + E Z Z^T A^T + W0 W0^T evaluated through
/// the stacked Gram matrix of [A Z, E Z, W0]; never forms an N x N matrix.
/// Squaring through the Gram matrix caps the attainable relative accuracy
/// near sqrt(machine eps) * scale; values below that are a cancellation
/// floor, not a converged residual.
inline double residual_norm_lowrank(const SpMat& A, const SpMat& E,
                                    const Mat& Z, const Mat& W0) {
  const Eigen::Index r = Z.cols(), m = W0.cols();
  Mat U(W0.rows(), 2 * r + m);
  U.leftCols(r) = A * Z;
  U.middleCols(r, r) = E * Z;
  U.rightCols(m) = W0;
  const Mat Gam = U.transpose() * U;
  Mat P(2 * r + m, 2 * r + m);
  P.topRows(r) = Gam.middleRows(r, r);
  P.middleRows(r, r) = Gam.topRows(r);
  P.bottomRows(m) = Gam.bottomRows(m);
  const double val = (P.array() * P.transpose().array()).sum();
  return std::sqrt(std::max(val, 0.0));
}

namespace detail {

inline SpMat assemble_big_E(const SpMat& E, Eigen::Index q) {
  const Eigen::Index n = E.rows();
  SpMat big(n + q, n + q);
  std::vector<Triplet> tr;
  tr.reserve(static_cast<std::size_t>(E.nonZeros()));
  for (int k = 0; k < E.outerSize(); ++k)
    for (SpMat::InnerIterator it(E, k); it; ++it)
      tr.emplace_back(it.row(), it.col(), it.value());
  big.setFromTriplets(tr.begin(), tr.end());
  return big;
}

inline SpMat assemble_big_A(const SpMat& A, const SpMat& G) {
  const Eigen::Index n = A.rows(), q = G.cols();
  SpMat big(n + q, n + q);
  std::vector<Triplet> tr;
  tr.reserve(static_cast<std::size_t>(A.nonZeros() + 2 * G.nonZeros()));
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      tr.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < G.outerSize(); ++k)
    for (SpMat::InnerIterator it(G, k); it; ++it) {
      tr.emplace_back(it.row(), n + it.col(), it.value());
      tr.emplace_back(n + it.col(), it.row(), it.value());
    }
  big.setFromTriplets(tr.begin(), tr.end());
  return big;
}

}  // namespace detail

/// Low-rank ADI for the projected generalized Lyapunov equation on the full
/// pencil E = diag(E11, 0), A = [A11 G; G^T 0]. Shifts use the reversed
/// parametrization: each sweep factors (E + p_k A) and appends
/// sqrt(-2 Re p_k) (E + p_k A)^-1 W_{k-1} to the factor, with the running
/// right-hand side updated in place,
///
///   W_k = W_{k-1} - 2 Re(p_k) A V_k,
///
/// so the residual stays available as the small Gram W_k^H W_k. Iterates are
/// confined to the correct deflating subspace by construction; a measured
/// drift beyond defect_tol triggers one re-projection of the new block.
/// The observability side runs the identical iteration on the transposed
/// pencil with the transposed projectors.
inline LradiResult lradi_projected(const ProjectorContext& ctx,
                                   const std::vector<Complex>& shifts,
                                   EquationSide side, const Mat& rhs,
                                   const LradiOptions& opt = {}) {
  if (shifts.empty()) throw InvalidInput("lradi: no shifts supplied");
  for (const Complex& p : shifts)
    if (!(p.real() < 0)) throw InvalidInput("lradi: shifts must satisfy Re p < 0");
  const Eigen::Index N = ctx.order();
  if (rhs.rows() != N) throw InvalidInput("lradi: rhs row count mismatch");

  const bool ctrl = side == EquationSide::kControllability;
  SpMat bigE = detail::assemble_big_E(ctx.E_block(), ctx.q());
  SpMat bigA = detail::assemble_big_A(ctx.A_block(), ctx.G_block());
  if (!ctrl) {
    bigE = SpMat(bigE.transpose());
    bigA = SpMat(bigA.transpose());
  }
  auto project = [&](const CMat& X) {
    return ctrl ? ctx.apply_pi_right(X) : ctx.apply_pi_left_T(X);
  };
  const Mat W0 = ctrl ? ctx.apply_pi_left(rhs) : ctx.apply_pi_right_T(rhs);

  LradiResult res;
  const Eigen::Index m = W0.cols();
  if (m == 0 || W0.norm() == 0) {
    res.Z = Mat(N, 0);
    res.converged = true;
    return res;
  }

  const double res0 = (W0.transpose() * W0).norm();
  CMat W = W0.cast<Complex>();
  CMat Z(N, 0);
  std::map<std::pair<double, double>, std::unique_ptr<Eigen::SparseLU<CSpMat>>>
      factor_cache;

  const CSpMat cE = bigE.cast<Complex>();
  const CSpMat cA = bigA.cast<Complex>();

  for (int k = 0; k < opt.max_iter; ++k) {
    const Complex p = shifts[static_cast<std::size_t>(k) % shifts.size()];
    auto key = std::make_pair(p.real(), p.imag());
    auto it = factor_cache.find(key);
    if (it == factor_cache.end()) {
      CSpMat P = cE + p * cA;
      auto lu = std::make_unique<Eigen::SparseLU<CSpMat>>();
      lu->compute(P);
      if (lu->info() != Eigen::Success)
        throw SingularSystemError("lradi: shifted pencil factorization failed");
      solve_counters().shifted_full.fetch_add(1, std::memory_order_relaxed);
      it = factor_cache.emplace(key, std::move(lu)).first;
    }
    CMat V = it->second->solve(W);

    const CMat PV = project(V);
    const double vn = V.norm();
    if (vn > 0 && (PV - V).norm() > opt.defect_tol * vn) {
      V = PV;
      ++res.reprojections;
    }

    const double scal = std::sqrt(-2.0 * p.real());
    Z.conservativeResize(Eigen::NoChange, Z.cols() + m);
    Z.rightCols(m) = scal * V;
    W -= (2.0 * p.real()) * (cA * V);

    const double relres = (W.adjoint() * W).norm() / res0;
    res.rel_residuals.push_back(relres);
    res.final_relres = relres;
    res.iterations = k + 1;
    if (relres <= opt.tol) {
      res.converged = true;
      break;
    }
  }

  Mat Zr;
  if (Z.imag().lpNorm<Eigen::Infinity>() <
      1e-14 * std::max(1.0, Z.real().lpNorm<Eigen::Infinity>()))
    Zr = Z.real();
  else
    Zr = realify(Z);
  if (opt.compress_tol > 0) Zr = compress_factor(Zr, opt.compress_tol);
  res.Z = Zr;
  res.verified_relres =
      residual_norm_lowrank(bigA, bigE, res.Z, W0) / res0;
  return res;
}

struct LradiPairResult {
  Mat Zl, Zr;  // X ~ Zl Zr^T (real; realified jointly on complex shifts)
  std::vector<double> rel_residuals;
  int iterations = 0;
  bool converged = false;
  double final_relres = 0;
};

/// Two-factor ADI for the projected equation with a nonsymmetric low-rank
/// right-hand side B_l B_r^T (arising from error equations, where the
/// residual factors one-sidedly). Both running right-hand sides see the
/// same shifted solves and updates; the residual is W_l W_r^H, whose
/// Frobenius norm comes from the two small Grams. With B_l = B_r this
/// reproduces lradi_projected.
inline LradiPairResult lradi_nonsymmetric(const ProjectorContext& ctx,
                                          const std::vector<Complex>& shifts,
                                          EquationSide side, const Mat& rhs_l,
                                          const Mat& rhs_r,
                                          const LradiOptions& opt = {}) {
  if (shifts.empty()) throw InvalidInput("lradi: no shifts supplied");
  for (const Complex& p : shifts)
    if (!(p.real() < 0)) throw InvalidInput("lradi: shifts must satisfy Re p < 0");
  const Eigen::Index N = ctx.order();
  if (rhs_l.rows() != N || rhs_r.rows() != N || rhs_l.cols() != rhs_r.cols())
    throw InvalidInput("lradi: rhs factor shape mismatch");

  const bool ctrl = side == EquationSide::kControllability;
  SpMat bigE = detail::assemble_big_E(ctx.E_block(), ctx.q());
  SpMat bigA = detail::assemble_big_A(ctx.A_block(), ctx.G_block());
  if (!ctrl) {
    bigE = SpMat(bigE.transpose());
    bigA = SpMat(bigA.transpose());
  }
  auto project = [&](const CMat& X) {
    return ctrl ? ctx.apply_pi_right(X) : ctx.apply_pi_left_T(X);
  };
  const Mat Wl0 = ctrl ? ctx.apply_pi_left(rhs_l) : ctx.apply_pi_right_T(rhs_l);
  const Mat Wr0 = ctrl ? ctx.apply_pi_left(rhs_r) : ctx.apply_pi_right_T(rhs_r);

  LradiPairResult res;
  const Eigen::Index m = Wl0.cols();
  auto cross_norm = [](const CMat& L, const CMat& R) {
    const CMat Gl = L.adjoint() * L;
    const CMat Gr = R.adjoint() * R;
    return std::sqrt(std::max((Gl * Gr).trace().real(), 0.0));
  };
  const double res0 = cross_norm(Wl0.cast<Complex>(), Wr0.cast<Complex>());
  if (m == 0 || res0 == 0) {
    res.Zl = res.Zr = Mat(N, 0);
    res.converged = true;
    return res;
  }

  CMat Wl = Wl0.cast<Complex>(), Wr = Wr0.cast<Complex>();
  CMat Zl(N, 0), Zr(N, 0);
  const CSpMat cE = bigE.cast<Complex>();
  const CSpMat cA = bigA.cast<Complex>();
  std::map<std::pair<double, double>, std::unique_ptr<Eigen::SparseLU<CSpMat>>>
      cache;
  for (int k = 0; k < opt.max_iter; ++k) {
    const Complex p = shifts[static_cast<std::size_t>(k) % shifts.size()];
    auto key = std::make_pair(p.real(), p.imag());
    auto it = cache.find(key);
    if (it == cache.end()) {
      auto lu = std::make_unique<Eigen::SparseLU<CSpMat>>();
      lu->compute(CSpMat(cE + p * cA));
      if (lu->info() != Eigen::Success)
        throw SingularSystemError("lradi: shifted pencil factorization failed");
      solve_counters().shifted_full.fetch_add(1, std::memory_order_relaxed);
      it = cache.emplace(key, std::move(lu)).first;
    }
    CMat Vl = it->second->solve(Wl);
    CMat Vr = it->second->solve(Wr);
    const CMat Pl = project(Vl), Pr = project(Vr);
    if (Vl.norm() > 0 && (Pl - Vl).norm() > opt.defect_tol * Vl.norm()) Vl = Pl;
    if (Vr.norm() > 0 && (Pr - Vr).norm() > opt.defect_tol * Vr.norm()) Vr = Pr;
    const double scal = std::sqrt(-2.0 * p.real());
    Zl.conservativeResize(Eigen::NoChange, Zl.cols() + m);
    Zr.conservativeResize(Eigen::NoChange, Zr.cols() + m);
    Zl.rightCols(m) = scal * Vl;
    Zr.rightCols(m) = scal * Vr;
    Wl -= (2.0 * p.real()) * (cA * Vl);
    Wr -= (2.0 * p.real()) * (cA * Vr);
    const double relres = cross_norm(Wl, Wr) / res0;
    res.rel_residuals.push_back(relres);
    res.final_relres = relres;
    res.iterations = k + 1;
    if (relres <= opt.tol) {
      res.converged = true;
      break;
    }
  }
  const double imax = std::max(Zl.imag().lpNorm<Eigen::Infinity>(),
                               Zr.imag().lpNorm<Eigen::Infinity>());
  const double rmax = std::max(Zl.real().lpNorm<Eigen::Infinity>(),
                               Zr.real().lpNorm<Eigen::Infinity>());
  if (imax < 1e-14 * std::max(1.0, rmax)) {
    res.Zl = Zl.real();
    res.Zr = Zr.real();
  } else {
    res.Zl = realify(Zl);
    res.Zr = realify(Zr);
  }
  return res;
}

}  // namespace daemor

#endif  // DAEMOR_LRADI_HPP
