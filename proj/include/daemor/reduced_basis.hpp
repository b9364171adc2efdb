// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_REDUCED_BASIS_HPP
#define DAEMOR_REDUCED_BASIS_HPP

#include <Eigen/Eigenvalues>

#include <atomic>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "daemor/core.hpp"
#include "daemor/dense_lyapunov.hpp"
#include "daemor/errors.hpp"
#include "daemor/lradi.hpp"
#include "daemor/projectors.hpp"
#include "daemor/shifts.hpp"

namespace daemor {

enum class EstimatorKind { kDelta1, kDelta2 };

struct EstimatorReport {
  std::vector<double> mu;
  double delta1 = 0;
  std::optional<double> delta2;
  double residual_fro = 0;
  double alpha = 0;
  Eigen::Index online_rank = 0;
};

struct GreedyIterationRecord {
  int iteration = 0;  // 1-based; iteration 1 is the seeding solve
  std::vector<double> chosen_mu;
  double max_estimator = 0;  // sweep maximum that triggered this enrichment
  Eigen::Index basis_cols = 0;
};

struct ReducedBasis {
  Mat V_glob;  // orthonormal columns
  EquationSide side = EquationSide::kControllability;
  std::vector<std::vector<double>> sampled_params;
  std::vector<GreedyIterationRecord> history;
  std::vector<EstimatorReport> final_reports;  // full sweep incl. samples
  double tol = 0;
  int full_solves = 0;          // greedy iterations, seed included
  double final_max_estimator = 0;
  bool converged = false;
  std::string abort_reason;     // nonempty when the loop stopped abnormally
};

struct OnlineSolution {
  std::vector<double> mu;
  Mat V_mu;      // local orthonormal basis, Pi_r-invariant
  Mat Z_tilde;   // reduced factor
  Mat Z;         // assembled V_mu * Z_tilde
  double reduced_residual = 0;  // relative residual of the reduced solve
};

struct RbOptions {
  double tol = 1e-4;
  EstimatorKind estimator = EstimatorKind::kDelta2;
  int max_samples = 30;
  LradiOptions lradi;
  ShiftOptions shifts;
  int threads = 1;
  double orth_drop_tol = 1e-12;
};

/// orth(Pi_r(mu) V_glob): the parameter-local search space. Directions
/// collapsing under the projector are dropped by the pivoted QR.
inline Mat local_basis(const Mat& V_glob, const ProjectorContext& ctx,
                       EquationSide side, double drop_tol = 1e-12) {
  const bool ctrl = side == EquationSide::kControllability;
  const Mat PV =
      ctrl ? ctx.apply_pi_right(V_glob) : ctx.apply_pi_left_T(V_glob);
  Mat V = orth(PV, drop_tol);
  if (V.cols() == 0)
    throw InvalidInput("local basis: projected global basis is numerically zero");
  return V;
}

namespace detail {

struct SidePencil {
  SpMat E, A;  // transposed for the observability side
  Mat W0;      // projected rhs factor
};

inline SidePencil side_pencil(const ProjectorContext& ctx, EquationSide side,
                              const Mat& rhs) {
  SidePencil sp;
  sp.E = assemble_big_E(ctx.E_block(), ctx.q());
  sp.A = assemble_big_A(ctx.A_block(), ctx.G_block());
  if (side == EquationSide::kControllability) {
    sp.W0 = ctx.apply_pi_left(rhs);
  } else {
    sp.E = SpMat(sp.E.transpose());
    sp.A = SpMat(sp.A.transpose());
    sp.W0 = ctx.apply_pi_right_T(rhs);
  }
  return sp;
}

}  // namespace detail

/// Galerkin solve of the reduced Lyapunov equation on the local basis.
/// The restriction of the pencil to range(Pi_r) is automatically strictly
/// dissipative (the constraint blocks cancel there), so the small dense
/// solve is well posed whenever the full problem is.
inline OnlineSolution online_solve(const ProjectorContext& ctx,
                                   EquationSide side, const Mat& V_mu,
                                   const Mat& rhs) {
  const auto sp = detail::side_pencil(ctx, side, rhs);
  const Mat Et = V_mu.transpose() * (sp.E * V_mu);
  const Mat At = V_mu.transpose() * (sp.A * V_mu);
  const Mat Bt = V_mu.transpose() * sp.W0;

  // Stability guard: the reduced pencil inherits dissipativity only if the
  // basis is Pi_r-invariant; a violated guard flags an inadequate basis.
  Eigen::GeneralizedEigenSolver<Mat> ges(At, Et, false);
  for (Eigen::Index i = 0; i < ges.alphas().size(); ++i) {
    const Complex lam = ges.alphas()(i) / ges.betas()(i);
    if (std::isfinite(lam.real()) && lam.real() >= 0)
      throw DefinitenessError("online solve: reduced pencil unstable");
  }

  const Mat W = Bt * Bt.transpose();
  const Mat X = generalized_lyapunov_dense(At, Et, W);
  OnlineSolution sol;
  sol.mu = ctx.mu();
  sol.V_mu = V_mu;
  sol.reduced_residual =
      lyapunov_residual_fro(At, Et, X, W) / std::max(W.norm(), 1e-300);

  Eigen::SelfAdjointEigenSolver<Mat> es(X);
  const Vec& ev = es.eigenvalues();
  const double emax = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-14 * std::max(emax, 1e-300)) ++keep;
  Mat Zt(X.rows(), keep);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-14 * std::max(emax, 1e-300))
      Zt.col(c++) = es.eigenvectors().col(i) * std::sqrt(ev(i));
  sol.Z_tilde = Zt;
  sol.Z = V_mu * Zt;
  return sol;
}

inline double delta1(double residual_fro, double alpha) {
  if (!(alpha > 0)) throw InvalidInput("delta1: alpha must be positive");
  return residual_fro / alpha;
}

struct Delta2Breakdown {
  double value = 0;
  double ehat_fro = 0;
  double rhat_fro = 0;
};

/// Sharper estimate from the error equation: the residual of the current
/// approximation feeds a second reduced solve on V_err, whose lifted
/// solution Ehat corrects the bulk of the error; what remains is bounded
/// through the residual of (Z Z^T + Ehat), assembled in low-rank form via
/// one stacked Gram. Returns |Ehat|_F + |Rhat|_F / alpha.
inline Delta2Breakdown delta2(const ProjectorContext& ctx, EquationSide side,
                              const Mat& rhs, const Mat& Z, const Mat& V_err,
                              double alpha) {
  if (!(alpha > 0)) throw InvalidInput("delta2: alpha must be positive");
  const auto sp = detail::side_pencil(ctx, side, rhs);
  const Mat AZ = sp.A * Z;
  const Mat EZ = sp.E * Z;

  const Mat Et = V_err.transpose() * (sp.E * V_err);
  const Mat At = V_err.transpose() * (sp.A * V_err);
  const Mat VtAZ = V_err.transpose() * AZ;
  const Mat VtEZ = V_err.transpose() * EZ;
  const Mat VtW = V_err.transpose() * sp.W0;
  const Mat Rt = VtAZ * VtEZ.transpose() + VtEZ * VtAZ.transpose() +
                 VtW * VtW.transpose();
  const Mat D = generalized_lyapunov_dense(At, Et, Rt);

  Eigen::SelfAdjointEigenSolver<Mat> es(D);
  const Mat F = V_err * es.eigenvectors();
  const Vec lam = es.eigenvalues();

  const Eigen::Index r = Z.cols(), mw = sp.W0.cols(), f = F.cols();
  Mat U(Z.rows(), 2 * r + mw + 2 * f);
  U.leftCols(r) = AZ;
  U.middleCols(r, r) = EZ;
  U.middleCols(2 * r, mw) = sp.W0;
  U.middleCols(2 * r + mw, f) = sp.A * F;
  U.middleCols(2 * r + mw + f, f) = sp.E * F;
  Mat K = Mat::Zero(U.cols(), U.cols());
  K.block(0, r, r, r).setIdentity();
  K.block(r, 0, r, r).setIdentity();
  K.block(2 * r, 2 * r, mw, mw).setIdentity();
  K.block(2 * r + mw, 2 * r + mw + f, f, f) = Mat(lam.asDiagonal());
  K.block(2 * r + mw + f, 2 * r + mw, f, f) = Mat(lam.asDiagonal());
  const Mat P = K * (U.transpose() * U);
  const double rhat2 = (P.array() * P.transpose().array()).sum();

  Delta2Breakdown out;
  out.ehat_fro = D.norm();
  out.rhat_fro = std::sqrt(std::max(rhat2, 0.0));
  out.value = out.ehat_fro + out.rhat_fro / alpha;
  return out;
}

/// One estimator evaluation at mu against the current global basis. Pure in
/// (mu, V_glob); safe to fan out across parameters.
inline EstimatorReport evaluate_estimator(const StokesStructure& st,
                                          ParamView mu, const Mat& V_glob,
                                          EquationSide side, const Mat& rhs,
                                          const AlphaCache& alpha_cache,
                                          EstimatorKind kind,
                                          double orth_drop_tol = 1e-12) {
  ProjectorContext ctx(st, mu);
  const Mat V = local_basis(V_glob, ctx, side, orth_drop_tol);
  const OnlineSolution sol = online_solve(ctx, side, V, rhs);
  const auto sp = detail::side_pencil(ctx, side, rhs);
  EstimatorReport rep;
  rep.mu.assign(mu.begin(), mu.end());
  rep.residual_fro = residual_norm_lowrank(sp.A, sp.E, sol.Z, sp.W0);
  rep.alpha = alpha_lower_bound(st, mu, alpha_cache);
  rep.delta1 = delta1(rep.residual_fro, rep.alpha);
  rep.online_rank = sol.Z_tilde.cols();
  if (kind == EstimatorKind::kDelta2)
    rep.delta2 = delta2(ctx, side, rhs, sol.Z, V, rep.alpha).value;
  return rep;
}

namespace detail {

inline void run_indexed(int n, int threads, const std::function<void(int)>& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
  };
  std::vector<std::thread> pool;
  const int k = std::min(threads, n);
  pool.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline double report_value(const EstimatorReport& r, EstimatorKind kind) {
  return kind == EstimatorKind::kDelta2 && r.delta2 ? *r.delta2 : r.delta1;
}

inline Mat side_rhs(const StokesStructure& st, ParamView mu,
                    EquationSide side) {
  return side == EquationSide::kControllability
             ? st.big_B(mu)
             : Mat(st.big_C().transpose());
}

}  // namespace detail

/// Greedy offline loop: seed with the first test parameter, then repeatedly
/// solve in full at the worst estimated parameter until the sweep maximum
/// falls under tol or the candidates are exhausted. Sampled parameters
/// leave the candidate set; the final report re-verifies all of them.
/// The enrichment step is pluggable (the error-equation variant swaps it).
inline ReducedBasis offline_build(
    const StokesStructure& st, EquationSide side,
    const std::vector<std::vector<double>>& D_test, const RbOptions& opt = {},
    const std::function<Mat(const ProjectorContext&, const ShiftSet&,
                            const Mat& V_glob)>* enrich = nullptr) {
  if (D_test.empty()) throw InvalidInput("offline: empty test set");
  ReducedBasis rb;
  rb.side = side;
  rb.tol = opt.tol;
  const AlphaCache acache = build_alpha_cache(st, st.box.midpoint());

  std::vector<bool> sampled(D_test.size(), false);
  const Eigen::Index N = st.order();

  // Any convergence failure at a sample aborts the loop; the partial basis
  // and the reason are kept in the report.
  auto full_solve = [&](std::size_t idx) -> bool {
    const auto& mu = D_test[idx];
    try {
      ProjectorContext ctx(st, mu);
      const ShiftSet sh = compute_shifts(st, ctx, opt.shifts);
      Mat Znew;
      if (enrich && *enrich) {
        Znew = (*enrich)(ctx, sh, rb.V_glob);
      } else {
        const Mat rhs = detail::side_rhs(st, mu, side);
        const LradiResult lr =
            lradi_projected(ctx, sh.shifts, side, rhs, opt.lradi);
        if (!lr.converged)
          throw ConvergenceError("offline: full sweep stalled at relres " +
                                 std::to_string(lr.final_relres));
        Znew = lr.Z;
      }
      Mat stacked(N, rb.V_glob.cols() + Znew.cols());
      stacked << rb.V_glob, Znew;
      rb.V_glob = orth(stacked, opt.orth_drop_tol);
    } catch (const ConvergenceError& e) {
      rb.abort_reason = e.what();
      return false;
    }
    sampled[idx] = true;
    rb.sampled_params.push_back(mu);
    ++rb.full_solves;
    return true;
  };

  rb.V_glob = Mat(N, 0);
  if (!full_solve(0))
    throw ConvergenceError("offline: seed solve failed: " + rb.abort_reason);
  rb.history.push_back({1, D_test[0], std::numeric_limits<double>::infinity(),
                        rb.V_glob.cols()});

  std::vector<EstimatorReport> sweep(D_test.size());
  bool met_tol = false;
  while (rb.abort_reason.empty()) {
    // Estimator sweep over the remaining candidates.
    std::vector<int> idxs;
    for (std::size_t i = 0; i < D_test.size(); ++i)
      if (!sampled[i]) idxs.push_back(static_cast<int>(i));
    if (idxs.empty()) break;
    detail::run_indexed(
        static_cast<int>(idxs.size()), opt.threads, [&](int t) {
          const int i = idxs[static_cast<std::size_t>(t)];
          sweep[static_cast<std::size_t>(i)] = evaluate_estimator(
              st, D_test[static_cast<std::size_t>(i)], rb.V_glob, side,
              detail::side_rhs(st, D_test[static_cast<std::size_t>(i)], side),
              acache, opt.estimator, opt.orth_drop_tol);
        });
    double worst = -1;
    int arg = idxs[0];
    for (int i : idxs) {
      const double v = detail::report_value(sweep[static_cast<std::size_t>(i)],
                                            opt.estimator);
      if (v > worst) {
        worst = v;
        arg = i;
      }
    }
    if (worst <= opt.tol) {
      met_tol = true;
      break;
    }
    if (rb.full_solves >= opt.max_samples) {
      rb.abort_reason = "sample budget exhausted";
      break;
    }
    if (2 * rb.V_glob.cols() > N) {
      rb.abort_reason = "basis guard: r_glob exceeded N/2";
      break;
    }
    if (!full_solve(static_cast<std::size_t>(arg))) break;
    rb.history.push_back({rb.full_solves, D_test[static_cast<std::size_t>(arg)],
                          worst, rb.V_glob.cols()});
  }

  // Final verification sweep over the full test set, samples included.
  rb.final_reports.resize(D_test.size());
  detail::run_indexed(
      static_cast<int>(D_test.size()), opt.threads, [&](int i) {
        rb.final_reports[static_cast<std::size_t>(i)] = evaluate_estimator(
            st, D_test[static_cast<std::size_t>(i)], rb.V_glob, side,
            detail::side_rhs(st, D_test[static_cast<std::size_t>(i)], side),
            acache, opt.estimator, opt.orth_drop_tol);
      });
  for (const auto& r : rb.final_reports)
    rb.final_max_estimator = std::max(
        rb.final_max_estimator, detail::report_value(r, opt.estimator));
  rb.converged = met_tol || rb.final_max_estimator <= opt.tol;
  return rb;
}

/// Variant whose enrichment solves the error equation for the current
/// approximation instead of the plain equation: the residual factors
/// one-sidedly into B_l B_r^T with B_l = Pl [A Z, E Z, B],
/// B_r = Pl [E Z, A Z, B], and the two-factor sweep contributes its left
/// factor to the basis. With an empty basis this degenerates to the plain
/// first iteration. Selection runs on delta1.
inline ReducedBasis offline_build_error_variant(
    const StokesStructure& st, EquationSide side,
    const std::vector<std::vector<double>>& D_test, RbOptions opt = {}) {
  opt.estimator = EstimatorKind::kDelta1;
  std::function<Mat(const ProjectorContext&, const ShiftSet&, const Mat&)>
      enrich = [&st, side, &opt](const ProjectorContext& ctx,
                                 const ShiftSet& sh, const Mat& V_glob) {
        const Mat rhs = detail::side_rhs(st, ctx.mu(), side);
        Mat Z(ctx.order(), 0);
        if (V_glob.cols() > 0) {
          const Mat V = local_basis(V_glob, ctx, side, opt.orth_drop_tol);
          Z = online_solve(ctx, side, V, rhs).Z;
        }
        const auto sp = detail::side_pencil(ctx, side, rhs);
        const Eigen::Index r = Z.cols(), m = sp.W0.cols();
        Mat Bl(ctx.order(), 2 * r + m), Br(ctx.order(), 2 * r + m);
        Bl << sp.A * Z, sp.E * Z, sp.W0;
        Br << sp.E * Z, sp.A * Z, sp.W0;
        const LradiPairResult pr =
            lradi_nonsymmetric(ctx, sh.shifts, side, Bl, Br, opt.lradi);
        if (!pr.converged)
          throw ConvergenceError("offline: error-equation sweep did not converge");
        return pr.Zl;
      };
  return offline_build(st, side, D_test, opt, &enrich);
}

}  // namespace daemor

#endif  // DAEMOR_REDUCED_BASIS_HPP
