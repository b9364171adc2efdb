// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_PROJECTORS_HPP
#define DAEMOR_PROJECTORS_HPP

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "daemor/core.hpp"
#include "daemor/counters.hpp"
#include "daemor/structures.hpp"

namespace daemor {

/// Spectral-projector applications for a saddle-point structured pencil at a
/// fixed parameter. With S := G^T E^-1 G and the oblique projector
/// Pi := I - G S^-1 G^T E^-1 on the differential block, the projectors onto
/// the deflating subspaces of the finite eigenvalues are
///
///   Pi_l = [Pi   -Pi A E^-1 G S^-1]        Pi_r = [Pi^T           0]
///          [0     0              ],               [-S^-1 G^T E^-1 A Pi^T  0].
///
/// All applications reduce to products with the cached n x q block E^-1 G,
/// so no full-order solve happens after construction. Transposed
/// applications serve the dualized (observability) equations.
class ProjectorContext {
 public:
  ProjectorContext(const StokesStructure& st, ParamView mu)
      : n_(st.n()), q_(st.q()), mu_(mu.begin(), mu.end()), G_(st.G) {
    E_ = st.E.evaluate(mu);
    A_ = st.A.evaluate(mu);
    ellt_.compute(E_);
    if (ellt_.info() != Eigen::Success)
      throw DefinitenessError("projector context: E(mu) not spd");
    solve_counters().mass_block.fetch_add(1, std::memory_order_relaxed);
    EinvG_ = ellt_.solve(Mat(G_));
    Mat S = Mat(G_.transpose()) * EinvG_;
    schur_llt_.compute(S);
    if (schur_llt_.info() != Eigen::Success)
      throw DefinitenessError(
          "projector context: G^T E^-1 G not spd (G rank deficient?)");
    solve_counters().schur_block.fetch_add(1, std::memory_order_relaxed);
    pi_left_B_ = apply_pi_left(st.big_B(mu));
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index q() const { return q_; }
  Eigen::Index order() const { return n_ + q_; }
  const std::vector<double>& mu() const { return mu_; }
  const SpMat& E_block() const { return E_; }
  const SpMat& A_block() const { return A_; }
  const SpMat& G_block() const { return G_; }
  const Mat& EinvG() const { return EinvG_; }
  const Mat& pi_left_B() const { return pi_left_B_; }

  Mat solve_E(const Mat& X) const { return ellt_.solve(X); }
  Mat solve_schur(const Mat& X) const { return schur_llt_.solve(X); }

  /// Pi applied to n-block columns.
  Mat pi_small_left(const Mat& X) const {
    return X - G_ * schur_llt_.solve(EinvG_.transpose() * X);
  }

  /// Pi^T applied to n-block columns.
  Mat pi_small_right(const Mat& X) const {
    return X - EinvG_ * schur_llt_.solve(Mat(G_.transpose()) * X);
  }

  Mat apply_pi_left(const Mat& X) const {
    check_rows(X);
    Mat Y = Mat::Zero(X.rows(), X.cols());
    Mat top = X.topRows(n_);
    if (q_ > 0)
      top -= A_ * (EinvG_ * schur_llt_.solve(X.bottomRows(q_)));
    Y.topRows(n_) = pi_small_left(top);
    return Y;
  }

  Mat apply_pi_right(const Mat& X) const {
    check_rows(X);
    Mat Y(X.rows(), X.cols());
    const Mat W = pi_small_right(X.topRows(n_));
    Y.topRows(n_) = W;
    if (q_ > 0)
      Y.bottomRows(q_) = -schur_llt_.solve(EinvG_.transpose() * (A_ * W));
    return Y;
  }

  /// Pi_l^T, the right projector of the dualized pencil (E^T, A^T).
  Mat apply_pi_left_T(const Mat& X) const {
    check_rows(X);
    Mat Y(X.rows(), X.cols());
    const Mat W = pi_small_right(X.topRows(n_));
    Y.topRows(n_) = W;
    if (q_ > 0)
      Y.bottomRows(q_) =
          -schur_llt_.solve(EinvG_.transpose() * (A_.transpose() * W));
    return Y;
  }

  /// Pi_r^T, the left projector of the dualized pencil.
  Mat apply_pi_right_T(const Mat& X) const {
    check_rows(X);
    Mat Y = Mat::Zero(X.rows(), X.cols());
    Mat top = X.topRows(n_);
    if (q_ > 0)
      top -= A_.transpose() * (EinvG_ * schur_llt_.solve(X.bottomRows(q_)));
    Y.topRows(n_) = pi_small_left(top);
    return Y;
  }

  CMat apply_pi_right(const CMat& X) const {
    return apply_pi_right(Mat(X.real())).cast<Complex>() +
           Complex(0, 1) * apply_pi_right(Mat(X.imag())).cast<Complex>();
  }

  CMat apply_pi_left_T(const CMat& X) const {
    return apply_pi_left_T(Mat(X.real())).cast<Complex>() +
           Complex(0, 1) * apply_pi_left_T(Mat(X.imag())).cast<Complex>();
  }

  /// Dense projectors for small instances (oracle comparisons).
  Mat dense_pi_left() const {
    guard_dense();
    return apply_pi_left(Mat(Mat::Identity(order(), order())));
  }

  Mat dense_pi_right() const {
    guard_dense();
    return apply_pi_right(Mat(Mat::Identity(order(), order())));
  }

 private:
  void check_rows(const Mat& X) const {
    if (X.rows() != order())
      throw InvalidInput("projector context: row count mismatch");
  }
  void guard_dense() const {
    if (order() > 2000)
      throw InvalidInput("projector context: dense path guarded to N <= 2000");
  }

  Eigen::Index n_, q_;
  std::vector<double> mu_;
  SpMat G_, E_, A_;
  Eigen::SimplicialLLT<SpMat> ellt_;
  Eigen::LLT<Mat> schur_llt_;
  Mat EinvG_;
  Mat pi_left_B_;
};

/// Rank-revealing factorizations Pi = Xi_l Xi_r^T (differential block) and
/// Pi_l = Phi_l Phi_r^T, Pi_r = Psi_l Psi_r^T (full pencil), built from the
/// SVD of the dense Pi. Xi_r carries orthonormal columns; Xi_r^T Xi_l = I
/// follows from idempotency (V^T U = Sigma^-1 on the nonzero part).
struct PhiFactorization {
  Mat Xi_l, Xi_r;      // n x nf
  Mat Xi_phi, Xi_psi;  // q x nf second blocks of Phi_r / Psi_l
  Eigen::Index n = 0, q = 0;

  Eigen::Index nf() const { return Xi_l.cols(); }

  Mat Phi_l() const { return stack_top(Xi_l); }
  Mat Phi_r() const { return stack_both(Xi_r, Xi_phi); }
  Mat Psi_l() const { return stack_both(Xi_r, Xi_psi); }
  Mat Psi_r() const { return stack_top(Xi_l); }

 private:
  Mat stack_top(const Mat& X) const {
    Mat Y = Mat::Zero(n + q, X.cols());
    Y.topRows(n) = X;
    return Y;
  }
  Mat stack_both(const Mat& X, const Mat& Z) const {
    Mat Y(n + q, X.cols());
    Y.topRows(n) = X;
    Y.bottomRows(q) = Z;
    return Y;
  }
};

inline PhiFactorization phi_factorization(const ProjectorContext& ctx) {
  if (ctx.n() > 2000)
    throw InvalidInput("phi factorization: dense path guarded to n <= 2000");
  const Eigen::Index n = ctx.n(), q = ctx.q();
  const Mat Pi = ctx.pi_small_left(Mat::Identity(n, n));
  Eigen::BDCSVD<Mat> svd(Pi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  Eigen::Index nf = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * smax) ++nf;
  if (nf != n - q)
    throw SingularSystemError("phi factorization: projector rank != n - q");
  PhiFactorization f;
  f.n = n;
  f.q = q;
  f.Xi_r = svd.matrixV().leftCols(nf);
  f.Xi_l = svd.matrixU().leftCols(nf) * sv.head(nf).asDiagonal();
  const SpMat& A = ctx.A_block();
  f.Xi_phi = -ctx.solve_schur(ctx.EinvG().transpose() * (A.transpose() * f.Xi_r));
  f.Xi_psi = -ctx.solve_schur(ctx.EinvG().transpose() * (A * f.Xi_r));
  return f;
}

/// Reduced pencil entering the inf-sup style constant: E and A compressed by
/// the orthonormal right factor of Pi. Used by the lower bound and by the
/// dense oracle for sigma_min.
inline std::pair<Mat, Mat> phi_reduced_pencil(const ProjectorContext& ctx,
                                              const PhiFactorization& f) {
  return {f.Xi_r.transpose() * (ctx.E_block() * f.Xi_r),
          f.Xi_r.transpose() * (ctx.A_block() * f.Xi_r)};
}

/// sigma_min of the projected Lyapunov operator
/// L = -(A_red (x) E_red + E_red (x) A_red) on the compressed pencil,
/// computed densely. Small instances only.
inline double sigma_min_lyap_operator_dense(const Mat& Ered, const Mat& Ared) {
  const Eigen::Index r = Ered.rows();
  if (r * r > 4000)
    throw InvalidInput("sigma_min oracle: operator too large for dense path");
  Mat L = -(Eigen::kroneckerProduct(Ared, Ered).eval() +
            Eigen::kroneckerProduct(Ered, Ared).eval());
  Eigen::BDCSVD<Mat> svd(L);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Cached reference-point data for the parametric lower bound alpha(mu).
struct AlphaCache {
  std::vector<double> mu_ref;
  double lambda_min_E_ref = 0.0;
  double lambda_min_negAs_ref = 0.0;
  std::vector<double> thetaE_ref, thetaA_ref;
  std::vector<bool> maskE, maskA;  // terms with nonzero matrices
  bool termwise_semidefinite = false;
};

/// Builds the cache at the reference parameter (conventionally the box
/// midpoint). Termwise semidefiniteness of the affine terms decides whether
/// the cheap coefficient-ratio path is admissible.
inline AlphaCache build_alpha_cache(const StokesStructure& st, ParamView mu_ref) {
  AlphaCache c;
  c.mu_ref.assign(mu_ref.begin(), mu_ref.end());
  const SpMat Eref = st.E.evaluate(mu_ref);
  const SpMat Aref = st.A.evaluate(mu_ref);
  SpMat As = (-0.5 * (Aref + SpMat(Aref.transpose()))).eval();
  c.lambda_min_E_ref = sym_lambda_min(Eref);
  c.lambda_min_negAs_ref = sym_lambda_min(As);
  if (c.lambda_min_E_ref <= 0 || c.lambda_min_negAs_ref <= 0)
    throw DefinitenessError("alpha cache: reference pencil not dissipative");
  c.thetaE_ref = st.E.theta_values(mu_ref);
  c.thetaA_ref = st.A.theta_values(mu_ref);

  bool ok = true;
  c.maskE.resize(st.E.terms().size());
  for (std::size_t k = 0; k < st.E.terms().size(); ++k) {
    const SpMat& M = st.E.terms()[k].matrix;
    c.maskE[k] = M.nonZeros() > 0;
    if (!c.maskE[k]) continue;
    if (sym_lambda_min(SpMat(0.5 * (M + SpMat(M.transpose())))) <
        -1e-10 * M.norm())
      ok = false;
  }
  c.maskA.resize(st.A.terms().size());
  for (std::size_t k = 0; k < st.A.terms().size(); ++k) {
    const SpMat& M = st.A.terms()[k].matrix;
    c.maskA[k] = M.nonZeros() > 0;
    if (!c.maskA[k]) continue;
    if (sym_lambda_max(SpMat(0.5 * (M + SpMat(M.transpose())))) >
        1e-10 * M.norm())
      ok = false;
  }
  c.termwise_semidefinite = ok;
  return c;
}

/// Lower bound alpha(mu) <= sigma_min(L_PhiPsi(mu)).
///
/// Fast path (termwise semidefinite structures): the coefficient-ratio form
///   2 min_k(thetaE_k(mu)/thetaE_k(ref)) lambda_min(E(ref))
///     min_k(thetaA_k(mu)/thetaA_k(ref)) lambda_min(-A^S(ref)).
/// General path: 2 lambda_min(E(mu)) lambda_min(-A^S(mu)) evaluated at mu,
/// which is what the dissipativity theorem actually guarantees.
inline double alpha_lower_bound(const StokesStructure& st, ParamView mu,
                                const AlphaCache& cache) {
  if (cache.termwise_semidefinite) {
    auto ratio = [&](const AffineMatrixOperator& op,
                     const std::vector<double>& ref,
                     const std::vector<bool>& mask) {
      const auto th = op.theta_values(mu);
      double r = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < th.size(); ++k) {
        if (!mask[k]) continue;
        if (ref[k] <= 0)
          throw InvalidInput("alpha bound: nonpositive reference coefficient");
        if (th[k] < 0)
          throw InvalidInput("alpha bound: negative coefficient at mu");
        r = std::min(r, th[k] / ref[k]);
      }
      if (!std::isfinite(r)) r = 1.0;
      return r;
    };
    const double alpha = 2.0 * ratio(st.E, cache.thetaE_ref, cache.maskE) *
                         cache.lambda_min_E_ref *
                         ratio(st.A, cache.thetaA_ref, cache.maskA) *
                         cache.lambda_min_negAs_ref;
    if (!(alpha > 0))
      throw InvalidInput("alpha bound: vanished (coefficient hit zero)");
    return alpha;
  }
  const SpMat E = st.E.evaluate(mu);
  const SpMat A = st.A.evaluate(mu);
  SpMat As = (-0.5 * (A + SpMat(A.transpose()))).eval();
  const double le = sym_lambda_min(E);
  const double la = sym_lambda_min(As);
  if (le <= 0 || la <= 0)
    throw DefinitenessError("alpha bound: pencil not dissipative at mu");
  return 2.0 * le * la;
}

}  // namespace daemor

#endif  // DAEMOR_PROJECTORS_HPP
