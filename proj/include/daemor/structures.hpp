// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_STRUCTURES_HPP
#define DAEMOR_STRUCTURES_HPP

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "daemor/affine_operator.hpp"
#include "daemor/core.hpp"
#include "daemor/sym_eig.hpp"
#include "daemor/system.hpp"

namespace daemor {

namespace detail {

/// Places blk into a triplet list at offset (r0, c0), scaled.
inline void add_block(std::vector<Triplet>& trip, const SpMat& blk, double s,
                      Eigen::Index r0, Eigen::Index c0) {
  for (int k = 0; k < blk.outerSize(); ++k)
    for (SpMat::InnerIterator it(blk, k); it; ++it)
      trip.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
}

inline SpMat from_blocks(Eigen::Index rows, Eigen::Index cols,
                         std::vector<Triplet>&& trip) {
  SpMat M(rows, cols);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace detail

/// Saddle-point structured DAE of Kronecker index 2:
///
///   [E(mu)  0] d/dt [x]   [A(mu)  G] [x]   [B1(mu)]
///   [ 0     0]      [l] = [G^T    0] [l] + [B2    ] u,
///   y = C1 x + C2 l,
///
/// with E(mu) spd and G of full column rank. The pressure-free Stokes
/// discretizations and the transformed mechanical systems both live here.
struct StokesStructure {
  AffineMatrixOperator E;   // n x n, spd for every admissible mu
  AffineMatrixOperator A;   // n x n
  SpMat G;                  // n x q, constant, full column rank
  AffineMatrixOperator B1;  // n x m
  Mat B2;                   // q x m
  Mat C1;                   // p x n
  Mat C2;                   // p x q
  ParamBox box;
  bool a_symmetric = false;

  Eigen::Index n() const { return E.rows(); }
  Eigen::Index q() const { return G.cols(); }
  Eigen::Index m() const { return B1.cols(); }
  Eigen::Index p() const { return C1.rows(); }
  Eigen::Index order() const { return n() + q(); }

  void validate() const {
    if (E.rows() != E.cols() || A.rows() != n() || A.cols() != n())
      throw InvalidInput("stokes structure: E/A block dims");
    if (G.rows() != n()) throw InvalidInput("stokes structure: G rows");
    if (B1.rows() != n() || B2.rows() != q() || B2.cols() != B1.cols())
      throw InvalidInput("stokes structure: input dims");
    if (C1.cols() != n() || C2.rows() != C1.rows() || C2.cols() != q())
      throw InvalidInput("stokes structure: output dims");
  }

  /// Big-system operators at a fixed parameter.
  SpMat big_E(ParamView mu) const {
    const Eigen::Index N = order();
    std::vector<Triplet> trip;
    detail::add_block(trip, E.evaluate(mu), 1.0, 0, 0);
    return detail::from_blocks(N, N, std::move(trip));
  }

  SpMat big_A(ParamView mu) const {
    const Eigen::Index N = order();
    std::vector<Triplet> trip;
    detail::add_block(trip, A.evaluate(mu), 1.0, 0, 0);
    detail::add_block(trip, G, 1.0, 0, n());
    detail::add_block(trip, SpMat(G.transpose()), 1.0, n(), 0);
    return detail::from_blocks(N, N, std::move(trip));
  }

  Mat big_B(ParamView mu) const {
    Mat B(order(), m());
    B.topRows(n()) = B1.dense(mu);
    B.bottomRows(q()) = B2;
    return B;
  }

  Mat big_C() const {
    Mat C(p(), order());
    C.leftCols(n()) = C1;
    C.rightCols(q()) = C2;
    return C;
  }

  /// Assembles the equivalent ParametricDaeSystem, preserving affine
  /// structure termwise.
  ParametricDaeSystem assemble() const {
    validate();
    const Eigen::Index N = order();
    // Low-rank factors of the (1,1)-block terms stay exact under zero
    // padding, so they ride along into the saddle layout. The G-folded
    // leading A term is the one exception: its matrix is no longer U V^T.
    auto pad = [&](const std::optional<LowRankPair>& lr)
        -> std::optional<LowRankPair> {
      if (!lr) return {};
      LowRankPair big;
      big.U = Mat::Zero(N, lr->U.cols());
      big.U.topRows(n()) = lr->U;
      big.V = Mat::Zero(N, lr->V.cols());
      big.V.topRows(n()) = lr->V;
      return big;
    };
    std::vector<AffineTerm> Eterms, Aterms, Bterms, Cterms;
    for (const auto& t : E.terms()) {
      std::vector<Triplet> trip;
      detail::add_block(trip, t.matrix, 1.0, 0, 0);
      Eterms.push_back(
          {t.theta, detail::from_blocks(N, N, std::move(trip)), pad(t.lowrank)});
    }
    bool first = true;
    for (const auto& t : A.terms()) {
      std::vector<Triplet> trip;
      detail::add_block(trip, t.matrix, 1.0, 0, 0);
      bool folded = false;
      if (first) {
        detail::add_block(trip, G, 1.0, 0, n());
        detail::add_block(trip, SpMat(G.transpose()), 1.0, n(), 0);
        first = false;
        folded = true;
      }
      Aterms.push_back({t.theta, detail::from_blocks(N, N, std::move(trip)),
                        folded ? std::nullopt : pad(t.lowrank)});
    }
    for (const auto& t : B1.terms()) {
      std::vector<Triplet> trip;
      detail::add_block(trip, t.matrix, 1.0, 0, 0);
      SpMat Bk = detail::from_blocks(N, m(), std::move(trip));
      if (t.theta.is_literal_one() && Bterms.empty())
        Bk = Bk + SpMat([&] {
               std::vector<Triplet> tr;
               detail::add_block(tr, B2.sparseView(), 1.0, n(), 0);
               return detail::from_blocks(N, m(), std::move(tr));
             }());
      Bterms.push_back({t.theta, Bk, {}});
    }
    Mat C = big_C();
    Cterms.push_back({ThetaExpr::one(), C.sparseView(), {}});

    ParametricDaeSystem sys;
    sys.E = AffineMatrixOperator(N, N, std::move(Eterms));
    sys.A = AffineMatrixOperator(N, N, std::move(Aterms));
    sys.B = AffineMatrixOperator(N, m(), std::move(Bterms));
    sys.C = AffineMatrixOperator(p(), N, std::move(Cterms));
    sys.box = box;
    sys.info = {SystemKind::kStokesLike, n(), q(), 2};
    sys.validate();
    return sys;
  }
};

/// Constrained second-order mechanical system
///   M(mu) x'' + D(mu) x' + K(mu) x + G l = Bx u,  G^T x = 0,  y = Cx x,
/// with M, D, K spd on the admissible box. Kronecker index 3 in first-order
/// descriptor form.
struct MechanicalStructure {
  AffineMatrixOperator M;  // n_x x n_x
  AffineMatrixOperator D;
  AffineMatrixOperator K;
  SpMat G;   // n_x x q
  Mat Bx;    // n_x x m
  Mat Cx;    // p x n_x
  ParamBox box;

  Eigen::Index nx() const { return M.rows(); }
  Eigen::Index q() const { return G.cols(); }
  Eigen::Index m() const { return Bx.cols(); }
  Eigen::Index p() const { return Cx.rows(); }

  void validate() const {
    if (M.rows() != M.cols() || D.rows() != nx() || K.rows() != nx() ||
        D.cols() != nx() || K.cols() != nx())
      throw InvalidInput("mechanical structure: block dims");
    if (G.rows() != nx() || Bx.rows() != nx() || Cx.cols() != nx())
      throw InvalidInput("mechanical structure: G/Bx/Cx dims");
  }

  /// First-order descriptor form with state [x; v; l], index 3:
  ///   [I 0 0]        [0    I   0 ] [x]   [0 ]
  ///   [0 M 0] z' =   [-K  -D  -G ] [v] + [Bx] u,   0 = G^T x,  y = Cx x.
  ParametricDaeSystem assemble_index3() const {
    validate();
    const Eigen::Index n = nx(), Q = q(), N = 2 * n + Q;
    std::vector<AffineTerm> Eterms, Aterms;
    {
      // Identity block is parameter independent; M(mu) fills the v-row.
      bool first = true;
      for (const auto& t : M.terms()) {
        std::vector<Triplet> trip;
        if (first) {
          for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
          first = false;
        }
        detail::add_block(trip, t.matrix, 1.0, n, n);
        Eterms.push_back({t.theta, detail::from_blocks(N, N, std::move(trip)), {}});
      }
    }
    {
      // Constant part of A carries the identity coupling and the constraint.
      std::vector<Triplet> trip;
      for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, n + i, 1.0);
      detail::add_block(trip, G, -1.0, n, 2 * n);
      detail::add_block(trip, SpMat(G.transpose()), 1.0, 2 * n, 0);
      detail::add_block(trip, K.terms()[0].matrix, -1.0, n, 0);
      detail::add_block(trip, D.terms()[0].matrix, -1.0, n, n);
      Aterms.push_back(
          {ThetaExpr::one(), detail::from_blocks(N, N, std::move(trip)), {}});
      for (std::size_t k = 1; k < K.terms().size(); ++k) {
        std::vector<Triplet> tr;
        detail::add_block(tr, K.terms()[k].matrix, -1.0, n, 0);
        Aterms.push_back(
            {K.terms()[k].theta, detail::from_blocks(N, N, std::move(tr)), {}});
      }
      for (std::size_t k = 1; k < D.terms().size(); ++k) {
        std::vector<Triplet> tr;
        detail::add_block(tr, D.terms()[k].matrix, -1.0, n, n);
        Aterms.push_back(
            {D.terms()[k].theta, detail::from_blocks(N, N, std::move(tr)), {}});
      }
    }
    Mat B = Mat::Zero(N, m());
    B.block(n, 0, n, m()) = Bx;
    Mat C = Mat::Zero(p(), N);
    C.block(0, 0, p(), n) = Cx;

    ParametricDaeSystem sys;
    sys.E = AffineMatrixOperator(N, N, std::move(Eterms));
    sys.A = AffineMatrixOperator(N, N, std::move(Aterms));
    sys.B = AffineMatrixOperator::constant(B.sparseView());
    sys.C = AffineMatrixOperator::constant(C.sparseView());
    sys.box = box;
    sys.info = {SystemKind::kMechanical, 2 * n, Q, 3};
    sys.validate();
    return sys;
  }
};

/// Scalar coefficient gamma(mu) <= lambda_min(D) / (lambda_max(M) +
/// (1/4) lambda_max(D)^2 lambda_max(K^-1)) under which the first-order
/// companion form below is strictly dissipative.
enum class GammaEstimate { kEigenvalueExact, kThetaTermwise };

inline double gamma_bound(const MechanicalStructure& mech, ParamView mu,
                          GammaEstimate kind = GammaEstimate::kEigenvalueExact) {
  if (kind == GammaEstimate::kEigenvalueExact) {
    const double dmin = sym_lambda_min(mech.D.evaluate(mu));
    const double dmax = sym_lambda_max(mech.D.evaluate(mu));
    const double mmax = sym_lambda_max(mech.M.evaluate(mu));
    const double kmin = sym_lambda_min(mech.K.evaluate(mu));
    if (dmin <= 0 || kmin <= 0)
      throw DefinitenessError("gamma bound: D or K not positive definite");
    return dmin / (mmax + 0.25 * dmax * dmax / kmin);
  }
  // Termwise estimate: eigenvalue sums over the affine terms with
  // nonnegative coefficients bound the exact extremes from the safe side.
  auto term_bounds = [&](const AffineMatrixOperator& op) {
    double lo = 0.0, hi = 0.0;
    const auto th = op.theta_values(mu);
    for (std::size_t k = 0; k < op.terms().size(); ++k) {
      if (th[k] < 0)
        throw InvalidInput("gamma bound: negative coefficient in Theta sum");
      if (th[k] == 0.0) continue;
      const auto [tlo, thi] = sym_extremal_eigenvalues(op.terms()[k].matrix);
      lo += th[k] * tlo;
      hi += th[k] * thi;
    }
    return std::pair<double, double>(lo, hi);
  };
  const auto [dlo, dhi] = term_bounds(mech.D);
  const auto [mlo, mhi] = term_bounds(mech.M);
  (void)mlo;
  const auto [klo, khi] = term_bounds(mech.K);
  (void)khi;
  if (dlo <= 0 || klo <= 0)
    throw DefinitenessError("gamma bound: termwise estimate not positive");
  return dlo / (mhi + 0.25 * dhi * dhi / klo);
}

struct SdRealizationOptions {
  // constant gamma over the box (keeps the affine structure) or gamma(mu)
  // attached through callback coefficients.
  bool constant_gamma = true;
  double safety = 0.95;
  int grid_per_dim = 10;
  GammaEstimate estimate = GammaEstimate::kThetaTermwise;
  std::optional<double> explicit_gamma;  // overrides everything when set
};

namespace detail {

inline void gamma_grid_min(const MechanicalStructure& mech,
                           GammaEstimate kind, int per_dim, double& gmin) {
  const int d = mech.box.dim();
  std::vector<int> idx(d, 0);
  std::vector<double> mu(d);
  while (true) {
    for (int i = 0; i < d; ++i) {
      const auto& b = mech.box.bounds[i];
      mu[i] = per_dim == 1
                  ? 0.5 * (b[0] + b[1])
                  : b[0] + (b[1] - b[0]) * idx[i] / double(per_dim - 1);
    }
    gmin = std::min(gmin, gamma_bound(mech, mu, kind));
    int j = 0;
    for (; j < d; ++j) {
      if (++idx[j] < per_dim) break;
      idx[j] = 0;
    }
    if (j == d) break;
  }
}

}  // namespace detail

/// Result of the first-order strictly dissipative companion construction.
struct SdRealization {
  StokesStructure stokes;
  double gamma = 0.0;      // the constant actually used (constant mode)
  bool constant_gamma = true;
};

/// Companion form of the constrained mechanical system with state [x; x']:
///
///   E = [K  gM; gM  M],  A = [-gK  K-gD; -K  -D+gM],  B = [g Bx; Bx],
///   constraints blkdiag(G, G), outputs [Cx 0].
///
/// For admissible gamma the pair (E, A) is spd / strictly dissipative, which
/// downstream solvers and bounds rely on. Column scaling of the constraint
/// blocks drops out of every projector and of the transfer function, so the
/// constraint matrix keeps the gamma-free form blkdiag(G, G).
inline SdRealization first_order_sd_realization(
    const MechanicalStructure& mech, const SdRealizationOptions& opt = {}) {
  mech.validate();
  const Eigen::Index n = mech.nx(), Q = mech.q();

  double gamma_const = 0.0;
  std::function<double(ParamView)> gamma_fn;
  if (opt.explicit_gamma) {
    gamma_const = *opt.explicit_gamma;
    if (gamma_const <= 0) throw InvalidInput("sd realization: gamma <= 0");
  } else if (opt.constant_gamma) {
    double gmin = std::numeric_limits<double>::infinity();
    detail::gamma_grid_min(mech, opt.estimate, opt.grid_per_dim, gmin);
    gamma_const = opt.safety * gmin;
    if (!(gamma_const > 0))
      throw DefinitenessError("sd realization: no positive gamma on the grid");
  } else {
    const double safety = opt.safety;
    const GammaEstimate kind = opt.estimate;
    const MechanicalStructure mcopy = mech;
    gamma_fn = [mcopy, safety, kind](ParamView mu) {
      return safety * gamma_bound(mcopy, mu, kind);
    };
  }

  const bool cg = opt.constant_gamma || opt.explicit_gamma.has_value();
  auto gamma_theta = [&](const ThetaExpr& th, const char* tag) -> ThetaExpr {
    if (cg) return ThetaExpr::scale(gamma_const, th);
    auto fn = gamma_fn;
    ThetaExpr base = th;
    return ThetaExpr::callback(
        [fn, base](ParamView mu) { return fn(mu) * base(mu); },
        std::string("gamma*") + tag);
  };

  std::vector<AffineTerm> Eterms, Aterms;
  const Eigen::Index n2 = 2 * n;
  // K terms: E gets [[K_k,0],[0,0]]; A gets gamma*[[-K_k,0],[0,0]] and
  // [[0,K_k],[-K_k,0]].
  for (std::size_t k = 0; k < mech.K.terms().size(); ++k) {
    const auto& t = mech.K.terms()[k];
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, 1.0, 0, 0);
      Eterms.push_back({t.theta, detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, -1.0, 0, 0);
      Aterms.push_back(
          {gamma_theta(t.theta, "K"), detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, 1.0, 0, n);
      detail::add_block(tr, t.matrix, -1.0, n, 0);
      Aterms.push_back({t.theta, detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
  }
  // M terms: E gets gamma*[[0,M_k],[M_k,0]] and [[0,0],[0,M_k]];
  // A gets gamma*[[0,0],[0,M_k]].
  for (const auto& t : mech.M.terms()) {
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, 1.0, 0, n);
      detail::add_block(tr, t.matrix, 1.0, n, 0);
      Eterms.push_back(
          {gamma_theta(t.theta, "M"), detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, 1.0, n, n);
      Eterms.push_back({t.theta, detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, 1.0, n, n);
      Aterms.push_back(
          {gamma_theta(t.theta, "M"), detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
  }
  // D terms: A gets gamma*[[0,-D_k],[0,0]] and [[0,0],[0,-D_k]].
  for (const auto& t : mech.D.terms()) {
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, -1.0, 0, n);
      Aterms.push_back(
          {gamma_theta(t.theta, "D"), detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
    {
      std::vector<Triplet> tr;
      detail::add_block(tr, t.matrix, -1.0, n, n);
      Aterms.push_back({t.theta, detail::from_blocks(n2, n2, std::move(tr)), {}});
    }
  }

  // Term 0 must stay the literal-one coefficient: merge all literal-one
  // entries into a single leading term.
  auto normalize = [&](std::vector<AffineTerm>& terms) {
    SpMat M0(n2, n2);
    std::vector<AffineTerm> rest;
    for (auto& t : terms) {
      if (t.theta.is_literal_one())
        M0 = M0 + t.matrix;
      else
        rest.push_back(std::move(t));
    }
    std::vector<AffineTerm> out;
    out.push_back({ThetaExpr::one(), M0, {}});
    for (auto& t : rest) out.push_back(std::move(t));
    return out;
  };
  Eterms = normalize(Eterms);
  Aterms = normalize(Aterms);

  // Constraint blkdiag(G, G); any column scaling is immaterial.
  std::vector<Triplet> gt;
  detail::add_block(gt, mech.G, 1.0, 0, 0);
  detail::add_block(gt, mech.G, 1.0, n, Q);
  SpMat Ghat = detail::from_blocks(n2, 2 * Q, std::move(gt));

  // Input [gamma Bx; Bx]: in constant mode one constant term; otherwise the
  // gamma-weighted top block gets a callback coefficient.
  std::vector<AffineTerm> Bterms;
  if (cg) {
    Mat Bfull(n2, mech.m());
    Bfull.topRows(n) = gamma_const * mech.Bx;
    Bfull.bottomRows(n) = mech.Bx;
    Bterms.push_back({ThetaExpr::one(), Bfull.sparseView(), {}});
  } else {
    Mat Blow = Mat::Zero(n2, mech.m());
    Blow.bottomRows(n) = mech.Bx;
    Bterms.push_back({ThetaExpr::one(), Blow.sparseView(), {}});
    Mat Btop = Mat::Zero(n2, mech.m());
    Btop.topRows(n) = mech.Bx;
    auto fn = gamma_fn;
    Bterms.push_back({ThetaExpr::callback([fn](ParamView mu) { return fn(mu); },
                                          "gamma"),
                      Btop.sparseView(), {}});
  }

  Mat C1 = Mat::Zero(mech.p(), n2);
  C1.leftCols(n) = mech.Cx;

  SdRealization out;
  out.stokes.E = AffineMatrixOperator(n2, n2, std::move(Eterms));
  out.stokes.A = AffineMatrixOperator(n2, n2, std::move(Aterms));
  out.stokes.G = std::move(Ghat);
  out.stokes.B1 = AffineMatrixOperator(n2, mech.m(), std::move(Bterms));
  out.stokes.B2 = Mat::Zero(2 * Q, mech.m());
  out.stokes.C1 = std::move(C1);
  out.stokes.C2 = Mat::Zero(mech.p(), 2 * Q);
  out.stokes.box = mech.box;
  out.stokes.a_symmetric = false;
  out.gamma = cg ? gamma_const : 0.0;
  out.constant_gamma = cg;
  return out;
}

namespace detail {

inline SpMat sparse_block(const SpMat& M, Eigen::Index i, Eigen::Index j,
                          Eigen::Index r, Eigen::Index c) {
  return SpMat(M.block(i, j, r, c));
}

inline bool term_symmetric(const SpMat& M) {
  const double scale = std::max(1.0, M.norm());
  return SpMat(M - SpMat(M.transpose())).norm() <= 1e-13 * scale;
}

}  // namespace detail

/// Recovers the saddle-point block structure from an assembled system using
/// its kind tag. Inverse of StokesStructure::assemble up to the symmetry
/// flag, which is re-detected numerically.
inline StokesStructure stokes_structure_from_system(
    const ParametricDaeSystem& sys) {
  if (sys.info.kind != SystemKind::kStokesLike)
    throw InvalidInput("structure: system is not tagged stokes_like");
  const Eigen::Index n = sys.info.n, q = sys.info.q;
  if (n + q != sys.order() || n <= 0 || q < 0)
    throw InvalidInput("structure: saddle block sizes do not add up");
  StokesStructure st;
  bool sym = true;
  // Saddle-sized low-rank factors shrink back to the (1,1) block; their
  // constraint rows must be zero for the factorization to survive the cut.
  auto unpad = [&](const std::optional<LowRankPair>& lr)
      -> std::optional<LowRankPair> {
    if (!lr || lr->U.rows() == n) return lr;
    if (lr->U.bottomRows(q).norm() != 0.0 || lr->V.bottomRows(q).norm() != 0.0)
      throw InvalidInput("structure: low-rank factor touches constraint rows");
    LowRankPair blk;
    blk.U = lr->U.topRows(n);
    blk.V = lr->V.topRows(n);
    return blk;
  };
  {
    std::vector<AffineTerm> terms;
    for (const auto& t : sys.E.terms()) {
      SpMat blk = detail::sparse_block(t.matrix, 0, 0, n, n);
      if (blk.nonZeros() != t.matrix.nonZeros())
        throw InvalidInput("structure: E term leaks outside the (1,1) block");
      sym = sym && detail::term_symmetric(blk);
      terms.push_back({t.theta, std::move(blk), unpad(t.lowrank)});
    }
    st.E = AffineMatrixOperator(n, n, std::move(terms));
  }
  {
    std::vector<AffineTerm> terms;
    bool first = true;
    for (const auto& t : sys.A.terms()) {
      SpMat blk = detail::sparse_block(t.matrix, 0, 0, n, n);
      if (first) {
        st.G = detail::sparse_block(t.matrix, 0, n, n, q);
        const SpMat Gt = detail::sparse_block(t.matrix, n, 0, q, n);
        if (SpMat(Gt - SpMat(st.G.transpose())).norm() > 1e-13 * st.G.norm())
          throw InvalidInput("structure: constraint blocks not transposes");
        if (detail::sparse_block(t.matrix, n, n, q, q).nonZeros() != 0)
          throw InvalidInput("structure: saddle (2,2) block must vanish");
        first = false;
      } else if (blk.nonZeros() != t.matrix.nonZeros()) {
        throw InvalidInput(
            "structure: parametric A term leaks outside the (1,1) block");
      }
      sym = sym && detail::term_symmetric(blk);
      terms.push_back({t.theta, std::move(blk), unpad(t.lowrank)});
    }
    st.A = AffineMatrixOperator(n, n, std::move(terms));
  }
  {
    std::vector<AffineTerm> terms;
    bool first = true;
    for (const auto& t : sys.B.terms()) {
      const Mat full(t.matrix);
      if (first) {
        st.B2 = full.bottomRows(q);
        first = false;
      } else if (full.bottomRows(q).norm() != 0.0) {
        throw InvalidInput("structure: parametric B term touches B2");
      }
      terms.push_back({t.theta, full.topRows(n).sparseView(), std::nullopt});
    }
    st.B1 = AffineMatrixOperator(n, sys.inputs(), std::move(terms));
  }
  if (sys.C.term_count() != 1)
    throw InvalidInput("structure: saddle systems carry a constant C");
  const Mat C(sys.C.terms()[0].matrix);
  st.C1 = C.leftCols(n);
  st.C2 = C.rightCols(q);
  st.box = sys.box;
  st.a_symmetric = sym;
  st.validate();
  return st;
}

/// Recovers the second-order blocks of an index-3 mechanical system.
/// Inverse of MechanicalStructure::assemble_index3.
inline MechanicalStructure mechanical_structure_from_system(
    const ParametricDaeSystem& sys) {
  if (sys.info.kind != SystemKind::kMechanical)
    throw InvalidInput("structure: system is not tagged mechanical");
  const Eigen::Index q = sys.info.q;
  if (sys.info.n % 2 != 0)
    throw InvalidInput("structure: mechanical differential block size odd");
  const Eigen::Index n = sys.info.n / 2;
  if (2 * n + q != sys.order())
    throw InvalidInput("structure: mechanical block sizes do not add up");
  MechanicalStructure mech;
  {
    std::vector<AffineTerm> terms;
    // A first-order E term mixes the velocity identity with M_k, so any
    // whole-term factorization does not restrict to the extracted block.
    for (const auto& t : sys.E.terms())
      terms.push_back(
          {t.theta, detail::sparse_block(t.matrix, n, n, n, n), std::nullopt});
    mech.M = AffineMatrixOperator(n, n, std::move(terms));
  }
  {
    std::vector<AffineTerm> kt, dt;
    bool first = true;
    for (const auto& t : sys.A.terms()) {
      SpMat Kb = detail::sparse_block(t.matrix, n, 0, n, n);
      SpMat Db = detail::sparse_block(t.matrix, n, n, n, n);
      Kb = -Kb;
      Db = -Db;
      if (first) {
        mech.G = SpMat(-detail::sparse_block(t.matrix, n, 2 * n, n, q));
        kt.push_back({ThetaExpr::one(), std::move(Kb), std::nullopt});
        dt.push_back({ThetaExpr::one(), std::move(Db), std::nullopt});
        first = false;
        continue;
      }
      if (Kb.nonZeros() > 0) kt.push_back({t.theta, std::move(Kb), std::nullopt});
      if (Db.nonZeros() > 0) dt.push_back({t.theta, std::move(Db), std::nullopt});
    }
    mech.K = AffineMatrixOperator(n, n, std::move(kt));
    mech.D = AffineMatrixOperator(n, n, std::move(dt));
  }
  if (sys.B.term_count() != 1 || sys.C.term_count() != 1)
    throw InvalidInput("structure: mechanical systems carry constant B/C");
  mech.Bx = Mat(sys.B.terms()[0].matrix).middleRows(n, n);
  mech.Cx = Mat(sys.C.terms()[0].matrix).leftCols(n);
  mech.box = sys.box;
  mech.validate();
  return mech;
}

/// Dissipativity spot check at one parameter: E(mu) must admit a Cholesky
/// factorization and the symmetric part of A(mu) must be negative
/// semidefinite up to rounding (strictly negative away from degenerate
/// gamma choices).
inline void check_strict_dissipativity(const StokesStructure& st, ParamView mu,
                                       double* lambda_max_out = nullptr) {
  const SpMat E = st.E.evaluate(mu);
  Eigen::SimplicialLLT<SpMat> llt(E);
  if (llt.info() != Eigen::Success)
    throw DefinitenessError("dissipativity: E(mu) not positive definite");
  const SpMat A = st.A.evaluate(mu);
  SpMat As = 0.5 * (A + SpMat(A.transpose()));
  const double lmax = sym_lambda_max(As);
  if (lambda_max_out) *lambda_max_out = lmax;
  const double scale = As.coeffs().size() ? As.norm() : 1.0;
  if (lmax > 1e-12 * std::max(1.0, scale))
    throw DefinitenessError(
        "dissipativity: symmetric part of A(mu) not negative semidefinite");
}

}  // namespace daemor

#endif  // DAEMOR_STRUCTURES_HPP
