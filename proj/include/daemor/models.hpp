// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_MODELS_HPP
#define DAEMOR_MODELS_HPP

#include <cmath>
#include <vector>

#include "daemor/structures.hpp"

namespace daemor {

enum class StokesVariant { kProperOnly, kImproperVariant };

/// Staggered-grid Stokes on the unit square. `resolution` is the cell count
/// per axis; velocity unknowns n = 2*resolution*(resolution-1), pressure
/// unknowns q = resolution^2 - 1 after removing the constant mode.
struct StokesConfig {
  int resolution = 5;
  ParamBox viscosity_box{{{0.5, 1.5}}};
  StokesVariant variant = StokesVariant::kProperOnly;
  bool parametric_input = false;  // B1(mu) = (1 + mu) B1
};

struct StokesModel {
  StokesStructure structure;
  ParametricDaeSystem system;
  int resolution = 0;
  // index bookkeeping recorded for bundle metadata
  Eigen::Index b2_row = -1;
  Eigen::Index c2_first = -1, c2_last = -1;
};

namespace detail {

struct MacGrid {
  int N;
  double h;
  Eigen::Index nu, nv, n, q;
  Eigen::Index u(int i, int j) const {  // i in [1,N-1], j in [0,N-1]
    return static_cast<Eigen::Index>(i - 1) * N + j;
  }
  Eigen::Index v(int i, int j) const {  // i in [0,N-1], j in [1,N-1]
    return nu + static_cast<Eigen::Index>(i) * (N - 1) + (j - 1);
  }
  // cell (cx, cy); the last cell (N-1, N-1) is the removed constant mode
  Eigen::Index cell(int cx, int cy) const {
    const Eigen::Index k = static_cast<Eigen::Index>(cx) * N + cy;
    return k == q ? -1 : k;
  }
};

/// Five-point Laplacian on one velocity component. Neighbors across the
/// normal walls are genuine grid points carrying the no-slip zero and drop
/// out; tangential walls sit half a spacing away and enter through ghost
/// reflection, which only deepens the diagonal. The result is symmetric
/// negative definite.
inline void velocity_laplacian(const MacGrid& g, bool xcomp,
                               std::vector<Triplet>& trip) {
  const double w = 1.0 / (g.h * g.h);
  const int ni = xcomp ? g.N - 1 : g.N;  // normal-direction index range
  const int nj = xcomp ? g.N : g.N - 1;
  for (int a = 0; a < ni; ++a) {
    for (int b = 0; b < nj; ++b) {
      const int i = xcomp ? a + 1 : a;
      const int j = xcomp ? b : b + 1;
      const Eigen::Index row = xcomp ? g.u(i, j) : g.v(i, j);
      double diag = -4.0 * w;
      auto neighbor = [&](int di, int dj) {
        const int pi = i + di, pj = j + dj;
        const bool normal = xcomp ? dj == 0 : di == 0;
        if (normal) {
          const int lo = 1, hi = g.N - 1;
          const int c = xcomp ? pi : pj;
          if (c < lo || c > hi) return;  // no-slip wall point
        } else {
          const int c = xcomp ? pj : pi;
          if (c < 0 || c > g.N - 1) {
            diag -= w;  // ghost reflection across the tangential wall
            return;
          }
        }
        trip.emplace_back(row, xcomp ? g.u(pi, pj) : g.v(pi, pj), w);
      };
      neighbor(1, 0);
      neighbor(-1, 0);
      neighbor(0, 1);
      neighbor(0, -1);
      trip.emplace_back(row, row, diag);
    }
  }
}

}  // namespace detail

/// Finite-difference Stokes generator. E = I on velocities, A(mu) = mu * L
/// with L the discrete vector Laplacian, G the discrete gradient with the
/// constant pressure mode removed. Deterministic in the config.
inline StokesModel make_stokes(const StokesConfig& cfg) {
  if (cfg.resolution < 2) throw InvalidInput("stokes: resolution must be >= 2");
  if (cfg.viscosity_box.dim() != 1 || cfg.viscosity_box.bounds[0][0] <= 0)
    throw InvalidInput("stokes: viscosity box must be 1d within (0, inf)");
  detail::MacGrid g;
  g.N = cfg.resolution;
  g.h = 1.0 / g.N;
  g.nu = static_cast<Eigen::Index>(g.N - 1) * g.N;
  g.nv = static_cast<Eigen::Index>(g.N) * (g.N - 1);
  g.n = g.nu + g.nv;
  g.q = static_cast<Eigen::Index>(g.N) * g.N - 1;

  std::vector<Triplet> lap;
  detail::velocity_laplacian(g, true, lap);
  detail::velocity_laplacian(g, false, lap);
  SpMat L = detail::from_blocks(g.n, g.n, std::move(lap));

  // Gradient columns: (G p)(u(i,j)) = (p(i-1,j) - p(i,j)) / h, and the
  // divergence constraint is its transpose.
  std::vector<Triplet> grad;
  const double gh = 1.0 / g.h;
  for (int i = 1; i <= g.N - 1; ++i)
    for (int j = 0; j < g.N; ++j) {
      const Eigen::Index row = g.u(i, j);
      if (const auto c = g.cell(i - 1, j); c >= 0) grad.emplace_back(row, c, gh);
      if (const auto c = g.cell(i, j); c >= 0) grad.emplace_back(row, c, -gh);
    }
  for (int i = 0; i < g.N; ++i)
    for (int j = 1; j <= g.N - 1; ++j) {
      const Eigen::Index row = g.v(i, j);
      if (const auto c = g.cell(i, j - 1); c >= 0) grad.emplace_back(row, c, gh);
      if (const auto c = g.cell(i, j); c >= 0) grad.emplace_back(row, c, -gh);
    }
  SpMat G = detail::from_blocks(g.n, g.q, std::move(grad));

  // Smooth body-force columns, projected onto the discretely divergence-free
  // subspace: incompressible forcing keeps the algebraic variables quiet, so
  // the improper Gramian vanishes exactly when B2 = 0.
  const bool improper = cfg.variant == StokesVariant::kImproperVariant;
  const Eigen::Index m = improper ? 1 : 2;
  Mat B1 = Mat::Zero(g.n, m);
  for (int i = 1; i <= g.N - 1; ++i)
    for (int j = 0; j < g.N; ++j)
      B1(g.u(i, j), 0) =
          std::sin(M_PI * i * g.h) * std::sin(M_PI * (j + 0.5) * g.h);
  if (!improper)
    for (int i = 0; i < g.N; ++i)
      for (int j = 1; j <= g.N - 1; ++j)
        B1(g.v(i, j), 1) =
            std::sin(M_PI * (i + 0.5) * g.h) * std::sin(M_PI * j * g.h);
  {
    const Mat Gd(G);
    B1 -= Gd * (Gd.transpose() * Gd).llt().solve(Gd.transpose() * B1);
  }

  const Eigen::Index p = improper ? 1 : 2;
  Mat C1 = Mat::Zero(p, g.n);
  C1(0, g.u(g.N / 2, g.N / 2)) = 1.0;
  if (!improper) C1(1, g.v(g.N / 2, g.N / 2)) = 1.0;

  StokesModel out;
  out.resolution = g.N;
  StokesStructure& st = out.structure;
  {
    std::vector<Triplet> eye;
    for (Eigen::Index i = 0; i < g.n; ++i) eye.emplace_back(i, i, 1.0);
    st.E = AffineMatrixOperator::constant(
        detail::from_blocks(g.n, g.n, std::move(eye)));
  }
  st.A = AffineMatrixOperator(
      g.n, g.n,
      {AffineTerm{ThetaExpr::one(), SpMat(g.n, g.n), {}},
       AffineTerm{ThetaExpr::coordinate(0), L, {}}});
  st.G = G;
  if (cfg.parametric_input)
    st.B1 = AffineMatrixOperator(
        g.n, m,
        {AffineTerm{ThetaExpr::one(), B1.sparseView(), {}},
         AffineTerm{ThetaExpr::coordinate(0), B1.sparseView(), {}}});
  else
    st.B1 = AffineMatrixOperator::constant(B1.sparseView());
  st.B2 = Mat::Zero(g.q, m);
  st.C2 = Mat::Zero(p, g.q);
  if (improper) {
    st.B2(g.q - 1, 0) = 1.0;
    st.C2(0, 0) = 1.0;
    st.C2(0, g.q - 1) = 1.0;
    out.b2_row = g.q - 1;
    out.c2_first = 0;
    out.c2_last = g.q - 1;
  }
  st.C1 = C1;
  st.box = cfg.viscosity_box;
  st.a_symmetric = true;
  st.validate();
  out.system = st.assemble();
  return out;
}

/// Three damped mass chains coupled to one terminal mass, displacement
/// constrained between the first and the terminal mass. Parameters scale the
/// per-chain external dampers.
struct TripleChainConfig {
  int ell = 20;
  double m1 = 1, m2 = 2, m3 = 3, m0 = 10;
  double k1 = 10, k2 = 20, k3 = 1, k0 = 50;
  double rayleigh_alpha = 0.02, rayleigh_beta = 0.02;
  ParamBox box{{{0.1, 1.0}, {0.1, 1.0}, {0.1, 1.0}}};

  void validate() const {
    if (ell < 1) throw InvalidInput("triple chain: ell must be >= 1");
    for (double v : {m1, m2, m3, m0, k1, k2, k3, k0, rayleigh_alpha,
                     rayleigh_beta})
      if (v <= 0) throw InvalidInput("triple chain: parameters must be positive");
    if (box.dim() != 3) throw InvalidInput("triple chain: box must be 3d");
  }
};

struct TripleChainModel {
  MechanicalStructure mechanical;
  ParametricDaeSystem system;  // index-3 descriptor form
  Eigen::Index input_row = -1;
};

inline TripleChainModel make_triple_chain(const TripleChainConfig& cfg) {
  cfg.validate();
  const Eigen::Index l = cfg.ell, n = 3 * l + 1;
  const double km[3] = {cfg.k1, cfg.k2, cfg.k3};
  const double mm[3] = {cfg.m1, cfg.m2, cfg.m3};

  std::vector<Triplet> mt, kt;
  for (int c = 0; c < 3; ++c)
    for (Eigen::Index i = 0; i < l; ++i) mt.emplace_back(c * l + i, c * l + i, mm[c]);
  mt.emplace_back(n - 1, n - 1, cfg.m0);

  // Per-chain tridiagonal stiffness, coupling column into the terminal mass.
  for (int c = 0; c < 3; ++c) {
    const Eigen::Index o = c * l;
    for (Eigen::Index i = 0; i < l; ++i) {
      kt.emplace_back(o + i, o + i, 2.0 * km[c]);
      if (i + 1 < l) {
        kt.emplace_back(o + i, o + i + 1, -km[c]);
        kt.emplace_back(o + i + 1, o + i, -km[c]);
      }
    }
    kt.emplace_back(o + l - 1, n - 1, -km[c]);
    kt.emplace_back(n - 1, o + l - 1, -km[c]);
  }
  kt.emplace_back(n - 1, n - 1, cfg.k1 + cfg.k2 + cfg.k3 + cfg.k0);

  SpMat M = detail::from_blocks(n, n, std::move(mt));
  SpMat K = detail::from_blocks(n, n, std::move(kt));

  auto chain_selector = [&](int c) {
    std::vector<Triplet> tr;
    for (Eigen::Index i = 0; i < l; ++i) tr.emplace_back(c * l + i, c * l + i, 1.0);
    return detail::from_blocks(n, n, std::move(tr));
  };
  std::vector<Triplet> f4t;
  f4t.emplace_back(n - 1, n - 1, 1.0);
  SpMat F4 = detail::from_blocks(n, n, std::move(f4t));
  SpMat Dint = SpMat(cfg.rayleigh_alpha * M) + SpMat(cfg.rayleigh_beta * K);

  TripleChainModel out;
  MechanicalStructure& mech = out.mechanical;
  mech.M = AffineMatrixOperator::constant(M);
  mech.K = AffineMatrixOperator::constant(K);
  mech.D = AffineMatrixOperator(
      n, n,
      {AffineTerm{ThetaExpr::one(), SpMat(Dint + F4), {}},
       AffineTerm{ThetaExpr::coordinate(0), chain_selector(0), {}},
       AffineTerm{ThetaExpr::coordinate(1), chain_selector(1), {}},
       AffineTerm{ThetaExpr::coordinate(2), chain_selector(2), {}}});
  {
    std::vector<Triplet> gt;
    gt.emplace_back(0, 0, 1.0);
    gt.emplace_back(n - 1, 0, -1.0);
    mech.G = detail::from_blocks(n, 1, std::move(gt));
  }
  // Input location scales the reference chain's choice proportionally.
  out.input_row =
      static_cast<Eigen::Index>(std::lround(450.0 / 601.0 * n)) - 1;
  mech.Bx = Mat::Zero(n, 1);
  mech.Bx(out.input_row, 0) = 1.0;
  mech.Cx = mech.Bx.transpose();
  mech.box = cfg.box;
  mech.validate();
  out.system = mech.assemble_index3();
  return out;
}

}  // namespace daemor

#endif  // DAEMOR_MODELS_HPP
