// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SHIFTS_HPP
#define DAEMOR_SHIFTS_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "daemor/core.hpp"
#include "daemor/counters.hpp"
#include "daemor/errors.hpp"
#include "daemor/projectors.hpp"

namespace daemor {

/// Jacobi dn(u, k) by the descending Landen (AGM) recursion.
inline double jacobi_dn(double u, double k) {
  if (!(k >= 0.0 && k < 1.0)) throw InvalidInput("jacobi_dn: need 0 <= k < 1");
  if (k < 1e-14) return 1.0;
  constexpr int kMax = 32;
  double a[kMax], c[kMax];
  a[0] = 1.0;
  c[0] = k;
  double b = std::sqrt(1.0 - k * k);
  int n = 0;
  while (c[n] > 1e-16 * a[n] && n + 1 < kMax) {
    const double an = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    a[n + 1] = an;
    ++n;
  }
  if (n == 0) return 1.0;
  double phi = std::ldexp(a[n] * u, n);
  for (int i = n; i > 0; --i)
    phi = 0.5 * (phi + std::asin(std::clamp(c[i] / a[i] * std::sin(phi),
                                            -1.0, 1.0)));
  // dn = sqrt(1 - k^2 sn^2) stays well conditioned at u -> K, where the
  // classical quotient form cos(phi_0)/cos(phi_1 - phi_0) degenerates.
  const double sn = std::sin(phi);
  return std::sqrt(std::max((1.0 - k * sn) * (1.0 + k * sn), 0.0));
}

/// Minimax shift magnitudes for a symmetric spectrum enclosed in [a, b],
/// 0 < a <= b (Wachspress elliptic-function parameters). Returned values
/// are positive; the caller negates for stable pencils. For num == 1 this
/// reduces to sqrt(a b).
inline std::vector<double> elliptic_shift_magnitudes(double a, double b,
                                                     int num) {
  if (!(a > 0) || !(b >= a)) throw InvalidInput("elliptic shifts: need 0 < a <= b");
  if (num < 1) throw InvalidInput("elliptic shifts: need num >= 1");
  std::vector<double> s(static_cast<std::size_t>(num));
  if (b / a < 1.0 + 1e-12) {
    std::fill(s.begin(), s.end(), std::sqrt(a * b));
    return s;
  }
  const double kp = a / b;
  const double k = std::sqrt((1.0 - kp) * (1.0 + kp));
  const double K = std::comp_ellint_1(k);
  for (int j = 1; j <= num; ++j) {
    const double u = (2.0 * j - 1.0) * K / (2.0 * num);
    s[static_cast<std::size_t>(j - 1)] = a / jacobi_dn(u, k);
  }
  return s;
}

/// Number of elliptic shifts predicted to reach `tol` for condition b/a,
/// from the classical rate estimate rho ~ 4 exp(-pi^2 J / log(4 b/a)).
inline int elliptic_shift_count(double a, double b, double tol,
                                int max_num = 40) {
  const double kappa = std::max(b / a, 1.0 + 1e-12);
  const double J =
      std::log(4.0 / tol) * std::log(4.0 * kappa) / (M_PI * M_PI);
  return std::clamp(static_cast<int>(std::ceil(J)), 1, max_num);
}

namespace detail {

/// Arnoldi Ritz values of a linear operator restricted to the projected
/// subspace. op must map the subspace into itself.
inline std::vector<Complex> arnoldi_ritz(
    const std::function<Vec(const Vec&)>& op, Eigen::Index n, int steps,
    unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist;
  Vec v0(n);
  for (Eigen::Index i = 0; i < n; ++i) v0(i) = dist(rng);
  v0 = op(v0);  // push the start vector into the invariant subspace
  if (v0.norm() < 1e-300) return {};
  v0.normalize();
  const int m = std::min<int>(steps, static_cast<int>(n));
  Mat V(n, m + 1);
  Mat H = Mat::Zero(m + 1, m);
  V.col(0) = v0;
  int j = 0;
  for (; j < m; ++j) {
    Vec w = op(V.col(j));
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) {
        const double h = V.col(i).dot(w);
        H(i, j) += h;
        w -= h * V.col(i);
      }
    const double nrm = w.norm();
    H(j + 1, j) = nrm;
    if (nrm < 1e-12) {
      ++j;
      break;
    }
    V.col(j + 1) = w / nrm;
  }
  if (j == 0) return {};
  Eigen::EigenSolver<Mat> es(H.topLeftCorner(j, j), false);
  std::vector<Complex> ritz;
  for (Eigen::Index i = 0; i < j; ++i) ritz.push_back(es.eigenvalues()(i));
  return ritz;
}

/// Greedy minimax selection over a discrete spectrum sample (Penzl's
/// heuristic). Candidates and targets are the stable Ritz values; complex
/// picks bring their conjugates along.
inline std::vector<Complex> greedy_shift_selection(
    std::vector<Complex> ritz, int num) {
  std::vector<Complex> stable;
  for (const Complex& r : ritz)
    if (r.real() < 0 && std::isfinite(r.real()) && std::isfinite(r.imag()))
      stable.push_back(r);
  if (stable.empty()) return {};
  auto factor = [](const Complex& q, const Complex& lam) {
    return std::abs(q - lam) / std::abs(std::conj(q) + lam);
  };
  // First shift: candidate minimizing the worst-case one-step factor.
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < stable.size(); ++i) {
    double worst = 0;
    for (const Complex& lam : stable)
      worst = std::max(worst, factor(stable[i], lam));
    if (worst < best_val) {
      best_val = worst;
      best = i;
    }
  }
  std::vector<Complex> shifts;
  auto push = [&shifts, num](const Complex& q) {
    shifts.push_back(q);
    if (std::abs(q.imag()) > 1e-14 * std::abs(q.real()) &&
        static_cast<int>(shifts.size()) < num)
      shifts.push_back(std::conj(q));
  };
  push(stable[best]);
  while (static_cast<int>(shifts.size()) < num) {
    // Next shift: the Ritz value where the current product is worst.
    double worst = -1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < stable.size(); ++i) {
      double prod = 1;
      for (const Complex& q : shifts) prod *= factor(q, stable[i]);
      if (prod > worst) {
        worst = prod;
        arg = i;
      }
    }
    push(stable[arg]);
    if (worst < 1e-300) break;  // sample fully annihilated
  }
  return shifts;
}

}  // namespace detail

enum class ShiftMethod { kElliptic, kGreedyRitz, kFallback };

struct ShiftOptions {
  int num = 0;          // 0: choose automatically
  double tol = 1e-12;   // target contraction for the elliptic count
  int arnoldi_forward = 24;
  int arnoldi_inverse = 12;
  unsigned seed = 7;
};

struct ShiftSet {
  std::vector<Complex> shifts;     // reversed parametrization, Re < 0
  std::vector<Complex> classical;  // eigenvalue-side values they came from
  ShiftMethod method = ShiftMethod::kFallback;
  double interval_lo = 0, interval_hi = 0;  // elliptic path only
};

/// Shift generation for the low-rank ADI sweep. The solver consumes shifts
/// p with (E + p A) factorizations; p relates to a classical eigenvalue-side
/// shift q through p = 1/conj(q), which maps the one-step contraction
/// |1 - conj(p) lambda| / |1 + p lambda| onto the familiar
/// |q - lambda| / |conj(q) + lambda|. Symmetric pencils take the elliptic
/// minimax parameters on an eigenvalue enclosure; nonsymmetric ones a greedy
/// pick over Arnoldi Ritz values of the projected pencil; a logarithmic
/// fallback ladder covers harvest failures.
inline ShiftSet compute_shifts(const StokesStructure& st,
                               const ProjectorContext& ctx,
                               const ShiftOptions& opt = {}) {
  ShiftSet out;
  const Eigen::Index n = ctx.n();
  const SpMat& A = ctx.A_block();
  const SpMat& G = ctx.G_block();

  if (st.a_symmetric) {
    double lo = 0, hi = 0;
    if (n <= 1500) {
      const PhiFactorization f = phi_factorization(ctx);
      auto [Ered, Ared] = phi_reduced_pencil(ctx, f);
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Mat(-Ared), Ered);
      if (ges.info() != Eigen::Success)
        throw ConvergenceError("shifts: reduced symmetric eigensolve failed");
      lo = ges.eigenvalues().minCoeff();
      hi = ges.eigenvalues().maxCoeff();
    } else {
      auto fwd = [&](const Vec& v) {
        return Vec(ctx.pi_small_right(ctx.solve_E(Mat(-(A * v)))));
      };
      auto ritz = detail::arnoldi_ritz(fwd, n, opt.arnoldi_forward, opt.seed);
      for (const Complex& r : ritz) {
        const double x = r.real();
        if (x <= 0) continue;
        lo = lo == 0 ? x : std::min(lo, x);
        hi = std::max(hi, x);
      }
      lo *= 0.5;  // Ritz values underestimate the enclosure
      hi *= 2.0;
    }
    if (!(lo > 0 && hi >= lo))
      throw DefinitenessError("shifts: symmetric pencil not negative definite");
    const int num = opt.num > 0 ? opt.num
                                : elliptic_shift_count(lo, hi, opt.tol);
    out.method = ShiftMethod::kElliptic;
    out.interval_lo = lo;
    out.interval_hi = hi;
    for (double s : elliptic_shift_magnitudes(lo, hi, num))
      out.classical.emplace_back(-s, 0.0);
  } else {
    auto fwd = [&](const Vec& v) {
      return Vec(ctx.pi_small_right(ctx.solve_E(Mat(A * v))));
    };
    std::vector<Complex> ritz =
        detail::arnoldi_ritz(fwd, n, opt.arnoldi_forward, opt.seed);
    if (opt.arnoldi_inverse > 0 && ctx.q() >= 0) {
      // Inverse-operator Ritz values target the small-magnitude end. The
      // pencil inverse acts through one saddle factorization
      // [A G; G^T 0] [x; y] = [E v; 0].
      const Eigen::Index q = ctx.q();
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
      Eigen::SparseLU<SpMat> slu(big);
      if (slu.info() == Eigen::Success) {
        solve_counters().shifted_full.fetch_add(1, std::memory_order_relaxed);
        const SpMat& E = ctx.E_block();
        auto inv = [&](const Vec& v) {
          Vec rhs = Vec::Zero(n + q);
          rhs.head(n) = E * v;
          Vec xy = slu.solve(rhs);
          return Vec(ctx.pi_small_right(Mat(xy.head(n))));
        };
        for (const Complex& r : detail::arnoldi_ritz(
                 inv, n, opt.arnoldi_inverse, opt.seed + 1))
          if (std::abs(r) > 1e-300) ritz.push_back(1.0 / r);
      }
    }
    const int num = opt.num > 0 ? opt.num : 20;
    out.classical = detail::greedy_shift_selection(std::move(ritz), num);
    out.method = ShiftMethod::kGreedyRitz;
  }

  if (out.classical.empty()) {
    // Log-spaced fallback ladder on a generic stable interval.
    out.method = ShiftMethod::kFallback;
    const int num = opt.num > 0 ? opt.num : 16;
    for (int j = 0; j < num; ++j) {
      const double t = num == 1 ? 0.5 : static_cast<double>(j) / (num - 1);
      out.classical.emplace_back(-std::pow(10.0, -3.0 + 6.0 * t), 0.0);
    }
  }
  for (const Complex& q : out.classical) out.shifts.push_back(1.0 / std::conj(q));
  return out;
}

}  // namespace daemor

#endif  // DAEMOR_SHIFTS_HPP
