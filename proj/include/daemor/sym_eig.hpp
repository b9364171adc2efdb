// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_SYM_EIG_HPP
#define DAEMOR_SYM_EIG_HPP

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <random>

#include "daemor/core.hpp"

namespace daemor {

/// Largest eigenvalue of a symmetric matrix by power iteration on a spectral
/// shift that makes the target dominant. Deterministic start vector.
inline double sym_lambda_max_sparse(const SpMat& M, int iters = 300,
                                    double tol = 1e-12) {
  const Eigen::Index n = M.rows();
  // Shift by a Gershgorin lower bound so the largest eigenvalue of M - cI
  // has the largest magnitude.
  double low = 0.0;
  for (int k = 0; k < M.outerSize(); ++k) {
    double diag = 0.0, off = 0.0;
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      if (it.row() == it.col())
        diag = it.value();
      else
        off += std::abs(it.value());
    }
    low = std::min(low, diag - off);
  }
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> dist;
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec w = M * v - low * v;
    const double nw = w.norm();
    if (nw == 0.0) return low;
    w /= nw;
    const double lam_new = w.dot(M * w);
    if (std::abs(lam_new - lam) <= tol * std::max(1.0, std::abs(lam_new)) &&
        it > 5) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
    v = w;
  }
  return lam;
}

/// Extremal eigenvalues of a symmetric matrix. Dense solve below the size
/// guard; power iteration (and its mirror on -M) above it.
inline std::pair<double, double> sym_extremal_eigenvalues(const SpMat& M) {
  const Eigen::Index n = M.rows();
  if (n <= 1500) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(M),
                                          Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();
    return {ev(0), ev(n - 1)};
  }
  const double lmax = sym_lambda_max_sparse(M);
  SpMat Mneg = (-M).eval();
  const double lmin = -sym_lambda_max_sparse(Mneg);
  return {lmin, lmax};
}

inline double sym_lambda_min(const SpMat& M) {
  return sym_extremal_eigenvalues(M).first;
}

inline double sym_lambda_max(const SpMat& M) {
  return sym_extremal_eigenvalues(M).second;
}

}  // namespace daemor

#endif  // DAEMOR_SYM_EIG_HPP
