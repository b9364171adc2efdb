// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_CORE_HPP
#define DAEMOR_CORE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "daemor/errors.hpp"

namespace daemor {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<double>;
using CSpMat = Eigen::SparseMatrix<std::complex<double>>;
using Triplet = Eigen::Triplet<double>;
using Complex = std::complex<double>;

using ParamView = std::span<const double>;

/// Closed box in parameter space; one [lo, hi] pair per coordinate.
struct ParamBox {
  std::vector<std::array<double, 2>> bounds;

  int dim() const { return static_cast<int>(bounds.size()); }

  bool contains(ParamView mu, double slack = 1e-12) const {
    if (mu.size() != bounds.size()) return false;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const double w = std::max(1.0, bounds[i][1] - bounds[i][0]);
      if (mu[i] < bounds[i][0] - slack * w || mu[i] > bounds[i][1] + slack * w)
        return false;
    }
    return true;
  }

  std::vector<double> midpoint() const {
    std::vector<double> m(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i)
      m[i] = 0.5 * (bounds[i][0] + bounds[i][1]);
    return m;
  }
};

/// Orthonormalize the columns of X by column-pivoted QR, dropping columns
/// whose pivot falls below drop_tol times the largest pivot.
inline Mat orth(const Mat& X, double drop_tol = 1e-12) {
  if (X.cols() == 0 || X.rows() == 0) return Mat(X.rows(), 0);
  Eigen::ColPivHouseholderQR<Mat> qr(X);
  const Mat R = qr.matrixR();
  const double dmax = std::abs(R(0, 0));
  if (dmax == 0.0) return Mat(X.rows(), 0);
  Eigen::Index rank = 0;
  const Eigen::Index kmax = std::min(X.rows(), X.cols());
  for (Eigen::Index k = 0; k < kmax; ++k)
    if (std::abs(R(k, k)) > drop_tol * dmax) ++rank;
  Mat Q = qr.householderQ() * Mat::Identity(X.rows(), rank);
  return Q;
}

/// Real factor with the same outer product as the complex factor Z:
/// [Re Z, Im Z] satisfies R R^T = Re(Z Z^H), exact when the column set is
/// closed under conjugation.
inline Mat realify(const CMat& Z) {
  Mat R(Z.rows(), 2 * Z.cols());
  R << Z.real(), Z.imag();
  return R;
}

/// Relative spectral-ish scale used in tolerance checks.
inline double frob_or_one(const Mat& M) {
  const double f = M.norm();
  return f > 0 ? f : 1.0;
}

/// Column-sum (induced 1-) norm of a sparse matrix.
inline double mat1_norm(const SpMat& M) {
  double best = 0;
  for (int k = 0; k < M.outerSize(); ++k) {
    double col = 0;
    for (SpMat::InnerIterator it(M, k); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

}  // namespace daemor

#endif  // DAEMOR_CORE_HPP
