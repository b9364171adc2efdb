// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_AFFINE_OPERATOR_HPP
#define DAEMOR_AFFINE_OPERATOR_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daemor/core.hpp"
#include "daemor/theta.hpp"

namespace daemor {

/// Optional low-rank representation of a term matrix, M_k = U V^T.
struct LowRankPair {
  Mat U;
  Mat V;
};

/// One term theta_k(mu) * M_k of an affine operator.
struct AffineTerm {
  ThetaExpr theta;
  SpMat matrix;
  std::optional<LowRankPair> lowrank;
};

/// Parameter-affine matrix operator M(mu) = sum_k theta_k(mu) M_k.
///
/// Term 0 always carries the literal-one coefficient, so M_0 is the
/// parameter-independent part; this keeps reference-point reasoning
/// (ratios, Weyl sums) well defined downstream. M_0 may be zero.
class AffineMatrixOperator {
 public:
  AffineMatrixOperator() = default;

  AffineMatrixOperator(Eigen::Index rows, Eigen::Index cols,
                       std::vector<AffineTerm> terms)
      : rows_(rows), cols_(cols), terms_(std::move(terms)) {
    if (terms_.empty())
      throw InvalidInput("affine operator: needs at least one term");
    if (!terms_[0].theta.is_literal_one())
      throw InvalidInput("affine operator: term 0 must carry the literal one");
    for (auto& t : terms_) {
      if (t.lowrank) {
        if (t.lowrank->U.rows() != rows_ || t.lowrank->V.rows() != cols_ ||
            t.lowrank->U.cols() != t.lowrank->V.cols())
          throw InvalidInput("affine operator: low-rank pair dimensions");
        if (t.matrix.rows() == 0 && t.matrix.cols() == 0)
          t.matrix = (t.lowrank->U * t.lowrank->V.transpose()).sparseView();
      }
      if (t.matrix.rows() != rows_ || t.matrix.cols() != cols_)
        throw InvalidInput("affine operator: term dimension mismatch");
    }
  }

  /// Single constant matrix (no parameter dependence).
  static AffineMatrixOperator constant(const SpMat& M) {
    return AffineMatrixOperator(M.rows(), M.cols(),
                                {AffineTerm{ThetaExpr::one(), M, {}}});
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  const std::vector<AffineTerm>& terms() const { return terms_; }
  int term_count() const { return static_cast<int>(terms_.size()); }

  bool is_constant() const { return terms_.size() == 1; }

  std::vector<double> theta_values(ParamView mu) const {
    std::vector<double> v(terms_.size());
    for (std::size_t k = 0; k < terms_.size(); ++k) v[k] = terms_[k].theta(mu);
    return v;
  }

  /// Assembled sparse M(mu).
  SpMat evaluate(ParamView mu) const {
    SpMat M = terms_[0].matrix;
    for (std::size_t k = 1; k < terms_.size(); ++k) {
      const double th = terms_[k].theta(mu);
      if (th != 0.0) M = M + (th * terms_[k].matrix).eval();
    }
    return M;
  }

  /// M(mu) * X without assembling M(mu).
  Mat apply(ParamView mu, const Mat& X) const {
    Mat Y = terms_[0].matrix * X;
    for (std::size_t k = 1; k < terms_.size(); ++k) {
      const double th = terms_[k].theta(mu);
      if (th != 0.0) Y += th * (terms_[k].matrix * X);
    }
    return Y;
  }

  Mat dense(ParamView mu) const { return Mat(evaluate(mu)); }

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<AffineTerm> terms_;
};

}  // namespace daemor

#endif  // DAEMOR_AFFINE_OPERATOR_HPP
