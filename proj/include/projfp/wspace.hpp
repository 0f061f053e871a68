#pragma once

// Weighted inner-product geometry on R^D: spaces, orthonormal bases,
// orthogonal projections and complements.
//
// Vectors and operators are dense in ambient coordinates. The weights xi
// only enter through <p, q> = sum_j p_j xi_j q_j.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "projfp/error.hpp"

namespace projfp {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}
}  // namespace detail

/// R^D with a strictly positive weight vector.
template <typename Scalar>
class WeightedSpace {
 public:
  explicit WeightedSpace(Vec<Scalar> weights) : weights_(std::move(weights)) {
    if (weights_.size() == 0) throw DomainError("WeightedSpace: empty weight vector");
    for (Index j = 0; j < weights_.size(); ++j) {
      if (!(weights_[j] > Scalar(0)) || !std::isfinite(static_cast<double>(weights_[j]))) {
        throw DomainError("WeightedSpace: weight " + std::to_string(j) + " is not positive");
      }
    }
    sqrt_weights_ = weights_.cwiseSqrt();
  }

  static WeightedSpace uniform(Index dim, Scalar weight = Scalar(1)) {
    return WeightedSpace(Vec<Scalar>::Constant(dim, weight));
  }

  Index dim() const { return weights_.size(); }
  const Vec<Scalar>& weights() const { return weights_; }
  const Vec<Scalar>& sqrt_weights() const { return sqrt_weights_; }

  template <typename A, typename B>
  Scalar inner(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) const {
    detail::require_dim(p.size(), dim(), "inner");
    detail::require_dim(q.size(), dim(), "inner");
    return (p.cwiseProduct(weights_)).dot(q);
  }

  template <typename A>
  Scalar norm(const Eigen::MatrixBase<A>& p) const {
    return std::sqrt(inner(p, p));
  }

  /// Matrix of pairwise inner products X^T diag(xi) Y between columns.
  template <typename A, typename B>
  Mat<Scalar> gram(const Eigen::MatrixBase<A>& X, const Eigen::MatrixBase<B>& Y) const {
    detail::require_dim(X.rows(), dim(), "gram");
    detail::require_dim(Y.rows(), dim(), "gram");
    return X.transpose() * weights_.asDiagonal() * Y;
  }

  /// Map to Euclidean coordinates in which the weighted product is the dot product.
  template <typename A>
  Mat<Scalar> whiten(const Eigen::MatrixBase<A>& X) const {
    return sqrt_weights_.asDiagonal() * X;
  }
  template <typename A>
  Mat<Scalar> unwhiten(const Eigen::MatrixBase<A>& X) const {
    return sqrt_weights_.cwiseInverse().asDiagonal() * X;
  }

 private:
  Vec<Scalar> weights_;
  Vec<Scalar> sqrt_weights_;
};

template <typename Scalar, typename A, typename B>
Scalar inner(const WeightedSpace<Scalar>& space, const Eigen::MatrixBase<A>& p,
             const Eigen::MatrixBase<B>& q) {
  return space.inner(p, q);
}

template <typename Scalar, typename A>
Scalar norm(const WeightedSpace<Scalar>& space, const Eigen::MatrixBase<A>& p) {
  return space.norm(p);
}

/// Orthonormal family {phi_1..phi_d} in a weighted space, stored as the columns of a D x d
/// matrix. The constructor checks orthonormality to 1e-10.
template <typename Scalar>
class Basis {
 public:
  static constexpr double kOrthonormalTol = 1e-10;

  Basis(WeightedSpace<Scalar> space, Mat<Scalar> vectors)
      : space_(std::move(space)), vectors_(std::move(vectors)) {
    detail::require_dim(vectors_.rows(), space_.dim(), "Basis");
    if (vectors_.cols() > space_.dim()) throw DimensionError("Basis: more vectors than dimensions");
    const Index d = vectors_.cols();
    if (d > 0) {
      const Mat<Scalar> g = space_.gram(vectors_, vectors_);
      const Scalar dev = (g - Mat<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff();
      if (!(static_cast<double>(dev) <= kOrthonormalTol)) {
        throw DomainError("Basis: columns are not orthonormal (max Gram deviation " +
                          std::to_string(static_cast<double>(dev)) + ")");
      }
    }
  }

  const WeightedSpace<Scalar>& space() const { return space_; }
  const Mat<Scalar>& vectors() const { return vectors_; }
  Index ambient_dim() const { return vectors_.rows(); }
  Index dim() const { return vectors_.cols(); }

 private:
  WeightedSpace<Scalar> space_;
  Mat<Scalar> vectors_;
};

/// Phi x = (<x, phi_j>)_j. Accepts a vector or a D x k block (applied column-wise).
template <typename Scalar, typename A>
Mat<Scalar> project_coeffs(const Basis<Scalar>& basis, const Eigen::MatrixBase<A>& x) {
  detail::require_dim(x.rows(), basis.ambient_dim(), "project_coeffs");
  return basis.vectors().transpose() * (basis.space().weights().asDiagonal() * x);
}

/// Phi^* theta = sum_j theta_j phi_j.
template <typename Scalar, typename A>
Mat<Scalar> embed(const Basis<Scalar>& basis, const Eigen::MatrixBase<A>& theta) {
  detail::require_dim(theta.rows(), basis.dim(), "embed");
  return basis.vectors() * theta;
}

/// Orthogonal projection onto span(basis).
template <typename Scalar, typename A>
Mat<Scalar> project(const Basis<Scalar>& basis, const Eigen::MatrixBase<A>& x) {
  return embed(basis, project_coeffs(basis, x));
}

namespace detail {
/// Flip each column so its first entry of non-negligible magnitude is positive.
template <typename Scalar>
void normalize_column_signs(Mat<Scalar>& Q) {
  for (Index k = 0; k < Q.cols(); ++k) {
    const Scalar scale = Q.col(k).cwiseAbs().maxCoeff();
    if (scale == Scalar(0)) continue;
    for (Index i = 0; i < Q.rows(); ++i) {
      if (std::abs(Q(i, k)) > Scalar(1e-12) * scale) {
        if (Q(i, k) < Scalar(0)) Q.col(k) *= Scalar(-1);
        break;
      }
    }
  }
}
}  // namespace detail

/// Gram-Schmidt under the weighted product: modified, with a second
/// reorthogonalization pass per column. A column is rank deficient when its deflated
/// norm drops to 1e-12 of its original norm.
template <typename Scalar, typename A>
Basis<Scalar> orthonormalize(const WeightedSpace<Scalar>& space, const Eigen::MatrixBase<A>& raw) {
  detail::require_dim(raw.rows(), space.dim(), "orthonormalize");
  if (raw.cols() > space.dim()) throw SingularError("orthonormalize: more columns than dimensions");
  Mat<Scalar> Q = raw;
  for (Index k = 0; k < Q.cols(); ++k) {
    const Scalar original = space.norm(Q.col(k));
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < k; ++j) Q.col(k) -= space.inner(Q.col(j), Q.col(k)) * Q.col(j);
    }
    const Scalar deflated = space.norm(Q.col(k));
    if (!(deflated > Scalar(1e-12) * original)) {
      throw SingularError("orthonormalize: column " + std::to_string(k) +
                          " is linearly dependent on the previous ones");
    }
    Q.col(k) /= deflated;
  }
  detail::normalize_column_signs(Q);
  return Basis<Scalar>(space, std::move(Q));
}

/// Orthonormal basis of the orthogonal complement of span(basis).
/// Computed from a Householder QR in whitened coordinates.
template <typename Scalar>
Basis<Scalar> complement_basis(const Basis<Scalar>& basis) {
  const Index D = basis.ambient_dim();
  const Index d = basis.dim();
  if (d >= D) throw DomainError("complement_basis: subspace is the whole space");
  const Mat<Scalar> white = basis.space().whiten(basis.vectors());
  Eigen::HouseholderQR<Mat<Scalar>> qr(white);
  Mat<Scalar> Q = qr.householderQ() * Mat<Scalar>::Identity(D, D);
  Mat<Scalar> tail = basis.space().unwhiten(Q.rightCols(D - d));
  detail::normalize_column_signs(tail);
  return Basis<Scalar>(basis.space(), std::move(tail));
}

}  // namespace projfp
