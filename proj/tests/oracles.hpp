#pragma once

// Reference computations used only by the tests. Each one takes a different
// numerical route from the library so agreement is meaningful.

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "projfp/instances.hpp"

namespace oracle {

using projfp::Index;
using projfp::MatX;
using projfp::VecX;

/// alpha - 1 as the top generalized eigenvalue of (s^2 I - M M^T, (I-M)(I-M)^T).
inline double approx_factor(const MatX& M, double s) {
  const Index d = M.rows();
  const MatX A = MatX::Identity(d, d) - M;
  const MatX S = s * s * MatX::Identity(d, d) - M * M.transpose();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> ges(S, A * A.transpose(), Eigen::EigenvaluesOnly);
  return 1.0 + ges.eigenvalues().maxCoeff();
}

/// 1 + s^2 |(I-M)^{-1}|^2 through an explicit inverse and a Jacobi SVD.
inline double yb1(const MatX& M, double s) {
  const Index d = M.rows();
  const MatX inv = (MatX::Identity(d, d) - M).inverse();
  Eigen::JacobiSVD<MatX> svd(inv);
  const double n = svd.singularValues()(0);
  return 1.0 + s * s * n * n;
}

/// Operator norm in the xi-geometry by power iteration on L* L, L* = Xi^{-1} L^T Xi.
inline double opnorm(const VecX& xi, const MatX& L, int iters = 5000) {
  const MatX Lstar = xi.cwiseInverse().asDiagonal() * L.transpose() * xi.asDiagonal();
  const MatX G = Lstar * L;
  VecX x = VecX::Ones(L.cols());
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    VecX y = G * x;
    const double ny = std::sqrt(y.dot(xi.asDiagonal() * y));
    if (ny == 0.0) return 0.0;
    const double next = std::sqrt(x.dot(xi.asDiagonal() * y) / x.dot(xi.asDiagonal() * x));
    x = y / ny;
    if (std::abs(next - lam) <= 1e-15 * std::max(1.0, next)) return next;
    lam = next;
  }
  return lam;
}

/// xi-orthogonal projector onto span(Phi) as an explicit D x D matrix.
inline MatX projector(const VecX& xi, const MatX& Phi) {
  const MatX G = Phi.transpose() * xi.asDiagonal() * Phi;
  return Phi * G.ldlt().solve(Phi.transpose() * xi.asDiagonal());
}

/// Ambient route: (I - Pi L)^{-1} Pi b.
inline VecX ambient_projected_solution(const VecX& xi, const MatX& Phi, const MatX& L, const VecX& b) {
  const Index D = L.rows();
  const MatX Pi = projector(xi, Phi);
  return (MatX::Identity(D, D) - Pi * L).fullPivLu().solve(Pi * b);
}

/// LSTD in raw features: Psi^T Xi (Psi - gamma P Psi) w = Psi^T Xi r, value Psi w.
inline VecX lstd_value(const projfp::MarkovRewardProcess& mrp) {
  const MatX Xi = mrp.xi.asDiagonal();
  const MatX A = mrp.Psi.transpose() * Xi * (mrp.Psi - mrp.gamma * mrp.P * mrp.Psi);
  const VecX b = mrp.Psi.transpose() * Xi * mrp.r;
  return mrp.Psi * A.fullPivLu().solve(b);
}

/// Stationary distribution by power iteration on an aperiodic lazy chain.
inline VecX stationary_power(const MatX& P, int iters = 200000) {
  const Index D = P.rows();
  const MatX Q = 0.5 * (MatX::Identity(D, D) + P);
  VecX x = VecX::Constant(D, 1.0 / static_cast<double>(D));
  for (int k = 0; k < iters; ++k) {
    VecX y = Q.transpose() * x;
    y /= y.sum();
    if ((y - x).cwiseAbs().maxCoeff() < 1e-16) return y;
    x = y;
  }
  return x;
}

/// Exact solution through a full inverse (no refinement).
inline VecX solve_by_inverse(const MatX& L, const VecX& b) {
  const Index D = L.rows();
  return (MatX::Identity(D, D) - L).inverse() * b;
}

inline MatX gaussian(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatX A(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) A(i, j) = g(rng);
  return A;
}

/// Least-squares slope of log y on log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
