#pragma once

// Population-level machinery for v = Pi(Lv + b): projected instances, exact
// solves, kappa, operator norms and the approximation factors.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "projfp/diagnostics.hpp"
#include "projfp/error.hpp"
#include "projfp/wspace.hpp"

namespace projfp {

/// Population pair (L, b) on a weighted space together with the subspace basis.
template <typename Scalar>
struct FixedPointInstance {
  Basis<Scalar> basis;
  Mat<Scalar> L;
  Vec<Scalar> b;

  FixedPointInstance(Basis<Scalar> basis_, Mat<Scalar> L_, Vec<Scalar> b_)
      : basis(std::move(basis_)), L(std::move(L_)), b(std::move(b_)) {
    const Index D = basis.ambient_dim();
    detail::require_dim(L.rows(), D, "FixedPointInstance L rows");
    detail::require_dim(L.cols(), D, "FixedPointInstance L cols");
    detail::require_dim(b.size(), D, "FixedPointInstance b");
  }

  const WeightedSpace<Scalar>& space() const { return basis.space(); }
  Index ambient_dim() const { return basis.ambient_dim(); }
  Index dim() const { return basis.dim(); }
};

template <typename Scalar>
struct ProjectedInstance {
  Mat<Scalar> M;
  Vec<Scalar> h;
};

template <typename Scalar>
struct Lemma1Bounds {
  Scalar a;                 // 1 + |(I-M)^{-1}|^2 s^2
  std::optional<Scalar> b;  // 1 + 2|(I-M)^{-1}|, only for s <= 1
  Scalar a_kappa;           // 1 + s^2/(1-kappa)^2
  std::optional<Scalar> b_kappa;
};

template <typename Scalar>
struct FactorReport {
  Scalar alpha;
  Scalar yb1;
  Scalar yb2;
  Scalar lemma1a_bound;
  std::optional<Scalar> lemma1b_bound;
  Scalar kappa;
  Scalar opnorm_L;
};

template <typename Scalar>
struct OracleReport {
  Scalar lhs;  // |vbar - v*|^2
  Scalar rhs;  // alpha(M, |L|) * A(S, v*)
  Scalar ratio;
  Scalar alpha;
  Scalar approx_error;
  bool passed;
};

namespace detail {

template <typename Scalar>
Scalar sym_lambda_max(Mat<Scalar> S, const char* what) {
  const Mat<Scalar> St = S.transpose();
  const Scalar scale = std::max(S.cwiseAbs().maxCoeff(), Scalar(1));
  const Scalar asym = (S - St).cwiseAbs().maxCoeff();
  if (static_cast<double>(asym / scale) > 1e-8) {
    warn(std::string(what) + ": argument asymmetric before symmetrization (relative " +
         std::to_string(static_cast<double>(asym / scale)) + ")");
  }
  S = Scalar(0.5) * (S + St);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError(std::string(what) + ": eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

template <typename Scalar>
Vec<Scalar> singular_values(const Mat<Scalar>& A) {
  Eigen::BDCSVD<Mat<Scalar>> svd(A);
  return svd.singularValues();
}

/// LU of I - M with a singularity check on the reciprocal condition estimate.
template <typename Scalar>
Eigen::PartialPivLU<Mat<Scalar>> factor_I_minus(const Mat<Scalar>& M, const char* what) {
  if (M.rows() != M.cols()) throw DimensionError(std::string(what) + ": M must be square");
  const Index d = M.rows();
  Eigen::PartialPivLU<Mat<Scalar>> lu(Mat<Scalar>::Identity(d, d) - M);
  const Scalar rc = lu.rcond();
  if (!(rc > Scalar(64) * std::numeric_limits<Scalar>::epsilon())) {
    throw SingularError(std::string(what) + ": I - M is singular (rcond " +
                        std::to_string(static_cast<double>(rc)) + ")");
  }
  return lu;
}

/// (I-M)^{-1} S (I-M)^{-T} from an LU of I - M.
template <typename Scalar>
Mat<Scalar> congruence(const Eigen::PartialPivLU<Mat<Scalar>>& lu, const Mat<Scalar>& S) {
  const Mat<Scalar> Y = lu.solve(S);
  return lu.solve(Mat<Scalar>(Y.transpose())).transpose();
}

}  // namespace detail

/// kappa(M) = lambda_max((M + M^T)/2).
template <typename Scalar>
Scalar kappa(const Mat<Scalar>& M) {
  if (M.rows() != M.cols()) throw DimensionError("kappa: M must be square");
  if (M.size() == 0) return Scalar(0);
  return detail::sym_lambda_max<Scalar>(Scalar(0.5) * (M + M.transpose()), "kappa");
}

/// Operator norm in the xi-weighted norm: sigma_max(W^{1/2} L W^{-1/2}).
template <typename Scalar>
Scalar opnorm(const WeightedSpace<Scalar>& space, const Mat<Scalar>& L) {
  detail::require_dim(L.rows(), space.dim(), "opnorm");
  detail::require_dim(L.cols(), space.dim(), "opnorm");
  const Mat<Scalar> T =
      space.sqrt_weights().asDiagonal() * L * space.sqrt_weights().cwiseInverse().asDiagonal();
  return detail::singular_values(T)(0);
}

/// Check that I - L has a bounded inverse: smallest singular value (xi-norm) above 1e-10.
template <typename Scalar>
void check_well_posed(const FixedPointInstance<Scalar>& inst) {
  const auto& w = inst.space().sqrt_weights();
  const Index D = inst.ambient_dim();
  const Mat<Scalar> T = w.asDiagonal() * (Mat<Scalar>::Identity(D, D) - inst.L) *
                        w.cwiseInverse().asDiagonal();
  const Vec<Scalar> sv = detail::singular_values(T);
  if (!(sv(D - 1) > Scalar(1e-10))) {
    throw SingularError("FixedPointInstance: I - L is singular (sigma_min " +
                        std::to_string(static_cast<double>(sv(D - 1))) + ")");
  }
}

/// M_ij = <phi_i, L phi_j>, h_j = <phi_j, b>.
template <typename Scalar>
ProjectedInstance<Scalar> project_instance(const FixedPointInstance<Scalar>& inst) {
  const Mat<Scalar>& Phi = inst.basis.vectors();
  const auto& xi = inst.space().weights();
  ProjectedInstance<Scalar> out;
  out.M = Phi.transpose() * xi.asDiagonal() * (inst.L * Phi);
  out.h = Phi.transpose() * xi.asDiagonal() * inst.b;
  return out;
}

/// v* = (I - L)^{-1} b, with one step of iterative refinement.
template <typename Scalar>
Vec<Scalar> solve_exact(const FixedPointInstance<Scalar>& inst) {
  const Index D = inst.ambient_dim();
  const Mat<Scalar> A = Mat<Scalar>::Identity(D, D) - inst.L;
  Eigen::PartialPivLU<Mat<Scalar>> lu(A);
  if (!(lu.rcond() > Scalar(64) * std::numeric_limits<Scalar>::epsilon())) {
    throw SingularError("solve_exact: I - L is singular");
  }
  Vec<Scalar> v = lu.solve(inst.b);
  v += lu.solve(Vec<Scalar>(inst.b - A * v));
  const Scalar res = inst.space().norm(v - inst.L * v - inst.b);
  if (!(res <= Scalar(1e-8) * (Scalar(1) + inst.space().norm(v)))) {
    throw NumericalError("solve_exact: residual " + std::to_string(static_cast<double>(res)) +
                         " above tolerance");
  }
  return v;
}

/// theta_bar = (I - M)^{-1} h. Requires kappa(M) < 1.
template <typename Scalar>
Vec<Scalar> solve_projected(const ProjectedInstance<Scalar>& proj) {
  detail::require_dim(proj.h.size(), proj.M.rows(), "solve_projected");
  const Scalar k = kappa(proj.M);
  if (!(k < Scalar(1))) {
    throw DomainError("solve_projected: kappa(M) = " + std::to_string(static_cast<double>(k)) +
                      " is not below 1");
  }
  return detail::factor_I_minus(proj.M, "solve_projected").solve(proj.h);
}

/// alpha(M, s) = 1 + lambda_max((I-M)^{-1}(s^2 I - M M^T)(I-M)^{-T}).
template <typename Scalar>
Scalar approx_factor(const Mat<Scalar>& M, Scalar s) {
  if (!(s >= Scalar(0))) throw DomainError("approx_factor: s must be non-negative");
  const Index d = M.rows();
  auto lu = detail::factor_I_minus(M, "approx_factor");
  if (!(kappa(M) < Scalar(1))) warn("approx_factor: kappa(M) >= 1");
  const Mat<Scalar> S = s * s * Mat<Scalar>::Identity(d, d) - M * M.transpose();
  return Scalar(1) + detail::sym_lambda_max<Scalar>(detail::congruence(lu, S), "approx_factor");
}

/// Closed form of alpha for symmetric M with eigenvalues eigs.
template <typename Scalar>
Scalar approx_factor_symmetric(const Vec<Scalar>& eigs, Scalar s) {
  if (eigs.size() == 0) throw DimensionError("approx_factor_symmetric: no eigenvalues");
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (Index j = 0; j < eigs.size(); ++j) {
    const Scalar l = eigs[j];
    if (!(l < Scalar(1))) throw DomainError("approx_factor_symmetric: eigenvalue >= 1");
    best = std::max(best, (s * s - l * l) / ((Scalar(1) - l) * (Scalar(1) - l)));
  }
  return Scalar(1) + best;
}

template <typename Scalar>
Lemma1Bounds<Scalar> approx_factor_bounds(const Mat<Scalar>& M, Scalar s) {
  const Scalar k = kappa(M);
  if (!(k < Scalar(1))) throw DomainError("approx_factor_bounds: kappa(M) >= 1");
  const Index d = M.rows();
  const Vec<Scalar> sv = detail::singular_values<Scalar>(Mat<Scalar>::Identity(d, d) - M);
  const Scalar inv_norm = Scalar(1) / sv(d - 1);
  Lemma1Bounds<Scalar> out;
  out.a = Scalar(1) + inv_norm * inv_norm * s * s;
  out.a_kappa = Scalar(1) + s * s / ((Scalar(1) - k) * (Scalar(1) - k));
  if (s <= Scalar(1)) {
    out.b = Scalar(1) + Scalar(2) * inv_norm;
    out.b_kappa = Scalar(1) + Scalar(2) / (Scalar(1) - k);
  }
  return out;
}

/// 1 + s^2 lambda_max((I-M)^{-1}(I-M)^{-T}) = 1 + s^2 / sigma_min(I-M)^2.
template <typename Scalar>
Scalar yb_factor_1(const Mat<Scalar>& M, Scalar s) {
  if (M.rows() != M.cols()) throw DimensionError("yb_factor_1: M must be square");
  const Index d = M.rows();
  detail::factor_I_minus(M, "yb_factor_1");
  const Vec<Scalar> sv = detail::singular_values<Scalar>(Mat<Scalar>::Identity(d, d) - M);
  return Scalar(1) + s * s / (sv(d - 1) * sv(d - 1));
}

/// 1 + lambda_max((I-M)^{-1} G (I-M)^{-T}) for G = K K^T.
template <typename Scalar>
Scalar yb_factor_2_from_gram(const Mat<Scalar>& M, const Mat<Scalar>& KKt) {
  detail::require_dim(KKt.rows(), M.rows(), "yb_factor_2");
  auto lu = detail::factor_I_minus(M, "yb_factor_2");
  return Scalar(1) + std::max(Scalar(0), detail::sym_lambda_max<Scalar>(detail::congruence(lu, KKt),
                                                                         "yb_factor_2"));
}

/// 1 + sigma_max((I-M)^{-1} K)^2, K the coordinates of Pi L Pi_perp between S and S-perp.
template <typename Scalar>
Scalar yb_factor_2(const Mat<Scalar>& M, const Mat<Scalar>& K) {
  if (K.cols() == 0) return Scalar(1);
  const Mat<Scalar> X = detail::factor_I_minus(M, "yb_factor_2").solve(K);
  const Scalar smax = detail::singular_values(X)(0);
  return Scalar(1) + smax * smax;
}

template <typename Scalar>
Scalar yb_factor_2(const FixedPointInstance<Scalar>& inst) {
  if (inst.dim() == inst.ambient_dim()) return Scalar(1);
  const Basis<Scalar> perp = complement_basis(inst.basis);
  const auto& xi = inst.space().weights();
  const Mat<Scalar> K = inst.basis.vectors().transpose() * xi.asDiagonal() * (inst.L * perp.vectors());
  return yb_factor_2(project_instance(inst).M, K);
}

/// A(S, v*) = |Pi_perp v*|^2.
template <typename Scalar>
Scalar oracle_error(const FixedPointInstance<Scalar>& inst) {
  const Vec<Scalar> v = solve_exact(inst);
  const Vec<Scalar> r = v - project(inst.basis, v);
  return inst.space().inner(r, r);
}

/// Checks |vbar - v*|^2 <= alpha(M, |L|) A(S, v*) up to a relative slack.
template <typename Scalar>
OracleReport<Scalar> verify_oracle_inequality(const FixedPointInstance<Scalar>& inst,
                                              Scalar rel_tol = Scalar(1e-8)) {
  const auto& space = inst.space();
  const ProjectedInstance<Scalar> proj = project_instance(inst);
  const Vec<Scalar> vstar = solve_exact(inst);
  const Vec<Scalar> vbar = embed(inst.basis, solve_projected(proj));
  const Vec<Scalar> perp = vstar - project(inst.basis, vstar);

  OracleReport<Scalar> rep;
  rep.approx_error = space.inner(perp, perp);
  rep.alpha = approx_factor(proj.M, opnorm(space, inst.L));
  const Vec<Scalar> diff = vbar - vstar;
  rep.lhs = space.inner(diff, diff);
  rep.rhs = rep.alpha * rep.approx_error;

  // Rounding floor: both sides vanish when v* lies in S.
  const Scalar scale = Scalar(1) + space.inner(vstar, vstar);
  const Scalar floor = Scalar(1e3) * std::numeric_limits<Scalar>::epsilon() *
                       std::numeric_limits<Scalar>::epsilon() * scale * rep.alpha;
  if (rep.rhs <= floor) {
    rep.ratio = rep.lhs <= Scalar(1e3) * floor ? Scalar(0) : std::numeric_limits<Scalar>::infinity();
  } else {
    rep.ratio = rep.lhs / rep.rhs;
  }
  rep.passed = rep.ratio <= Scalar(1) + rel_tol;
  return rep;
}

/// All factors with s = |L|; lemma1b only when |L| <= 1.
template <typename Scalar>
FactorReport<Scalar> factor_report(const FixedPointInstance<Scalar>& inst) {
  const ProjectedInstance<Scalar> proj = project_instance(inst);
  FactorReport<Scalar> rep;
  rep.opnorm_L = opnorm(inst.space(), inst.L);
  rep.kappa = kappa(proj.M);
  rep.alpha = approx_factor(proj.M, rep.opnorm_L);
  rep.yb1 = yb_factor_1(proj.M, rep.opnorm_L);
  rep.yb2 = yb_factor_2(inst);
  const Lemma1Bounds<Scalar> lb = approx_factor_bounds(proj.M, rep.opnorm_L);
  rep.lemma1a_bound = lb.a;
  rep.lemma1b_bound = lb.b;
  return rep;
}

/// yb2 <= alpha <= yb1 with an absolute-plus-relative slack.
template <typename Scalar>
bool sandwich_holds(Scalar yb2, Scalar alpha, Scalar yb1, Scalar tol = Scalar(1e-8)) {
  const Scalar lo = tol * std::max(Scalar(1), alpha);
  return yb2 <= alpha + lo && alpha <= yb1 + lo;
}

}  // namespace projfp
