#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "projfp/instances.hpp"

namespace projfp {

namespace {

constexpr Index kPanelOrder = 16;

/// Gauss-Legendre nodes and weights on [-1, 1] from the Jacobi matrix (Golub-Welsch).
const Quadrature& reference_rule() {
  static const Quadrature rule = [] {
    MatX J = MatX::Zero(kPanelOrder, kPanelOrder);
    for (Index k = 1; k < kPanelOrder; ++k) {
      const double kk = static_cast<double>(k);
      const double off = kk / std::sqrt(4.0 * kk * kk - 1.0);
      J(k, k - 1) = off;
      J(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(J);
    Quadrature q;
    q.x = es.eigenvalues();
    q.w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return q;
  }();
  return rule;
}

class EllipticStream final : public ObservationStream {
 public:
  EllipticStream(const EllipticProblem1D& prob, std::uint64_t seed)
      : prob_(prob), seed_(seed), rng_(make_rng(seed, 0x656c)), grad_(prob.d), val_(prob.d) {}

  Index dim() const override { return prob_.d; }
  std::uint64_t seed() const override { return seed_; }
  std::string descriptor() const override { return "elliptic:1d"; }

  void next(Observation& obs) override {
    const double x = unif_(rng_);
    const double y = unif_(rng_);
    const double a_i = prob_.a(x) + prob_.coeff_noise * gauss_(rng_);
    const double f_i = prob_.f(y) + prob_.source_noise * gauss_(rng_);
    for (Index j = 0; j < prob_.d; ++j) {
      grad_[j] = elliptic_dphi(j + 1, x);
      val_[j] = elliptic_phi(j + 1, y);
    }
    obs.M = MatX::Identity(prob_.d, prob_.d);
    obs.M.noalias() -= (a_i / prob_.beta) * grad_ * grad_.transpose();
    obs.h = (f_i / prob_.beta) * val_;
  }

 private:
  EllipticProblem1D prob_;
  std::uint64_t seed_;
  Rng rng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> gauss_;
  VecX grad_;
  VecX val_;
};

void check_problem(const EllipticProblem1D& prob) {
  if (!prob.a || !prob.f) throw DomainError("elliptic: coefficient and source must be set");
  if (prob.d < 1) throw DomainError("elliptic: need at least one mode");
  if (!(prob.mu > 0.0) || !(prob.beta >= prob.mu)) throw DomainError("elliptic: need 0 < mu <= beta");
}

}  // namespace

double elliptic_phi(Index j, double x) {
  const double w = static_cast<double>(j) * std::numbers::pi;
  return std::numbers::sqrt2 * std::sin(w * x) / w;
}

double elliptic_dphi(Index j, double x) {
  return std::numbers::sqrt2 * std::cos(static_cast<double>(j) * std::numbers::pi * x);
}

Quadrature gauss_legendre(Index points) {
  if (points < 1) throw DomainError("gauss_legendre: need at least one node");
  const Quadrature& ref = reference_rule();
  const Index panels = (points + kPanelOrder - 1) / kPanelOrder;
  const double h = 1.0 / static_cast<double>(panels);
  Quadrature q;
  q.x.resize(panels * kPanelOrder);
  q.w.resize(panels * kPanelOrder);
  for (Index p = 0; p < panels; ++p) {
    const double left = static_cast<double>(p) * h;
    for (Index k = 0; k < kPanelOrder; ++k) {
      q.x[p * kPanelOrder + k] = left + 0.5 * h * (ref.x[k] + 1.0);
      q.w[p * kPanelOrder + k] = 0.5 * h * ref.w[k];
    }
  }
  return q;
}

EllipticInstance elliptic_instance(const EllipticProblem1D& prob) {
  check_problem(prob);
  const Index d = prob.d;
  if (prob.nodes() < 64 * d)
    throw DomainError("elliptic_instance: need at least 64 d quadrature points");
  const Quadrature q = gauss_legendre(prob.nodes());
  const double tol = 1e-12 * prob.beta;

  EllipticInstance out;
  out.nodes = q.x.size();
  out.a_min = std::numeric_limits<double>::infinity();
  out.a_max = -std::numeric_limits<double>::infinity();

  MatX G(d, q.x.size());  // phi'_j at the nodes
  MatX V(d, q.x.size());  // phi_j at the nodes
  VecX aw(q.x.size()), fw(q.x.size());
  double f2 = 0.0;
  for (Index k = 0; k < q.x.size(); ++k) {
    const double x = q.x[k];
    const double ax = prob.a(x);
    if (!(ax >= prob.mu - tol && ax <= prob.beta + tol)) {
      throw DomainError("elliptic_instance: ellipticity bounds violated at x = " + std::to_string(x) +
                        " (a = " + std::to_string(ax) + ")");
    }
    out.a_min = std::min(out.a_min, ax);
    out.a_max = std::max(out.a_max, ax);
    const double fx = prob.f(x);
    aw[k] = q.w[k] * ax;
    fw[k] = q.w[k] * fx;
    f2 += q.w[k] * fx * fx;
    for (Index j = 0; j < d; ++j) {
      G(j, k) = elliptic_dphi(j + 1, x);
      V(j, k) = elliptic_phi(j + 1, x);
    }
  }
  out.f_l2 = std::sqrt(f2);
  MatX K = G * aw.asDiagonal() * G.transpose();
  K = 0.5 * (K + K.transpose()).eval();
  out.proj.M = MatX::Identity(d, d) - K / prob.beta;
  out.proj.h = V * fw / prob.beta;
  return out;
}

std::unique_ptr<ObservationStream> elliptic_stream(const EllipticProblem1D& prob, std::uint64_t seed) {
  check_problem(prob);
  return std::make_unique<EllipticStream>(prob, seed);
}

NoiseScalars elliptic_noise(const EllipticProblem1D& prob) {
  const EllipticInstance inst = elliptic_instance(prob);
  const double sup_dphi = std::numbers::sqrt2;
  const double sup_phi = std::numbers::sqrt2 / std::numbers::pi;
  return {(1.0 + 2.0 / prob.beta) * sup_dphi, ((inst.f_l2 + 1.0) / prob.beta) * sup_phi};
}

}  // namespace projfp
