#include <cmath>
#include <random>
#include <string>

#include "projfp/instances.hpp"

namespace projfp {

namespace {

Basis<double> coordinate_basis(Index D, Index d) {
  return Basis<double>(WeightedSpace<double>::uniform(D), MatX::Identity(D, d));
}

MatX gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g;
  MatX A(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) A(i, j) = g(rng);
  return A;
}

class RegressionStream final : public ObservationStream {
 public:
  RegressionStream(const RegressionModel& model, std::uint64_t seed)
      : seed_(seed), rng_(make_rng(seed, 0x7265)), noise_sd_(std::sqrt(model.noise_var)),
        beta_(model.beta), v_star_(model.v_star) {
    Eigen::LLT<MatX> llt(model.Sigma_X);
    if (llt.info() != Eigen::Success) throw DomainError("regression_stream: Sigma_X not positive definite");
    chol_ = llt.matrixL();
    coeff_map_ = model.basis.vectors().transpose() * model.basis.space().weights().asDiagonal();
    x_.resize(model.ambient_dim());
  }

  Index dim() const override { return coeff_map_.rows(); }
  std::uint64_t seed() const override { return seed_; }
  std::string descriptor() const override { return "regression:gaussian"; }

  void next(Observation& obs) override {
    for (Index i = 0; i < x_.size(); ++i) x_[i] = gauss_(rng_);
    const VecX X = chol_ * x_;
    const double Y = v_star_.dot(X) + noise_sd_ * gauss_(rng_);
    const VecX p = coeff_map_ * X;
    const Index d = p.size();
    obs.M = MatX::Identity(d, d);
    obs.M.noalias() -= (p / beta_) * p.transpose();
    obs.h = p * (Y / beta_);
  }

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::normal_distribution<double> gauss_;
  double noise_sd_;
  double beta_;
  VecX v_star_;
  MatX chol_;
  MatX coeff_map_;
  VecX x_;
};

class RegressionCycleStream final : public ObservationStream {
 public:
  RegressionCycleStream(const RegressionModel& model, MatX design)
      : design_(std::move(design)), beta_(model.beta), v_star_(model.v_star) {
    detail::require_dim(design_.rows(), model.ambient_dim(), "regression_cycle_stream");
    if (design_.cols() == 0) throw DomainError("regression_cycle_stream: empty design");
    coeff_map_ = model.basis.vectors().transpose() * model.basis.space().weights().asDiagonal();
  }

  Index dim() const override { return coeff_map_.rows(); }
  std::uint64_t seed() const override { return 0; }
  std::string descriptor() const override { return "regression:cycle"; }

  void next(Observation& obs) override {
    const VecX X = design_.col(pos_);
    pos_ = (pos_ + 1) % design_.cols();
    const double Y = v_star_.dot(X);
    const VecX p = coeff_map_ * X;
    const Index d = p.size();
    obs.M = MatX::Identity(d, d);
    obs.M.noalias() -= (p / beta_) * p.transpose();
    obs.h = p * (Y / beta_);
  }

 private:
  MatX design_;
  double beta_;
  VecX v_star_;
  MatX coeff_map_;
  Index pos_ = 0;
};

}  // namespace

Instance random_instance(const RandomInstanceOptions& opt, Rng& rng) {
  if (opt.d < 1 || opt.d > opt.D) throw DomainError("random_instance: need 1 <= d <= D");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    VecX xi(opt.D);
    for (Index j = 0; j < opt.D; ++j) xi[j] = opt.uniform_weights ? 1.0 : 0.2 + unif(rng);
    xi /= xi.sum();
    const WeightedSpace<double> space(xi);
    const Basis<double> basis = orthonormalize(space, gaussian_matrix(opt.D, opt.d, rng));

    MatX L = gaussian_matrix(opt.D, opt.D, rng);
    const double target = opt.opnorm_min + (opt.opnorm_max - opt.opnorm_min) * unif(rng);
    L *= target / opnorm(space, L);
    VecX b = gaussian_matrix(opt.D, 1, rng).col(0);

    Instance inst(basis, std::move(L), std::move(b));
    if (kappa(project_instance(inst).M) < opt.kappa_max) return inst;
  }
  throw DomainError("random_instance: could not draw an instance with kappa(M) below the cap");
}

RegressionModel::RegressionModel(MatX Sigma, VecX v, double noise_var_, Basis<double> basis_)
    : Sigma_X(std::move(Sigma)), v_star(std::move(v)), noise_var(noise_var_), basis(std::move(basis_)) {
  const Index D = v_star.size();
  detail::require_dim(Sigma_X.rows(), D, "RegressionModel Sigma_X");
  detail::require_dim(Sigma_X.cols(), D, "RegressionModel Sigma_X");
  detail::require_dim(basis.ambient_dim(), D, "RegressionModel basis");
  if (!(noise_var >= 0.0)) throw DomainError("RegressionModel: noise variance must be non-negative");
  if ((basis.space().weights().array() != 1.0).any())
    throw DomainError("RegressionModel: the basis must live in the Euclidean space");
  if ((Sigma_X - Sigma_X.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Sigma_X.cwiseAbs().maxCoeff()))
    throw DomainError("RegressionModel: Sigma_X is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatX> es(Sigma_X, Eigen::EigenvaluesOnly);
  beta = es.eigenvalues().maxCoeff();
  mu = es.eigenvalues().minCoeff();
  if (!(mu > 0.0)) throw DomainError("RegressionModel: Sigma_X is singular (mu = " + std::to_string(mu) + ")");
}

RegressionModel identity_regression(Index D, Index d, const VecX& v_star, double noise_var) {
  return RegressionModel(MatX::Identity(D, D), v_star, noise_var, coordinate_basis(D, d));
}

Instance regression_instance(const RegressionModel& model) {
  const Index D = model.ambient_dim();
  MatX L = MatX::Identity(D, D) - model.Sigma_X / model.beta;
  VecX b = model.Sigma_X * model.v_star / model.beta;
  return Instance(model.basis, std::move(L), std::move(b));
}

std::unique_ptr<ObservationStream> regression_stream(const RegressionModel& model, std::uint64_t seed) {
  return std::make_unique<RegressionStream>(model, seed);
}

std::unique_ptr<ObservationStream> regression_cycle_stream(const RegressionModel& model, MatX design) {
  return std::make_unique<RegressionCycleStream>(model, std::move(design));
}

NoiseScalars regression_sigma(const RegressionModel& model) {
  const double varsigma2 = std::max(std::sqrt(3.0) * model.beta, model.noise_var);
  return {varsigma2 / model.beta, varsigma2 / model.beta};
}

MatX regression_noise_covariance(const RegressionModel& model) {
  const Instance inst = regression_instance(model);
  const Projected proj = project_instance(inst);
  const VecX vbar = embed(model.basis, solve_projected(proj));
  const VecX r = model.v_star - vbar;
  const MatX& S = model.Sigma_X;
  const VecX Sr = S * r;
  const MatX cov = (r.dot(Sr) + model.noise_var) * S + Sr * Sr.transpose();
  const MatX& Phi = model.basis.vectors();
  return Phi.transpose() * cov * Phi / (model.beta * model.beta);
}

double regression_alpha_closed_form(const RegressionModel& model) {
  const MatX& Phi = model.basis.vectors();
  const MatX Sd = Phi.transpose() * model.Sigma_X * Phi;
  Eigen::SelfAdjointEigenSolver<MatX> es(Sd, Eigen::EigenvaluesOnly);
  double best = -1.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()[i];
    best = std::max(best, (model.mu * model.mu + 2.0 * model.beta * (l - model.mu)) / (l * l));
  }
  return best;
}

}  // namespace projfp
