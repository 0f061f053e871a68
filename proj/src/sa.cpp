#include "projfp/sa.hpp"

#include <cmath>
#include <string>

namespace projfp {

ConstantStream::ConstantStream(MatX M, VecX h, std::uint64_t seed)
    : M_(std::move(M)), h_(std::move(h)), seed_(seed) {
  detail::require_dim(M_.rows(), h_.size(), "ConstantStream");
  detail::require_dim(M_.cols(), h_.size(), "ConstantStream");
}

void ConstantStream::next(Observation& obs) {
  obs.M = M_;
  obs.h = h_;
}

void SAConfig::validate(Index d) const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("SAConfig: stepsize must be positive");
  if (n < 1) throw DomainError("SAConfig: n must be positive");
  if (n0 < 0 || n0 >= n) throw DomainError("SAConfig: burn-in must lie in [0, n)");
  if (record_every < 0) throw DomainError("SAConfig: record_every must be non-negative");
  if (theta0.size() != 0) detail::require_dim(theta0.size(), d, "SAConfig theta0");
}

SAResult run_sa(ObservationStream& stream, const SAConfig& cfg) {
  const Index d = stream.dim();
  cfg.validate(d);

  SAResult out;
  out.config = cfg;
  VecX theta = cfg.theta0.size() ? cfg.theta0 : VecX::Zero(d);
  VecX sum = VecX::Zero(d);
  VecX next(d);
  Observation obs;
  const double eta = cfg.eta;

  for (std::int64_t t = 1; t <= cfg.n; ++t) {
    stream.next(obs);
    next.noalias() = obs.M * theta;
    next += obs.h;
    theta = (1.0 - eta) * theta + eta * next;

    const double nrm = theta.norm();
    if (!std::isfinite(nrm) || nrm > kDivergenceThreshold) {
      throw NumericalError("run_sa: iterate diverged at t = " + std::to_string(t) +
                           " (|theta| = " + std::to_string(nrm) + ", seed " +
                           std::to_string(stream.seed()) + ", eta " + std::to_string(eta) + ")");
    }
    if (t > cfg.n0) sum += theta;
    if (cfg.record_every > 0 && t % cfg.record_every == 0) out.recorded.emplace_back(t, theta);
  }
  out.theta_hat = sum / static_cast<double>(cfg.n - cfg.n0);
  out.theta_final = std::move(theta);
  return out;
}

Schedule default_schedule(double sigma_L, Index d, std::int64_t n, double c0) {
  if (!(sigma_L > 0.0)) throw DomainError("default_schedule: sigma_L must be positive");
  if (d < 1 || n < 1 || !(c0 > 0.0)) throw DomainError("default_schedule: d, n, c0 must be positive");
  const double eta = 1.0 / (c0 * sigma_L * std::sqrt(static_cast<double>(d) * static_cast<double>(n)));
  return {eta, n / 2};
}

double stat_error(const MatX& M, const MatX& Sigma_star, std::int64_t n) {
  if (n < 1) throw DomainError("stat_error: n must be positive");
  detail::require_dim(Sigma_star.rows(), M.rows(), "stat_error");
  detail::require_dim(Sigma_star.cols(), M.rows(), "stat_error");
  auto lu = detail::factor_I_minus<double>(M, "stat_error");
  return detail::congruence<double>(lu, Sigma_star).trace() / static_cast<double>(n);
}

double hot_term(double sigma_L, double sigma_b, double kappa, Index d, std::int64_t n,
                double vbar_norm) {
  if (!(kappa < 1.0)) throw DomainError("hot_term: kappa must be below 1");
  if (n < 1) throw DomainError("hot_term: n must be positive");
  const double gap = 1.0 - kappa;
  const double ratio = static_cast<double>(d) / static_cast<double>(n);
  return sigma_L / (gap * gap * gap) * std::pow(ratio, 1.5) *
         (vbar_norm * vbar_norm * sigma_L * sigma_L + sigma_b * sigma_b);
}

double theorem1_bound(double approx, double alpha, double eps_n, double hot, double omega,
                      double c) {
  if (!(omega > 0.0)) throw DomainError("theorem1_bound: omega must be positive");
  return (1.0 + omega) * alpha * approx + c * (1.0 + 1.0 / omega) * (eps_n + hot);
}

NoiseStats estimate_noise(ObservationStream& stream, const ProjectedInstance<double>& proj,
                          const VecX& theta_bar, std::int64_t samples) {
  if (samples < 2) throw DomainError("estimate_noise: need at least two samples");
  const Index d = stream.dim();
  detail::require_dim(proj.M.rows(), d, "estimate_noise");
  detail::require_dim(theta_bar.size(), d, "estimate_noise");

  // Probe directions: e_1..e_d, then theta_bar/|theta_bar| when nonzero.
  MatX U = MatX::Identity(d, d);
  const double tn = theta_bar.norm();
  if (tn > 0.0) {
    U.conservativeResize(d, d + 1);
    U.col(d) = theta_bar / tn;
  }
  const Index p = U.cols();

  // Second moments about the population (M, h); Sigma* by Welford on z = M_i theta_bar + h_i.
  MatX probe_sq = MatX::Zero(d, p);
  VecX h_sq = VecX::Zero(d);
  VecX z_mean = VecX::Zero(d);
  MatX z_m2 = MatX::Zero(d, d);
  const MatX MU = proj.M * U;
  Observation obs;
  VecX z(d), delta(d);
  for (std::int64_t i = 1; i <= samples; ++i) {
    stream.next(obs);
    probe_sq += (obs.M * U - MU).array().square().matrix();
    h_sq += (obs.h - proj.h).array().square().matrix();
    z.noalias() = obs.M * theta_bar;
    z += obs.h;
    delta = z - z_mean;
    z_mean += delta / static_cast<double>(i);
    z_m2.noalias() += delta * (z - z_mean).transpose();
  }
  const double inv = 1.0 / static_cast<double>(samples);

  NoiseStats out;
  out.sigma_L = std::sqrt(probe_sq.maxCoeff() * inv);
  out.sigma_b = std::sqrt(h_sq.maxCoeff() * inv);
  MatX S = z_m2 / static_cast<double>(samples - 1);
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(S);
  const VecX lam = es.eigenvalues().cwiseMax(0.0);
  out.Sigma_star = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  out.Sigma_star = 0.5 * (out.Sigma_star + out.Sigma_star.transpose()).eval();
  return out;
}

MseStats mse_experiment(const StreamFactory& factory, const SAConfig& cfg, const VecX& target,
                        int repeats, std::uint64_t first_seed) {
  if (repeats < 2) throw DomainError("mse_experiment: need at least two repeats");
  MseStats out;
  out.per_run.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(r);
    auto stream = factory(seed);
    detail::require_dim(target.size(), stream->dim(), "mse_experiment target");
    SAResult res;
    try {
      res = run_sa(*stream, cfg);
    } catch (const NumericalError& e) {
      throw NumericalError("mse_experiment: run with seed " + std::to_string(seed) +
                           " failed: " + e.what());
    }
    out.per_run.push_back((res.theta_hat - target).squaredNorm());
  }
  double mean = 0.0;
  for (double v : out.per_run) mean += v;
  mean /= repeats;
  double var = 0.0;
  for (double v : out.per_run) var += (v - mean) * (v - mean);
  var /= (repeats - 1);
  out.mean_mse = mean;
  out.stderr_mse = std::sqrt(var / repeats);
  return out;
}

}  // namespace projfp
