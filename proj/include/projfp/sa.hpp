#pragma once

// Linear stochastic approximation in projected coordinates with
// Polyak-Ruppert averaging, and the error functionals of its guarantee.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "projfp/fixpoint.hpp"

namespace projfp {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// One projected sample (M_i, h_i).
struct Observation {
  MatX M;
  VecX h;
};

/// Seeded source of unbiased projected samples. Single owner, sequential.
class ObservationStream {
 public:
  virtual ~ObservationStream() = default;
  virtual Index dim() const = 0;
  virtual void next(Observation& obs) = 0;
  virtual std::uint64_t seed() const = 0;
  virtual std::string descriptor() const = 0;
};

using StreamFactory = std::function<std::unique_ptr<ObservationStream>(std::uint64_t seed)>;

/// Emits the same (M, h) forever.
class ConstantStream final : public ObservationStream {
 public:
  ConstantStream(MatX M, VecX h, std::uint64_t seed = 0);
  Index dim() const override { return h_.size(); }
  void next(Observation& obs) override;
  std::uint64_t seed() const override { return seed_; }
  std::string descriptor() const override { return "constant"; }

 private:
  MatX M_;
  VecX h_;
  std::uint64_t seed_;
};

struct SAConfig {
  double eta = 0.0;
  std::int64_t n = 0;
  std::int64_t n0 = 0;
  VecX theta0;                    // empty means zero
  std::int64_t record_every = 0;  // 0 disables recording

  void validate(Index d) const;
};

struct SAResult {
  VecX theta_hat;
  VecX theta_final;
  std::vector<std::pair<std::int64_t, VecX>> recorded;
  SAConfig config;
};

struct NoiseStats {
  double sigma_L = 0.0;
  double sigma_b = 0.0;
  MatX Sigma_star;
};

struct Schedule {
  double eta;
  std::int64_t n0;
};

struct MseStats {
  double mean_mse;
  double stderr_mse;
  std::vector<double> per_run;
};

inline constexpr double kDivergenceThreshold = 1e12;

/// theta_{t+1} = (1-eta) theta_t + eta (M_{t+1} theta_t + h_{t+1}); averages theta_t over t in (n0, n].
SAResult run_sa(ObservationStream& stream, const SAConfig& cfg);

/// eta = 1/(c0 sigma_L sqrt(d n)), n0 = floor(n/2).
Schedule default_schedule(double sigma_L, Index d, std::int64_t n, double c0 = 24.0);

/// epsilon_n = tr((I-M)^{-1} Sigma* (I-M)^{-T}) / n.
double stat_error(const MatX& M, const MatX& Sigma_star, std::int64_t n);

/// H_n = sigma_L/(1-kappa)^3 (d/n)^{3/2} (|vbar|^2 sigma_L^2 + sigma_b^2).
double hot_term(double sigma_L, double sigma_b, double kappa, Index d, std::int64_t n,
                double vbar_norm);

/// (1+omega) alpha A + c (1 + 1/omega)(eps_n + H_n).
double theorem1_bound(double approx, double alpha, double eps_n, double hot, double omega,
                      double c);

/// Empirical noise moments at theta_bar. sigma_L is probed on the coordinate directions
/// and theta_bar/|theta_bar| only, so it can under-estimate the supremum over the sphere.
NoiseStats estimate_noise(ObservationStream& stream, const ProjectedInstance<double>& proj,
                          const VecX& theta_bar, std::int64_t samples);

/// Mean and standard error of |theta_hat - target|^2 over seeds first_seed .. first_seed+repeats-1.
MseStats mse_experiment(const StreamFactory& factory, const SAConfig& cfg, const VecX& target,
                        int repeats, std::uint64_t first_seed = 0);

}  // namespace projfp
