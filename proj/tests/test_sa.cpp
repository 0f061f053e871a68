#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "projfp/instances.hpp"

using namespace projfp;

TEST_CASE("one-step fixed point with eta = 1") {
  VecX h(3);
  h << 1, 2, 3;
  ConstantStream s(MatX::Zero(3, 3), h);
  SAConfig cfg;
  cfg.eta = 1.0;
  cfg.n = 10;
  cfg.n0 = 0;
  const SAResult r = run_sa(s, cfg);
  CHECK((r.theta_hat - h).norm() < 1e-15);
  CHECK((r.theta_final - h).norm() < 1e-15);
}

TEST_CASE("noiseless iterates contract geometrically to the projected solution") {
  std::mt19937_64 rng(2);
  MatX M = oracle::gaussian(4, 4, rng);
  M *= 0.6 / detail::singular_values<double>(M)(0);
  const VecX h = oracle::gaussian(4, 1, rng);
  const VecX target = (MatX::Identity(4, 4) - M).inverse() * h;
  ConstantStream s(M, h);
  SAConfig cfg;
  cfg.eta = 0.3;
  cfg.n = 400;
  cfg.n0 = 200;
  cfg.record_every = 20;
  const SAResult r = run_sa(s, cfg);
  REQUIRE(r.recorded.size() >= 10);
  // Error ratio between records bounded by (1 - eta (1 - |M|))^20.
  const double rate = std::pow(1.0 - 0.3 * 0.4, 20);
  for (std::size_t k = 1; k < 6; ++k) {
    const double e0 = (r.recorded[k - 1].second - target).norm();
    const double e1 = (r.recorded[k].second - target).norm();
    CHECK(e1 <= rate * e0 * (1 + 1e-9));
  }
  CHECK((r.theta_hat - target).norm() < 1e-10);
}

TEST_CASE("recording is off by default") {
  ConstantStream s(MatX::Zero(2, 2), VecX::Ones(2));
  SAConfig cfg;
  cfg.eta = 0.5;
  cfg.n = 50;
  cfg.n0 = 25;
  CHECK(run_sa(s, cfg).recorded.empty());
}

TEST_CASE("config validation") {
  ConstantStream s(MatX::Zero(2, 2), VecX::Ones(2));
  SAConfig cfg;
  cfg.eta = 0.5;
  cfg.n = 10;
  cfg.n0 = 10;
  CHECK_THROWS_AS(run_sa(s, cfg), DomainError);
  cfg.n0 = 0;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(run_sa(s, cfg), DomainError);
  cfg.eta = 0.5;
  cfg.theta0 = VecX::Zero(3);
  CHECK_THROWS_AS(run_sa(s, cfg), DimensionError);
}

TEST_CASE("divergence is reported as a numerical failure") {
  ConstantStream s(MatX(3.0 * MatX::Identity(2, 2)), VecX::Ones(2), 77);
  SAConfig cfg;
  cfg.eta = 0.9;
  cfg.n = 1000;
  cfg.n0 = 0;
  CHECK_THROWS_AS(run_sa(s, cfg), NumericalError);
}

TEST_CASE("default schedule") {
  const Schedule a = default_schedule(1.0, 1, 1, 1.0);
  CHECK(a.eta == doctest::Approx(1.0));
  CHECK(a.n0 == 0);
  const Schedule b = default_schedule(2.0, 4, 100, 1.0);
  CHECK(b.eta == doctest::Approx(1.0 / 40.0));
  CHECK(b.n0 == 50);
  const Schedule c = default_schedule(2.0, 4, 200, 1.0);
  CHECK(b.eta / c.eta == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(default_schedule(0.0, 4, 100), DomainError);
}

TEST_CASE("statistical error") {
  CHECK(stat_error(MatX::Zero(3, 3), MatX::Identity(3, 3), 10) == doctest::Approx(0.3));
  CHECK(stat_error(MatX(0.5 * MatX::Identity(3, 3)), MatX::Identity(3, 3), 10) == doctest::Approx(3.0 / (0.25 * 10)));
  CHECK(stat_error(MatX(0.5 * MatX::Identity(3, 3)), MatX::Zero(3, 3), 10) == 0.0);
}

TEST_CASE("higher-order term") {
  CHECK(hot_term(0.0, 1.0, 0.5, 3, 100, 1.0) == 0.0);
  CHECK(hot_term(1.0, 1.0, 0.0, 7, 7, 0.0) == doctest::Approx(1.0));
  const double h1 = hot_term(1.3, 0.7, 0.4, 5, 1000, 2.0);
  const double h4 = hot_term(1.3, 0.7, 0.4, 5, 4000, 2.0);
  CHECK(h4 == doctest::Approx(h1 / 8.0));
  CHECK_THROWS_AS(hot_term(1.0, 1.0, 1.0, 3, 100, 1.0), DomainError);
}

TEST_CASE("bound assembly") {
  CHECK(theorem1_bound(0.0, 3.0, 0.0, 0.0, 1.0, 24.0) == 0.0);
  CHECK(theorem1_bound(1.0, 2.0, 0.1, 0.0, 1.0, 1.0) == doctest::Approx(4.2));
  const double lo = theorem1_bound(1.0, 2.0, 0.0, 0.0, 0.5, 1.0);
  const double hi = theorem1_bound(1.0, 2.0, 0.0, 0.0, 2.0, 1.0);
  CHECK(lo < hi);
  const double e_lo = theorem1_bound(0.0, 2.0, 0.1, 0.0, 0.5, 1.0);
  const double e_hi = theorem1_bound(0.0, 2.0, 0.1, 0.0, 2.0, 1.0);
  CHECK(e_lo > e_hi);
}

TEST_CASE("deterministic stream has zero noise") {
  const MatX M = 0.2 * MatX::Identity(2, 2);
  const VecX h = VecX::Ones(2);
  ConstantStream s(M, h);
  const NoiseStats ns = estimate_noise(s, Projected{M, h}, VecX::Ones(2), 100);
  CHECK(ns.sigma_L == doctest::Approx(0.0));
  CHECK(ns.sigma_b == doctest::Approx(0.0));
  CHECK(ns.Sigma_star.norm() < 1e-14);
}

TEST_CASE("regression noise estimate matches the analytic covariance") {
  VecX v(4);
  v << 1.0, -0.5, 0.25, 2.0;
  const RegressionModel model = identity_regression(4, 4, v, 1.0);
  const Projected p = project_instance(regression_instance(model));
  // Any theta_bar works for the identity design because M = 0 and the projection is exact.
  auto s = regression_stream(model, 99);
  const NoiseStats ns = estimate_noise(*s, p, solve_projected(p), 100000);
  const MatX exact = regression_noise_covariance(model);
  CHECK((ns.Sigma_star - exact).norm() <= 0.2 * exact.norm());
  Eigen::SelfAdjointEigenSolver<MatX> es(ns.Sigma_star);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("noiseless stream gives zero standard error") {
  const MatX M = 0.3 * MatX::Identity(2, 2);
  const VecX h = VecX::Ones(2);
  const VecX target = (MatX::Identity(2, 2) - M).inverse() * h;
  StreamFactory f = [&](std::uint64_t seed) { return std::make_unique<ConstantStream>(M, h, seed); };
  SAConfig cfg;
  cfg.eta = 0.2;
  cfg.n = 200;
  cfg.n0 = 100;
  const MseStats st = mse_experiment(f, cfg, target, 5);
  CHECK(st.stderr_mse == 0.0);
  for (double x : st.per_run) CHECK(x == st.mean_mse);
}

TEST_CASE("regression SA tracks the statistical error") {
  // d = 4, 40 repeats, c0 = 1 so that n eta >> 1 and the 1/n regime is reached.
  const RegressionModel model = identity_regression(4, 4, VecX::Zero(4), 1.0);
  const Projected p = project_instance(regression_instance(model));
  const MatX Sigma = regression_noise_covariance(model);
  const NoiseScalars sc = regression_sigma(model);
  StreamFactory f = [&](std::uint64_t seed) { return regression_stream(model, seed); };
  std::vector<double> mse;
  for (std::int64_t n : {4000, 8000}) {
    const Schedule sch = default_schedule(sc.sigma_L, 4, n, 1.0);
    SAConfig cfg;
    cfg.eta = sch.eta;
    cfg.n = n;
    cfg.n0 = sch.n0;
    const MseStats st = mse_experiment(f, cfg, VecX::Zero(4), 40, 1000);
    const double eps = stat_error(p.M, Sigma, n);
    CHECK(st.mean_mse / eps > 0.1);
    CHECK(st.mean_mse / eps < 3.0);
    mse.push_back(st.mean_mse);
  }
  CHECK(mse[1] / mse[0] > 0.3);
  CHECK(mse[1] / mse[0] < 0.8);
}
