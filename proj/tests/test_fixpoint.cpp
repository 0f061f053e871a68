#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "projfp/instances.hpp"

using namespace projfp;

namespace {

MatX random_contraction(Index d, double radius, std::mt19937_64& rng) {
  MatX M = oracle::gaussian(d, d, rng);
  return M * (radius / detail::singular_values<double>(M)(0));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("kappa examples") {
  CHECK(kappa<double>(MatX::Zero(3, 3)) == 0.0);
  MatX J(2, 2);
  J << 0, 1, 0, 0;
  CHECK(kappa<double>(J) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(kappa<double>(MatX(0.3 * MatX::Identity(4, 4))) == doctest::Approx(0.3));
}

TEST_CASE("opnorm agrees with power iteration in the weighted geometry") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 40; ++t) {
    const Index D = 3 + t % 12;
    std::uniform_real_distribution<double> u(0.1, 1.0);
    VecX xi(D);
    for (Index i = 0; i < D; ++i) xi[i] = u(rng);
    xi /= xi.sum();
    const MatX L = oracle::gaussian(D, D, rng);
    const WeightedSpace<double> sp(xi);
    CHECK(rel(opnorm(sp, L), oracle::opnorm(xi, L)) < 1e-9);
  }
  const auto sp = WeightedSpace<double>::uniform(3);
  CHECK(opnorm<double>(sp, MatX(-0.7 * MatX::Identity(3, 3))) == doctest::Approx(0.7));
}

TEST_CASE("projection of trivial instances") {
  auto sp = WeightedSpace<double>::uniform(4, 0.25);
  const Basis<double> B = orthonormalize(sp, MatX(MatX::Identity(4, 2)));
  const Instance id(B, MatX::Identity(4, 4), VecX::Zero(4));
  CHECK((project_instance(id).M - MatX::Identity(2, 2)).norm() < 1e-14);
  const Instance zero(B, MatX::Zero(4, 4), B.vectors().col(0));
  const Projected p = project_instance(zero);
  CHECK(p.M.norm() == 0.0);
  CHECK((p.h - VecX::Unit(2, 0)).norm() < 1e-14);
}

TEST_CASE("solve_exact agrees with an explicit inverse") {
  std::mt19937_64 rng(4);
  RandomInstanceOptions opt;
  for (int t = 0; t < 30; ++t) {
    const Instance inst = random_instance(opt, rng);
    const VecX v = solve_exact(inst);
    const VecX w = oracle::solve_by_inverse(inst.L, inst.b);
    CHECK((v - w).norm() <= 1e-9 * (1.0 + w.norm()));
  }
  auto sp = WeightedSpace<double>::uniform(3);
  const Instance zero(Basis<double>(sp, MatX::Identity(3, 1)), MatX::Zero(3, 3), VecX::Ones(3));
  CHECK((solve_exact(zero) - VecX::Ones(3)).norm() == 0.0);
}

TEST_CASE("solve_projected examples and preconditions") {
  VecX h(2);
  h << 1, -2;
  CHECK((solve_projected(Projected{MatX::Zero(2, 2), h}) - h).norm() == 0.0);
  CHECK((solve_projected(Projected{MatX(0.5 * MatX::Identity(2, 2)), h}) - 2.0 * h).norm() < 1e-14);
  CHECK_THROWS_AS(solve_projected(Projected{MatX(1.5 * MatX::Identity(2, 2)), h}), DomainError);
  CHECK_THROWS_AS(solve_projected(Projected{MatX::Zero(2, 2), VecX::Ones(3)}), DimensionError);
}

TEST_CASE("subspace and ambient forms of the projected solution agree") {
  std::mt19937_64 rng(9);
  RandomInstanceOptions opt;
  for (int t = 0; t < 50; ++t) {
    opt.D = 5 + t % 30;
    opt.d = 1 + t % std::min<Index>(opt.D - 1, 8);
    const Instance inst = random_instance(opt, rng);
    const VecX v = oracle::gaussian(opt.D, 1, rng);
    const Instance with_v(inst.basis, inst.L, v);
    const VecX sub = embed(inst.basis, solve_projected(project_instance(with_v)));
    const VecX amb = oracle::ambient_projected_solution(inst.space().weights(), inst.basis.vectors(), inst.L, v);
    CHECK((sub - amb).norm() <= 1e-9 * (1.0 + amb.norm()));
  }
}

TEST_CASE("approx_factor examples") {
  CHECK(approx_factor<double>(MatX::Zero(3, 3), 1.0) == doctest::Approx(2.0));
  CHECK(approx_factor<double>(MatX::Zero(3, 3), 0.0) == doctest::Approx(1.0));
  for (double lam : {-0.8, -0.2, 0.0, 0.3, 0.9}) {
    for (double s : {0.1, 0.5, 1.0, 2.0}) {
      MatX M(1, 1);
      M << lam;
      CHECK(rel(approx_factor<double>(M, s), 1.0 + (s * s - lam * lam) / ((1 - lam) * (1 - lam))) < 1e-12);
    }
  }
  CHECK_THROWS_AS(approx_factor<double>(MatX::Zero(2, 2), -1.0), DomainError);
  CHECK_THROWS_AS(approx_factor<double>(MatX::Identity(2, 2), 1.0), SingularError);
}

TEST_CASE("approx_factor_symmetric examples") {
  CHECK(approx_factor_symmetric<double>(VecX::Zero(4), 1.0) == doctest::Approx(2.0));
  VecX e(1);
  e << 0.5;
  CHECK(approx_factor_symmetric<double>(e, 0.9) == doctest::Approx(3.24).epsilon(1e-14));
  CHECK(approx_factor_symmetric<double>(e, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("approx_factor agrees with the generalized eigenvalue route") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const Index d = 1 + t % 12;
    const MatX M = random_contraction(d, 0.05 + 0.9 * u(rng), rng);
    const double s = 2.0 * u(rng);
    CHECK(rel(approx_factor<double>(M, s), oracle::approx_factor(M, s)) < 1e-8);
  }
}

TEST_CASE("symmetric matrices reduce to the eigenvalue formula") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int t = 0; t < 200; ++t) {
    const Index d = 1 + t % 15;
    VecX eigs(d);
    for (Index i = 0; i < d; ++i) eigs[i] = u(rng);
    // Rotate so the test does not rely on diagonal input.
    const MatX Q = oracle::gaussian(d, d, rng).householderQr().householderQ();
    const MatX M = Q * eigs.asDiagonal() * Q.transpose();
    for (double s : {0.1, 0.5, 1.0, 2.0})
      CHECK(rel(approx_factor<double>(M, s), approx_factor_symmetric<double>(eigs, s)) < 1e-8);
  }
}

TEST_CASE("Lemma 1 bounds") {
  const auto z = approx_factor_bounds<double>(MatX::Zero(2, 2), 1.0);
  CHECK(z.a == doctest::Approx(2.0));
  REQUIRE(z.b.has_value());
  CHECK(*z.b == doctest::Approx(3.0));
  const auto z2 = approx_factor_bounds<double>(MatX::Zero(2, 2), 2.0);
  CHECK(z2.a == doctest::Approx(5.0));
  CHECK_FALSE(z2.b.has_value());

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Index d = 1 + t % 10;
    const MatX M = random_contraction(d, 0.05 + 0.9 * u(rng), rng);
    if (!(kappa(M) < 1.0)) continue;
    const double s = u(rng);
    const double a = approx_factor<double>(M, s);
    const auto b = approx_factor_bounds<double>(M, s);
    CHECK(a <= b.a * (1 + 1e-10));
    REQUIRE(b.b.has_value());
    CHECK(a <= *b.b * (1 + 1e-10));
  }
}

TEST_CASE("yb_factor_1 examples and oracle") {
  CHECK(yb_factor_1<double>(MatX::Zero(2, 2), 1.0) == doctest::Approx(2.0));
  CHECK(yb_factor_1<double>(MatX(0.5 * MatX::Identity(2, 2)), 0.7) == doctest::Approx(1.0 + 0.49 / 0.25));
  std::mt19937_64 rng(16);
  for (int t = 0; t < 100; ++t) {
    const MatX M = random_contraction(1 + t % 8, 0.9, rng);
    CHECK(rel(yb_factor_1<double>(M, 0.8), oracle::yb1(M, 0.8)) < 1e-9);
  }
}

TEST_CASE("yb_factor_2 complement route equals the Gram route") {
  std::mt19937_64 rng(17);
  RandomInstanceOptions opt;
  for (int t = 0; t < 60; ++t) {
    opt.D = 6 + t % 20;
    opt.d = 1 + t % 5;
    const Instance inst = random_instance(opt, rng);
    const MatX& Phi = inst.basis.vectors();
    const VecX& xi = inst.space().weights();
    const Projected p = project_instance(inst);
    // K K^T = Phi^T Xi L Xi^{-1} L^T Xi Phi - M M^T, without building a complement.
    const MatX G = Phi.transpose() * xi.asDiagonal() * inst.L * xi.cwiseInverse().asDiagonal() * inst.L.transpose() *
                   xi.asDiagonal() * Phi;
    const MatX KKt = G - p.M * p.M.transpose();
    CHECK(rel(yb_factor_2(inst), yb_factor_2_from_gram<double>(p.M, KKt)) < 1e-8);
  }
}

TEST_CASE("yb_factor_2 is 1 when L does not see the complement") {
  auto sp = WeightedSpace<double>::uniform(4);
  const Basis<double> B(sp, MatX::Identity(4, 2));
  MatX L = MatX::Zero(4, 4);
  L.topLeftCorner(2, 2) << 0.2, 0.1, 0.0, 0.3;
  CHECK(yb_factor_2(Instance(B, L, VecX::Ones(4))) == doctest::Approx(1.0));
  CHECK(yb_factor_2(Instance(B, MatX::Zero(4, 4), VecX::Ones(4))) == doctest::Approx(1.0));
}

TEST_CASE("oracle error and the oracle inequality") {
  auto sp = WeightedSpace<double>::uniform(3);
  const Basis<double> B(sp, MatX::Identity(3, 2));
  MatX L = 0.3 * MatX::Identity(3, 3);
  VecX b(3);
  b << 1, 1, 0;
  const Instance in_s(B, L, b);
  CHECK(oracle_error(in_s) == doctest::Approx(0.0));
  const auto rep0 = verify_oracle_inequality(in_s);
  CHECK(rep0.ratio == 0.0);
  CHECK(rep0.passed);

  std::mt19937_64 rng(18);
  RandomInstanceOptions opt;
  for (int t = 0; t < 300; ++t) {
    opt.D = 5 + t % 40;
    opt.d = 1 + t % 8;
    const Instance inst = random_instance(opt, rng);
    const auto rep = verify_oracle_inequality(inst);
    CHECK(rep.ratio <= 1.0 + 1e-8);
  }
}

TEST_CASE("factor sandwich on random instances") {
  std::mt19937_64 rng(19);
  RandomInstanceOptions opt;
  for (int t = 0; t < 200; ++t) {
    opt.D = 5 + t % 40;
    opt.d = 1 + t % 8;
    const auto fr = factor_report(random_instance(opt, rng));
    CHECK(sandwich_holds(fr.yb2, fr.alpha, fr.yb1));
    CHECK(fr.alpha <= fr.lemma1a_bound * (1 + 1e-10));
    if (fr.opnorm_L <= 1.0) {
      REQUIRE(fr.lemma1b_bound.has_value());
      CHECK(fr.alpha <= *fr.lemma1b_bound * (1 + 1e-10));
    }
  }
}

TEST_CASE("long double instantiation of the factors") {
  using LD = long double;
  Mat<LD> M(2, 2);
  M << LD(0.2), LD(0.1), LD(-0.1), LD(0.3);
  const LD a = approx_factor<LD>(M, LD(0.5));
  CHECK(std::abs(static_cast<double>(a) - oracle::approx_factor(M.cast<double>(), 0.5)) < 1e-12);
}
