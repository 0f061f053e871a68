#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "projfp/random.hpp"
#include "projfp/wspace.hpp"

using namespace projfp;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

namespace {

VecX random_weights(Index D, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  VecX w(D);
  for (Index i = 0; i < D; ++i) w[i] = u(rng);
  return w / w.sum();
}

}  // namespace

TEST_CASE("inner product matches the weighted sum") {
  WeightedSpace<double> sp(VecX::Constant(3, 0.5));
  VecX p(3), q(3);
  p << 1, 2, 3;
  q << 4, 5, 6;
  CHECK(sp.inner(p, q) == doctest::Approx(16.0));
  CHECK(sp.norm(p) == doctest::Approx(std::sqrt(7.0)));
}

TEST_CASE("non-positive weights are rejected") {
  VecX w(3);
  w << 1.0, 0.0, 1.0;
  CHECK_THROWS_AS(WeightedSpace<double>{w}, DomainError);
  w[1] = -1.0;
  CHECK_THROWS_AS(WeightedSpace<double>{w}, DomainError);
  CHECK_THROWS_AS(WeightedSpace<double>{VecX()}, DomainError);
}

TEST_CASE("dimension mismatch raises") {
  auto sp = WeightedSpace<double>::uniform(4);
  CHECK_THROWS_AS(sp.inner(VecX::Ones(3), VecX::Ones(4)), DimensionError);
}

TEST_CASE("basis orthonormality is checked") {
  auto sp = WeightedSpace<double>::uniform(3);
  MatX V(3, 2);
  V << 1, 1, 0, 1, 0, 0;
  CHECK_THROWS_AS(Basis<double>(sp, V), DomainError);
}

TEST_CASE("orthonormalize yields a xi-orthonormal basis of the same span") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index D = 5 + trial % 20, d = 1 + trial % 5;
    WeightedSpace<double> sp(random_weights(D, rng));
    const MatX X = oracle::gaussian(D, d, rng);
    const Basis<double> B = orthonormalize(sp, X);
    CHECK((sp.gram(B.vectors(), B.vectors()) - MatX::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
    // Same span: projecting X onto B recovers X.
    const MatX PX = oracle::projector(sp.weights(), B.vectors()) * X;
    CHECK((PX - X).norm() < 1e-10 * X.norm());
  }
}

TEST_CASE("rank-deficient input raises SingularError") {
  auto sp = WeightedSpace<double>::uniform(4);
  MatX X(4, 2);
  X << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(orthonormalize(sp, X), SingularError);
}

TEST_CASE("projection agrees with the explicit projector and is idempotent") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Index D = 8 + trial % 10, d = 1 + trial % 6;
    WeightedSpace<double> sp(random_weights(D, rng));
    const Basis<double> B = orthonormalize(sp, oracle::gaussian(D, d, rng));
    const VecX v = oracle::gaussian(D, 1, rng);
    const VecX p = project(B, v);
    CHECK((p - oracle::projector(sp.weights(), B.vectors()) * v).norm() < 1e-10 * (1 + v.norm()));
    CHECK((project(B, p) - p).norm() < 1e-12 * (1 + p.norm()));
    // Residual is xi-orthogonal to the subspace.
    CHECK(sp.gram(B.vectors(), v - p).cwiseAbs().maxCoeff() < 1e-12 * (1 + v.norm()));
    CHECK((embed(B, project_coeffs(B, v)) - p).norm() < 1e-12 * (1 + p.norm()));
  }
}

TEST_CASE("complement basis completes an orthonormal basis of the ambient space") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const Index D = 6 + trial % 15, d = 1 + trial % 5;
    WeightedSpace<double> sp(random_weights(D, rng));
    const Basis<double> B = orthonormalize(sp, oracle::gaussian(D, d, rng));
    const Basis<double> C = complement_basis(B);
    REQUIRE(C.dim() == D - d);
    MatX full(D, D);
    full << B.vectors(), C.vectors();
    CHECK((sp.gram(full, full) - MatX::Identity(D, D)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("whiten and unwhiten are inverse") {
  std::mt19937_64 rng(3);
  WeightedSpace<double> sp(random_weights(7, rng));
  const MatX X = oracle::gaussian(7, 3, rng);
  CHECK((sp.unwhiten(sp.whiten(X)) - X).norm() < 1e-12 * X.norm());
}

TEST_CASE("long double instantiation") {
  using LD = long double;
  WeightedSpace<LD> sp(Vec<LD>::Constant(4, LD(0.25)));
  Mat<LD> X = Mat<LD>::Random(4, 2);
  const Basis<LD> B = orthonormalize(sp, X);
  CHECK(static_cast<double>((sp.gram(B.vectors(), B.vectors()) - Mat<LD>::Identity(2, 2)).cwiseAbs().maxCoeff()) <
        1e-15);
}
