#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "projfp/instances.hpp"

namespace projfp {

namespace {

bool is_power_of_two(Index m) { return m > 0 && (m & (m - 1)) == 0; }

void check_signs(const std::vector<int>& eps, std::size_t expected, const char* what) {
  if (eps.size() != expected)
    throw DomainError(std::string(what) + ": expected " + std::to_string(expected) + " signs, got " +
                      std::to_string(eps.size()));
  for (int e : eps)
    if (e != 1 && e != -1) throw DomainError(std::string(what) + ": signs must be +1 or -1");
}

WeightedSpace<double> lb_space(Index D, Index d) {
  VecX xi(D);
  xi.head(d).setConstant(1.0 / (2.0 * static_cast<double>(d)));
  xi.tail(D - d).setConstant(1.0 / (2.0 * static_cast<double>(D - d)));
  return WeightedSpace<double>(std::move(xi));
}

Basis<double> lb_basis(Index D, Index d) {
  MatX Phi = MatX::Zero(D, d);
  Phi.topRows(d) = std::sqrt(2.0 * static_cast<double>(d)) * MatX::Identity(d, d);
  return Basis<double>(lb_space(D, d), std::move(Phi));
}

struct Core {
  VecX u, w, y, base;  // base = (I - M0)^{-1} h0
  double alpha;
};

Core lb_core(const LowerBoundSpec& spec) {
  Core c;
  c.alpha = approx_factor<double>(spec.M0, spec.gamma_max);
  c.u = lb_top_eigenvector(spec.M0, spec.gamma_max);
  const double scale = std::sqrt(std::max(0.0, c.alpha - 1.0));
  const Index d = spec.d;
  const MatX A = MatX::Identity(d, d) - spec.M0;
  c.w = scale * (A * c.u);
  c.y = scale * spec.delta * c.u;
  c.base = A.partialPivLu().solve(spec.h0);
  return c;
}

std::vector<int> random_signs(std::size_t n, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<int> out(n);
  for (auto& e : out) e = coin(rng) ? 1 : -1;
  return out;
}

}  // namespace

std::string to_string(LbKind kind) {
  switch (kind) {
    case LbKind::theorem2: return "lb_theorem2";
    case LbKind::theorem4: return "lb_theorem4";
    case LbKind::mrp: return "lb_mrp";
  }
  return "unknown";
}

std::string to_string(GraphKind kind) {
  return kind == GraphKind::erdos_renyi ? "erdos_renyi" : "geometric";
}

MatX hadamard(int k) {
  if (k < 0) throw DomainError("hadamard: negative order");
  MatX H = MatX::Ones(1, 1);
  for (int i = 0; i < k; ++i) {
    const Index n = H.rows();
    MatX next(2 * n, 2 * n);
    next << H, H, H, -H;
    H = std::move(next);
  }
  return H;
}

void LowerBoundSpec::validate() const {
  if (kind == LbKind::mrp) {
    if (d < 1 || D < 1 || d % 4 != 0 || D % 4 != 0)
      throw DomainError("lb_mrp: D and d must be positive multiples of four");
    if (D <= 2 * d) throw DomainError("lb_mrp: need D > 2d so that S_1 and S_2 are nonempty");
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("lb_mrp: discount must lie in (0, 1)");
    if (!(nu > 0.0)) throw DomainError("lb_mrp: nu must be positive");
    if (!(delta > 0.0)) throw DomainError("lb_mrp: delta must be positive");
    if (z != 1 && z != -1) throw DomainError("lb_mrp: z must be a sign");
    return;
  }
  if (d < 1 || D < d + 1) throw DomainError("lower bound: need D >= d + 1");
  detail::require_dim(M0.rows(), d, "lower bound M0");
  detail::require_dim(M0.cols(), d, "lower bound M0");
  detail::require_dim(h0.size(), d, "lower bound h0");
  if (!(delta > 0.0)) throw DomainError("lower bound: delta must be positive");
  if (!(gamma_max > 0.0)) throw DomainError("lower bound: gamma_max must be positive");
  if (z != 1 && z != -1) throw DomainError("lower bound: z must be a sign");
  const double m0 = detail::singular_values<double>(M0)(0);
  if (m0 > gamma_max * (1.0 + 1e-12))
    throw DomainError("lower bound: |M0| = " + std::to_string(m0) + " exceeds gamma_max");
  detail::factor_I_minus<double>(M0, "lower bound");
  if (kind == LbKind::theorem2) {
    check_signs(eps, static_cast<std::size_t>(D - d), "lb_theorem2");
  } else {
    if (q < 2) throw DomainError("lb_theorem4: q must be at least 2");
    if ((D - d) % q != 0) throw DomainError("lb_theorem4: D - d must be divisible by q");
    if (!is_power_of_two((D - d) / q)) throw DomainError("lb_theorem4: (D - d)/q must be a power of two");
    check_signs(eps, static_cast<std::size_t>(D - d), "lb_theorem4");
  }
}

VecX lb_top_eigenvector(const MatX& M0, double gamma_max) {
  const Index d = M0.rows();
  auto lu = detail::factor_I_minus<double>(M0, "lb_top_eigenvector");
  const MatX S = gamma_max * gamma_max * MatX::Identity(d, d) - M0 * M0.transpose();
  MatX C = detail::congruence<double>(lu, S);
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(C);
  const VecX& lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  const double tol = 1e-10 * std::max(1.0, std::abs(top));

  Index pick = -1;
  for (Index k = 0; k < d; ++k) {
    if (lam[k] < top - tol) continue;
    if (pick < 0) {
      pick = k;
      continue;
    }
    // Lexicographically larger absolute entries win.
    for (Index i = 0; i < d; ++i) {
      const double a = std::abs(es.eigenvectors()(i, k));
      const double b = std::abs(es.eigenvectors()(i, pick));
      if (std::abs(a - b) <= 1e-12) continue;
      if (a > b) pick = k;
      break;
    }
  }
  VecX u = es.eigenvectors().col(pick);
  for (Index i = 0; i < d; ++i) {
    if (std::abs(u[i]) > 1e-12) {
      if (u[i] < 0.0) u = -u;
      break;
    }
  }
  return u;
}

LbInstance lb_theorem2(const LowerBoundSpec& spec) {
  if (spec.kind != LbKind::theorem2) throw DomainError("lb_theorem2: wrong spec kind");
  spec.validate();
  const Index d = spec.d;
  const Index D = spec.D;
  const Index k = D - d;
  const double dd = static_cast<double>(d);
  const Core c = lb_core(spec);

  MatX L = MatX::Zero(D, D);
  L.topLeftCorner(d, d) = spec.M0;
  VecX b = VecX::Zero(D);
  b.head(d) = std::sqrt(2.0 * dd) * spec.h0;
  VecX v = VecX::Zero(D);
  v.head(d) = std::sqrt(2.0 * dd) * (spec.z * c.y + c.base);
  for (Index j = 0; j < k; ++j) {
    const double e = spec.eps[static_cast<std::size_t>(j)];
    L.col(d + j).head(d) = std::sqrt(dd) / static_cast<double>(k) * e * c.w;
    b[d + j] = std::sqrt(2.0) * spec.z * spec.delta * e;
    v[d + j] = b[d + j];
  }
  return LbInstance{Instance(lb_basis(D, d), std::move(L), std::move(b)), std::move(v), c.alpha,
                    c.u, c.w, c.y, std::nullopt};
}

LbInstance lb_theorem4(const LowerBoundSpec& spec) {
  if (spec.kind != LbKind::theorem4) throw DomainError("lb_theorem4: wrong spec kind");
  spec.validate();
  const Index d = spec.d;
  const Index D = spec.D;
  const Index q = spec.q;
  const Index m = (D - d) / q;
  const double dd = static_cast<double>(d);
  const Core c = lb_core(spec);
  auto eps = [&](Index i, Index j) { return static_cast<double>(spec.eps[static_cast<std::size_t>(i * m + j)]); };
  auto coord = [&](Index i, Index j) { return d + i * m + j; };

  MatX L = MatX::Zero(D, D);
  L.topLeftCorner(d, d) = spec.M0;
  for (Index j = 0; j < m; ++j)
    L.col(coord(0, j)).head(d) = std::sqrt(dd / 2.0) / static_cast<double>(D - d) * spec.z * eps(0, j) * c.w;
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < m; ++j) {
      L(coord(i, j), coord(i, j)) = 0.5;
      if (i + 1 < q) L(coord(i, j), coord(i + 1, j)) = 0.5 * eps(i, j) * eps(i + 1, j);
    }
  }

  VecX b = VecX::Zero(D);
  b.head(d) = std::sqrt(2.0 * dd) * spec.h0;
  for (Index j = 0; j < m; ++j) b[coord(q - 1, j)] = spec.delta / std::sqrt(2.0) * eps(q - 1, j);

  VecX v = VecX::Zero(D);
  v.head(d) = std::sqrt(dd) / static_cast<double>(q) * spec.z * c.y + std::sqrt(2.0 * dd) * c.base;
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < m; ++j) v[coord(i, j)] = std::sqrt(2.0) * spec.delta * eps(i, j);

  int order = 0;
  while ((Index{1} << order) < m) ++order;
  // sqrt(2q) (H_order kron I_q) on the last D - d coordinates.
  const MatX H = hadamard(order);
  const double sq = std::sqrt(2.0 * static_cast<double>(q));
  MatX perp = MatX::Zero(D, D - d);
  for (Index a = 0; a < m; ++a)
    for (Index bcol = 0; bcol < m; ++bcol)
      for (Index i = 0; i < q; ++i) perp(d + a * q + i, bcol * q + i) = sq * H(a, bcol);

  LbInstance out{Instance(lb_basis(D, d), std::move(L), std::move(b)), std::move(v), c.alpha,
                 c.u, c.w, c.y, std::nullopt};
  out.complement.emplace(lb_space(D, d), std::move(perp));
  return out;
}

std::pair<MatX, VecX> lb_ambient_sample(const LowerBoundSpec& spec, const LbInstance& lb, Rng& rng) {
  const Index d = spec.d;
  const Index D = spec.D;
  const double dd = static_cast<double>(d);
  MatX L = MatX::Zero(D, D);
  L.topLeftCorner(d, d) = spec.M0;
  VecX b = VecX::Zero(D);
  b.head(d) = std::sqrt(2.0 * dd) * spec.h0;

  if (spec.kind == LbKind::theorem2) {
    const Index k = D - d;
    std::uniform_int_distribution<Index> pick(0, k - 1);
    const Index tl = pick(rng);
    const Index tb = pick(rng);
    L.col(d + tl).head(d) = std::sqrt(dd) * spec.eps[static_cast<std::size_t>(tl)] * lb.w;
    b[d + tb] = std::sqrt(2.0) * static_cast<double>(k) * spec.z * spec.delta *
                spec.eps[static_cast<std::size_t>(tb)];
    return {std::move(L), std::move(b)};
  }
  if (spec.kind != LbKind::theorem4) throw DomainError("lb_ambient_sample: no ambient model for this kind");

  const Index q = spec.q;
  const Index m = (D - d) / q;
  const double mm = static_cast<double>(m);
  std::bernoulli_distribution chi(1.0 / mm);
  auto eps = [&](Index i, Index j) { return static_cast<double>(spec.eps[static_cast<std::size_t>(i * m + j)]); };
  auto coord = [&](Index i, Index j) { return d + i * m + j; };
  for (Index j = 0; j < m; ++j)
    if (chi(rng))
      L.col(coord(0, j)).head(d) = std::sqrt(dd / 2.0) / static_cast<double>(q) * spec.z * eps(0, j) * lb.w;
  for (Index i = 0; i < q; ++i) {
    for (Index j = 0; j < m; ++j) {
      L(coord(i, j), coord(i, j)) = 0.5;
      if (i + 1 < q && chi(rng)) L(coord(i, j), coord(i + 1, j)) = 0.5 * mm * eps(i, j) * eps(i + 1, j);
    }
  }
  for (Index j = 0; j < m; ++j)
    if (chi(rng)) b[coord(q - 1, j)] = mm * spec.delta / std::sqrt(2.0) * eps(q - 1, j);
  return {std::move(L), std::move(b)};
}

std::unique_ptr<ObservationStream> lb_stream(const LowerBoundSpec& spec, std::uint64_t seed) {
  if (spec.kind == LbKind::mrp) throw DomainError("lb_stream: use td_stream for the MRP construction");
  spec.validate();
  return std::make_unique<ConstantStream>(spec.M0, spec.h0, seed);
}

LbMrp lb_mrp(const LowerBoundSpec& spec) {
  if (spec.kind != LbKind::mrp) throw DomainError("lb_mrp: wrong spec kind");
  spec.validate();
  const Index D = spec.D;
  const Index d = spec.d;
  const Index s1_begin = 2 * d, s2_begin = d + D / 2;
  const Index s1_size = s2_begin - s1_begin, s2_size = D - s2_begin;

  auto membership = [](const std::vector<Index>& chosen, Index begin, Index size, const char* what) {
    std::vector<int> in(static_cast<std::size_t>(size), 0);
    if (chosen.empty()) {
      for (Index k = 0; k < size / 2; ++k) in[static_cast<std::size_t>(k)] = 1;
      return in;
    }
    if (static_cast<Index>(chosen.size()) != size / 2)
      throw DomainError(std::string("lb_mrp: ") + what + " must contain half of its block");
    for (Index s : chosen) {
      if (s < begin || s >= begin + size) throw DomainError(std::string("lb_mrp: ") + what + " leaves its block");
      if (in[static_cast<std::size_t>(s - begin)]) throw DomainError(std::string("lb_mrp: ") + what + " repeats a state");
      in[static_cast<std::size_t>(s - begin)] = 1;
    }
    return in;
  };
  const std::vector<int> g1 = membership(spec.gamma1, s1_begin, s1_size, "Gamma_1");
  const std::vector<int> g2 = membership(spec.gamma2, s2_begin, s2_size, "Gamma_2");
  auto in_g1 = [&](Index s) { return g1[static_cast<std::size_t>(s - s1_begin)] == 1; };
  auto in_g2 = [&](Index s) { return g2[static_cast<std::size_t>(s - s2_begin)] == 1; };

  LbMrp out;
  const double gamma = spec.gamma;
  const double rho = std::min(spec.gamma, spec.nu);
  if (!(rho < 1.0)) throw DomainError("lb_mrp: rho = min(gamma, nu) must be below 1");
  out.rho = rho;
  out.tau = std::min(spec.delta / std::sqrt(2.0 * (1.0 - rho)), 1.0);
  out.c0 = 0.5 * (1.0 - rho) / (1.0 - gamma * (rho - 0.5 * (1.0 - rho) * (1.0 - gamma * gamma)));
  const double zt = spec.z * out.tau;

  MarkovRewardProcess& mrp = out.mrp;
  mrp.gamma = gamma;
  mrp.P = MatX::Zero(D, D);
  for (Index i = 0; i < 2 * d; ++i) {
    mrp.P(i, i) = rho;
    mrp.P(i, i < d ? i + d : i - d) = 0.5 * (1.0 - rho);
    for (Index s = s1_begin; s < s2_begin; ++s)
      if (in_g1(s) == (i < d)) mrp.P(i, s) = (1.0 - rho) / static_cast<double>(s1_size);
  }
  for (Index s = s1_begin; s < s2_begin; ++s)
    for (Index t = s2_begin; t < D; ++t)
      if (in_g1(s) == in_g2(t)) mrp.P(s, t) = 2.0 / static_cast<double>(s2_size);
  for (Index t = s2_begin; t < D; ++t)
    for (Index i = 0; i < d; ++i) mrp.P(t, in_g2(t) ? i : i + d) = 1.0 / static_cast<double>(d);

  mrp.r = VecX::Zero(D);
  for (Index s = s1_begin; s < s2_begin; ++s) mrp.r[s] = in_g1(s) ? zt : -zt;

  const double scale = std::sqrt((2.0 - rho) * static_cast<double>(d));
  mrp.Psi = MatX::Zero(D, d);
  for (Index i = 0; i < d; ++i) {
    mrp.Psi(i, i) = scale;
    mrp.Psi(i + d, i) = -scale;
  }

  out.xi_closed_form.resize(D);
  out.xi_closed_form.head(2 * d).setConstant(1.0 / (2.0 * (2.0 - rho) * static_cast<double>(d)));
  out.xi_closed_form.tail(D - 2 * d).setConstant((1.0 - rho) / ((2.0 - rho) * static_cast<double>(D - 2 * d)));
  mrp.xi = out.xi_closed_form;

  const double c0 = out.c0;
  out.v_star.resize(D);
  for (Index i = 0; i < d; ++i) {
    out.v_star[i] = gamma * c0 * zt;
    out.v_star[i + d] = -gamma * c0 * zt;
  }
  for (Index s = s1_begin; s < s2_begin; ++s) out.v_star[s] = (in_g1(s) ? 1.0 : -1.0) * (1.0 + gamma * gamma * gamma * c0) * zt;
  for (Index t = s2_begin; t < D; ++t) out.v_star[t] = (in_g2(t) ? 1.0 : -1.0) * gamma * gamma * c0 * zt;

  const double a1 = 1.0 + gamma * gamma * gamma * c0;
  const double a2 = gamma * gamma * c0;
  out.oracle_error_closed_form =
      (1.0 - rho) / (2.0 - rho) * (0.5 * a1 * a1 + 0.5 * a2 * a2) * out.tau * out.tau;
  out.kappa_closed_form = 0.5 * (3.0 * rho - 1.0);
  return out;
}

LowerBoundSpec random_lb_spec(LbKind kind, Index d, Index D, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  LowerBoundSpec spec;
  spec.kind = kind;
  spec.d = d;
  spec.D = D;
  spec.delta = 0.05 + 0.95 * unif(rng);
  spec.z = unif(rng) < 0.5 ? -1 : 1;

  if (kind == LbKind::mrp) {
    spec.gamma = 0.5 + 0.49 * unif(rng);
    spec.nu = 0.6 + 0.4 * unif(rng);
    const Index s1_begin = 2 * d, s2_begin = d + D / 2;
    std::vector<Index> s1(static_cast<std::size_t>(s2_begin - s1_begin));
    std::vector<Index> s2(static_cast<std::size_t>(D - s2_begin));
    std::iota(s1.begin(), s1.end(), s1_begin);
    std::iota(s2.begin(), s2.end(), s2_begin);
    std::shuffle(s1.begin(), s1.end(), rng);
    std::shuffle(s2.begin(), s2.end(), rng);
    spec.gamma1.assign(s1.begin(), s1.begin() + static_cast<std::ptrdiff_t>(s1.size() / 2));
    spec.gamma2.assign(s2.begin(), s2.begin() + static_cast<std::ptrdiff_t>(s2.size() / 2));
    std::sort(spec.gamma1.begin(), spec.gamma1.end());
    std::sort(spec.gamma2.begin(), spec.gamma2.end());
    return spec;
  }

  if (kind == LbKind::theorem4) {
    spec.q = 2;
    spec.gamma_max = 1.0 - 1.0 / (2.0 * static_cast<double>(spec.q * spec.q)) +
                     0.1 * unif(rng);
  } else {
    spec.gamma_max = 0.5 + 0.49 * unif(rng);
  }
  MatX M0(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) M0(i, j) = gauss(rng);
  const double target = (0.1 + 0.85 * unif(rng)) * std::min(spec.gamma_max, 0.99);
  M0 *= target / detail::singular_values<double>(M0)(0);
  spec.M0 = std::move(M0);
  spec.h0.resize(d);
  for (Index i = 0; i < d; ++i) spec.h0[i] = gauss(rng);
  spec.eps = random_signs(static_cast<std::size_t>(D - d), rng);
  return spec;
}

}  // namespace projfp
