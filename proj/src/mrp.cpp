#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

#include "projfp/instances.hpp"

namespace projfp {

namespace {

/// Samples s ~ xi and s+ ~ P(s, .) from cumulative tables over the nonzeros of each row.
class ChainSampler {
 public:
  explicit ChainSampler(const MarkovRewardProcess& mrp) {
    const Index D = mrp.states();
    xi_cdf_.resize(static_cast<std::size_t>(D));
    double acc = 0.0;
    for (Index s = 0; s < D; ++s) {
      acc += mrp.xi[s];
      xi_cdf_[static_cast<std::size_t>(s)] = acc;
    }
    row_start_.push_back(0);
    for (Index s = 0; s < D; ++s) {
      double racc = 0.0;
      for (Index t = 0; t < D; ++t) {
        if (mrp.P(s, t) > 0.0) {
          racc += mrp.P(s, t);
          cols_.push_back(t);
          cdf_.push_back(racc);
        }
      }
      row_start_.push_back(cols_.size());
    }
  }

  Index state(double u) const { return pick(xi_cdf_, 0, xi_cdf_.size(), u, nullptr); }

  Index successor(Index s, double u) const {
    const std::size_t lo = row_start_[static_cast<std::size_t>(s)];
    const std::size_t hi = row_start_[static_cast<std::size_t>(s) + 1];
    return pick(cdf_, lo, hi, u, &cols_);
  }

 private:
  static Index pick(const std::vector<double>& cdf, std::size_t lo, std::size_t hi, double u,
                    const std::vector<Index>* labels) {
    const double total = cdf[hi - 1];
    auto it = std::upper_bound(cdf.begin() + static_cast<std::ptrdiff_t>(lo),
                               cdf.begin() + static_cast<std::ptrdiff_t>(hi), u * total);
    std::size_t k = static_cast<std::size_t>(it - cdf.begin());
    if (k >= hi) k = hi - 1;
    return labels ? (*labels)[k] : static_cast<Index>(k);
  }

  std::vector<double> xi_cdf_;
  std::vector<std::size_t> row_start_;
  std::vector<Index> cols_;
  std::vector<double> cdf_;
};

class TdStream final : public ObservationStream {
 public:
  TdStream(const MarkovRewardProcess& mrp, const MrpProjection& proj, double reward_noise,
           std::uint64_t seed, TdForm form)
      : sampler_(mrp), features_(form == TdForm::raw ? mrp.Psi : proj.Phi), r_(mrp.r),
        gamma_(mrp.gamma), noise_(reward_noise), seed_(seed), form_(form),
        rng_(make_rng(seed, 0x7464)) {}

  Index dim() const override { return features_.cols(); }
  std::uint64_t seed() const override { return seed_; }
  std::string descriptor() const override {
    return form_ == TdForm::raw ? "td:raw" : "td:whitened";
  }

  void next(Observation& obs) override {
    const Index s = sampler_.state(unif_(rng_));
    const Index sp = sampler_.successor(s, unif_(rng_));
    const double R = r_[s] + (noise_ > 0.0 ? noise_ * gauss_(rng_) : 0.0);
    const Index d = features_.cols();
    const auto f = features_.row(s).transpose();
    const auto fp = features_.row(sp).transpose();
    obs.M = MatX::Identity(d, d);
    obs.M.noalias() -= f * (f - gamma_ * fp).transpose();
    obs.h = R * f;
  }

 private:
  ChainSampler sampler_;
  MatX features_;
  VecX r_;
  double gamma_;
  double noise_;
  std::uint64_t seed_;
  TdForm form_;
  Rng rng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> gauss_;
};

std::vector<std::pair<Index, Index>> erdos_renyi_edges(Index N, double p, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < N; ++i)
    for (Index j = i + 1; j < N; ++j)
      if (unif(rng) < p) edges.emplace_back(i, j);
  return edges;
}

std::vector<std::pair<Index, Index>> geometric_edges(const MatX& pos, double r) {
  std::vector<std::pair<Index, Index>> edges;
  const double r2 = r * r;
  for (Index i = 0; i < pos.rows(); ++i)
    for (Index j = i + 1; j < pos.rows(); ++j)
      if ((pos.row(i) - pos.row(j)).squaredNorm() <= r2) edges.emplace_back(i, j);
  return edges;
}

MatX gaussian_rows(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g;
  MatX A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = g(rng);
  return A;
}

}  // namespace

void MarkovRewardProcess::validate(double row_tol, double stationary_tol) const {
  const Index D = P.rows();
  if (D == 0 || P.cols() != D) throw InvariantError("mrp: transition matrix must be square and nonempty");
  if (r.size() != D) throw InvariantError("mrp: reward length mismatch");
  if (xi.size() != D) throw InvariantError("mrp: stationary distribution length mismatch");
  if (Psi.rows() != D) throw InvariantError("mrp: feature rows mismatch");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvariantError("mrp: discount must lie in (0, 1)");
  if ((P.array() < 0.0).any()) throw InvariantError("mrp: negative transition probability");
  const VecX rows = P.rowwise().sum();
  const double row_err = (rows.array() - 1.0).abs().maxCoeff();
  if (!(row_err <= row_tol))
    throw InvariantError("mrp: row sums deviate from 1 by " + std::to_string(row_err));
  if ((xi.array() < 0.0).any() || std::abs(xi.sum() - 1.0) > stationary_tol)
    throw InvariantError("mrp: xi is not a probability vector");
  const double stat_err = (P.transpose() * xi - xi).cwiseAbs().maxCoeff();
  if (!(stat_err <= stationary_tol))
    throw InvariantError("mrp: xi P != xi (max deviation " + std::to_string(stat_err) + ")");
  const MatX B = Psi.transpose() * xi.asDiagonal() * Psi;
  Eigen::SelfAdjointEigenSolver<MatX> es(B, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-8))
    throw InvariantError("mrp: features are not linearly independent on the support of xi");
}

VecX stationary_distribution(const MatX& P) {
  const Index D = P.rows();
  if (P.cols() != D) throw DimensionError("stationary_distribution: P must be square");
  MatX A = P.transpose() - MatX::Identity(D, D);
  A.row(D - 1).setOnes();
  VecX rhs = VecX::Zero(D);
  rhs[D - 1] = 1.0;
  Eigen::PartialPivLU<MatX> lu(A);
  if (!(lu.rcond() > 1e-14)) throw SingularError("stationary_distribution: chain is not irreducible");
  VecX xi = lu.solve(rhs);
  xi += lu.solve(VecX(rhs - A * xi));
  return xi;
}

SpMat sparse_view(const MatX& P) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < P.rows(); ++i)
    for (Index j = 0; j < P.cols(); ++j)
      if (P(i, j) != 0.0) trip.emplace_back(i, j, P(i, j));
  SpMat S(P.rows(), P.cols());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

std::vector<Index> giant_component(Index N, const std::vector<std::pair<Index, Index>>& edges) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(N));
  for (auto [i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  std::vector<int> seen(static_cast<std::size_t>(N), 0);
  std::vector<Index> best;
  // Vertices are visited in label order, so each component's first vertex is its min label;
  // replacing only on strictly larger size keeps the smallest-min-label component on ties.
  for (Index start = 0; start < N; ++start) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    std::vector<Index> comp;
    std::deque<Index> queue{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      comp.push_back(v);
      for (Index w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          queue.push_back(w);
        }
      }
    }
    if (comp.size() > best.size()) best = std::move(comp);
  }
  std::sort(best.begin(), best.end());
  return best;
}

GraphMrp graph_mrp(GraphKind kind, Index N, Index d, double param, double gamma, std::uint64_t seed) {
  if (N < 1 || d < 1) throw DomainError("graph_mrp: N and d must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("graph_mrp: discount must lie in (0, 1)");
  if (kind == GraphKind::erdos_renyi && !(param > 1.0))
    throw DomainError("graph_mrp: Erdos-Renyi needs average degree a > 1");
  if (kind == GraphKind::geometric && d != 2)
    throw DomainError("graph_mrp: the geometric graph uses its 2-d positions as features");
  if (kind == GraphKind::geometric && !(param > 0.0))
    throw DomainError("graph_mrp: radius must be positive");

  constexpr int kMaxRetries = 16;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    Rng rng = make_rng(s, 0x6772);

    std::vector<std::pair<Index, Index>> edges;
    MatX all_features;
    if (kind == GraphKind::erdos_renyi) {
      edges = erdos_renyi_edges(N, param / static_cast<double>(N), rng);
    } else {
      all_features = gaussian_rows(N, 2, rng);
      edges = geometric_edges(all_features, param);
    }
    const std::vector<Index> comp = giant_component(N, edges);
    const Index D = static_cast<Index>(comp.size());
    if (D < d || D < 2) {
      throw DomainError("graph_mrp: largest component has " + std::to_string(D) +
                        " vertices, fewer than the " + std::to_string(d) + " features");
    }

    std::vector<Index> local(static_cast<std::size_t>(N), -1);
    for (Index k = 0; k < D; ++k) local[static_cast<std::size_t>(comp[static_cast<std::size_t>(k)])] = k;

    GraphMrp out;
    out.graph_vertices = N;
    out.component = comp;
    out.seed_used = s;
    out.retries = attempt;
    MarkovRewardProcess& mrp = out.mrp;
    mrp.gamma = gamma;
    mrp.P = MatX::Zero(D, D);
    VecX deg = VecX::Zero(D);
    for (auto [i, j] : edges) {
      const Index a = local[static_cast<std::size_t>(i)];
      const Index b = local[static_cast<std::size_t>(j)];
      if (a < 0) continue;
      mrp.P(a, b) = 1.0;
      mrp.P(b, a) = 1.0;
      deg[a] += 1.0;
      deg[b] += 1.0;
      ++out.edges;
    }
    for (Index a = 0; a < D; ++a) mrp.P.row(a) /= deg[a];
    mrp.xi = deg / (2.0 * static_cast<double>(out.edges));
    mrp.r = VecX::Zero(D);

    if (kind == GraphKind::erdos_renyi) {
      mrp.Psi = gaussian_rows(D, d, rng);
    } else {
      mrp.Psi.resize(D, 2);
      for (Index k = 0; k < D; ++k) mrp.Psi.row(k) = all_features.row(comp[static_cast<std::size_t>(k)]);
    }

    const MatX B = mrp.Psi.transpose() * mrp.xi.asDiagonal() * mrp.Psi;
    Eigen::SelfAdjointEigenSolver<MatX> es(B, Eigen::EigenvaluesOnly);
    out.B_min_eig = es.eigenvalues().minCoeff();
    out.B_max_eig = es.eigenvalues().maxCoeff();
    if (out.B_min_eig > 1e-8) return out;
  }
  throw DomainError("graph_mrp: features stayed linearly dependent after 16 attempts");
}

MrpProjection mrp_projected(const MarkovRewardProcess& mrp) {
  const Index D = mrp.states();
  detail::require_dim(mrp.Psi.rows(), D, "mrp_projected features");
  detail::require_dim(mrp.xi.size(), D, "mrp_projected xi");
  MrpProjection out;
  out.B = mrp.Psi.transpose() * mrp.xi.asDiagonal() * mrp.Psi;
  out.B = 0.5 * (out.B + out.B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(out.B);
  const VecX lam = es.eigenvalues();
  if (!(lam.minCoeff() > 1e-12 * std::max(1.0, lam.maxCoeff())))
    throw SingularError("mrp_projected: feature second-moment matrix B is rank deficient");
  out.B_cond = lam.maxCoeff() / lam.minCoeff();
  out.B_inv_sqrt = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  out.Phi = mrp.Psi * out.B_inv_sqrt;
  const SpMat P = sparse_view(mrp.P);
  const MatX PPhi = P * out.Phi;
  out.C = out.Phi.transpose() * mrp.xi.asDiagonal() * PPhi;
  out.M = mrp.gamma * out.C;
  out.h = out.Phi.transpose() * mrp.xi.asDiagonal() * mrp.r;
  return out;
}

Instance mrp_instance(const MarkovRewardProcess& mrp, const MrpProjection& proj) {
  Basis<double> basis(WeightedSpace<double>(mrp.xi), proj.Phi);
  return Instance(std::move(basis), mrp.gamma * mrp.P, mrp.r);
}

std::unique_ptr<ObservationStream> td_stream(const MarkovRewardProcess& mrp, const MrpProjection& proj,
                                             double reward_noise, std::uint64_t seed, TdForm form) {
  if (!(reward_noise >= 0.0)) throw DomainError("td_stream: reward noise must be non-negative");
  return std::make_unique<TdStream>(mrp, proj, reward_noise, seed, form);
}

MatX td_noise_covariance(const MarkovRewardProcess& mrp, const MrpProjection& proj,
                         const VecX& theta_bar, double reward_noise) {
  const Index D = mrp.states();
  const Index d = proj.Phi.cols();
  detail::require_dim(theta_bar.size(), d, "td_noise_covariance");
  const VecX mean = proj.M * theta_bar + proj.h;
  const VecX values = proj.Phi * theta_bar;
  MatX S = MatX::Zero(d, d);
  VecX z(d);
  for (Index s = 0; s < D; ++s) {
    if (mrp.xi[s] == 0.0) continue;
    const auto f = proj.Phi.row(s).transpose();
    for (Index t = 0; t < D; ++t) {
      const double p = mrp.P(s, t);
      if (p == 0.0) continue;
      z = theta_bar + f * (mrp.r[s] + mrp.gamma * values[t] - values[s]) - mean;
      S.noalias() += mrp.xi[s] * p * z * z.transpose();
    }
  }
  S += reward_noise * reward_noise * (proj.Phi.transpose() * mrp.xi.asDiagonal() * proj.Phi);
  return 0.5 * (S + S.transpose());
}

NoiseScalars td_noise_scalars(const MarkovRewardProcess& mrp, const MrpProjection& proj,
                              double reward_noise) {
  const Index D = mrp.states();
  const Index d = proj.Phi.cols();
  // Row j of M_i - M is -phi_j (phi - gamma phi+)^T - M_j; its second-moment matrix bounds sigma_L.
  std::vector<MatX> Q(static_cast<std::size_t>(d), MatX::Zero(d, d));
  VecX hvar = VecX::Zero(d);
  VecX row(d);
  for (Index s = 0; s < D; ++s) {
    if (mrp.xi[s] == 0.0) continue;
    const VecX f = proj.Phi.row(s).transpose();
    for (Index t = 0; t < D; ++t) {
      const double p = mrp.P(s, t);
      if (p == 0.0) continue;
      const VecX g = f - mrp.gamma * proj.Phi.row(t).transpose();
      for (Index j = 0; j < d; ++j) {
        row = -f[j] * g - (proj.M.row(j).transpose() - MatX::Identity(d, d).col(j));
        Q[static_cast<std::size_t>(j)].noalias() += mrp.xi[s] * p * row * row.transpose();
      }
      hvar += mrp.xi[s] * p * (mrp.r[s] * f - proj.h).array().square().matrix();
    }
  }
  double sl2 = 0.0;
  for (const MatX& q : Q) {
    Eigen::SelfAdjointEigenSolver<MatX> es(q, Eigen::EigenvaluesOnly);
    sl2 = std::max(sl2, es.eigenvalues().maxCoeff());
  }
  const VecX phi2 = proj.Phi.array().square().matrix().transpose() * mrp.xi;
  hvar += reward_noise * reward_noise * phi2;
  return {std::sqrt(sl2), std::sqrt(hvar.maxCoeff())};
}

}  // namespace projfp
