#pragma once

// Generators for the worked examples and the adversarial constructions:
// linear regression, 1-D elliptic Galerkin, MRP/TD on random graphs, and the
// lower-bound instances.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "projfp/fixpoint.hpp"
#include "projfp/random.hpp"
#include "projfp/sa.hpp"

namespace projfp {

using Instance = FixedPointInstance<double>;
using Projected = ProjectedInstance<double>;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Random contractive instances

struct RandomInstanceOptions {
  Index D = 20;
  Index d = 4;
  double opnorm_min = 0.3;
  double opnorm_max = 1.3;
  double kappa_max = 0.95;
  bool uniform_weights = false;
};

/// Random weights, random subspace and a rescaled Gaussian L with kappa(M) < kappa_max.
Instance random_instance(const RandomInstanceOptions& opt, Rng& rng);

// ---------------------------------------------------------------------------
// Linear regression

struct RegressionModel {
  MatX Sigma_X;
  VecX v_star;
  double noise_var = 0.0;
  Basis<double> basis;
  double beta = 0.0;  // lambda_max(Sigma_X)
  double mu = 0.0;    // lambda_min(Sigma_X)

  /// Validates Sigma_X (symmetric, mu > 0) and fills beta, mu. Euclidean geometry.
  RegressionModel(MatX Sigma, VecX v, double noise_var, Basis<double> basis);

  Index ambient_dim() const { return v_star.size(); }
  Index dim() const { return basis.dim(); }
};

/// Identity covariance; the subspace is spanned by the first d coordinates.
RegressionModel identity_regression(Index D, Index d, const VecX& v_star, double noise_var);

/// L = I - Sigma/beta, b = Sigma v*/beta.
Instance regression_instance(const RegressionModel& model);

/// Gaussian design X ~ N(0, Sigma_X), Y = <v*, X> + noise.
std::unique_ptr<ObservationStream> regression_stream(const RegressionModel& model,
                                                     std::uint64_t seed);

/// Deterministic design that cycles through the columns of `design`, noiseless responses.
std::unique_ptr<ObservationStream> regression_cycle_stream(const RegressionModel& model,
                                                           MatX design);

struct NoiseScalars {
  double sigma_L;
  double sigma_b;
};

/// sigma_L = sigma_b = varsigma^2/beta with varsigma^2 = max(sqrt(3) beta, noise_var).
NoiseScalars regression_sigma(const RegressionModel& model);

/// Exact Sigma* for the Gaussian design at the projected solution.
MatX regression_noise_covariance(const RegressionModel& model);

/// max_i (mu^2 + 2 beta (lambda_i - mu))/lambda_i^2, lambda_i the eigenvalues of Phi Sigma Phi^*.
double regression_alpha_closed_form(const RegressionModel& model);

// ---------------------------------------------------------------------------
// 1-D elliptic Galerkin, basis phi_j(x) = sqrt(2) sin(j pi x)/(j pi)

struct EllipticProblem1D {
  std::function<double(double)> a;
  std::function<double(double)> f;
  double mu = 1.0;
  double beta = 1.0;
  Index d = 1;
  Index quadrature_points = 0;  // 0 selects 256 d
  double coeff_noise = 1.0;     // sd of W_i
  double source_noise = 1.0;    // sd of w'_i

  Index nodes() const { return quadrature_points > 0 ? quadrature_points : 256 * d; }
};

struct EllipticInstance {
  Projected proj;
  Index nodes = 0;
  double f_l2 = 0.0;
  double a_min = 0.0;
  double a_max = 0.0;
};

double elliptic_phi(Index j, double x);
double elliptic_dphi(Index j, double x);

/// Composite Gauss-Legendre rule on [0, 1] with at least `points` nodes.
struct Quadrature {
  VecX x;
  VecX w;
};
Quadrature gauss_legendre(Index points);

EllipticInstance elliptic_instance(const EllipticProblem1D& prob);
std::unique_ptr<ObservationStream> elliptic_stream(const EllipticProblem1D& prob,
                                                   std::uint64_t seed);
NoiseScalars elliptic_noise(const EllipticProblem1D& prob);

// ---------------------------------------------------------------------------
// Markov reward processes

struct MarkovRewardProcess {
  MatX P;
  VecX r;
  double gamma = 0.9;
  MatX Psi;  // rows psi(s)^T
  VecX xi;

  Index states() const { return P.rows(); }
  Index features() const { return Psi.cols(); }

  /// Throws InvariantError naming the first failed invariant.
  void validate(double row_tol = 1e-12, double stationary_tol = 1e-10) const;
};

/// Solves xi P = xi, sum xi = 1.
VecX stationary_distribution(const MatX& P);

SpMat sparse_view(const MatX& P);

enum class GraphKind { erdos_renyi, geometric };

struct GraphMrp {
  MarkovRewardProcess mrp;
  Index graph_vertices = 0;
  Index edges = 0;                // edges inside the component
  std::vector<Index> component;   // original vertex labels, ascending
  std::uint64_t seed_used = 0;
  int retries = 0;
  double B_min_eig = 0.0;
  double B_max_eig = 0.0;
};

/// ER(N, a/N) or RGG(N, r) with N(0, I_d) features, restricted to the largest component,
/// simple random walk with xi = deg/(2|E|); zero reward. For the geometric graph the
/// vertex positions are the features, so d must be 2.
GraphMrp graph_mrp(GraphKind kind, Index N, Index d, double param, double gamma,
                   std::uint64_t seed);

/// Largest connected component of an undirected graph; ties go to the smallest min label.
std::vector<Index> giant_component(Index N, const std::vector<std::pair<Index, Index>>& edges);

struct MrpProjection {
  MatX B;
  MatX B_inv_sqrt;
  MatX M;    // gamma B^{-1/2} E[psi psi+^T] B^{-1/2}
  MatX C;    // E[psi psi+^T] in whitened coordinates (M = gamma C)
  MatX Phi;  // Psi B^{-1/2}
  VecX h;    // E[r(s) phi(s)]
  double B_cond = 0.0;
};

MrpProjection mrp_projected(const MarkovRewardProcess& mrp);

/// (L, b) = (gamma P, r) over weights xi with the whitened feature basis.
Instance mrp_instance(const MarkovRewardProcess& mrp, const MrpProjection& proj);

enum class TdForm { raw, whitened };

/// s ~ xi, s+ ~ P(s, .), R = r(s) + reward_noise * N(0,1).
/// raw:      M_i = I - psi psi^T + gamma psi psi+^T, h_i = R psi
/// whitened: the same with phi = B^{-1/2} psi.
std::unique_ptr<ObservationStream> td_stream(const MarkovRewardProcess& mrp,
                                             const MrpProjection& proj, double reward_noise,
                                             std::uint64_t seed, TdForm form = TdForm::whitened);

/// Exact Sigma* of the whitened TD stream at theta_bar, by enumerating (s, s+).
MatX td_noise_covariance(const MarkovRewardProcess& mrp, const MrpProjection& proj,
                         const VecX& theta_bar, double reward_noise);

/// Noise scalars of the whitened TD stream, by enumeration over (s, s+).
NoiseScalars td_noise_scalars(const MarkovRewardProcess& mrp, const MrpProjection& proj,
                              double reward_noise);

// ---------------------------------------------------------------------------
// Lower-bound constructions

enum class LbKind { theorem2, theorem4, mrp };

struct LowerBoundSpec {
  LbKind kind = LbKind::theorem2;
  Index d = 1;
  Index D = 2;
  MatX M0;
  VecX h0;
  double delta = 0.1;
  double gamma_max = 0.9;
  std::vector<int> eps;  // theorem2: D-d signs; theorem4: q*m signs, row-major over (i, j)
  int z = 1;
  Index q = 2;           // theorem4
  double gamma = 0.9;    // mrp discount
  double nu = 1.0;       // mrp
  std::vector<Index> gamma1;  // mrp, zero-based states of S_1; empty selects the first half
  std::vector<Index> gamma2;

  void validate() const;
};

struct LbInstance {
  Instance instance;
  VecX v_star;         // closed form
  double alpha = 0.0;  // alpha(M0, gamma_max)
  VecX u, w, y;
  std::optional<Basis<double>> complement;  // theorem4 closed-form complement
};

LbInstance lb_theorem2(const LowerBoundSpec& spec);
LbInstance lb_theorem4(const LowerBoundSpec& spec);

/// One ambient sample (L_i, b_i) of the randomized observation model.
std::pair<MatX, VecX> lb_ambient_sample(const LowerBoundSpec& spec, const LbInstance& lb, Rng& rng);

/// The projected stream of both constructions is constant at (M0, h0).
std::unique_ptr<ObservationStream> lb_stream(const LowerBoundSpec& spec, std::uint64_t seed);

struct LbMrp {
  MarkovRewardProcess mrp;
  VecX v_star;            // closed form
  VecX xi_closed_form;
  double rho = 0.0;
  double tau = 0.0;
  double c0 = 0.0;
  double oracle_error_closed_form = 0.0;
  double kappa_closed_form = 0.0;  // kappa(E[psi psi+^T])
};

LbMrp lb_mrp(const LowerBoundSpec& spec);

/// Random spec for the given kind; theorem4 uses q = 2 and gamma_max >= 1 - 1/(2 q^2).
LowerBoundSpec random_lb_spec(LbKind kind, Index d, Index D, Rng& rng);

/// u: top eigenvector of the congruent matrix in alpha, deterministic under degeneracy.
VecX lb_top_eigenvector(const MatX& M0, double gamma_max);

/// Hadamard matrix of order k (2^k x 2^k).
MatX hadamard(int k);

std::string to_string(LbKind kind);
std::string to_string(GraphKind kind);

}  // namespace projfp
