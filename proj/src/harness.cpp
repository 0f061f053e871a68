#include "projfp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>

namespace projfp {

namespace {

// ---------------------------------------------------------------------------
// Config helpers

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

double get_number(const json& obj, const char* key, std::optional<double> fallback, const std::string& where) {
  if (!obj.contains(key)) {
    if (!fallback) throw ConfigError(where + ": missing key '" + key + "'");
    return *fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + ": '" + key + "' must be finite");
  return x;
}

std::int64_t get_int(const json& obj, const char* key, std::optional<std::int64_t> fallback,
                     const std::string& where) {
  if (!obj.contains(key)) {
    if (!fallback) throw ConfigError(where + ": missing key '" + key + "'");
    return *fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + ": '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, std::optional<std::string> fallback,
                       const std::string& where) {
  if (!obj.contains(key)) {
    if (!fallback) throw ConfigError(where + ": missing key '" + key + "'");
    return *fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

Index get_dim(const json& obj, const char* key, std::optional<std::int64_t> fallback, const std::string& where) {
  const std::int64_t v = get_int(obj, key, fallback, where);
  if (v < 1) throw ConfigError(where + ": '" + key + "' must be positive");
  return static_cast<Index>(v);
}

Experiment parse_experiment(const std::string& s) {
  if (s == "factor_sweep" || s == "factor-sweep") return Experiment::factor_sweep;
  if (s == "sa_mse" || s == "sa-mse") return Experiment::sa_mse;
  if (s == "verify_instances" || s == "verify") return Experiment::verify_instances;
  throw ConfigError("config: unknown experiment '" + s + "'");
}

template <typename T>
bool strictly_monotone(const std::vector<T>& v) {
  if (v.size() < 2) return true;
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    inc = inc && v[i] > v[i - 1];
    dec = dec && v[i] < v[i - 1];
  }
  return inc || dec;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_finite(double x, const std::string& column) {
  if (!std::isfinite(x)) throw NumericalError("emission: non-finite value in column '" + column + "'");
}

// ---------------------------------------------------------------------------
// Instance builders

std::uint64_t instance_seed(const json& inst, std::uint64_t seed) {
  if (!inst.contains("seed")) return seed;
  return static_cast<std::uint64_t>(get_int(inst, "seed", 0, "instance"));
}

LowerBoundSpec build_lb_spec(const json& inst, LbKind kind, std::uint64_t seed) {
  const std::string where = "instance(" + to_string(kind) + ")";
  if (kind == LbKind::mrp) {
    check_keys(inst, {"kind", "d", "D", "delta", "gamma", "nu", "z", "gamma1", "gamma2", "seed"}, where);
  } else {
    check_keys(inst, {"kind", "d", "D", "delta", "gamma_max", "z", "M0", "h0", "eps", "q", "seed"}, where);
  }
  const Index d = get_dim(inst, "d", kind == LbKind::mrp ? 4 : 3, where);
  const Index D = get_dim(inst, "D", kind == LbKind::mrp ? 40 : (kind == LbKind::theorem4 ? d + 16 : d + 50), where);
  Rng rng = make_rng(instance_seed(inst, seed), 0x6c62);
  LowerBoundSpec spec = random_lb_spec(kind, d, D, rng);
  spec.delta = get_number(inst, "delta", spec.delta, where);
  if (inst.contains("z")) spec.z = static_cast<int>(get_int(inst, "z", 1, where));

  if (kind == LbKind::mrp) {
    spec.gamma = get_number(inst, "gamma", spec.gamma, where);
    spec.nu = get_number(inst, "nu", spec.nu, where);
    auto read_set = [&](const char* key, std::vector<Index>& out) {
      if (!inst.contains(key)) return;
      if (!inst.at(key).is_array()) throw ConfigError(where + ": '" + key + "' must be an array");
      out.clear();
      for (const auto& v : inst.at(key)) {
        if (!v.is_number_integer()) throw ConfigError(where + ": '" + key + "' must hold integers");
        out.push_back(v.get<Index>());
      }
    };
    read_set("gamma1", spec.gamma1);
    read_set("gamma2", spec.gamma2);
    return spec;
  }

  if (kind == LbKind::theorem4) spec.q = get_dim(inst, "q", spec.q, where);
  if (inst.contains("gamma_max")) {
    spec.gamma_max = get_number(inst, "gamma_max", 0.9, where);
    const double n0 = detail::singular_values<double>(spec.M0)(0);
    const double cap = 0.9 * std::min(spec.gamma_max, 0.99);
    if (n0 > cap) spec.M0 *= cap / n0;
  }
  if (inst.contains("M0")) spec.M0 = matrix_from_json(inst.at("M0"), "M0");
  if (inst.contains("h0")) spec.h0 = vector_from_json(inst.at("h0"), "h0");
  if (inst.contains("eps")) {
    if (!inst.at("eps").is_array()) throw ConfigError(where + ": 'eps' must be an array");
    spec.eps.clear();
    for (const auto& v : inst.at("eps")) spec.eps.push_back(v.get<int>());
  } else if (static_cast<Index>(spec.eps.size()) != D - d) {
    spec.eps.assign(static_cast<std::size_t>(D - d), 1);
  }
  return spec;
}

std::function<double(double)> build_function(const json& fn, const std::string& where, double& lo, double& hi) {
  const std::string type = get_string(fn, "type", std::nullopt, where);
  if (type == "constant") {
    check_keys(fn, {"type", "value"}, where);
    const double c = get_number(fn, "value", std::nullopt, where);
    lo = hi = c;
    return [c](double) { return c; };
  }
  if (type == "sinusoid") {
    check_keys(fn, {"type", "mean", "amplitude", "frequency"}, where);
    const double m = get_number(fn, "mean", std::nullopt, where);
    const double a = get_number(fn, "amplitude", std::nullopt, where);
    const double k = get_number(fn, "frequency", 1.0, where);
    lo = m - std::abs(a);
    hi = m + std::abs(a);
    return [m, a, k](double x) { return m + a * std::sin(2.0 * std::numbers::pi * k * x); };
  }
  if (type == "sine") {
    check_keys(fn, {"type", "mode", "scale"}, where);
    const double j = static_cast<double>(get_int(fn, "mode", 1, where));
    const double s = get_number(fn, "scale", 1.0, where);
    lo = -std::abs(s);
    hi = std::abs(s);
    return [j, s](double x) { return s * std::sin(j * std::numbers::pi * x); };
  }
  throw ConfigError(where + ": unknown function type '" + type + "'");
}

EllipticProblem1D build_elliptic(const json& inst) {
  const std::string where = "instance(elliptic)";
  check_keys(inst, {"kind", "d", "coefficient", "source", "quadrature_points", "coeff_noise", "source_noise", "seed"},
             where);
  EllipticProblem1D prob;
  prob.d = get_dim(inst, "d", 8, where);
  double lo = 1.0, hi = 1.0, flo = 0.0, fhi = 0.0;
  json coef = inst.contains("coefficient") ? inst.at("coefficient") : json{{"type", "constant"}, {"value", 1.0}};
  json src = inst.contains("source") ? inst.at("source") : json{{"type", "sine"}, {"mode", 1}};
  prob.a = build_function(coef, where + ".coefficient", lo, hi);
  prob.f = build_function(src, where + ".source", flo, fhi);
  if (!(lo > 0.0)) throw ConfigError(where + ": coefficient must be bounded below by a positive constant");
  prob.mu = lo;
  prob.beta = hi;
  prob.quadrature_points = static_cast<Index>(get_int(inst, "quadrature_points", 0, where));
  prob.coeff_noise = get_number(inst, "coeff_noise", 1.0, where);
  prob.source_noise = get_number(inst, "source_noise", 1.0, where);
  return prob;
}

RegressionModel build_regression(const json& inst, std::uint64_t seed) {
  const std::string where = "instance(regression)";
  check_keys(inst, {"kind", "D", "d", "noise_var", "covariance_diag", "v_star", "seed"}, where);
  const Index D = get_dim(inst, "D", 10, where);
  const Index d = get_dim(inst, "d", D, where);
  if (d > D) throw ConfigError(where + ": need d <= D");
  const double noise = get_number(inst, "noise_var", 1.0, where);
  MatX Sigma = MatX::Identity(D, D);
  if (inst.contains("covariance_diag")) {
    const VecX diag = vector_from_json(inst.at("covariance_diag"), "covariance_diag");
    if (diag.size() != D) throw ConfigError(where + ": covariance_diag must have D entries");
    Sigma = diag.asDiagonal();
  }
  VecX v = VecX::Zero(D);
  if (inst.contains("v_star")) {
    const json& vs = inst.at("v_star");
    if (vs.is_string()) {
      const std::string s = vs.get<std::string>();
      if (s == "random") {
        Rng rng = make_rng(instance_seed(inst, seed), 0x7673);
        std::normal_distribution<double> g;
        for (Index i = 0; i < D; ++i) v[i] = g(rng);
      } else if (s != "zero") {
        throw ConfigError(where + ": v_star must be an array, \"zero\" or \"random\"");
      }
    } else {
      v = vector_from_json(vs, "v_star");
      if (v.size() != D) throw ConfigError(where + ": v_star must have D entries");
    }
  }
  return RegressionModel(std::move(Sigma), std::move(v), noise,
                         Basis<double>(WeightedSpace<double>::uniform(D), MatX::Identity(D, d)));
}

struct TdSetup {
  GraphMrp graph;
  double reward_noise = 0.0;
};

TdSetup build_td(const json& inst, std::uint64_t seed) {
  const std::string where = "instance(mrp)";
  check_keys(inst, {"kind", "graph", "N", "d", "a", "r", "gamma", "reward_noise", "reward", "seed"}, where);
  const std::string graph = get_string(inst, "graph", std::string("erdos_renyi"), where);
  const Index N = get_dim(inst, "N", 50, where);
  const Index d = get_dim(inst, "d", graph == "geometric" ? 2 : 5, where);
  const double gamma = get_number(inst, "gamma", 0.9, where);
  const std::uint64_t s = instance_seed(inst, seed);
  TdSetup out;
  if (graph == "erdos_renyi") {
    out.graph = graph_mrp(GraphKind::erdos_renyi, N, d, get_number(inst, "a", 8.0, where), gamma, s);
  } else if (graph == "geometric") {
    out.graph = graph_mrp(GraphKind::geometric, N, d, get_number(inst, "r", 0.3, where), gamma, s);
  } else {
    throw ConfigError(where + ": unknown graph '" + graph + "'");
  }
  out.reward_noise = get_number(inst, "reward_noise", 0.1, where);
  const std::string reward = get_string(inst, "reward", std::string("gaussian"), where);
  if (reward == "gaussian") {
    Rng rng = make_rng(s, 0x7277);
    std::normal_distribution<double> g;
    for (Index i = 0; i < out.graph.mrp.r.size(); ++i) out.graph.mrp.r[i] = g(rng);
  } else if (reward != "zero") {
    throw ConfigError(where + ": reward must be \"gaussian\" or \"zero\"");
  }
  return out;
}

// ---------------------------------------------------------------------------
// SA problems

struct SaProblem {
  Projected proj;
  VecX theta_bar;
  VecX target;  // coordinates of the projection of v*, so |v_hat - v*|^2 = |theta_hat - target|^2 + A
  double approx_error = 0.0;
  double alpha = 1.0;
  double kappa = 0.0;
  MatX Sigma_star;
  NoiseScalars sigma{0.0, 0.0};
  StreamFactory factory;
};

SaProblem build_sa_problem(const json& inst, std::uint64_t seed, const SaOptions& opt) {
  const std::string kind = get_string(inst, "kind", std::nullopt, "instance");
  SaProblem p;
  if (kind == "regression") {
    auto model = std::make_shared<RegressionModel>(build_regression(inst, seed));
    const Instance fp = regression_instance(*model);
    p.proj = project_instance(fp);
    p.theta_bar = solve_projected(p.proj);
    p.approx_error = oracle_error(fp);
    p.target = project_coeffs(fp.basis, model->v_star);
    p.alpha = approx_factor(p.proj.M, 1.0 - model->mu / model->beta);
    p.Sigma_star = regression_noise_covariance(*model);
    p.sigma = regression_sigma(*model);
    p.factory = [model](std::uint64_t s) { return regression_stream(*model, s); };
  } else if (kind == "elliptic") {
    auto prob = std::make_shared<EllipticProblem1D>(build_elliptic(inst));
    p.proj = elliptic_instance(*prob).proj;
    p.theta_bar = solve_projected(p.proj);
    // The truncation error of the Galerkin discretization is not modeled: the target is vbar.
    p.approx_error = 0.0;
    p.target = p.theta_bar;
    p.alpha = approx_factor(p.proj.M, 1.0 - prob->mu / prob->beta);
    p.sigma = elliptic_noise(*prob);
    auto probe = elliptic_stream(*prob, seed ^ 0x5eedULL);
    p.Sigma_star = estimate_noise(*probe, p.proj, p.theta_bar, opt.noise_samples).Sigma_star;
    p.factory = [prob](std::uint64_t s) { return elliptic_stream(*prob, s); };
  } else if (kind == "mrp" || kind == "lb_mrp") {
    std::shared_ptr<MarkovRewardProcess> mrp;
    double noise = 0.0;
    if (kind == "mrp") {
      TdSetup td = build_td(inst, seed);
      mrp = std::make_shared<MarkovRewardProcess>(std::move(td.graph.mrp));
      noise = td.reward_noise;
    } else {
      mrp = std::make_shared<MarkovRewardProcess>(lb_mrp(build_lb_spec(inst, LbKind::mrp, seed)).mrp);
    }
    auto proj = std::make_shared<MrpProjection>(mrp_projected(*mrp));
    const Instance fp = mrp_instance(*mrp, *proj);
    p.proj = {proj->M, proj->h};
    p.theta_bar = solve_projected(p.proj);
    p.approx_error = oracle_error(fp);
    p.target = project_coeffs(fp.basis, solve_exact(fp));
    p.alpha = approx_factor(p.proj.M, opnorm(fp.space(), fp.L));
    p.Sigma_star = td_noise_covariance(*mrp, *proj, p.theta_bar, noise);
    p.sigma = td_noise_scalars(*mrp, *proj, noise);
    p.factory = [mrp, proj, noise](std::uint64_t s) { return td_stream(*mrp, *proj, noise, s); };
  } else if (kind == "lb_theorem2" || kind == "lb_theorem4") {
    const LbKind lk = kind == "lb_theorem2" ? LbKind::theorem2 : LbKind::theorem4;
    auto spec = std::make_shared<LowerBoundSpec>(build_lb_spec(inst, lk, seed));
    const LbInstance lb = lk == LbKind::theorem2 ? lb_theorem2(*spec) : lb_theorem4(*spec);
    p.proj = project_instance(lb.instance);
    p.theta_bar = solve_projected(p.proj);
    p.approx_error = oracle_error(lb.instance);
    p.target = project_coeffs(lb.instance.basis, lb.v_star);
    p.alpha = approx_factor(p.proj.M, opnorm(lb.instance.space(), lb.instance.L));
    p.Sigma_star = MatX::Zero(spec->d, spec->d);
    p.factory = [spec](std::uint64_t s) { return lb_stream(*spec, s); };
  } else {
    throw ConfigError("sa-mse: unsupported instance kind '" + kind + "'");
  }
  p.kappa = kappa(p.proj.M);
  return p;
}

// ---------------------------------------------------------------------------
// Verification helpers

struct Checks {
  VerifyReport report;
  void add(const std::string& name, bool passed, double measured, double tol) {
    report.table.add({name, passed, measured, tol});
    report.all_passed = report.all_passed && passed;
  }
  void le(const std::string& name, double measured, double tol) { add(name, measured <= tol, measured, tol); }
};

double max_abs(const MatX& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

void check_generic_instance(Checks& c, const Instance& inst, const std::string& prefix) {
  const OracleReport<double> rep = verify_oracle_inequality(inst);
  c.le(prefix + "oracle_inequality_ratio", rep.ratio, 1.0 + 1e-8);
  const FactorReport<double> fr = factor_report(inst);
  c.add(prefix + "sandwich", sandwich_holds(fr.yb2, fr.alpha, fr.yb1), fr.alpha, 1e-8);
  if (fr.kappa < 1.0) {
    c.le(prefix + "lemma1a_slack", fr.alpha - fr.lemma1a_bound, 1e-8 * std::max(1.0, fr.alpha));
    if (fr.lemma1b_bound)
      c.le(prefix + "lemma1b_slack", fr.alpha - *fr.lemma1b_bound, 1e-8 * std::max(1.0, fr.alpha));
  }
}

void check_mrp_invariants(Checks& c, const MarkovRewardProcess& mrp, bool deep) {
  const double row_err = (mrp.P.rowwise().sum().array() - 1.0).abs().maxCoeff();
  c.le("row_stochastic", row_err, 1e-12);
  c.le("nonnegative", std::max(0.0, -mrp.P.minCoeff()), 0.0);
  const double stat = (mrp.P.transpose() * mrp.xi - mrp.xi).cwiseAbs().maxCoeff();
  c.le("stationary", stat, 1e-10);
  const MatX B = mrp.Psi.transpose() * mrp.xi.asDiagonal() * mrp.Psi;
  Eigen::SelfAdjointEigenSolver<MatX> es(B, Eigen::EigenvaluesOnly);
  c.add("features_independent", es.eigenvalues().minCoeff() > 1e-8, es.eigenvalues().minCoeff(), 1e-8);
  if (!deep || !c.report.all_passed) return;
  const MrpProjection proj = mrp_projected(mrp);
  const MatX two_path = project_instance(mrp_instance(mrp, proj)).M;
  c.le("projection_two_path", max_abs(two_path - proj.M), 1e-8);
  check_generic_instance(c, mrp_instance(mrp, proj), "");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_config(const json& doc, Experiment expected) {
  check_keys(doc, {"experiment", "instance", "gamma_grid", "gammas", "n_grid", "repeats", "seed", "output",
                   "format", "sa"},
             "config");
  ExperimentConfig cfg;
  cfg.experiment = expected;
  if (doc.contains("experiment") && parse_experiment(get_string(doc, "experiment", std::nullopt, "config")) != expected)
    throw ConfigError("config: experiment does not match the subcommand");
  if (!doc.contains("instance") || !doc.at("instance").is_object())
    throw ConfigError("config: missing 'instance' section");
  cfg.instance = doc.at("instance");
  get_string(cfg.instance, "kind", std::nullopt, "instance");

  if (doc.contains("gamma_grid") && doc.contains("gammas"))
    throw ConfigError("config: give either 'gamma_grid' or 'gammas'");
  if (doc.contains("gammas")) {
    if (!doc.at("gammas").is_array()) throw ConfigError("config: 'gammas' must be an array");
    for (const auto& v : doc.at("gammas")) {
      if (!v.is_number()) throw ConfigError("config: 'gammas' must hold numbers");
      cfg.gammas.push_back(v.get<double>());
    }
  } else if (doc.contains("gamma_grid")) {
    const json& g = doc.at("gamma_grid");
    check_keys(g, {"min", "max", "points"}, "gamma_grid");
    const double lo = get_number(g, "min", 1e-5, "gamma_grid");
    const double hi = get_number(g, "max", 0.31622776601683794, "gamma_grid");
    const auto pts = get_int(g, "points", 20, "gamma_grid");
    if (!(lo > 0.0 && hi < 1.0 && lo < hi) || pts < 1) throw ConfigError("gamma_grid: need 0 < min < max < 1, points >= 1");
    cfg.gammas = default_gamma_grid(lo, hi, static_cast<int>(pts));
  } else {
    cfg.gammas = default_gamma_grid();
  }
  if (cfg.gammas.empty() || !strictly_monotone(cfg.gammas)) throw ConfigError("config: gamma grid must be nonempty and strictly monotone");
  for (double g : cfg.gammas)
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("config: discount factors must lie in (0, 1)");

  if (doc.contains("n_grid")) {
    if (!doc.at("n_grid").is_array()) throw ConfigError("config: 'n_grid' must be an array");
    for (const auto& v : doc.at("n_grid")) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) throw ConfigError("config: 'n_grid' must hold positive integers");
      cfg.ns.push_back(v.get<std::int64_t>());
    }
  } else {
    cfg.ns = {1000, 10000, 100000};
  }
  if (cfg.ns.empty() || !strictly_monotone(cfg.ns)) throw ConfigError("config: n grid must be nonempty and strictly monotone");

  cfg.repeats = static_cast<int>(get_int(doc, "repeats", 20, "config"));
  if (cfg.repeats < 1) throw ConfigError("config: repeats must be at least 1");
  if (expected == Experiment::sa_mse && cfg.repeats < 2) throw ConfigError("config: sa-mse needs at least 2 repeats");
  cfg.seed = static_cast<std::uint64_t>(get_int(doc, "seed", 0, "config"));
  cfg.output = get_string(doc, "output", std::string(), "config");
  const std::string fmt = get_string(doc, "format", std::string("csv"), "config");
  if (fmt == "csv") cfg.format = Format::csv;
  else if (fmt == "json") cfg.format = Format::json;
  else throw ConfigError("config: format must be csv or json");

  if (doc.contains("sa")) {
    const json& s = doc.at("sa");
    check_keys(s, {"c0", "eta", "burn_in_fraction", "omega", "c", "noise_samples", "theta0"}, "sa");
    cfg.sa.c0 = get_number(s, "c0", 24.0, "sa");
    if (s.contains("eta")) cfg.sa.eta = get_number(s, "eta", std::nullopt, "sa");
    cfg.sa.burn_in_fraction = get_number(s, "burn_in_fraction", 0.5, "sa");
    cfg.sa.omega = get_number(s, "omega", 1.0, "sa");
    cfg.sa.c = get_number(s, "c", 24.0, "sa");
    cfg.sa.noise_samples = get_int(s, "noise_samples", 100000, "sa");
    const std::string t0 = get_string(s, "theta0", std::string("zero"), "sa");
    if (t0 != "zero" && t0 != "solution") throw ConfigError("sa: theta0 must be \"zero\" or \"solution\"");
    cfg.sa.start_at_solution = t0 == "solution";
    if (!(cfg.sa.c0 > 0.0) || !(cfg.sa.omega > 0.0) || !(cfg.sa.c > 0.0))
      throw ConfigError("sa: c0, omega and c must be positive");
    if (!(cfg.sa.burn_in_fraction >= 0.0 && cfg.sa.burn_in_fraction < 1.0))
      throw ConfigError("sa: burn_in_fraction must lie in [0, 1)");
    if (cfg.sa.eta && !(*cfg.sa.eta > 0.0)) throw ConfigError("sa: eta must be positive");
    if (cfg.sa.noise_samples < 2) throw ConfigError("sa: noise_samples must be at least 2");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, Experiment expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return parse_config(doc, expected);
}

std::vector<double> default_gamma_grid(double lo, double hi, int points) {
  std::vector<double> out;
  if (points == 1) return {1.0 - hi};
  const double a = std::log10(hi), b = std::log10(lo);
  for (int k = 0; k < points; ++k) {
    const double e = a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
    out.push_back(1.0 - std::pow(10.0, e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw DimensionError("Table::add: row width does not match the header");
  rows.push_back(std::move(row));
}

void write_csv(const Table& table, std::ostream& os) {
  std::ostringstream buf;
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (std::size_t j = 0; j < table.columns.size(); ++j) buf << (j ? "," : "") << quote(table.columns[j]);
  buf << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) buf << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              require_finite(v, table.columns[j]);
              buf << fmt17(v);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
              buf << v;
            } else if constexpr (std::is_same_v<T, bool>) {
              buf << (v ? "true" : "false");
            } else {
              buf << quote(v);
            }
          },
          row[j]);
    }
    buf << '\n';
  }
  os << buf.str();
}

void write_json(const Table& table, std::ostream& os) {
  json arr = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) require_finite(v, table.columns[j]);
            obj[table.columns[j]] = v;
          },
          row[j]);
    }
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << '\n';
}

void write_table(const Table& table, Format format, std::ostream& os) {
  if (format == Format::csv) write_csv(table, os);
  else write_json(table, os);
}

Table read_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  Table t;
  std::string line;
  if (!std::getline(is, line)) return t;
  t.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<Cell> row;
    for (const std::string& tok : split(line)) {
      if (tok == "true" || tok == "false") {
        row.emplace_back(tok == "true");
        continue;
      }
      char* end = nullptr;
      if (tok.find_first_of(".eEn") == std::string::npos) {
        const long long v = std::strtoll(tok.c_str(), &end, 10);
        if (end && *end == '\0' && !tok.empty()) {
          row.emplace_back(static_cast<std::int64_t>(v));
          continue;
        }
      }
      const double x = std::strtod(tok.c_str(), &end);
      if (end && *end == '\0' && !tok.empty()) row.emplace_back(x);
      else row.emplace_back(tok);
    }
    t.add(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Serialization

json matrix_to_json(const MatX& A) {
  json rows = json::array();
  for (Index i = 0; i < A.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < A.cols(); ++j) r.push_back(A(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

MatX matrix_from_json(const json& doc, const char* what) {
  if (!doc.is_array() || doc.empty()) throw ConfigError(std::string(what) + ": expected a nonempty array of rows");
  const std::size_t cols = doc.at(0).is_array() ? doc.at(0).size() : 0;
  MatX A(static_cast<Index>(doc.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& r = doc.at(i);
    if (!r.is_array() || r.size() != cols) throw ConfigError(std::string(what) + ": ragged matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!r.at(j).is_number()) throw ConfigError(std::string(what) + ": entries must be numbers");
      A(static_cast<Index>(i), static_cast<Index>(j)) = r.at(j).get<double>();
    }
  }
  return A;
}

json vector_to_json(const VecX& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VecX vector_from_json(const json& doc, const char* what) {
  if (!doc.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  VecX v(static_cast<Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc.at(i).is_number()) throw ConfigError(std::string(what) + ": entries must be numbers");
    v[static_cast<Index>(i)] = doc.at(i).get<double>();
  }
  return v;
}

json mrp_to_json(const MarkovRewardProcess& mrp) {
  return json{{"P", matrix_to_json(mrp.P)},
              {"r", vector_to_json(mrp.r)},
              {"gamma", mrp.gamma},
              {"features", matrix_to_json(mrp.Psi)},
              {"xi", vector_to_json(mrp.xi)}};
}

MarkovRewardProcess mrp_from_json(const json& doc) {
  check_keys(doc, {"P", "r", "gamma", "features", "xi"}, "mrp");
  MarkovRewardProcess mrp;
  mrp.P = matrix_from_json(doc.at("P"), "P");
  mrp.r = doc.contains("r") ? vector_from_json(doc.at("r"), "r") : VecX::Zero(mrp.P.rows());
  mrp.gamma = get_number(doc, "gamma", 0.9, "mrp");
  mrp.Psi = matrix_from_json(doc.at("features"), "features");
  mrp.xi = doc.contains("xi") ? vector_from_json(doc.at("xi"), "xi") : stationary_distribution(mrp.P);
  return mrp;
}

json instance_to_json(const Instance& inst) {
  return json{{"weights", vector_to_json(inst.space().weights())},
              {"basis", matrix_to_json(inst.basis.vectors())},
              {"L", matrix_to_json(inst.L)},
              {"b", vector_to_json(inst.b)}};
}

Instance instance_from_json(const json& doc) {
  check_keys(doc, {"weights", "basis", "L", "b"}, "instance file");
  WeightedSpace<double> space(vector_from_json(doc.at("weights"), "weights"));
  Basis<double> basis(space, matrix_from_json(doc.at("basis"), "basis"));
  return Instance(std::move(basis), matrix_from_json(doc.at("L"), "L"), vector_from_json(doc.at("b"), "b"));
}

// ---------------------------------------------------------------------------
// Commands

GraphMrp build_graph_mrp(const json& inst, std::uint64_t seed) {
  const std::string kind = get_string(inst, "kind", std::nullopt, "instance");
  const std::string where = "instance(" + kind + ")";
  if (kind == "erdos_renyi") {
    check_keys(inst, {"kind", "N", "d", "a", "gamma", "seed"}, where);
    return graph_mrp(GraphKind::erdos_renyi, get_dim(inst, "N", 3000, where), get_dim(inst, "d", 1000, where),
                     get_number(inst, "a", 3.0, where), get_number(inst, "gamma", 0.9, where),
                     instance_seed(inst, seed));
  }
  if (kind == "geometric") {
    check_keys(inst, {"kind", "N", "d", "r", "gamma", "seed"}, where);
    return graph_mrp(GraphKind::geometric, get_dim(inst, "N", 3000, where), get_dim(inst, "d", 2, where),
                     get_number(inst, "r", 0.1, where), get_number(inst, "gamma", 0.9, where),
                     instance_seed(inst, seed));
  }
  if (kind == "file") {
    check_keys(inst, {"kind", "path"}, where);
    const std::string path = get_string(inst, "path", std::nullopt, where);
    std::ifstream in(path);
    if (!in) throw ConfigError(where + ": cannot open '" + path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    GraphMrp out;
    out.mrp = mrp_from_json(doc);
    out.graph_vertices = out.mrp.states();
    return out;
  }
  throw ConfigError("factor-sweep: unsupported instance kind '" + kind + "'");
}

std::vector<SweepRow> sweep_mrp(const MarkovRewardProcess& mrp, const std::vector<double>& gammas) {
  const MrpProjection proj = mrp_projected(mrp);
  const WeightedSpace<double> space(mrp.xi);
  const Basis<double> basis(space, proj.Phi);
  const Index D = mrp.states();
  const Index d = mrp.features();

  // |P| in the xi-norm: 1 for a reversible chain, otherwise from the singular values.
  const MatX flow = mrp.xi.asDiagonal() * mrp.P;
  const double asym = max_abs(flow - flow.transpose());
  const double pnorm = asym <= 1e-14 ? 1.0 : opnorm(space, mrp.P);

  MatX G1 = MatX::Zero(d, d);
  if (d < D) {
    const Basis<double> perp = complement_basis(basis);
    const SpMat P = sparse_view(mrp.P);
    const MatX PPerp = P * perp.vectors();
    const MatX K1 = proj.Phi.transpose() * mrp.xi.asDiagonal() * PPerp;
    G1 = K1 * K1.transpose();
  }

  std::vector<SweepRow> rows;
  for (double g : gammas) {
    const MatX M = g * proj.C;
    const double s = g * pnorm;
    SweepRow row{g, approx_factor<double>(M, s), yb_factor_1<double>(M, s),
                 yb_factor_2_from_gram<double>(M, MatX(g * g * G1)), kappa<double>(M)};
    if (!sandwich_holds(row.yb2, row.alpha, row.yb1)) {
      throw InvariantError("factor-sweep: yb2 <= alpha <= yb1 fails at gamma = " + fmt17(g) +
                           " (yb2 " + fmt17(row.yb2) + ", alpha " + fmt17(row.alpha) + ", yb1 " + fmt17(row.yb1) + ")");
    }
    rows.push_back(row);
  }
  return rows;
}

Table cmd_factor_sweep(const ExperimentConfig& cfg) {
  const GraphMrp g = build_graph_mrp(cfg.instance, cfg.seed);
  const std::vector<SweepRow> rows = sweep_mrp(g.mrp, cfg.gammas);
  Table t;
  t.columns = {"gamma", "one_minus_gamma", "alpha", "yb1", "yb2", "kappa", "states", "features"};
  for (const SweepRow& r : rows) {
    t.add({r.gamma, 1.0 - r.gamma, r.alpha, r.yb1, r.yb2, r.kappa, static_cast<std::int64_t>(g.mrp.states()),
           static_cast<std::int64_t>(g.mrp.features())});
  }
  return t;
}

Table cmd_sa_mse(const ExperimentConfig& cfg) {
  const SaProblem p = build_sa_problem(cfg.instance, cfg.seed, cfg.sa);
  const Index d = p.proj.M.rows();
  // A noiseless projected stream has sigma_L = 0; the schedule then uses unit scale.
  const double sigma_sched = p.sigma.sigma_L > 0.0 ? p.sigma.sigma_L : 1.0;
  Table t;
  t.columns = {"n", "mean_mse", "stderr", "approx_error", "alpha", "approx_term", "eps_n", "hot", "bound"};
  for (std::int64_t n : cfg.ns) {
    SAConfig sc;
    const Schedule sched = default_schedule(sigma_sched, d, n, cfg.sa.c0);
    sc.eta = cfg.sa.eta ? *cfg.sa.eta : sched.eta;
    sc.n = n;
    sc.n0 = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(cfg.sa.burn_in_fraction * static_cast<double>(n))));
    sc.theta0 = cfg.sa.start_at_solution ? p.theta_bar : VecX::Zero(d);
    const MseStats st = mse_experiment(p.factory, sc, p.target, cfg.repeats, cfg.seed * 1000003ULL);
    const double eps = stat_error(p.proj.M, p.Sigma_star, n);
    const double hot = hot_term(p.sigma.sigma_L, p.sigma.sigma_b, p.kappa, d, n, p.theta_bar.norm());
    const double bound = theorem1_bound(p.approx_error, p.alpha, eps, hot, cfg.sa.omega, cfg.sa.c);
    t.add({n, st.mean_mse + p.approx_error, st.stderr_mse, p.approx_error, p.alpha, p.alpha * p.approx_error, eps,
           hot, bound});
  }
  return t;
}

VerifyReport cmd_verify_instances(const ExperimentConfig& cfg) {
  const json& inst = cfg.instance;
  const std::string kind = get_string(inst, "kind", std::nullopt, "instance");
  Checks c;
  c.report.table.columns = {"check", "passed", "measured", "tolerance"};

  if (kind == "lb_theorem2" || kind == "lb_theorem4") {
    const LbKind lk = kind == "lb_theorem2" ? LbKind::theorem2 : LbKind::theorem4;
    const LowerBoundSpec spec = build_lb_spec(inst, lk, cfg.seed);
    const LbInstance lb = lk == LbKind::theorem2 ? lb_theorem2(spec) : lb_theorem4(spec);
    const Projected proj = project_instance(lb.instance);
    c.le("projection_M", max_abs(proj.M - spec.M0), 1e-10);
    c.le("projection_h", max_abs(proj.h - spec.h0), 1e-10);
    const double A = oracle_error(lb.instance);
    const double d2 = spec.delta * spec.delta;
    c.le("oracle_error_delta2", std::abs(A - d2), 1e-12 * std::max(1.0, d2));
    const double L_norm = opnorm(lb.instance.space(), lb.instance.L);
    c.le("opnorm_le_gamma_max", L_norm - spec.gamma_max, 1e-10);
    const VecX v = solve_exact(lb.instance);
    c.le("closed_form_v_star", (v - lb.v_star).norm() / (1.0 + lb.v_star.norm()), 1e-10);
    const VecX vbar = embed(lb.instance.basis, solve_projected(proj));
    const VecX diff = vbar - v;
    const double err = lb.instance.space().inner(diff, diff);
    if (lk == LbKind::theorem2) {
      c.le("tightness_ratio_vs_alpha", std::abs(err / A - lb.alpha) / lb.alpha, 1e-6);
    } else {
      const double q2 = static_cast<double>(spec.q * spec.q);
      const double expected = A + (lb.alpha - 1.0) * d2 / (2.0 * q2);
      c.le("error_closed_form", std::abs(err - expected) / expected, 1e-8);
      const MatX& perp = lb.complement->vectors();
      c.le("complement_orthogonal", max_abs(lb.instance.space().gram(lb.instance.basis.vectors(), perp)), 1e-10);
    }
    c.le("oracle_inequality_ratio", verify_oracle_inequality(lb.instance).ratio, 1.0 + 1e-8);
  } else if (kind == "lb_mrp") {
    const LowerBoundSpec spec = build_lb_spec(inst, LbKind::mrp, cfg.seed);
    const LbMrp lb = lb_mrp(spec);
    const MarkovRewardProcess& mrp = lb.mrp;
    const Index D = mrp.states();
    const VecX v = (MatX::Identity(D, D) - mrp.gamma * mrp.P).partialPivLu().solve(mrp.r);
    c.le("closed_form_v_star", (v - lb.v_star).cwiseAbs().maxCoeff(), 1e-10);
    c.le("stationary", (mrp.P.transpose() * mrp.xi - mrp.xi).cwiseAbs().maxCoeff(), 1e-12);
    c.le("xi_closed_form", (stationary_distribution(mrp.P) - lb.xi_closed_form).cwiseAbs().maxCoeff(), 1e-12);
    c.le("row_stochastic", (mrp.P.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    const MatX B = mrp.Psi.transpose() * mrp.xi.asDiagonal() * mrp.Psi;
    c.le("feature_gram_identity", max_abs(B - MatX::Identity(spec.d, spec.d)), 1e-10);
    const MatX C = mrp.Psi.transpose() * mrp.xi.asDiagonal() * mrp.P * mrp.Psi;
    c.le("kappa_le_nu", kappa<double>(C) - spec.nu, 1e-10);
    const MrpProjection proj = mrp_projected(mrp);
    const Instance fp = mrp_instance(mrp, proj);
    const double A = oracle_error(fp);
    c.le("oracle_error_le_delta2", A - spec.delta * spec.delta, 1e-12);
    c.le("oracle_error_closed_form", std::abs(A - lb.oracle_error_closed_form), 1e-12);
    c.le("oracle_inequality_ratio", verify_oracle_inequality(fp).ratio, 1.0 + 1e-8);
  } else if (kind == "regression") {
    const RegressionModel model = build_regression(inst, cfg.seed);
    const Instance fp = regression_instance(model);
    c.le("opnorm_le_1_minus_mu_over_beta", opnorm(fp.space(), fp.L) - (1.0 - model.mu / model.beta), 1e-10);
    c.le("solve_recovers_v_star", (solve_exact(fp) - model.v_star).norm() / (1.0 + model.v_star.norm()), 1e-10);
    const Projected proj = project_instance(fp);
    const double a = approx_factor(proj.M, 1.0 - model.mu / model.beta);
    const double ac = regression_alpha_closed_form(model);
    c.le("alpha_closed_form", std::abs(a - ac) / ac, 1e-8);
    check_generic_instance(c, fp, "");
  } else if (kind == "elliptic") {
    EllipticProblem1D prob = build_elliptic(inst);
    const EllipticInstance e1 = elliptic_instance(prob);
    c.le("stiffness_symmetric", max_abs(e1.proj.M - e1.proj.M.transpose()), 1e-10);
    prob.quadrature_points = 2 * e1.nodes;
    const EllipticInstance e2 = elliptic_instance(prob);
    c.le("quadrature_refinement", (e2.proj.M - e1.proj.M).norm(), 1e-6);
    c.le("kappa_le_1_minus_mu_over_beta", kappa(e1.proj.M) - (1.0 - prob.mu / prob.beta), 1e-10);
  } else if (kind == "mrp") {
    const TdSetup td = build_td(inst, cfg.seed);
    check_mrp_invariants(c, td.graph.mrp, true);
  } else if (kind == "erdos_renyi" || kind == "geometric" || kind == "file") {
    const GraphMrp g = build_graph_mrp(inst, cfg.seed);
    check_mrp_invariants(c, g.mrp, g.mrp.states() <= 600);
  } else if (kind == "random") {
    check_keys(inst, {"kind", "D", "d", "count", "seed"}, "instance(random)");
    RandomInstanceOptions opt;
    opt.D = get_dim(inst, "D", 20, "instance(random)");
    opt.d = get_dim(inst, "d", 4, "instance(random)");
    const auto count = get_int(inst, "count", 20, "instance(random)");
    Rng rng = make_rng(instance_seed(inst, cfg.seed), 0x726e);
    double worst_ratio = 0.0;
    bool sandwich = true;
    for (std::int64_t k = 0; k < count; ++k) {
      const Instance fp = random_instance(opt, rng);
      worst_ratio = std::max(worst_ratio, verify_oracle_inequality(fp).ratio);
      const FactorReport<double> fr = factor_report(fp);
      sandwich = sandwich && sandwich_holds(fr.yb2, fr.alpha, fr.yb1);
    }
    c.le("oracle_inequality_ratio", worst_ratio, 1.0 + 1e-8);
    c.add("sandwich", sandwich, sandwich ? 1.0 : 0.0, 1e-8);
  } else {
    throw ConfigError("verify: unsupported instance kind '" + kind + "'");
  }
  return std::move(c.report);
}

}  // namespace projfp
