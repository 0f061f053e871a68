#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "projfp/harness.hpp"

using namespace projfp;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "projfp_test_harness";
  fs::create_directories(p);
  return p;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PROJFP_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

MarkovRewardProcess small_mrp() {
  return graph_mrp(GraphKind::erdos_renyi, 40, 4, 6.0, 0.9, 3).mrp;
}

}  // namespace

TEST_CASE("config parsing") {
  const json ok = json::parse(R"({"experiment": "factor_sweep", "instance": {"kind": "geometric"}, "seed": 4})");
  const ExperimentConfig cfg = parse_config(ok, Experiment::factor_sweep);
  CHECK(cfg.seed == 4);
  CHECK(cfg.gammas.size() == 20);
  CHECK(1.0 - cfg.gammas.front() == doctest::Approx(std::pow(10.0, -0.5)));
  CHECK(1.0 - cfg.gammas.back() == doctest::Approx(1e-5));

  CHECK_THROWS_AS(parse_config(json::parse(R"({"instance": {"kind": "x"}, "bogus": 1})"), Experiment::factor_sweep),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment": "sa_mse", "instance": {"kind": "x"}})"),
                               Experiment::factor_sweep),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"instance": {"kind": "x"}, "gammas": [0.5, 0.4, 0.6]})"),
                               Experiment::factor_sweep),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"instance": {"kind": "x"}, "n_grid": [100, 100]})"),
                               Experiment::sa_mse),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"instance": {"kind": "x"}, "seed": "a"})"), Experiment::sa_mse),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"instance": {"kind": "x"}, "sa": {"c0": -1}})"), Experiment::sa_mse),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"seed": 1})"), Experiment::sa_mse), ConfigError);
}

TEST_CASE("unknown instance parameters are rejected") {
  ExperimentConfig cfg;
  cfg.instance = json::parse(R"({"kind": "regression", "D": 4, "typo": 1})");
  cfg.ns = {100, 200};
  cfg.repeats = 2;
  CHECK_THROWS_AS(cmd_sa_mse(cfg), ConfigError);
  cfg.instance = json::parse(R"({"kind": "nonsense"})");
  CHECK_THROWS_AS(cmd_verify_instances(cfg), ConfigError);
}

TEST_CASE("CSV round trip preserves values bit for bit") {
  Table t;
  t.columns = {"x", "n", "label", "ok"};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 50; ++i) t.add({u(rng) * 1e-9, std::int64_t{i} * 1000003, std::string("a,\"b\""), i % 2 == 0});
  std::stringstream ss;
  write_csv(t, ss);
  const Table r = read_csv(ss);
  REQUIRE(r.columns == t.columns);
  REQUIRE(r.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < t.columns.size(); ++j) CHECK(r.rows[i][j] == t.rows[i][j]);
}

TEST_CASE("non-finite values are refused at emission") {
  Table t;
  t.columns = {"x"};
  t.add({std::numeric_limits<double>::quiet_NaN()});
  std::stringstream ss;
  CHECK_THROWS_AS(write_csv(t, ss), NumericalError);
  CHECK_THROWS_AS(write_json(t, ss), NumericalError);
}

TEST_CASE("JSON emission") {
  Table t;
  t.columns = {"a", "b"};
  t.add({1.5, std::string("x")});
  std::stringstream ss;
  write_json(t, ss);
  const json doc = json::parse(ss.str());
  CHECK(doc.at(0).at("a").get<double>() == 1.5);
  CHECK(doc.at(0).at("b").get<std::string>() == "x");
}

TEST_CASE("MRP and instance serialization") {
  const MarkovRewardProcess m = small_mrp();
  const MarkovRewardProcess back = mrp_from_json(json::parse(mrp_to_json(m).dump()));
  CHECK((back.P - m.P).norm() == 0.0);
  CHECK((back.Psi - m.Psi).norm() == 0.0);
  CHECK((back.xi - m.xi).norm() == 0.0);
  Rng rng = make_rng(2, 0);
  const Instance inst = random_instance(RandomInstanceOptions{}, rng);
  const Instance ib = instance_from_json(json::parse(instance_to_json(inst).dump()));
  CHECK((ib.L - inst.L).norm() == 0.0);
  CHECK((ib.basis.vectors() - inst.basis.vectors()).norm() == 0.0);
}

TEST_CASE("sweep rows satisfy the sandwich and match direct evaluation") {
  const MarkovRewardProcess m = small_mrp();
  const std::vector<double> gammas = default_gamma_grid(1e-3, 0.3, 5);
  const std::vector<SweepRow> rows = sweep_mrp(m, gammas);
  REQUIRE(rows.size() == 5);
  for (const SweepRow& r : rows) {
    CHECK(r.yb2 <= r.alpha * (1 + 1e-8));
    CHECK(r.alpha <= r.yb1 * (1 + 1e-8));
    // Direct evaluation on the ambient instance at this discount.
    MarkovRewardProcess mg = m;
    mg.gamma = r.gamma;
    const MrpProjection p = mrp_projected(mg);
    const Instance inst = mrp_instance(mg, p);
    const double s = oracle::opnorm(inst.space().weights(), inst.L);
    CHECK(r.alpha == doctest::Approx(oracle::approx_factor(p.M, s)).epsilon(1e-8));
    CHECK(r.yb1 == doctest::Approx(oracle::yb1(p.M, s)).epsilon(1e-8));
    CHECK(r.yb2 == doctest::Approx(yb_factor_2(inst)).epsilon(1e-8));
  }
}

TEST_CASE("verify passes on the default lower-bound specs") {
  ExperimentConfig cfg;
  cfg.instance = json::parse(R"({"kind": "lb_theorem2"})");
  CHECK(cmd_verify_instances(cfg).all_passed);
  cfg.instance = json::parse(R"({"kind": "lb_mrp", "D": 40})");
  CHECK(cmd_verify_instances(cfg).all_passed);
}

TEST_CASE("verify names the broken invariant of a corrupted chain") {
  MarkovRewardProcess m = small_mrp();
  m.P.row(0) *= 0.99;
  json doc = mrp_to_json(m);
  const fs::path p = write_file("corrupt.json", doc.dump());
  ExperimentConfig cfg;
  cfg.instance = json{{"kind", "file"}, {"path", p.string()}};
  const VerifyReport rep = cmd_verify_instances(cfg);
  CHECK_FALSE(rep.all_passed);
  bool named = false;
  for (const auto& row : rep.table.rows)
    if (std::get<std::string>(row[0]) == "row_stochastic") named = !std::get<bool>(row[1]);
  CHECK(named);
}

TEST_CASE("CLI exit codes") {
  const fs::path good = write_file(
      "good.json", R"({"experiment": "verify_instances", "instance": {"kind": "lb_theorem2", "d": 2, "D": 12}})");
  const fs::path out = scratch() / "out.csv";
  CHECK(run_cli("verify --config " + good.string() + " --seed 3 --out " + out.string()) == 0);
  CHECK(fs::exists(out));
  CHECK(run_cli("verify --config " + good.string() + " --format json") == 0);

  const fs::path bad = write_file("bad.json", R"({"instance": {"kind": "lb_theorem2"}, "oops": 1})");
  CHECK(run_cli("verify --config " + bad.string()) == 2);
  CHECK(run_cli("verify --config " + (scratch() / "missing.json").string()) == 2);
  CHECK(run_cli("verify") == 2);

  MarkovRewardProcess m = small_mrp();
  m.P.row(0) *= 0.99;
  const fs::path corrupt = write_file("corrupt2.json", mrp_to_json(m).dump());
  const fs::path vcfg = write_file("vcorrupt.json", json{{"instance", {{"kind", "file"}, {"path", corrupt.string()}}}}.dump());
  CHECK(run_cli("verify --config " + vcfg.string()) == 1);

  // A step size far above the stability range diverges.
  const fs::path div = write_file("div.json", R"({"instance": {"kind": "lb_theorem2", "d": 2, "D": 12},
      "n_grid": [200000], "repeats": 2, "sa": {"eta": 50.0}})");
  CHECK(run_cli("sa-mse --config " + div.string()) == 3);
}

TEST_CASE("sa-mse rows on a noiseless lower-bound stream") {
  ExperimentConfig cfg;
  cfg.instance = json::parse(R"({"kind": "lb_theorem2", "d": 2, "D": 12})");
  cfg.ns = {2000, 4000};
  cfg.repeats = 2;
  cfg.sa.eta = 0.2;
  const Table t = cmd_sa_mse(cfg);
  REQUIRE(t.rows.size() == 2);
  for (const auto& row : t.rows) {
    const double mse = std::get<double>(row[1]);
    const double approx = std::get<double>(row[3]);
    const double alpha = std::get<double>(row[4]);
    // Deterministic iteration converges to vbar, so the error equals |vbar - v*|^2 = alpha A.
    CHECK(mse == doctest::Approx(alpha * approx).epsilon(1e-8));
    CHECK(std::get<double>(row[2]) == 0.0);
    CHECK(std::get<double>(row[6]) == 0.0);
  }
}
