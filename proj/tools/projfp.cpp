// Command-line entry point: factor-sweep, sa-mse, verify.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "projfp/harness.hpp"

namespace {

enum Exit { ok = 0, invariant = 1, config = 2, numerical = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON experiment config")->required();
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--out", c.out, "output path (default: stdout)");
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

projfp::ExperimentConfig resolve(const Common& c, projfp::Experiment e) {
  projfp::ExperimentConfig cfg = projfp::load_config(c.config, e);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  if (!c.format.empty()) cfg.format = c.format == "json" ? projfp::Format::json : projfp::Format::csv;
  return cfg;
}

void emit(const projfp::Table& t, const projfp::ExperimentConfig& cfg) {
  if (cfg.output.empty()) {
    projfp::write_table(t, cfg.format, std::cout);
    return;
  }
  std::ofstream os(cfg.output);
  if (!os) throw projfp::ConfigError("cannot open output '" + cfg.output + "'");
  projfp::write_table(t, cfg.format, os);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"projected fixed-point experiments"};
  app.require_subcommand(1);
  Common sweep, mse, verify;
  auto* s1 = app.add_subcommand("factor-sweep", "approximation factors over a discount grid");
  auto* s2 = app.add_subcommand("sa-mse", "mean-squared error of averaged stochastic approximation");
  auto* s3 = app.add_subcommand("verify", "check invariants of a generated instance");
  add_common(s1, sweep);
  add_common(s2, mse);
  add_common(s3, verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Exit::ok : Exit::config;
  }

  try {
    if (*s1) {
      const auto cfg = resolve(sweep, projfp::Experiment::factor_sweep);
      emit(projfp::cmd_factor_sweep(cfg), cfg);
    } else if (*s2) {
      const auto cfg = resolve(mse, projfp::Experiment::sa_mse);
      emit(projfp::cmd_sa_mse(cfg), cfg);
    } else {
      const auto cfg = resolve(verify, projfp::Experiment::verify_instances);
      const projfp::VerifyReport rep = projfp::cmd_verify_instances(cfg);
      emit(rep.table, cfg);
      if (!rep.all_passed) {
        std::cerr << "verify: one or more checks failed\n";
        return Exit::invariant;
      }
    }
  } catch (const projfp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const projfp::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const projfp::DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return Exit::config;
  } catch (const projfp::InvariantError& e) {
    std::cerr << "invariant failure: " << e.what() << '\n';
    return Exit::invariant;
  } catch (const projfp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return Exit::numerical;
  } catch (const projfp::SingularError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return Exit::numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::numerical;
  }
  return Exit::ok;
}
