#pragma once

// Experiment runner: configuration, tables, CSV/JSON emission and the three
// subcommands (factor sweep, SA mean-squared error study, instance verification).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "projfp/instances.hpp"

namespace projfp {

using json = nlohmann::json;

enum class Experiment { factor_sweep, sa_mse, verify_instances };
enum class Format { csv, json };

struct SaOptions {
  double c0 = 24.0;
  std::optional<double> eta;   // overrides the default schedule
  double burn_in_fraction = 0.5;
  double omega = 1.0;
  double c = 24.0;
  std::int64_t noise_samples = 100000;  // for streams without a closed-form Sigma*
  bool start_at_solution = false;       // theta_0 = theta_bar instead of 0
};

struct ExperimentConfig {
  Experiment experiment = Experiment::factor_sweep;
  json instance;                     // {"kind": ..., parameters}
  std::vector<double> gammas;        // factor_sweep
  std::vector<std::int64_t> ns;      // sa_mse
  int repeats = 20;
  std::uint64_t seed = 0;
  std::string output;                // empty means stdout
  Format format = Format::csv;
  SaOptions sa;
};

/// Strict parse: unknown keys, wrong types and non-monotone grids raise ConfigError.
ExperimentConfig parse_config(const json& doc, Experiment expected);
ExperimentConfig load_config(const std::string& path, Experiment expected);

/// 20 points with 1 - gamma log-spaced on [1e-5, 10^-0.5], gamma increasing.
std::vector<double> default_gamma_grid(double lo = 1e-5, double hi = 0.31622776601683794,
                                       int points = 20);

using Cell = std::variant<double, std::int64_t, std::string, bool>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

/// Header plus rows; doubles with 17 significant digits. Non-finite values raise NumericalError.
void write_csv(const Table& table, std::ostream& os);
/// Array of row objects keyed by column name.
void write_json(const Table& table, std::ostream& os);
void write_table(const Table& table, Format format, std::ostream& os);
Table read_csv(std::istream& is);

struct SweepRow {
  double gamma;
  double alpha;
  double yb1;
  double yb2;
  double kappa;
};

Table cmd_factor_sweep(const ExperimentConfig& cfg);
Table cmd_sa_mse(const ExperimentConfig& cfg);

struct VerifyReport {
  Table table;  // check, passed, measured, tolerance
  bool all_passed = true;
};
VerifyReport cmd_verify_instances(const ExperimentConfig& cfg);

// Serialization of generated objects.
json mrp_to_json(const MarkovRewardProcess& mrp);
MarkovRewardProcess mrp_from_json(const json& doc);
json instance_to_json(const Instance& inst);
Instance instance_from_json(const json& doc);
json matrix_to_json(const MatX& A);
MatX matrix_from_json(const json& doc, const char* what);
json vector_to_json(const VecX& v);
VecX vector_from_json(const json& doc, const char* what);

/// Sweep rows for an MRP over the given discount grid; asserts yb2 <= alpha <= yb1.
std::vector<SweepRow> sweep_mrp(const MarkovRewardProcess& mrp, const std::vector<double>& gammas);

/// Builds the Markov reward process named by an instance section (graph kinds or file).
GraphMrp build_graph_mrp(const json& instance, std::uint64_t seed);

}  // namespace projfp
