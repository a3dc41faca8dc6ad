#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmpc/contraction.h"
#include "cmpc/controller.h"
#include "cmpc/model.h"
#include "cmpc/objective.h"
#include "cmpc/solver.h"

namespace cmpc::app {

/// Thrown for malformed configs, unreadable files and CSV schema mismatches.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// simulate: 0 converged, 2 max_steps, 3 infeasible. Every command returns 1
// on malformed input and 2 when its verdict is negative.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxSteps = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNegative = 2;

/// Experiment description as read from a JSON config. Optional fields left
/// empty mean "auto" and are resolved by build().
struct ExperimentConfig {
  std::string model_type = "nonholonomic";
  NonholonomicParams nonholonomic;
  DoubleIntegratorParams double_integrator;

  std::string cost_type = "L1";  // L1 | L2 | custom
  std::vector<double> custom_state_weights;
  double custom_control_weight = 0.0;
  double custom_l_bar = 0.0;

  double gamma = 0.95;
  int horizon = 3;

  std::optional<double> alpha;  // empty: 2 N Lbar / (1 - gamma)
  double beta = 0.5;
  std::optional<double> z0;     // empty: W(x0)

  SolverConfig solver;

  std::vector<double> x0 = {3.0, 8.0, -5.0};
  int max_steps = 1000;
  double stop_norm = 1e-2;
  SolveMode mode = SolveMode::kTwoStage;

  std::string csv_path = "trajectory.csv";
  std::string summary_path = "summary.json";
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Resolved, ready-to-run objects.
struct Experiment {
  ExperimentConfig config;
  Model model;
  StageCost cost;
  ContractionSpec spec;
  PenaltyConfig penalty;
  double alpha_min = 0.0;
  StateVec x0;
};

Experiment build(const ExperimentConfig& cfg);

/// Resolved configuration as JSON text (auto values replaced).
std::string resolved_config_json(const Experiment& exp);

SimLog run(const Experiment& exp);

void write_csv(const SimLog& log, int n, int m, std::ostream& out);
void write_csv(const SimLog& log, int n, int m, const std::string& path);
std::string csv_header(int n, int m);
SimLog read_csv(std::istream& in, int n, int m);
SimLog read_csv(const std::string& path, int n, int m);

std::string report_json(const DiagnosticReport& rep);
std::string contraction_report_json(const ContractionReport& rep,
                                    const ContractionSpec& spec);

/// mean over records of |x2 - x3|; requires n >= 3.
double mean_abs_x2_minus_x3(const SimLog& log);

struct SimulateOptions {
  std::optional<std::string> csv_path;
  std::optional<std::string> summary_path;
};

int cmd_simulate(const std::string& config_path, const SimulateOptions& opts,
                 std::ostream& msg);
int cmd_verify(const std::string& config_path, std::int64_t samples,
               std::uint64_t seed, const std::optional<std::string>& out_path,
               std::ostream& msg);
int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::string& out_path, std::ostream& msg);
int cmd_check(const std::string& csv_path, const std::string& config_path,
              const std::optional<std::string>& out_path, std::ostream& msg);

}  // namespace cmpc::app
