#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmpc/contraction.h"
#include "cmpc/model.h"
#include "cmpc/objective.h"
#include "cmpc/solver.h"

namespace cmpc {

enum class SolveMode { kTwoStage, kFull };

std::string to_string(SolveMode mode);
SolveMode parse_solve_mode(const std::string& s);

/// Controller memory: the contraction budget z and the last optimum, whose
/// tail seeds the next solve.
struct ControllerState {
  double z = 1.0;
  std::optional<SolveResult> last_result;
  int k = 0;
};

struct StepRecord {
  int k = 0;
  StateVec x;
  ControlVec u_applied;
  double z = 0.0;      // budget used at step k (before the update)
  double w_x = 0.0;    // W(x_k)
  double e = 0.0;      // W(x_k) - z_k
  double j_star = 0.0;
  int q_star = 0;
  int ell_star = 0;
  double phi_star = 0.0;
  double w_under_star = 0.0;
  std::int64_t solver_evals = 0;
  bool feasible = false;
};

enum class Termination { kMaxSteps, kConverged, kInfeasible };

std::string to_string(Termination t);

struct SimLog {
  std::vector<StepRecord> records;
  StateVec final_state;
  Termination terminated_reason = Termination::kMaxSteps;
};

/// Budget update: z stays while W(x) > z, shrinks to beta z once W(x) <= z.
double z_update(const StateVec& x, double z, double beta,
                const std::function<double(const StateVec&)>& w);

struct StepOutcome {
  ControlVec u;
  ControllerState next;
  StepRecord record;
};

/// One receding-horizon step: solve P(x, z_k) with the current budget, apply
/// the first control, then update z and store the warm start.
StepOutcome mpc_step(const Model& model, const StageCost& cost,
                     const ContractionSpec& spec, const PenaltyConfig& pc,
                     const ControllerState& cs, const StateVec& x,
                     SolveMode mode, const SolverConfig& cfg);

/// Closed loop from x0 until ||x|| <= stop_norm, max_steps, or an infeasible
/// solve. Throws ContractViolation when x0 is not admissible.
SimLog simulate(const Model& model, const StageCost& cost,
                const ContractionSpec& spec, const PenaltyConfig& pc,
                const StateVec& x0, double z0, int max_steps, double stop_norm,
                SolveMode mode, const SolverConfig& cfg);

struct CheckResult {
  std::string name;
  std::string description;
  int applicable = 0;
  int passed = 0;
  std::vector<int> failed_steps;

  bool ok() const { return passed == applicable; }
};

struct DiagnosticReport {
  bool alpha_precondition = false;
  double alpha = 0.0;
  double alpha_min = 0.0;
  std::vector<CheckResult> checks;

  const CheckResult* find(const std::string& name) const;
  bool all_checks_passed() const;
  // Checks passed and the penalty satisfies the convergence bound.
  bool all_passed() const { return alpha_precondition && all_checks_passed(); }
};

/// Replays the inequality chain of the convergence argument on a log:
///   ell_q      l* = q* at every step
///   cost_bound J* <= z N Lbar + alpha gamma W(x) where z <= W(x)
///   cor_bound  J* <= (1 + gamma)/2 alpha W(x) where e > 0
///   decrease   J*_{k+1} <= J*_k - z_k Q(x_{k+1}) where e_k > 0 and e_{k+1} > 0
///   z_trace    z_k = beta^{c_k} z_0, c_k = #{j < k : e_j <= 0}
///   k_le       W(x_k) <= beta^{m-1} z_0 at the m-th instant with e <= 0
///   admissible every x_k in G, every u_k in U
/// Checks only report; nothing here feeds back into the controller.
DiagnosticReport check_lemmas(const SimLog& log, const PenaltyConfig& pc,
                              const ContractionSpec& spec,
                              const StageCost& cost, const Model& model);

}  // namespace cmpc
