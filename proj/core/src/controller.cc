#include "cmpc/controller.h"

#include <cmath>
#include <string>

#include "rng.h"

namespace cmpc {

namespace {

double slack(double v) { return 1e-9 * (1.0 + std::abs(v)); }

void validate(const PenaltyConfig& pc) {
  if (!(pc.beta > 0.0 && pc.beta < 1.0)) {
    throw ContractViolation("penalty: beta must lie in (0, 1)");
  }
  if (!(pc.alpha >= 0.0)) {
    throw ContractViolation("penalty: alpha must be nonnegative");
  }
}

}  // namespace

std::string to_string(SolveMode mode) {
  return mode == SolveMode::kFull ? "full" : "two_stage";
}

SolveMode parse_solve_mode(const std::string& s) {
  if (s == "two_stage") return SolveMode::kTwoStage;
  if (s == "full") return SolveMode::kFull;
  throw ContractViolation("unknown solve mode '" + s + "'");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return "converged";
    case Termination::kInfeasible:
      return "infeasible";
    case Termination::kMaxSteps:
      break;
  }
  return "max_steps";
}

double z_update(const StateVec& x, double z, double beta,
                const std::function<double(const StateVec&)>& w) {
  return w(x) > z ? z : beta * z;
}

StepOutcome mpc_step(const Model& model, const StageCost& cost,
                     const ContractionSpec& spec, const PenaltyConfig& pc,
                     const ControllerState& cs, const StateVec& x,
                     SolveMode mode, const SolverConfig& cfg) {
  validate(pc);
  if (!(cs.z > 0.0)) {
    throw ContractViolation("mpc_step: budget z must be positive");
  }
  std::optional<ControlSequence> warm;
  if (cs.last_result && cs.last_result->q_star >= 1) {
    warm = shifted_candidate(*cs.last_result);
  }
  SolverConfig local = cfg;
  local.seed = internal::derive_seed(
      {cfg.seed, static_cast<std::uint64_t>(cs.k)});

  const SolveResult r =
      mode == SolveMode::kFull
          ? solve_full(model, cost, spec, x, cs.z, pc.alpha, warm, local)
          : two_stage_solve(model, cost, spec, x, cs.z, pc.alpha, warm, local);

  StepOutcome out;
  StepRecord& rec = out.record;
  rec.k = cs.k;
  rec.x = x;
  rec.z = cs.z;
  rec.w_x = spec.w(x);
  rec.e = rec.w_x - rec.z;
  rec.j_star = r.j_star;
  rec.q_star = r.q_star;
  rec.ell_star = r.ell_star;
  rec.phi_star = r.phi_star;
  rec.w_under_star = r.w_under_star;
  rec.solver_evals = r.evals;
  rec.feasible = r.feasible;
  rec.u_applied = r.feasible && !r.useq.empty() ? r.useq.front()
                                                 : ControlVec::Zero(model.m);
  out.u = rec.u_applied;

  out.next.z = z_update(x, cs.z, pc.beta, spec.w);
  out.next.last_result = r;
  out.next.k = cs.k + 1;
  return out;
}

SimLog simulate(const Model& model, const StageCost& cost,
                const ContractionSpec& spec, const PenaltyConfig& pc,
                const StateVec& x0, double z0, int max_steps, double stop_norm,
                SolveMode mode, const SolverConfig& cfg) {
  validate(spec);
  validate(pc);
  if (x0.size() != model.n || !state_admissible(model, x0)) {
    throw ContractViolation("simulate: initial state is not admissible");
  }
  if (!(z0 > 0.0)) {
    throw ContractViolation("simulate: z0 must be positive");
  }
  SimLog log;
  ControllerState cs;
  cs.z = z0;
  StateVec x = x0;
  for (;;) {
    if (x.norm() <= stop_norm) {
      log.terminated_reason = Termination::kConverged;
      break;
    }
    if (cs.k >= max_steps) {
      log.terminated_reason = Termination::kMaxSteps;
      break;
    }
    StepOutcome out = mpc_step(model, cost, spec, pc, cs, x, mode, cfg);
    const bool feasible = out.record.feasible;
    log.records.push_back(std::move(out.record));
    if (!feasible) {
      log.terminated_reason = Termination::kInfeasible;
      break;
    }
    x = step(model, x, out.u);
    cs = std::move(out.next);
  }
  log.final_state = x;
  return log;
}

const CheckResult* DiagnosticReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool DiagnosticReport::all_checks_passed() const {
  for (const auto& c : checks) {
    if (!c.ok()) return false;
  }
  return true;
}

DiagnosticReport check_lemmas(const SimLog& log, const PenaltyConfig& pc,
                              const ContractionSpec& spec,
                              const StageCost& cost, const Model& model) {
  if (log.records.empty()) {
    throw ContractViolation("check_lemmas: empty log");
  }
  DiagnosticReport rep;
  rep.alpha = pc.alpha;
  rep.alpha_min = alpha_min(spec.horizon, cost.l_bar, spec.gamma);
  rep.alpha_precondition = pc.alpha >= rep.alpha_min;

  CheckResult ell_q{"ell_q", "l* = q* at every step", 0, 0, {}};
  CheckResult cost_bound{
      "cost_bound", "J* <= z N Lbar + alpha gamma W(x) when z <= W(x)", 0, 0,
      {}};
  CheckResult cor_bound{
      "cor_bound", "J* <= (1 + gamma)/2 alpha W(x) when e > 0", 0, 0, {}};
  CheckResult decrease{
      "decrease",
      "J*_{k+1} <= J*_k - z_k Q(x_{k+1}) when e_k > 0 and e_{k+1} > 0", 0, 0,
      {}};
  CheckResult z_trace{"z_trace", "z_k = beta^{c_k} z_0", 0, 0, {}};
  CheckResult k_le{"k_le",
                   "W(x_k) <= beta^{m-1} z_0 at the m-th instant with e <= 0",
                   0, 0, {}};
  CheckResult admissible{"admissible", "x_k in G and u_k in U", 0, 0, {}};

  auto tally = [](CheckResult& c, bool ok, int k) {
    ++c.applicable;
    if (ok) {
      ++c.passed;
    } else {
      c.failed_steps.push_back(k);
    }
  };

  const auto& recs = log.records;
  const int horizon = spec.horizon;
  const double z0 = recs.front().z;
  double expected_z = z0;
  double k_le_level = z0;

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const StepRecord& r = recs[i];
    tally(ell_q, r.feasible && r.ell_star == r.q_star, r.k);

    if (r.feasible && r.z <= r.w_x) {
      const double bound =
          r.z * horizon * cost.l_bar + pc.alpha * spec.gamma * r.w_x;
      tally(cost_bound, r.j_star <= bound + slack(bound), r.k);
    }
    if (r.feasible && r.e > 0.0) {
      const double bound = 0.5 * (1.0 + spec.gamma) * pc.alpha * r.w_x;
      tally(cor_bound, r.j_star <= bound + slack(bound), r.k);
    }
    if (i + 1 < recs.size()) {
      const StepRecord& nx = recs[i + 1];
      if (r.feasible && nx.feasible && r.e > 0.0 && nx.e > 0.0) {
        const double rhs = r.j_star - r.z * cost.q_part(nx.x);
        tally(decrease, nx.j_star <= rhs + slack(r.j_star), r.k);
      }
    }

    tally(z_trace, r.z == expected_z, r.k);
    if (r.e <= 0.0) {
      tally(k_le, r.w_x <= k_le_level, r.k);
      k_le_level *= pc.beta;
      expected_z *= pc.beta;
    }

    if (r.feasible) {
      tally(admissible,
            state_admissible(model, r.x) && check_control(model, r.u_applied),
            r.k);
    }
  }
  if (log.final_state.size() == model.n) {
    tally(admissible, state_admissible(model, log.final_state),
          recs.back().k + 1);
  }

  rep.checks = {ell_q, cost_bound, cor_bound, decrease,
                z_trace, k_le, admissible};
  return rep;
}

}  // namespace cmpc
