#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cmpc/contraction.h"
#include "cmpc/model.h"
#include "cmpc/objective.h"

namespace cmpc {

/// Settings of the sequence optimizer: cross-entropy search around a mean
/// sequence with elite refit and restarts, then a Nelder-Mead polish of the
/// incumbent.
struct SolverConfig {
  int restarts = 2;
  int samples_per_iter = 48;
  int max_iters = 25;
  double elite_frac = 0.125;
  // Initial per-component standard deviation; empty means a quarter of the
  // width of the control box. Either empty, m entries (repeated per step) or q*m.
  std::vector<double> init_std;
  double constraint_penalty = 1e6;
  // Relative tolerance for the shortest-horizon tie break:
  // |J - J_min| <= tie_tol * (1 + |J_min|).
  double tie_tol = 1e-9;
  std::uint64_t seed = 0;
  // Nelder-Mead iterations spent polishing the best point found by the
  // sampling phase; 0 disables polishing.
  int polish_iters = 2000;
};

void validate(const SolverConfig& cfg);

struct SolveResult {
  ControlSequence useq;
  int q_star = 0;
  int ell_star = 0;
  double j_star = 0.0;
  double phi_star = 0.0;
  double w_under_star = 0.0;
  bool feasible = false;
  std::int64_t evals = 0;
};

/// Minimizes z Phi + alpha W_min over U^q subject to the state constraints.
/// Every candidate is evaluated first, so the result is never worse than the
/// best feasible candidate. Candidates longer than q are truncated, shorter
/// ones are padded with the projection of zero onto U. `stream` decorrelates
/// the random draws of different calls sharing one seed.
SolveResult solve_fixed_horizon(const Model& model, const StageCost& cost,
                                const ContractionSpec& spec, const StateVec& x,
                                double z, int q, double alpha,
                                const std::vector<ControlSequence>& candidates,
                                const SolverConfig& cfg,
                                std::uint64_t stream = 0);

/// Cuts (u, q) back to (u_1..u_l, l) with l = ell_opt and re-evaluates. The
/// cost never increases because the dropped stage costs are nonnegative.
SolveResult truncate(const Model& model, const StageCost& cost,
                     const ContractionSpec& spec, const StateVec& x, double z,
                     double alpha, const SolveResult& r);

/// Free-horizon problem: fixed-horizon solves for every q in 1..N seeded with
/// the zero sequence, the model hint and the warm start, each truncated, then
/// the smallest horizon among near-minimal costs.
SolveResult solve_full(const Model& model, const StageCost& cost,
                       const ContractionSpec& spec, const StateVec& x, double z,
                       double alpha, const std::optional<ControlSequence>& warm,
                       const SolverConfig& cfg);

/// Maximum-contraction problem: min over U^N of W_min(x, u, N) (z = 0,
/// alpha = 1). Candidates are the zero sequence, the hint and `extra`.
SolveResult stage1_max_contraction(const Model& model,
                                   const ContractionSpec& spec,
                                   const StateVec& x, const SolverConfig& cfg,
                                   const std::vector<ControlSequence>& extra = {});

/// Integer-free procedure: the maximum-contraction solve fixes the horizon
/// l = ell_opt, then the fixed-horizon problem with the true (z, alpha) is
/// solved at q = l seeded with the truncated stage-one sequence, the warm
/// start and zero. A warm start whose own free-horizon cost is strictly lower
/// than the stage-two optimum replaces it.
SolveResult two_stage_solve(const Model& model, const StageCost& cost,
                            const ContractionSpec& spec, const StateVec& x,
                            double z, double alpha,
                            const std::optional<ControlSequence>& warm,
                            const SolverConfig& cfg);

/// Tail (u_2, ..., u_q) of the previous optimum, or nothing when q = 1.
std::optional<ControlSequence> shifted_candidate(const SolveResult& prev);

}  // namespace cmpc
