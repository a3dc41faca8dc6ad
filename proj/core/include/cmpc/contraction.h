#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cmpc/model.h"

namespace cmpc {

/// The contraction triple (W, gamma, N): from every admissible x some
/// admissible N-step sequence visits a state with W <= gamma W(x).
struct ContractionSpec {
  std::function<double(const StateVec&)> w;
  double gamma = 0.95;
  int horizon = 3;
};

/// W(x) = ||x||^2.
ContractionSpec squared_norm_spec(double gamma, int horizon);

void validate(const ContractionSpec& spec);

struct WMin {
  double value = 0.0;
  int ell_opt = 1;  // 1-based, smallest argmin
};

/// min over l in {1..q} of W(x^(l)) and its smallest argmin.
WMin w_min(const ContractionSpec& spec, const Model& model, const StateVec& x,
           const ControlSequence& useq, int q);

/// Same quantity over an already computed trajectory.
WMin w_min_of(const ContractionSpec& spec, const std::vector<StateVec>& traj,
              int q);

/// Solution of the inner problem min ||z + (1, x1*) u2*||^2 over the boxes
/// |x1*| <= rho, |u2*| <= mu b, where z = (x2, x3).
struct AppendixMove {
  double x1_star = 0.0;
  double u2_star = 0.0;
  Eigen::Vector2d z_star = Eigen::Vector2d::Zero();
};

/// For a fixed x1*, the exact minimizing u2 (clamped least squares along
/// d = (1, x1*)).
double best_u2_for(const Eigen::Vector2d& z, double x1_star, double u2_bound);

AppendixMove appendix_move(const Eigen::Vector2d& z,
                           const NonholonomicParams& p);

/// Three-move sequence {(x1* - x1, 0), (0, u2*), (-x1*, 0)} that parks x1 at
/// x1*, slides (x2, x3) along (1, x1*) and returns x1 to zero. Requires x in
/// G of the nonholonomic model.
ControlSequence appendix_sequence(const StateVec& x,
                                  const NonholonomicParams& p);

struct SolverConfig;

struct ContractionReport {
  std::int64_t samples = 0;
  std::int64_t successes = 0;
  double worst_ratio = 0.0;
  StateVec worst_state;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> failed_indices;
};

/// Draws `count` states uniformly from G by rejection over the model's
/// sampling box. Sample i uses a substream derived from (seed, i).
std::vector<StateVec> sample_admissible(const Model& model, std::int64_t count,
                                        std::uint64_t seed);

/// Randomized certification of the contraction property: for each of M
/// uniformly sampled admissible states, runs the maximum-contraction solve
/// and counts the states where an admissible trajectory reaches
/// W <= gamma W(x).
ContractionReport verify_contraction(const Model& model,
                                     const ContractionSpec& spec,
                                     const SolverConfig& cfg, std::int64_t M,
                                     std::uint64_t seed);

/// Same check on an explicit list of states.
ContractionReport verify_contraction_at(const Model& model,
                                        const ContractionSpec& spec,
                                        const SolverConfig& cfg,
                                        const std::vector<StateVec>& states,
                                        std::uint64_t seed);

}  // namespace cmpc
