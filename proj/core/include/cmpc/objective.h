#pragma once

#include <functional>
#include <string>

#include "cmpc/contraction.h"
#include "cmpc/model.h"

namespace cmpc {

struct StageCost {
  std::string name;
  std::function<double(const StateVec&, const ControlVec&)> l;
  std::function<double(const StateVec&)> q_part;  // l(x, 0)
  double l_bar = 0.0;                             // sup of l over G x U
};

struct PenaltyConfig {
  double alpha = 0.0;
  double beta = 0.5;
  double z0 = 1.0;
};

enum class NonholonomicCost { kL1, kL2 };

/// L1 = ||x||^2 + 0.1 ||u||^2.
StageCost nonholonomic_l1(const NonholonomicParams& p);
/// L2 = 0.01 x1^2 + x2^2 + 100 (x2 - x3)^2 + 0.1 ||u||^2.
StageCost nonholonomic_l2(const NonholonomicParams& p);

/// Diagonal quadratic sum_i w_i x_i^2 + r ||u||^2 with a caller-supplied
/// bound.
StageCost quadratic_cost(Eigen::VectorXd state_weights, double control_weight,
                         double l_bar);

double l_bar_nonholonomic(NonholonomicCost which, const NonholonomicParams& p);

/// Smallest terminal weight 2 N Lbar / (1 - gamma) for which the closed loop
/// is guaranteed to converge.
double alpha_min(int horizon, double l_bar, double gamma);

/// Sum of stage costs over the first q steps of the rollout.
double phi(const Model& model, const StageCost& cost, const StateVec& x,
           const ControlSequence& useq, int q);

/// z * phi + alpha * min-W over the first q steps.
double j_cost(const Model& model, const StageCost& cost,
              const ContractionSpec& spec, const StateVec& x, double z,
              const ControlSequence& useq, int q, double alpha);

/// Everything the solver needs about one (u, q) pair, from a single rollout.
struct Evaluation {
  double phi = 0.0;
  double w_under = 0.0;
  int ell_opt = 1;
  double j = 0.0;
  // Sum over visited states of max(0, g_i); zero iff every state is in G.
  double violation = 0.0;
  bool controls_ok = true;

  bool feasible() const { return violation == 0.0 && controls_ok; }
};

Evaluation evaluate(const Model& model, const StageCost& cost,
                    const ContractionSpec& spec, const StateVec& x, double z,
                    double alpha, const ControlSequence& useq, int q);

}  // namespace cmpc
