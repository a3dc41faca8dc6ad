#include "cmpc/objective.h"

#include <algorithm>
#include <string>

namespace cmpc {

namespace {

void require_horizon(int q, std::size_t len, const char* what) {
  if (q < 1 || q > static_cast<int>(len)) {
    throw ContractViolation(std::string(what) + ": q = " + std::to_string(q) +
                            " outside [1, " + std::to_string(len) + "]");
  }
}

}  // namespace

StageCost nonholonomic_l1(const NonholonomicParams& p) {
  StageCost c;
  c.name = "L1";
  c.l = [](const StateVec& x, const ControlVec& u) {
    return x.squaredNorm() + 0.1 * u.squaredNorm();
  };
  c.q_part = [](const StateVec& x) { return x.squaredNorm(); };
  c.l_bar = l_bar_nonholonomic(NonholonomicCost::kL1, p);
  return c;
}

StageCost nonholonomic_l2(const NonholonomicParams& p) {
  StageCost c;
  c.name = "L2";
  auto state_part = [](const StateVec& x) {
    const double d = x(1) - x(2);
    return 0.01 * x(0) * x(0) + x(1) * x(1) + 100.0 * d * d;
  };
  c.l = [state_part](const StateVec& x, const ControlVec& u) {
    return state_part(x) + 0.1 * u.squaredNorm();
  };
  c.q_part = state_part;
  c.l_bar = l_bar_nonholonomic(NonholonomicCost::kL2, p);
  return c;
}

StageCost quadratic_cost(Eigen::VectorXd state_weights, double control_weight,
                         double l_bar) {
  if ((state_weights.array() < 0.0).any() || control_weight < 0.0) {
    throw ContractViolation("quadratic_cost: weights must be nonnegative");
  }
  if (!(l_bar >= 0.0)) {
    throw ContractViolation("quadratic_cost: l_bar must be nonnegative");
  }
  StageCost c;
  c.name = "custom";
  c.q_part = [state_weights](const StateVec& x) {
    return (state_weights.array() * x.array().square()).sum();
  };
  c.l = [state_weights, control_weight](const StateVec& x,
                                        const ControlVec& u) {
    return (state_weights.array() * x.array().square()).sum() +
           control_weight * u.squaredNorm();
  };
  c.l_bar = l_bar;
  return c;
}

double l_bar_nonholonomic(NonholonomicCost which, const NonholonomicParams& p) {
  const double rho2 = p.rho * p.rho;
  const double b2 = p.b * p.b;
  const double mub = p.mu * p.b;
  const double control = 0.1 * (4.0 * rho2 + mub * mub);
  switch (which) {
    case NonholonomicCost::kL1:
      return rho2 + 2.0 * b2 + control;
    case NonholonomicCost::kL2:
      return 0.01 * rho2 + 401.0 * b2 + control;
  }
  return 0.0;
}

double alpha_min(int horizon, double l_bar, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ContractViolation("alpha_min: gamma must lie in [0, 1)");
  }
  if (horizon < 1 || !(l_bar >= 0.0)) {
    throw ContractViolation("alpha_min: need N >= 1 and l_bar >= 0");
  }
  return 2.0 * horizon * l_bar / (1.0 - gamma);
}

double phi(const Model& model, const StageCost& cost, const StateVec& x,
           const ControlSequence& useq, int q) {
  require_horizon(q, useq.size(), "phi");
  double sum = 0.0;
  StateVec cur = x;
  for (int l = 0; l < q; ++l) {
    cur = step(model, cur, useq[l]);
    sum += cost.l(cur, useq[l]);
  }
  return sum;
}

double j_cost(const Model& model, const StageCost& cost,
              const ContractionSpec& spec, const StateVec& x, double z,
              const ControlSequence& useq, int q, double alpha) {
  if (z < 0.0) {
    throw ContractViolation("j_cost: z must be nonnegative");
  }
  return evaluate(model, cost, spec, x, z, alpha, useq, q).j;
}

Evaluation evaluate(const Model& model, const StageCost& cost,
                    const ContractionSpec& spec, const StateVec& x, double z,
                    double alpha, const ControlSequence& useq, int q) {
  require_horizon(q, useq.size(), "evaluate");
  Evaluation ev;
  StateVec cur = x;
  for (int l = 0; l < q; ++l) {
    const ControlVec& u = useq[l];
    if (!check_control(model, u)) {
      ev.controls_ok = false;
    }
    cur = step(model, cur, u);
    if (cost.l) {
      ev.phi += cost.l(cur, u);
    }
    const double w = spec.w(cur);
    if (l == 0 || w < ev.w_under) {
      ev.w_under = w;
      ev.ell_opt = l + 1;
    }
    const Eigen::VectorXd g = model.constraint_map(cur);
    ev.violation += g.cwiseMax(0.0).sum();
  }
  ev.j = z * ev.phi + alpha * ev.w_under;
  return ev;
}

}  // namespace cmpc
