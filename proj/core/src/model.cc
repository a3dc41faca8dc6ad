#include "cmpc/model.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmpc/contraction.h"

namespace cmpc {

namespace {

void require_dim(const Eigen::VectorXd& v, int expected, const char* what) {
  if (v.size() != expected) {
    throw ContractViolation(std::string(what) + ": expected dimension " +
                            std::to_string(expected) + ", got " +
                            std::to_string(v.size()));
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

StateVec step(const Model& model, const StateVec& x, const ControlVec& u) {
  require_dim(x, model.n, "step: state");
  require_dim(u, model.m, "step: control");
  return model.dynamics(x, u);
}

std::vector<StateVec> rollout(const Model& model, const StateVec& x,
                              const ControlSequence& useq) {
  std::vector<StateVec> traj;
  traj.reserve(useq.size());
  StateVec cur = x;
  for (const auto& u : useq) {
    cur = step(model, cur, u);
    traj.push_back(cur);
  }
  return traj;
}

StateCheck check_state(const Model& model, const StateVec& x) {
  require_dim(x, model.n, "check_state");
  StateCheck out;
  out.violations = model.constraint_map(x);
  out.admissible = (out.violations.array() <= 0.0).all();
  return out;
}

bool state_admissible(const Model& model, const StateVec& x) {
  return check_state(model, x).admissible;
}

bool check_control(const Model& model, const ControlVec& u) {
  require_dim(u, model.m, "check_control");
  return (u.array() >= model.control_lower.array()).all() &&
         (u.array() <= model.control_upper.array()).all();
}

ControlVec clamp_control(const Model& model, const ControlVec& u) {
  return u.cwiseMax(model.control_lower).cwiseMin(model.control_upper);
}

void validate(const NonholonomicParams& p) {
  if (!(p.rho > 0.0) || !(p.b > 0.0)) {
    throw ContractViolation("nonholonomic: rho and b must be positive");
  }
  // mu >= 1 is the full-cancellation regime and stays legal.
  if (!(p.mu > 0.0) || !std::isfinite(p.mu)) {
    throw ContractViolation("nonholonomic: mu must be positive");
  }
  if (!(p.u1_bound() >= 2.0 * p.rho)) {
    throw ContractViolation("nonholonomic: u1_bar must be at least 2 rho");
  }
}

void validate(const DoubleIntegratorParams& p) {
  if (!(p.tau > 0.0) || !(p.u_bar > 0.0) || !(p.r_bar > 0.0)) {
    throw ContractViolation(
        "double integrator: tau, u_bar and r_bar must be positive");
  }
}

Model make_nonholonomic(const NonholonomicParams& p) {
  validate(p);
  Model model;
  model.name = "nonholonomic";
  model.n = 3;
  model.m = 2;
  model.dynamics = [](const StateVec& x, const ControlVec& u) {
    StateVec next(3);
    next << x(0) + u(0), x(1) + u(1), x(2) + x(0) * u(1);
    return next;
  };
  model.control_upper = Eigen::Vector2d(p.u1_bound(), p.u2_bound());
  model.control_lower = -model.control_upper;
  const double rho = p.rho;
  const double b2 = p.b * p.b;
  // The circle x2^2 + x3^2 <= b^2; the contraction argument parameterizes its
  // boundary by angle.
  model.constraint_map = [rho, b2](const StateVec& x) {
    Eigen::VectorXd g(2);
    g << std::abs(x(0)) - rho, x(1) * x(1) + x(2) * x(2) - b2;
    return g;
  };
  model.sample_upper = Eigen::Vector3d(p.rho, p.b, p.b);
  model.sample_lower = -model.sample_upper;
  model.hint = [p](const StateVec& x, const ContractionSpec& spec) {
    ControlSequence seq = appendix_sequence(x, p);
    const auto horizon = static_cast<std::size_t>(spec.horizon);
    if (seq.size() > horizon) {
      seq.resize(horizon);
    }
    // Zero control freezes this system, so padding keeps the terminal state.
    while (seq.size() < horizon) {
      seq.push_back(ControlVec::Zero(2));
    }
    return seq;
  };
  return model;
}

Model make_tightened_double_integrator(const DoubleIntegratorParams& p) {
  validate(p);
  Model model;
  model.name = "double_integrator";
  model.n = 2;
  model.m = 1;
  const double tau = p.tau;
  model.dynamics = [tau](const StateVec& x, const ControlVec& u) {
    StateVec next(2);
    next << x(0) + tau * x(1), x(1) + tau * u(0);
    return next;
  };
  model.control_upper = Eigen::VectorXd::Constant(1, p.u_bar);
  model.control_lower = -model.control_upper;
  const double margin = 0.5 * p.u_bar * tau * tau + p.r_bar;
  const double r_bar = p.r_bar;
  model.constraint_map = [tau, margin, r_bar](const StateVec& x) {
    Eigen::VectorXd g(2);
    g << std::abs(x(0)) - r_bar, x(0) + x(1) * tau - sign(x(1)) * margin;
    return g;
  };
  // On the positive-velocity side g2 caps v at (r_bar + margin) / tau when
  // r = -r_bar. The negative side is unbounded as printed; the same cap is
  // used there to get a finite sampling box.
  const double v_cap = (r_bar + margin) / tau;
  model.sample_upper = Eigen::Vector2d(p.r_bar, v_cap);
  model.sample_lower = -model.sample_upper;
  return model;
}

}  // namespace cmpc
