#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cmpc {

using StateVec = Eigen::VectorXd;
using ControlVec = Eigen::VectorXd;

/// Ordered list of controls u^(1), ..., u^(q). Index 0 holds the control
/// applied first.
using ControlSequence = std::vector<ControlVec>;

/// A violated precondition or a malformed argument (dimension mismatch,
/// index out of range, invalid parameters).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ContractionSpec;

/// Discrete-time controlled system x+ = f(x, u) with a box control set U and
/// an admissible state set G = {x | g(x) <= 0}.
struct Model {
  using Dynamics = std::function<StateVec(const StateVec&, const ControlVec&)>;
  using ConstraintMap = std::function<Eigen::VectorXd(const StateVec&)>;
  using Hint =
      std::function<ControlSequence(const StateVec&, const ContractionSpec&)>;

  std::string name;
  int n = 0;
  int m = 0;
  Dynamics dynamics;
  ControlVec control_lower;
  ControlVec control_upper;
  ConstraintMap constraint_map;

  // Box enclosing G, used for uniform rejection sampling of admissible states.
  StateVec sample_lower;
  StateVec sample_upper;

  // Analytic provider of contracting admissible sequences; optional.
  Hint hint;
};

struct NonholonomicParams {
  double rho = 4.0;
  double b = 10.0;
  double mu = 0.05;
  // Bound on |u1|. Non-positive means "use 2 rho".
  double u1_bar = 0.0;

  double u1_bound() const { return u1_bar > 0.0 ? u1_bar : 2.0 * rho; }
  double u2_bound() const { return mu * b; }
};

struct DoubleIntegratorParams {
  double tau = 0.1;
  double u_bar = 1.0;
  double r_bar = 1.0;
};

StateVec step(const Model& model, const StateVec& x, const ControlVec& u);

/// Returns (x^(1), ..., x^(q)) with x^(1) = f(x, u_1).
std::vector<StateVec> rollout(const Model& model, const StateVec& x,
                              const ControlSequence& useq);

struct StateCheck {
  bool admissible = false;
  Eigen::VectorXd violations;  // g(x) verbatim
};

StateCheck check_state(const Model& model, const StateVec& x);
bool state_admissible(const Model& model, const StateVec& x);
bool check_control(const Model& model, const ControlVec& u);

/// Componentwise projection of u onto the control box.
ControlVec clamp_control(const Model& model, const ControlVec& u);

/// Nonholonomic integrator x1+ = x1 + u1, x2+ = x2 + u2, x3+ = x3 + x1 u2
/// with g(x) = (|x1| - rho, x2^2 + x3^2 - b^2) and |u1| <= u1_bar,
/// |u2| <= mu b. The hint is wired to the three-move contraction sequence,
/// zero-padded to the requested horizon.
Model make_nonholonomic(const NonholonomicParams& p);

/// Forward-Euler double integrator r+ = r + tau v, v+ = v + tau u with the
/// tightened two-component constraint map of the braking example:
///   g1 = |r| - r_bar
///   g2 = r + tau v - sign(v) (u_bar tau^2 / 2 + r_bar),  sign(0) = 0.
Model make_tightened_double_integrator(const DoubleIntegratorParams& p);

void validate(const NonholonomicParams& p);
void validate(const DoubleIntegratorParams& p);

}  // namespace cmpc
