#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cmpc/contraction.h"
#include "cmpc/model.h"

namespace cmpc {
namespace {

StateVec v3(double a, double b, double c) { return StateVec{{a, b, c}}; }
ControlVec v2(double a, double b) { return ControlVec{{a, b}}; }

TEST(Step, NonholonomicHandValue) {
  const Model m = make_nonholonomic({});
  const StateVec x = step(m, v3(1, 2, 3), v2(0.5, 0.1));
  EXPECT_DOUBLE_EQ(x(0), 1.5);
  EXPECT_DOUBLE_EQ(x(1), 2.1);
  EXPECT_DOUBLE_EQ(x(2), 3.1);
}

TEST(Step, OriginIsEquilibrium) {
  const Model nh = make_nonholonomic({});
  EXPECT_EQ(step(nh, StateVec::Zero(3), ControlVec::Zero(2)),
            StateVec::Zero(3));
  const Model di = make_tightened_double_integrator({});
  EXPECT_EQ(step(di, StateVec::Zero(2), ControlVec::Zero(1)),
            StateVec::Zero(2));
}

TEST(Step, DoubleIntegratorEuler) {
  const Model m = make_tightened_double_integrator({});
  const StateVec x = step(m, StateVec{{1.0, 2.0}}, ControlVec{{0.5}});
  EXPECT_DOUBLE_EQ(x(0), 1.2);
  EXPECT_DOUBLE_EQ(x(1), 2.05);
}

TEST(Step, DimensionMismatchThrows) {
  const Model m = make_nonholonomic({});
  EXPECT_THROW(step(m, StateVec::Zero(2), ControlVec::Zero(2)),
               ContractViolation);
  EXPECT_THROW(step(m, StateVec::Zero(3), ControlVec::Zero(3)),
               ContractViolation);
}

TEST(Rollout, EmptySequence) {
  const Model m = make_nonholonomic({});
  EXPECT_TRUE(rollout(m, v3(1, 2, 3), {}).empty());
}

TEST(Rollout, ThreeMoveExample) {
  const Model m = make_nonholonomic({});
  const ControlSequence u = {v2(-2, 0), v2(0, -0.5), v2(0, 0)};
  const auto traj = rollout(m, v3(2, 10, 0), u);
  ASSERT_EQ(traj.size(), 3u);
  EXPECT_EQ(traj[0], v3(0, 10, 0));
  EXPECT_EQ(traj[1], v3(0, 9.5, 0));
  EXPECT_EQ(traj[2], v3(0, 9.5, 0));
}

TEST(Rollout, CompositionIsExact) {
  const Model m = make_nonholonomic({});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-4, 4), uu(-0.5, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const StateVec x = v3(ux(rng), ux(rng), ux(rng));
    ControlSequence a, b;
    for (int i = 0; i < 3; ++i) a.push_back(v2(ux(rng), uu(rng)));
    for (int i = 0; i < 2; ++i) b.push_back(v2(ux(rng), uu(rng)));
    ControlSequence ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto whole = rollout(m, x, ab);
    const auto head = rollout(m, x, a);
    const auto tail = rollout(m, head.back(), b);
    ASSERT_EQ(whole.size(), head.size() + tail.size());
    for (std::size_t i = 0; i < head.size(); ++i) EXPECT_EQ(whole[i], head[i]);
    for (std::size_t i = 0; i < tail.size(); ++i) {
      EXPECT_EQ(whole[head.size() + i], tail[i]);
    }
  }
}

TEST(CheckState, NonholonomicExamples) {
  const Model m = make_nonholonomic({});
  const StateCheck out = check_state(m, v3(5, 0, 0));
  EXPECT_FALSE(out.admissible);
  EXPECT_DOUBLE_EQ(out.violations(0), 1.0);

  const StateCheck origin = check_state(m, StateVec::Zero(3));
  EXPECT_TRUE(origin.admissible);
  EXPECT_DOUBLE_EQ(origin.violations(0), -4.0);
  EXPECT_DOUBLE_EQ(origin.violations(1), -100.0);

  const StateCheck edge = check_state(m, v3(0, 10, 0));
  EXPECT_TRUE(edge.admissible);
  EXPECT_DOUBLE_EQ(edge.violations(1), 0.0);
}

TEST(CheckState, SecondComponentIsACircle) {
  const Model m = make_nonholonomic({});
  // On the circle of radius b; a cubic third term would give 700 here.
  EXPECT_TRUE(state_admissible(m, v3(0, 6, 8)));
  EXPECT_FALSE(state_admissible(m, v3(0, 6, 8.01)));
  EXPECT_TRUE(state_admissible(m, v3(0, 0, -10)));
}

TEST(CheckState, AdmissibleImpliesBoxAndDisk) {
  const Model m = make_nonholonomic({});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-12, 12);
  for (int i = 0; i < 20000; ++i) {
    const StateVec x = v3(u(rng), u(rng), u(rng));
    if (state_admissible(m, x)) {
      EXPECT_LE(x(0) * x(0), 16.0);
      EXPECT_LE(x(1) * x(1) + x(2) * x(2), 100.0);
    }
  }
}

TEST(CheckControl, Bounds) {
  const Model m = make_nonholonomic({});
  EXPECT_TRUE(check_control(m, v2(8, 0.5)));
  EXPECT_TRUE(check_control(m, v2(-8, -0.5)));
  EXPECT_TRUE(check_control(m, ControlVec::Zero(2)));
  EXPECT_FALSE(check_control(m, v2(8.001, 0)));
  EXPECT_FALSE(check_control(m, v2(0, -0.5001)));
  EXPECT_FALSE(check_control(m, v2(std::nan(""), 0)));
}

TEST(ClampControl, ProjectsComponentwise) {
  const Model m = make_nonholonomic({});
  EXPECT_EQ(clamp_control(m, v2(9, -3)), v2(8, -0.5));
  EXPECT_EQ(clamp_control(m, v2(1, 0.2)), v2(1, 0.2));
}

TEST(MakeNonholonomic, Bounds) {
  const Model m = make_nonholonomic({});
  EXPECT_DOUBLE_EQ(m.control_upper(0), 8.0);
  EXPECT_DOUBLE_EQ(m.control_upper(1), 0.5);
  EXPECT_DOUBLE_EQ(m.control_lower(0), -8.0);
  EXPECT_DOUBLE_EQ(m.control_lower(1), -0.5);

  NonholonomicParams full;
  full.mu = 1.0;
  EXPECT_DOUBLE_EQ(make_nonholonomic(full).control_upper(1), 10.0);
}

TEST(MakeNonholonomic, RejectsDegenerateParameters) {
  NonholonomicParams p;
  p.rho = 0.0;
  EXPECT_THROW(make_nonholonomic(p), ContractViolation);
  p = {};
  p.b = -1.0;
  EXPECT_THROW(make_nonholonomic(p), ContractViolation);
  p = {};
  p.mu = 0.0;
  EXPECT_THROW(make_nonholonomic(p), ContractViolation);
  p = {};
  p.u1_bar = 7.0;  // cannot park x1 from -rho to rho
  EXPECT_THROW(make_nonholonomic(p), ContractViolation);
}

TEST(DoubleIntegrator, ConstraintExamples) {
  const Model m = make_tightened_double_integrator({});
  EXPECT_TRUE(state_admissible(m, StateVec::Zero(2)));

  // Inside under g1; sign(0) = 0 drops the braking term from g2, which then
  // rejects any positive position at rest.
  const StateCheck a = check_state(m, StateVec{{0.95, 0.0}});
  EXPECT_LT(a.violations(0), 0.0);
  EXPECT_DOUBLE_EQ(a.violations(0), 0.95 - 1.0);
  EXPECT_DOUBLE_EQ(a.violations(1), 0.95);
  EXPECT_FALSE(a.admissible);

  const StateCheck b = check_state(m, StateVec{{1.5, 0.0}});
  EXPECT_FALSE(b.admissible);
  EXPECT_DOUBLE_EQ(b.violations(0), 0.5);
}

TEST(DoubleIntegrator, SecondComponentAsPrinted) {
  const Model m = make_tightened_double_integrator({});
  const double tau = 0.1, ubar = 1.0, rbar = 1.0;
  for (double r : {-0.9, -0.3, 0.0, 0.4}) {
    for (double v : {-3.0, -0.5, 0.5, 2.0}) {
      const double s = v > 0 ? 1.0 : -1.0;
      const double expected = r + tau * v - s * (0.5 * ubar * tau * tau + rbar);
      EXPECT_DOUBLE_EQ(check_state(m, StateVec{{r, v}}).violations(1),
                       expected);
    }
  }
}

TEST(Hint, ContractOnSampledStates) {
  const NonholonomicParams p;
  const Model m = make_nonholonomic(p);
  const ContractionSpec spec = squared_norm_spec(0.95, 3);
  const auto xs = sample_admissible(m, 1000, 11);
  for (const auto& x : xs) {
    const ControlSequence u = m.hint(x, spec);
    ASSERT_EQ(u.size(), 3u);
    for (const auto& c : u) ASSERT_TRUE(check_control(m, c));
    for (const auto& s : rollout(m, x, u)) ASSERT_TRUE(state_admissible(m, s));
  }
}

TEST(Hint, ZeroPaddingFreezesTheState) {
  const Model m = make_nonholonomic({});
  const ContractionSpec spec = squared_norm_spec(0.95, 6);
  const StateVec x = v3(1.5, -3, 7);
  const ControlSequence u = m.hint(x, spec);
  ASSERT_EQ(u.size(), 6u);
  const auto traj = rollout(m, x, u);
  for (int i = 3; i < 6; ++i) {
    EXPECT_EQ(u[i], ControlVec::Zero(2));
    EXPECT_EQ(traj[i], traj[2]);
  }
}

}  // namespace
}  // namespace cmpc
