#include "cmpc/contraction.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "cmpc/solver.h"
#include "rng.h"

namespace cmpc {

ContractionSpec squared_norm_spec(double gamma, int horizon) {
  ContractionSpec spec;
  spec.w = [](const StateVec& x) { return x.squaredNorm(); };
  spec.gamma = gamma;
  spec.horizon = horizon;
  validate(spec);
  return spec;
}

void validate(const ContractionSpec& spec) {
  if (!spec.w) {
    throw ContractViolation("contraction spec: W is not set");
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) {
    throw ContractViolation("contraction spec: gamma must lie in (0, 1)");
  }
  if (spec.horizon < 1) {
    throw ContractViolation("contraction spec: horizon must be >= 1");
  }
}

WMin w_min_of(const ContractionSpec& spec, const std::vector<StateVec>& traj,
              int q) {
  if (q < 1 || q > static_cast<int>(traj.size())) {
    throw ContractViolation("w_min: q = " + std::to_string(q) +
                            " outside [1, " + std::to_string(traj.size()) +
                            "]");
  }
  WMin out{spec.w(traj[0]), 1};
  for (int l = 2; l <= q; ++l) {
    const double w = spec.w(traj[l - 1]);
    if (w < out.value) {  // strict: ties keep the earliest index
      out.value = w;
      out.ell_opt = l;
    }
  }
  return out;
}

WMin w_min(const ContractionSpec& spec, const Model& model, const StateVec& x,
           const ControlSequence& useq, int q) {
  if (q < 1 || q > static_cast<int>(useq.size())) {
    throw ContractViolation("w_min: q = " + std::to_string(q) +
                            " outside [1, " + std::to_string(useq.size()) +
                            "]");
  }
  const ControlSequence head(useq.begin(), useq.begin() + q);
  return w_min_of(spec, rollout(model, x, head), q);
}

double best_u2_for(const Eigen::Vector2d& z, double x1_star, double u2_bound) {
  const Eigen::Vector2d d(1.0, x1_star);
  const double u = -z.dot(d) / d.squaredNorm();
  return std::clamp(u, -u2_bound, u2_bound);
}

namespace {

double residual(const Eigen::Vector2d& z, double x1_star, double u2_bound) {
  const double u = best_u2_for(z, x1_star, u2_bound);
  return (z + Eigen::Vector2d(1.0, x1_star) * u).squaredNorm();
}

constexpr int kOuterGrid = 257;
constexpr double kGoldenWidth = 1e-10;

}  // namespace

AppendixMove appendix_move(const Eigen::Vector2d& z,
                           const NonholonomicParams& p) {
  validate(p);
  const double rho = p.rho;
  const double u2b = p.u2_bound();

  // Symmetric grid with x1* = 0 at the centre; ties go to the smaller |x1*|.
  const double h = 2.0 * rho / (kOuterGrid - 1);
  int best_i = (kOuterGrid - 1) / 2;
  double best_x = 0.0;
  double best_r = residual(z, 0.0, u2b);
  for (int i = 0; i < kOuterGrid; ++i) {
    const double xi = -rho + h * i;
    const double r = residual(z, xi, u2b);
    if (r < best_r || (r == best_r && std::abs(xi) < std::abs(best_x))) {
      best_r = r;
      best_x = xi;
      best_i = i;
    }
  }

  // Golden-section refinement inside the neighbouring grid cells.
  double lo = -rho + h * std::max(best_i - 1, 0);
  double hi = -rho + h * std::min(best_i + 1, kOuterGrid - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = residual(z, a, u2b);
  double fb = residual(z, b, u2b);
  while (hi - lo > kGoldenWidth) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = residual(z, a, u2b);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = residual(z, b, u2b);
    }
  }
  const double refined = std::clamp(0.5 * (lo + hi), -rho, rho);
  const double refined_r = residual(z, refined, u2b);
  if (refined_r < best_r) {
    best_x = refined;
    best_r = refined_r;
  }

  AppendixMove move;
  move.x1_star = best_x;
  move.u2_star = best_u2_for(z, best_x, u2b);
  move.z_star = z + Eigen::Vector2d(1.0, best_x) * move.u2_star;
  return move;
}

ControlSequence appendix_sequence(const StateVec& x,
                                  const NonholonomicParams& p) {
  if (x.size() != 3) {
    throw ContractViolation("appendix_sequence: state must have dimension 3");
  }
  if (!(std::abs(x(0)) <= p.rho) ||
      !(x(1) * x(1) + x(2) * x(2) <= p.b * p.b)) {
    throw ContractViolation("appendix_sequence: state is not admissible");
  }
  const AppendixMove move = appendix_move(Eigen::Vector2d(x(1), x(2)), p);

  // Park x1 at x1*; keep the parked value inside [-rho, rho] despite rounding.
  double u1 = move.x1_star - x(0);
  double parked = x(0) + u1;
  while (std::abs(parked) > p.rho) {
    u1 = std::nextafter(u1, 0.0);
    parked = x(0) + u1;
  }
  const double u1_bar = p.u1_bound();
  u1 = std::clamp(u1, -u1_bar, u1_bar);
  parked = x(0) + u1;

  ControlSequence seq;
  seq.push_back(Eigen::Vector2d(u1, 0.0));
  seq.push_back(Eigen::Vector2d(0.0, move.u2_star));
  seq.push_back(Eigen::Vector2d(-parked, 0.0));
  return seq;
}

std::vector<StateVec> sample_admissible(const Model& model, std::int64_t count,
                                        std::uint64_t seed) {
  constexpr std::int64_t kMaxRejections = 1'000'000;
  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  for (std::int64_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(
        internal::derive_seed({seed, static_cast<std::uint64_t>(i)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool found = false;
    for (std::int64_t tries = 0; tries < kMaxRejections; ++tries) {
      StateVec x(model.n);
      for (int j = 0; j < model.n; ++j) {
        x(j) = model.sample_lower(j) +
               unit(rng) * (model.sample_upper(j) - model.sample_lower(j));
      }
      if (state_admissible(model, x)) {
        out.push_back(std::move(x));
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::runtime_error("sample_admissible: rejection sampler failed");
    }
  }
  return out;
}

ContractionReport verify_contraction_at(const Model& model,
                                        const ContractionSpec& spec,
                                        const SolverConfig& cfg,
                                        const std::vector<StateVec>& states,
                                        std::uint64_t seed) {
  validate(spec);
  if (states.empty()) {
    throw ContractViolation("verify_contraction: need at least one sample");
  }
  ContractionReport report;
  report.seed = seed;
  report.worst_ratio = 0.0;
  report.worst_state = states.front();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateVec& x = states[i];
    SolverConfig local = cfg;
    local.seed = internal::derive_seed({cfg.seed, seed, i});
    const SolveResult r = stage1_max_contraction(model, spec, x, local);
    const double wx = spec.w(x);
    const bool ok = r.feasible && r.w_under_star <= spec.gamma * wx;
    double ratio = 0.0;
    if (!r.feasible) {
      ratio = std::numeric_limits<double>::infinity();
    } else if (wx > 0.0) {
      ratio = r.w_under_star / wx;
    }
    ++report.samples;
    if (ok) {
      ++report.successes;
    } else {
      report.failed_indices.push_back(static_cast<std::int64_t>(i));
    }
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_state = x;
    }
  }
  return report;
}

ContractionReport verify_contraction(const Model& model,
                                     const ContractionSpec& spec,
                                     const SolverConfig& cfg, std::int64_t M,
                                     std::uint64_t seed) {
  if (M < 1) {
    throw ContractViolation("verify_contraction: M must be >= 1");
  }
  return verify_contraction_at(model, spec, cfg,
                               sample_admissible(model, M, seed), seed);
}

}  // namespace cmpc
