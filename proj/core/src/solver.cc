#include "cmpc/solver.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "rng.h"

namespace cmpc {

namespace {

constexpr std::uint64_t kStreamStage1 = 0x5731;
constexpr std::uint64_t kStreamStage2 = 0x5732;

struct Incumbent {
  ControlSequence useq;
  Evaluation ev;
  double score = 0.0;
  bool set = false;
};

bool better(const Evaluation& a, double score_a, const Incumbent& b) {
  if (!b.set) return true;
  const bool fa = a.feasible();
  const bool fb = b.ev.feasible();
  if (fa != fb) return fa;
  if (fa) return a.j < b.ev.j;
  return score_a < b.score;
}

ControlSequence unflatten(const Eigen::VectorXd& v, int q, int m) {
  ControlSequence seq(q);
  for (int l = 0; l < q; ++l) seq[l] = v.segment(l * m, m);
  return seq;
}

Eigen::VectorXd flatten(const ControlSequence& seq, int m) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(seq.size()) * m);
  for (std::size_t l = 0; l < seq.size(); ++l) {
    v.segment(static_cast<Eigen::Index>(l) * m, m) = seq[l];
  }
  return v;
}

ControlSequence fit_to_horizon(const Model& model, ControlSequence seq,
                               int q) {
  const ControlVec hold = clamp_control(model, ControlVec::Zero(model.m));
  if (static_cast<int>(seq.size()) > q) seq.resize(q);
  while (static_cast<int>(seq.size()) < q) seq.push_back(hold);
  for (auto& u : seq) {
    if (u.size() != model.m) {
      throw ContractViolation("solver: candidate control has wrong dimension");
    }
    u = clamp_control(model, u);
  }
  return seq;
}

SolveResult to_result(const Incumbent& inc, int q, std::int64_t evals) {
  SolveResult r;
  r.useq = inc.useq;
  r.q_star = q;
  r.ell_star = inc.ev.ell_opt;
  r.j_star = inc.ev.j;
  r.phi_star = inc.ev.phi;
  r.w_under_star = inc.ev.w_under;
  r.feasible = inc.ev.feasible();
  r.evals = evals;
  return r;
}

// Adaptive-coefficient Nelder-Mead on the penalized score, points projected
// onto the box. The callback records every evaluation in the incumbent.
template <typename Score>
void nelder_mead(const Eigen::VectorXd& start, const Eigen::VectorXd& width,
                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                 int iters, Score&& score) {
  const Eigen::Index dim = start.size();
  const double nd = static_cast<double>(dim);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / nd;
  const double contract = 0.75 - 0.5 / nd;
  const double shrink = 1.0 - 1.0 / nd;
  auto project = [&](Eigen::VectorXd v) {
    return Eigen::VectorXd(v.cwiseMax(lower).cwiseMin(upper));
  };

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.push_back(start);
  vals.push_back(score(start));
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd p = start;
    const double h = 0.05 * width(i);
    p(i) = p(i) + h <= upper(i) ? p(i) + h : p(i) - h;
    pts.push_back(project(p));
    vals.push_back(score(pts.back()));
  }
  std::vector<std::size_t> order(pts.size());
  for (int it = 0; it < iters; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return vals[a] < vals[b];
                     });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];
    if ((pts[hi] - pts[lo]).lpNorm<Eigen::Infinity>() < 1e-14) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
    centroid /= nd;

    const Eigen::VectorXd xr =
        project(centroid + reflect * (centroid - pts[hi]));
    const double fr = score(xr);
    if (fr < vals[lo]) {
      const Eigen::VectorXd xe = project(centroid + expand * (xr - centroid));
      const double fe = score(xe);
      if (fe < fr) {
        pts[hi] = xe;
        vals[hi] = fe;
      } else {
        pts[hi] = xr;
        vals[hi] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[hi] = xr;
      vals[hi] = fr;
      continue;
    }
    const bool outside = fr < vals[hi];
    const Eigen::VectorXd xc =
        outside ? project(centroid + contract * (xr - centroid))
                : project(centroid - contract * (centroid - pts[hi]));
    const double fc = score(xc);
    if (fc < (outside ? fr : vals[hi])) {
      pts[hi] = xc;
      vals[hi] = fc;
      continue;
    }
    for (std::size_t k = 1; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      pts[idx] = project(pts[lo] + shrink * (pts[idx] - pts[lo]));
      vals[idx] = score(pts[idx]);
    }
  }
}

std::vector<ControlSequence> default_seeds(
    const Model& model, const ContractionSpec& spec, const StateVec& x,
    const std::optional<ControlSequence>& warm) {
  std::vector<ControlSequence> seeds;
  seeds.emplace_back(spec.horizon, ControlVec::Zero(model.m));
  if (model.hint && state_admissible(model, x)) {
    seeds.push_back(model.hint(x, spec));
  }
  if (warm && !warm->empty()) {
    seeds.push_back(*warm);
  }
  return seeds;
}

}  // namespace

void validate(const SolverConfig& cfg) {
  if (cfg.restarts < 1 || cfg.samples_per_iter < 1 || cfg.max_iters < 1 ||
      cfg.polish_iters < 0) {
    throw ContractViolation("solver config: counts must be >= 1");
  }
  if (!(cfg.elite_frac > 0.0 && cfg.elite_frac <= 1.0)) {
    throw ContractViolation("solver config: elite_frac must lie in (0, 1]");
  }
  if (!(cfg.constraint_penalty > 0.0)) {
    throw ContractViolation("solver config: constraint_penalty must be > 0");
  }
  if (!(cfg.tie_tol >= 0.0)) {
    throw ContractViolation("solver config: tie_tol must be >= 0");
  }
  for (double s : cfg.init_std) {
    if (!(s >= 0.0)) {
      throw ContractViolation("solver config: init_std must be >= 0");
    }
  }
}

SolveResult solve_fixed_horizon(const Model& model, const StageCost& cost,
                                const ContractionSpec& spec, const StateVec& x,
                                double z, int q, double alpha,
                                const std::vector<ControlSequence>& candidates,
                                const SolverConfig& cfg, std::uint64_t stream) {
  validate(cfg);
  if (q < 1 || q > spec.horizon) {
    throw ContractViolation("solve_fixed_horizon: q = " + std::to_string(q) +
                            " outside [1, " + std::to_string(spec.horizon) +
                            "]");
  }
  if (x.size() != model.n) {
    throw ContractViolation("solve_fixed_horizon: state dimension mismatch");
  }
  const int m = model.m;
  const int dim = q * m;
  std::int64_t evals = 0;
  Incumbent best;

  auto consider = [&](const ControlSequence& seq) {
    const Evaluation ev = evaluate(model, cost, spec, x, z, alpha, seq, q);
    ++evals;
    const double score = ev.j + cfg.constraint_penalty * ev.violation;
    if (better(ev, score, best)) {
      best.useq = seq;
      best.ev = ev;
      best.score = score;
      best.set = true;
    }
    return score;
  };

  for (const auto& c : candidates) {
    if (c.empty()) continue;
    consider(fit_to_horizon(model, c, q));
  }
  if (!best.set) {
    consider(fit_to_horizon(model, {}, q));
  }

  Eigen::VectorXd lower(dim), upper(dim), std0(dim);
  for (int l = 0; l < q; ++l) {
    lower.segment(l * m, m) = model.control_lower;
    upper.segment(l * m, m) = model.control_upper;
  }
  for (int i = 0; i < dim; ++i) {
    if (cfg.init_std.empty()) {
      std0(i) = 0.25 * (upper(i) - lower(i));
    } else if (static_cast<int>(cfg.init_std.size()) == dim) {
      std0(i) = cfg.init_std[i];
    } else {
      std0(i) = cfg.init_std[i % cfg.init_std.size()];
    }
  }

  std::mt19937_64 rng(internal::derive_seed(
      {cfg.seed, static_cast<std::uint64_t>(q), stream}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n_elite = std::max(
      1, static_cast<int>(std::ceil(cfg.elite_frac * cfg.samples_per_iter)));
  std::vector<std::pair<double, Eigen::VectorXd>> pop;
  pop.reserve(cfg.samples_per_iter + 1);

  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::VectorXd mean(dim);
    if (r == 0) {
      mean = flatten(best.useq, m);
    } else {
      for (int i = 0; i < dim; ++i) {
        mean(i) = lower(i) + unit(rng) * (upper(i) - lower(i));
      }
    }
    Eigen::VectorXd sd = std0;
    for (int it = 0; it < cfg.max_iters; ++it) {
      pop.clear();
      for (int s = 0; s < cfg.samples_per_iter; ++s) {
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v(i) = mean(i) + sd(i) * gauss(rng);
        v = v.cwiseMax(lower).cwiseMin(upper);
        const double score = consider(unflatten(v, q, m));
        pop.emplace_back(score, std::move(v));
      }
      // Elitism: the incumbent always competes for the refit.
      pop.emplace_back(best.score, flatten(best.useq, m));
      std::stable_sort(pop.begin(), pop.end(),
                       [](const auto& a, const auto& b) {
                         return a.first < b.first;
                       });
      Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(dim);
      for (int e = 0; e < n_elite; ++e) new_mean += pop[e].second;
      new_mean /= n_elite;
      Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
      for (int e = 0; e < n_elite; ++e) {
        var += (pop[e].second - new_mean).array().square().matrix();
      }
      var /= n_elite;
      mean = new_mean;
      sd = var.cwiseSqrt();
      if (sd.maxCoeff() < 1e-13) break;
    }
  }
  if (cfg.polish_iters > 0) {
    nelder_mead(flatten(best.useq, m), upper - lower, lower, upper,
                cfg.polish_iters, [&](const Eigen::VectorXd& v) {
                  return consider(unflatten(v, q, m));
                });
  }
  return to_result(best, q, evals);
}

SolveResult truncate(const Model& model, const StageCost& cost,
                     const ContractionSpec& spec, const StateVec& x, double z,
                     double alpha, const SolveResult& r) {
  if (r.useq.empty() || r.ell_star == r.q_star) return r;
  ControlSequence head(r.useq.begin(), r.useq.begin() + r.ell_star);
  const Evaluation ev =
      evaluate(model, cost, spec, x, z, alpha, head, r.ell_star);
  SolveResult out;
  out.useq = std::move(head);
  out.q_star = r.ell_star;
  out.ell_star = ev.ell_opt;
  out.j_star = ev.j;
  out.phi_star = ev.phi;
  out.w_under_star = ev.w_under;
  out.feasible = ev.feasible();
  out.evals = r.evals;
  return out;
}

SolveResult solve_full(const Model& model, const StageCost& cost,
                       const ContractionSpec& spec, const StateVec& x, double z,
                       double alpha, const std::optional<ControlSequence>& warm,
                       const SolverConfig& cfg) {
  validate(spec);
  if (!state_admissible(model, x)) {
    throw ContractViolation("solve_full: state is not admissible");
  }
  const auto seeds = default_seeds(model, spec, x, warm);
  std::vector<SolveResult> per_q;
  std::int64_t evals = 0;
  for (int q = 1; q <= spec.horizon; ++q) {
    SolveResult r = truncate(
        model, cost, spec, x, z, alpha,
        solve_fixed_horizon(model, cost, spec, x, z, q, alpha, seeds, cfg, q));
    evals += r.evals;
    per_q.push_back(std::move(r));
  }

  const SolveResult* best = nullptr;
  for (const auto& r : per_q) {
    if (r.feasible && (!best || r.j_star < best->j_star)) best = &r;
  }
  if (!best) {
    SolveResult out = per_q.front();
    out.feasible = false;
    out.evals = evals;
    return out;
  }
  // Shortest horizon among near-minimal costs.
  const double tol = cfg.tie_tol * (1.0 + std::abs(best->j_star));
  const SolveResult* chosen = best;
  for (const auto& r : per_q) {
    if (!r.feasible || r.j_star > best->j_star + tol) continue;
    if (r.q_star < chosen->q_star ||
        (r.q_star == chosen->q_star && r.j_star < chosen->j_star)) {
      chosen = &r;
    }
  }
  SolveResult out = *chosen;
  out.evals = evals;
  return out;
}

SolveResult stage1_max_contraction(const Model& model,
                                   const ContractionSpec& spec,
                                   const StateVec& x, const SolverConfig& cfg,
                                   const std::vector<ControlSequence>& extra) {
  validate(spec);
  auto seeds = default_seeds(model, spec, x, std::nullopt);
  seeds.insert(seeds.end(), extra.begin(), extra.end());
  const StageCost none{};
  return solve_fixed_horizon(model, none, spec, x, 0.0, spec.horizon, 1.0,
                             seeds, cfg, kStreamStage1);
}

SolveResult two_stage_solve(const Model& model, const StageCost& cost,
                            const ContractionSpec& spec, const StateVec& x,
                            double z, double alpha,
                            const std::optional<ControlSequence>& warm,
                            const SolverConfig& cfg) {
  validate(spec);
  if (!state_admissible(model, x)) {
    throw ContractViolation("two_stage_solve: state is not admissible");
  }
  std::vector<ControlSequence> extra;
  if (warm && !warm->empty()) extra.push_back(*warm);
  const SolveResult stage1 = stage1_max_contraction(model, spec, x, cfg, extra);
  const int horizon = stage1.ell_star;

  std::vector<ControlSequence> seeds;
  seeds.emplace_back(stage1.useq.begin(), stage1.useq.begin() + horizon);
  if (warm && !warm->empty()) seeds.push_back(*warm);
  seeds.emplace_back(horizon, ControlVec::Zero(model.m));
  SolveResult out = truncate(
      model, cost, spec, x, z, alpha,
      solve_fixed_horizon(model, cost, spec, x, z, horizon, alpha, seeds, cfg,
                          kStreamStage2));
  out.evals += stage1.evals;

  // The shifted tail at its own horizon is a feasible point of P(x, z); keep
  // it when the fixed horizon chosen by stage one cannot reach its cost.
  if (warm && !warm->empty()) {
    const int qw = static_cast<int>(warm->size());
    if (qw <= spec.horizon) {
      const Evaluation ev =
          evaluate(model, cost, spec, x, z, alpha, *warm, qw);
      ++out.evals;
      if (ev.feasible() && (!out.feasible || ev.j < out.j_star)) {
        SolveResult tail;
        tail.useq = *warm;
        tail.q_star = qw;
        tail.ell_star = ev.ell_opt;
        tail.j_star = ev.j;
        tail.phi_star = ev.phi;
        tail.w_under_star = ev.w_under;
        tail.feasible = true;
        tail.evals = out.evals;
        out = truncate(model, cost, spec, x, z, alpha, tail);
      }
    }
  }
  return out;
}

std::optional<ControlSequence> shifted_candidate(const SolveResult& prev) {
  if (prev.q_star < 1) {
    throw ContractViolation("shifted_candidate: previous q* must be >= 1");
  }
  if (prev.q_star == 1 || prev.useq.size() < 2) return std::nullopt;
  return ControlSequence(prev.useq.begin() + 1,
                         prev.useq.begin() + prev.q_star);
}

}  // namespace cmpc
