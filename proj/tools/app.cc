#include "app.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cmpc::app {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& dst,
              const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

// "auto" or a number.
std::optional<double> read_auto(const json& obj, const char* key,
                                const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (v.is_number()) return v.get<double>();
  throw ConfigError(where + "." + key + ": expected a number or \"auto\"");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json checks_json(const DiagnosticReport& rep) {
  ordered_json out;
  out["alpha"] = rep.alpha;
  out["alpha_min"] = rep.alpha_min;
  out["alpha_precondition"] = rep.alpha_precondition;
  ordered_json checks = ordered_json::array();
  for (const auto& c : rep.checks) {
    ordered_json cj;
    cj["name"] = c.name;
    cj["description"] = c.description;
    cj["applicable"] = c.applicable;
    cj["passed"] = c.passed;
    cj["ok"] = c.ok();
    cj["failed_steps"] = c.failed_steps;
    checks.push_back(cj);
  }
  out["checks"] = checks;
  out["all_checks_passed"] = rep.all_checks_passed();
  out["all_passed"] = rep.all_passed();
  return out;
}

int exit_for(Termination t) {
  switch (t) {
    case Termination::kConverged:
      return kExitOk;
    case Termination::kInfeasible:
      return kExitInfeasible;
    case Termination::kMaxSteps:
      break;
  }
  return kExitMaxSteps;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root,
                 {"schema", "model", "cost", "contraction", "penalty", "solver",
                  "run", "output", "derived"},
                 "config");
  if (root.contains("schema") && root.at("schema") != 1) {
    throw ConfigError("config: unsupported schema version");
  }

  ExperimentConfig cfg;
  if (root.contains("model")) {
    const json& m = root.at("model");
    reject_unknown(m, {"type", "rho", "b", "mu", "u1_bar", "tau", "u_bar",
                       "r_bar"},
                   "model");
    read_opt(m, "type", cfg.model_type, "model");
    read_opt(m, "rho", cfg.nonholonomic.rho, "model");
    read_opt(m, "b", cfg.nonholonomic.b, "model");
    read_opt(m, "mu", cfg.nonholonomic.mu, "model");
    read_opt(m, "u1_bar", cfg.nonholonomic.u1_bar, "model");
    read_opt(m, "tau", cfg.double_integrator.tau, "model");
    read_opt(m, "u_bar", cfg.double_integrator.u_bar, "model");
    read_opt(m, "r_bar", cfg.double_integrator.r_bar, "model");
  }
  if (root.contains("cost")) {
    const json& c = root.at("cost");
    reject_unknown(c, {"type", "state_weights", "control_weight", "l_bar"},
                   "cost");
    read_opt(c, "type", cfg.cost_type, "cost");
    read_opt(c, "state_weights", cfg.custom_state_weights, "cost");
    read_opt(c, "control_weight", cfg.custom_control_weight, "cost");
    read_opt(c, "l_bar", cfg.custom_l_bar, "cost");
  }
  if (root.contains("contraction")) {
    const json& c = root.at("contraction");
    reject_unknown(c, {"gamma", "horizon", "w"}, "contraction");
    read_opt(c, "gamma", cfg.gamma, "contraction");
    read_opt(c, "horizon", cfg.horizon, "contraction");
    if (c.contains("w") && c.at("w") != "squared_norm") {
      throw ConfigError("contraction.w: only \"squared_norm\" is supported");
    }
  }
  if (root.contains("penalty")) {
    const json& p = root.at("penalty");
    reject_unknown(p, {"alpha", "beta", "z0"}, "penalty");
    cfg.alpha = read_auto(p, "alpha", "penalty");
    read_opt(p, "beta", cfg.beta, "penalty");
    cfg.z0 = read_auto(p, "z0", "penalty");
  }
  if (root.contains("solver")) {
    const json& s = root.at("solver");
    reject_unknown(s, {"restarts", "samples_per_iter", "max_iters",
                       "elite_frac", "init_std", "constraint_penalty",
                       "tie_tol", "seed", "polish_iters"},
                   "solver");
    read_opt(s, "restarts", cfg.solver.restarts, "solver");
    read_opt(s, "samples_per_iter", cfg.solver.samples_per_iter, "solver");
    read_opt(s, "max_iters", cfg.solver.max_iters, "solver");
    read_opt(s, "elite_frac", cfg.solver.elite_frac, "solver");
    read_opt(s, "init_std", cfg.solver.init_std, "solver");
    read_opt(s, "constraint_penalty", cfg.solver.constraint_penalty, "solver");
    read_opt(s, "tie_tol", cfg.solver.tie_tol, "solver");
    read_opt(s, "seed", cfg.solver.seed, "solver");
    read_opt(s, "polish_iters", cfg.solver.polish_iters, "solver");
  }
  if (root.contains("run")) {
    const json& r = root.at("run");
    reject_unknown(r, {"x0", "max_steps", "stop_norm", "mode"}, "run");
    read_opt(r, "x0", cfg.x0, "run");
    read_opt(r, "max_steps", cfg.max_steps, "run");
    read_opt(r, "stop_norm", cfg.stop_norm, "run");
    if (r.contains("mode")) {
      try {
        cfg.mode = parse_solve_mode(r.at("mode").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("run.mode: ") + e.what());
      }
    }
  }
  if (root.contains("output")) {
    const json& o = root.at("output");
    reject_unknown(o, {"csv_path", "summary_path"}, "output");
    read_opt(o, "csv_path", cfg.csv_path, "output");
    read_opt(o, "summary_path", cfg.summary_path, "output");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_file(path));
}

Experiment build(const ExperimentConfig& cfg) {
  Experiment exp;
  exp.config = cfg;
  try {
    if (cfg.model_type == "nonholonomic") {
      exp.model = make_nonholonomic(cfg.nonholonomic);
    } else if (cfg.model_type == "double_integrator") {
      exp.model = make_tightened_double_integrator(cfg.double_integrator);
    } else {
      throw ConfigError("model.type: unknown model '" + cfg.model_type + "'");
    }

    if (cfg.cost_type == "L1" || cfg.cost_type == "L2") {
      if (cfg.model_type != "nonholonomic") {
        throw ConfigError("cost." + cfg.cost_type +
                          " is defined for the nonholonomic model only");
      }
      exp.cost = cfg.cost_type == "L1" ? nonholonomic_l1(cfg.nonholonomic)
                                       : nonholonomic_l2(cfg.nonholonomic);
    } else if (cfg.cost_type == "custom") {
      if (static_cast<int>(cfg.custom_state_weights.size()) != exp.model.n) {
        throw ConfigError("cost.state_weights: need one weight per state");
      }
      exp.cost = quadratic_cost(
          Eigen::Map<const Eigen::VectorXd>(cfg.custom_state_weights.data(),
                                            exp.model.n),
          cfg.custom_control_weight, cfg.custom_l_bar);
    } else {
      throw ConfigError("cost.type: unknown cost '" + cfg.cost_type + "'");
    }

    exp.spec = squared_norm_spec(cfg.gamma, cfg.horizon);
    validate(cfg.solver);

    if (static_cast<int>(cfg.x0.size()) != exp.model.n) {
      throw ConfigError("run.x0: dimension does not match the model");
    }
    exp.x0 = Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), exp.model.n);
    if (cfg.max_steps < 0) throw ConfigError("run.max_steps must be >= 0");

    exp.alpha_min = alpha_min(cfg.horizon, exp.cost.l_bar, cfg.gamma);
    exp.penalty.alpha = cfg.alpha.value_or(exp.alpha_min);
    exp.penalty.beta = cfg.beta;
    exp.penalty.z0 = cfg.z0.value_or(exp.spec.w(exp.x0));
    if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) {
      throw ConfigError("penalty.beta must lie in (0, 1)");
    }
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return exp;
}

std::string resolved_config_json(const Experiment& exp) {
  const ExperimentConfig& c = exp.config;
  ordered_json j;
  j["schema"] = 1;
  ordered_json model;
  model["type"] = c.model_type;
  if (c.model_type == "nonholonomic") {
    model["rho"] = c.nonholonomic.rho;
    model["b"] = c.nonholonomic.b;
    model["mu"] = c.nonholonomic.mu;
    model["u1_bar"] = c.nonholonomic.u1_bound();
  } else {
    model["tau"] = c.double_integrator.tau;
    model["u_bar"] = c.double_integrator.u_bar;
    model["r_bar"] = c.double_integrator.r_bar;
  }
  j["model"] = model;
  ordered_json cost;
  cost["type"] = c.cost_type;
  if (c.cost_type == "custom") {
    cost["state_weights"] = c.custom_state_weights;
    cost["control_weight"] = c.custom_control_weight;
    cost["l_bar"] = c.custom_l_bar;
  }
  j["cost"] = cost;
  j["contraction"] = {{"w", "squared_norm"},
                      {"gamma", c.gamma},
                      {"horizon", c.horizon}};
  j["penalty"] = {{"alpha", exp.penalty.alpha},
                  {"beta", exp.penalty.beta},
                  {"z0", exp.penalty.z0}};
  j["solver"] = {{"restarts", c.solver.restarts},
                 {"samples_per_iter", c.solver.samples_per_iter},
                 {"max_iters", c.solver.max_iters},
                 {"elite_frac", c.solver.elite_frac},
                 {"init_std", c.solver.init_std},
                 {"constraint_penalty", c.solver.constraint_penalty},
                 {"tie_tol", c.solver.tie_tol},
                 {"seed", c.solver.seed},
                 {"polish_iters", c.solver.polish_iters}};
  j["run"] = {{"x0", c.x0},
              {"max_steps", c.max_steps},
              {"stop_norm", c.stop_norm},
              {"mode", to_string(c.mode)}};
  j["output"] = {{"csv_path", c.csv_path}, {"summary_path", c.summary_path}};
  // Read back as a config, this section is ignored.
  ordered_json derived;
  if (c.model_type == "nonholonomic") {
    derived["u2_bar"] = c.nonholonomic.u2_bound();
  }
  derived["l_bar"] = exp.cost.l_bar;
  derived["alpha_min"] = exp.alpha_min;
  derived["alpha_auto"] = !c.alpha.has_value();
  derived["z0_auto"] = !c.z0.has_value();
  j["derived"] = derived;
  return j.dump(2);
}

SimLog run(const Experiment& exp) {
  const ExperimentConfig& c = exp.config;
  return simulate(exp.model, exp.cost, exp.spec, exp.penalty, exp.x0,
                  exp.penalty.z0, c.max_steps, c.stop_norm, c.mode, c.solver);
}

std::string csv_header(int n, int m) {
  std::string h = "k";
  for (int i = 1; i <= n; ++i) h += ",x" + std::to_string(i);
  for (int i = 1; i <= m; ++i) h += ",u" + std::to_string(i);
  h += ",z,W,e,J_star,Phi_star,W_under_star,q_star,ell_star,evals,feasible";
  return h;
}

void write_csv(const SimLog& log, int n, int m, std::ostream& out) {
  out << csv_header(n, m) << '\n';
  for (const auto& r : log.records) {
    out << r.k;
    for (int i = 0; i < n; ++i) out << ',' << fmt17(r.x(i));
    for (int i = 0; i < m; ++i) out << ',' << fmt17(r.u_applied(i));
    out << ',' << fmt17(r.z) << ',' << fmt17(r.w_x) << ',' << fmt17(r.e)
        << ',' << fmt17(r.j_star) << ',' << fmt17(r.phi_star) << ','
        << fmt17(r.w_under_star) << ',' << r.q_star << ',' << r.ell_star << ','
        << r.solver_evals << ',' << (r.feasible ? 1 : 0) << '\n';
  }
}

void write_csv(const SimLog& log, int n, int m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(log, n, m, out);
}

SimLog read_csv(std::istream& in, int n, int m) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header(n, m)) {
    throw ConfigError("csv: header does not match the configured model");
  }
  const std::size_t columns = 1 + n + m + 10;
  SimLog log;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw ConfigError("csv: row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(columns));
    }
    try {
      std::size_t c = 0;
      StepRecord r;
      r.k = std::stoi(cells[c++]);
      r.x.resize(n);
      for (int i = 0; i < n; ++i) r.x(i) = std::stod(cells[c++]);
      r.u_applied.resize(m);
      for (int i = 0; i < m; ++i) r.u_applied(i) = std::stod(cells[c++]);
      r.z = std::stod(cells[c++]);
      r.w_x = std::stod(cells[c++]);
      r.e = std::stod(cells[c++]);
      r.j_star = std::stod(cells[c++]);
      r.phi_star = std::stod(cells[c++]);
      r.w_under_star = std::stod(cells[c++]);
      r.q_star = std::stoi(cells[c++]);
      r.ell_star = std::stoi(cells[c++]);
      r.solver_evals = std::stoll(cells[c++]);
      r.feasible = std::stoi(cells[c++]) != 0;
      log.records.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("csv: unparsable value in row " + std::to_string(row));
    }
  }
  return log;
}

SimLog read_csv(const std::string& path, int n, int m) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_csv(in, n, m);
}

std::string report_json(const DiagnosticReport& rep) {
  ordered_json j;
  j["schema"] = 1;
  j["command"] = "check";
  j["diagnostics"] = checks_json(rep);
  return j.dump(2);
}

std::string contraction_report_json(const ContractionReport& rep,
                                    const ContractionSpec& spec) {
  ordered_json j;
  j["schema"] = 1;
  j["command"] = "verify";
  j["gamma"] = spec.gamma;
  j["horizon"] = spec.horizon;
  j["seed"] = rep.seed;
  j["samples"] = rep.samples;
  j["successes"] = rep.successes;
  j["worst_ratio"] = finite_or_null(rep.worst_ratio);
  j["worst_state"] = vec_json(rep.worst_state);
  j["failed_indices"] = rep.failed_indices;
  j["certified"] = rep.successes == rep.samples;
  return j.dump(2);
}

double mean_abs_x2_minus_x3(const SimLog& log) {
  if (log.records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : log.records) {
    if (r.x.size() < 3) {
      throw ContractViolation("mean_abs_x2_minus_x3: need n >= 3");
    }
    sum += std::abs(r.x(1) - r.x(2));
  }
  return sum / static_cast<double>(log.records.size());
}

namespace {

ordered_json run_summary(const Experiment& exp, const SimLog& log) {
  ordered_json j;
  j["schema"] = 1;
  j["command"] = "simulate";
  j["config"] = ordered_json::parse(resolved_config_json(exp));
  j["terminated_reason"] = to_string(log.terminated_reason);
  j["steps"] = log.records.size();
  j["final_state"] = vec_json(log.final_state);
  j["final_norm"] = log.final_state.norm();
  j["alpha"] = exp.penalty.alpha;
  j["alpha_min"] = exp.alpha_min;
  if (log.records.empty()) {
    j["diagnostics"] = nullptr;
  } else {
    j["diagnostics"] = checks_json(
        check_lemmas(log, exp.penalty, exp.spec, exp.cost, exp.model));
  }
  return j;
}

}  // namespace

int cmd_simulate(const std::string& config_path, const SimulateOptions& opts,
                 std::ostream& msg) {
  try {
    const Experiment exp = build(load_config(config_path));
    if (!state_admissible(exp.model, exp.x0)) {
      msg << "error: run.x0 is outside the admissible set\n";
      return kExitError;
    }
    const SimLog log = run(exp);
    const std::string csv = opts.csv_path.value_or(exp.config.csv_path);
    const std::string summary =
        opts.summary_path.value_or(exp.config.summary_path);
    write_csv(log, exp.model.n, exp.model.m, csv);
    write_file(summary, run_summary(exp, log).dump(2) + "\n");
    msg << "simulate: " << to_string(log.terminated_reason) << " after "
        << log.records.size() << " steps, |x| = " << log.final_state.norm()
        << ", alpha = " << exp.penalty.alpha << "\n";
    return exit_for(log.terminated_reason);
  } catch (const std::exception& e) {
    msg << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_verify(const std::string& config_path, std::int64_t samples,
               std::uint64_t seed, const std::optional<std::string>& out_path,
               std::ostream& msg) {
  try {
    const Experiment exp = build(load_config(config_path));
    if (samples < 1) {
      msg << "error: --samples must be >= 1\n";
      return kExitError;
    }
    const ContractionReport rep =
        verify_contraction(exp.model, exp.spec, exp.config.solver, samples,
                           seed);
    write_file(out_path.value_or(exp.config.summary_path),
               contraction_report_json(rep, exp.spec) + "\n");
    msg << "verify: " << rep.successes << "/" << rep.samples
        << " contracted, worst W_min/W = " << rep.worst_ratio
        << " (gamma = " << exp.spec.gamma << ")\n";
    return rep.successes == rep.samples ? kExitOk : kExitNegative;
  } catch (const std::exception& e) {
    msg << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::string& out_path, std::ostream& msg) {
  try {
    const Experiment a = build(load_config(config_a));
    const Experiment b = build(load_config(config_b));
    const auto same_model =
        ordered_json::parse(resolved_config_json(a))["model"] ==
        ordered_json::parse(resolved_config_json(b))["model"];
    if (!same_model || a.config.x0 != b.config.x0) {
      msg << "error: compare needs the same model and x0 in both configs\n";
      return kExitError;
    }
    if (a.model.n < 3) {
      msg << "error: compare reports |x2 - x3| and needs n >= 3\n";
      return kExitError;
    }
    if (!state_admissible(a.model, a.x0)) {
      msg << "error: run.x0 is outside the admissible set\n";
      return kExitError;
    }
    ordered_json j;
    j["schema"] = 1;
    j["command"] = "compare";
    ordered_json runs = ordered_json::array();
    bool both = true;
    std::vector<double> means;
    for (const Experiment* e : {&a, &b}) {
      const SimLog log = run(*e);
      write_csv(log, e->model.n, e->model.m, e->config.csv_path);
      const double mean = mean_abs_x2_minus_x3(log);
      means.push_back(mean);
      both = both && log.terminated_reason == Termination::kConverged;
      ordered_json r;
      r["config"] = ordered_json::parse(resolved_config_json(*e));
      r["csv_path"] = e->config.csv_path;
      r["terminated_reason"] = to_string(log.terminated_reason);
      r["steps"] = log.records.size();
      r["mean_abs_x2_minus_x3"] = mean;
      runs.push_back(r);
    }
    j["runs"] = runs;
    j["both_converged"] = both;
    j["a_minus_b_mean_abs_x2_minus_x3"] = means[0] - means[1];
    write_file(out_path, j.dump(2) + "\n");
    msg << "compare: mean|x2-x3| A = " << means[0] << ", B = " << means[1]
        << (both ? "" : " (not both converged)") << "\n";
    return both ? kExitOk : kExitNegative;
  } catch (const std::exception& e) {
    msg << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_check(const std::string& csv_path, const std::string& config_path,
              const std::optional<std::string>& out_path, std::ostream& msg) {
  try {
    const Experiment exp = build(load_config(config_path));
    SimLog log = read_csv(csv_path, exp.model.n, exp.model.m);
    if (log.records.empty()) {
      msg << "error: log has no records\n";
      return kExitError;
    }
    const DiagnosticReport rep =
        check_lemmas(log, exp.penalty, exp.spec, exp.cost, exp.model);
    const std::string text = report_json(rep) + "\n";
    if (out_path) {
      write_file(*out_path, text);
    } else {
      std::cout << text;
    }
    if (!rep.alpha_precondition) {
      msg << "check: alpha = " << rep.alpha << " violates alpha >= "
          << rep.alpha_min << " (convergence bound)\n";
    }
    for (const auto& c : rep.checks) {
      msg << "check: " << c.name << " " << c.passed << "/" << c.applicable
          << (c.ok() ? "" : "  FAILED") << "\n";
    }
    return rep.all_passed() ? kExitOk : kExitNegative;
  } catch (const std::exception& e) {
    msg << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace cmpc::app
