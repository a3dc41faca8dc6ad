#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "app.h"

int main(int argc, char** argv) {
  CLI::App cli{"Contraction-based NMPC simulator"};
  cli.require_subcommand(1);

  std::string sim_cfg;
  std::string sim_csv;
  std::string sim_summary;
  auto* simulate = cli.add_subcommand("simulate", "Run a closed-loop simulation");
  simulate->add_option("config", sim_cfg, "Experiment config (JSON)")
      ->required();
  simulate->add_option("--csv", sim_csv, "Override output.csv_path");
  simulate->add_option("--summary", sim_summary,
                       "Override output.summary_path");

  std::string ver_cfg;
  std::int64_t samples = 1000;
  std::uint64_t seed = 0;
  std::string ver_out;
  auto* verify = cli.add_subcommand(
      "verify", "Certify the contraction property on random admissible states");
  verify->add_option("config", ver_cfg, "Experiment config (JSON)")->required();
  verify->add_option("--samples", samples, "Number of sampled states")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Sampling seed");
  verify->add_option("--out", ver_out,
                     "Report path (default: output.summary_path)");

  std::string cmp_a;
  std::string cmp_b;
  std::string cmp_out = "compare.json";
  auto* compare =
      cli.add_subcommand("compare", "Run two configs from the same x0");
  compare->add_option("config_a", cmp_a)->required();
  compare->add_option("config_b", cmp_b)->required();
  compare->add_option("--out", cmp_out, "Comparison report path");

  std::string chk_csv;
  std::string chk_cfg;
  std::string chk_out;
  auto* check =
      cli.add_subcommand("check", "Replay the convergence inequalities on a log");
  check->add_option("csv", chk_csv, "Trajectory CSV from simulate")->required();
  check->add_option("config", chk_cfg, "Config used to produce it")->required();
  check->add_option("--out", chk_out, "Report path (default: stdout)");

  CLI11_PARSE(cli, argc, argv);

  auto opt = [](const std::string& s) -> std::optional<std::string> {
    if (s.empty()) return std::nullopt;
    return s;
  };

  using namespace cmpc::app;
  if (*simulate) {
    return cmd_simulate(sim_cfg, {opt(sim_csv), opt(sim_summary)}, std::cerr);
  }
  if (*verify) {
    return cmd_verify(ver_cfg, samples, seed, opt(ver_out), std::cerr);
  }
  if (*compare) {
    return cmd_compare(cmp_a, cmp_b, cmp_out, std::cerr);
  }
  return cmd_check(chk_csv, chk_cfg, opt(chk_out), std::cerr);
}
