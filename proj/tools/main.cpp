#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sfc/scenario_io.hpp"
#include "sfc/simulator.hpp"

namespace {

void print_run_summary(const sfc::RunResult& r) {
  std::printf("chain satisfaction:\n");
  for (const auto& [chain, s] : r.satisfaction) std::printf("  %-16s %.4f\n", chain.c_str(), s);
  std::printf("actions by kind:\n");
  for (auto k : {sfc::ActionKind::FlowDist, sfc::ActionKind::Scale, sfc::ActionKind::Migrate,
                 sfc::ActionKind::FallbackScaleAll, sfc::ActionKind::Deprovision,
                 sfc::ActionKind::Unmet}) {
    std::printf("  %-20s %d\n", sfc::to_string(k), r.count(k));
  }
  std::printf("heavyweight operations: %d\n", r.heavyweight_count());
  std::printf("final middlebox instances: %d\n", r.final_mbox_instances);
  if (r.audit.flows_checked > 0) {
    std::printf("affinity audit: %d flows, %d checkpoints, %zu discrepancies\n",
                r.audit.flows_checked, r.audit.checkpoints, r.audit.discrepant_flows.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Middlebox chain orchestration and data-center simulation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string policy;

  auto* run = app.add_subcommand("run", "Simulate one scenario and write CSV outputs");
  run->add_option("--scenario", scenario_path, "Scenario YAML file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed override");
  run->add_option("--policy", policy, "stratos|heavywgt|localview|uniformflow")
      ->check(CLI::IsMember({"stratos", "heavywgt", "localview", "uniformflow"}));

  sfc::ScaleExperimentConfig scale;
  std::string scale_out;
  auto* scale_cmd = app.add_subcommand("scale-exp", "Large-scale STRATOS vs UNIFORMFLOW comparison");
  scale_cmd->add_option("--chains", scale.chains, "Number of chains")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--racks", scale.racks, "Number of racks")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--seed", scale.seed, "RNG seed");
  scale_cmd->add_option("--agg-fanout", scale.agg_fanout, "Racks per aggregation switch")
      ->check(CLI::PositiveNumber);
  scale_cmd->add_option("--core-fanout", scale.core_fanout, "Aggregation switches per core switch")
      ->check(CLI::PositiveNumber);
  scale_cmd->add_option("--fill-step", scale.fill_step_mbps,
                        "Per-round growth of each chain's target, Mbps (0: full demand)")
      ->check(CLI::NonNegativeNumber);
  scale_cmd->add_option("--max-rounds", scale.max_rounds, "Scaling rounds")
      ->check(CLI::PositiveNumber);
  scale_cmd->add_option("--out", scale_out, "Output directory")->required();

  auto* audit = app.add_subcommand("audit", "Flow-affinity audit of a scenario");
  audit->add_option("--scenario", scenario_path, "Scenario YAML file")->required();

  int tenants = 1000;
  auto* bench = app.add_subcommand("bench", "Controller micro-benchmarks");
  bench->add_option("--tenants", tenants, "Synthetic tenants")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario");
  validate->add_option("--scenario", scenario_path, "Scenario YAML file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      sfc::Scenario sc = sfc::parse_scenario(scenario_path);
      if (!seed_opt->empty()) sc.seed = seed;
      if (!policy.empty()) sc.policy = sfc::parse_policy(policy);
      const auto result = sfc::run_scenario(sc);
      sfc::write_run_outputs(result, out_dir);
      std::printf("scenario %s, policy %s, seed %llu\n", sc.name.c_str(),
                  sfc::to_string(sc.policy), static_cast<unsigned long long>(sc.seed));
      print_run_summary(result);
      return 0;
    }
    if (scale_cmd->parsed()) {
      const auto result = sfc::run_scale_experiment(scale);
      std::filesystem::create_directories(scale_out);
      std::ofstream(std::filesystem::path(scale_out) / "distributions.csv", std::ios::binary)
          << result.distributions_csv();
      std::cout << result.summary();
      return 0;
    }
    if (audit->parsed()) {
      const auto report = sfc::affinity_audit(sfc::parse_scenario(scenario_path));
      std::printf("flows checked: %d\ncheckpoints: %d\ndiscrepancies: %zu\n",
                  report.flows_checked, report.checkpoints, report.discrepant_flows.size());
      for (const auto& d : report.details) std::printf("  %s\n", d.c_str());
      return report.clean() ? 0 : 3;
    }
    if (bench->parsed()) {
      std::cout << sfc::bench_controller(tenants).table();
      return 0;
    }
    if (validate->parsed()) {
      const auto sc = sfc::parse_scenario(scenario_path);
      std::printf("ok: %s (%zu chains, %zu middleboxes, %d racks)\n", sc.name.c_str(),
                  sc.chains.size(), sc.mboxes.size(), sc.topology.racks);
      return 0;
    }
  } catch (const sfc::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", sfc::to_string(e.kind()), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
