#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfc/chain_compiler.hpp"
#include "sfc/provisioning.hpp"
#include "sfc/topology.hpp"

namespace sfc {

struct WorkloadEvent {
  double time_s = 0.0;
  std::string chain;
  double offered_mbps = 0.0;
};

// Background traffic between two racks; a zero duration lasts forever.
struct BackgroundEvent {
  double time_s = 0.0;
  RackId from;
  RackId to;
  double mbps = 0.0;
  double duration_s = 0.0;
};

// `count` instances of an element (middlebox or endpoint). Without a rack
// the instances land on seeded-random racks with free slots.
struct InitialPlacement {
  std::string element;
  int count = 1;
  std::optional<RackId> rack;
};

// Operator-driven scaling, used by the affinity audit.
struct ScriptedScale {
  double time_s = 0.0;
  std::string element;
};

struct Scenario {
  std::string name = "scenario";
  TopologySpec topology;
  MBoxCatalog mboxes;
  std::vector<LogicalChain> chains;
  std::vector<InitialPlacement> placements;
  std::vector<WorkloadEvent> workload;
  std::vector<BackgroundEvent> background;
  std::vector<ScriptedScale> scripted;
  Policy policy = Policy::Stratos;
  ProvisioningConfig provisioning;
  bool autoscale = true;  // run the provisioning engine
  std::uint64_t seed = 1;
  double duration_s = 60.0;
  double tick_s = 1.0;
  double latency_base_ms = 10.0;
  double latency_cap_ms = 1000.0;
  double request_kb = 100.0;  // converts Mbps deficits into requests
  double backlog_cap = 100.0;
  bool forwarding = true;
  double flows_per_tick = 1.0;  // per chain
  double flow_lifetime_s = 20.0;

  // Throws Error(InvalidInput) naming the offending field.
  void validate() const;
};

struct TickRecord {
  double time_s = 0.0;
  std::string chain;
  double offered_mbps = 0.0;
  double served_mbps = 0.0;
  double backlog = 0.0;
  double latency_ms = 0.0;
  double max_link_util = 0.0;
  std::map<std::string, int> instances;  // live count per middlebox
};

struct AuditReport {
  int flows_checked = 0;
  int checkpoints = 0;
  std::vector<int> discrepant_flows;  // sorted, unique
  std::vector<std::string> details;
  bool clean() const { return discrepant_flows.empty(); }
};

struct RunResult {
  std::vector<TickRecord> series;
  std::vector<ActionRecord> actions;
  std::map<std::string, double> satisfaction;  // served / offered over the run
  std::map<InstanceId, double> final_instance_mbps;
  std::map<std::string, double> final_inter_rack_mbps;
  int final_mbox_instances = 0;
  AuditReport audit;
  std::string metrics_csv;
  std::string resolved_config;

  std::string timeseries_csv() const;
  std::string actions_csv() const;
  std::string distributions_csv() const;
  int count(ActionKind kind) const;
  int heavyweight_count() const;
};

struct RunOptions {
  // Fault injection: at this time, re-point the forward rule of the oldest
  // active flow of the first chain to a foreign tag.
  std::optional<double> corrupt_at_s;
  bool record_metrics_csv = true;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

// Runs the scenario with forwarding enabled and returns its audit.
AuditReport affinity_audit(const Scenario& scenario,
                           const RunOptions& options = {});

// Writes timeseries.csv, actions.csv, distributions.csv, metrics.csv and
// resolved-config.yaml into `dir` (created if absent).
void write_run_outputs(const RunResult& result, const std::string& dir);

struct ScaleExperimentConfig {
  int chains = 200;
  int racks = 500;
  int slots_per_rack = 10;
  int agg_fanout = 2;
  int core_fanout = 250;
  double link_capacity_mbps = 1000.0;
  std::uint64_t seed = 1;
  // Chain template.
  int generators = 3;
  double generator_mbps = 100.0;
  int servers = 4;
  std::vector<std::string> boxes = {"A", "B", "C"};
  std::vector<int> initial_instances = {2, 1, 2};
  std::vector<double> capacities = {60.0, 50.0, 110.0};
  std::vector<double> gains = {1.0, 1.0, 1.0};
  double satisfied_fraction = 0.999;
  int max_rounds = 200;
  // Per-round increase of every chain's target; 0 serves full demand at once.
  double fill_step_mbps = 15.0;
  int max_candidates = 12;  // racks scored per placement tier
  // A step that keeps served volume but cuts inter-rack traffic also counts
  // as a gain.
  bool accept_footprint_gain = true;
  double min_footprint_gain_mbps = 1.0;
  // Re-solves with tightened rack-pair budgets when a chain's pairs overload
  // a shared link (LP-driven policies only).
  int bandwidth_refinements = 4;
};

struct PolicyOutcome {
  Policy policy = Policy::Stratos;
  std::vector<double> satisfaction;        // per chain, [0, 1]
  std::vector<double> instance_mbps;       // per middlebox instance
  std::vector<double> inter_rack_mbps;     // per chain
  int instances = 0;
  int scale_steps = 0;
  double runtime_s = 0.0;

  double share_at_least(double fraction) const;
  double share_instances_at_least(double mbps) const;
  double median_instance_mbps() const;
};

struct ScaleExperimentResult {
  ScaleExperimentConfig config;
  std::vector<PolicyOutcome> outcomes;  // STRATOS, UNIFORMFLOW

  const PolicyOutcome& of(Policy p) const;
  std::string distributions_csv() const;
  std::string summary() const;
};

ScaleExperimentResult run_scale_experiment(const ScaleExperimentConfig& config);

struct BenchResult {
  int tenants = 0;
  double lp_mean_ms = 0.0;
  double lp_per_sec = 0.0;
  double placement_mean_ms = 0.0;
  double placements_per_sec = 0.0;
  double trivial_lp_ms = 0.0;
  std::string table() const;
};

// Synthetic tenants of three chains each; measures distribution solves and
// placements single-threaded.
BenchResult bench_controller(int tenants, std::uint64_t seed = 7);

}  // namespace sfc
