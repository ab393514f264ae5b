#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfc/deployment.hpp"
#include "sfc/telemetry.hpp"

namespace sfc {

enum class Policy { Stratos, HeavyWgt, LocalView, UniformFlow };
const char* to_string(Policy p);
Policy parse_policy(const std::string& text);

struct ProvisioningConfig {
  double alpha = 0.85;          // CPU/memory level threshold
  double beta = 1.1;            // CPU/memory increase factor
  double delta_compute = 2.0;   // per-packet time increase factor
  double delta_net = 50.0;      // available-bandwidth floor, Mbps
  double delta_deprov = 0.5;    // per-packet time drop factor
  double rho = 1.25;            // migration bandwidth headroom
  double leeway = 0.15;
  double slo_latency_ms = 45.0;
  double slo_backlog = 10.0;
  double slo_window_s = 10.0;
  double post_flowdist_wait_s = 20.0;
  int fallback_scale_count = 1;
  double launch_delay_s = 35.0;
  double termination_delay_s = 10.0;
  // Utilization ceiling applied to inter-rack bandwidth handed to the LP.
  double lp_link_utilization = 1.0;
  bool deprovision_enabled = true;
  double deprovision_cooldown_s = 120.0;

  void validate() const;
};

// True when every latency sample (or every backlog sample) in a full window
// ending at `now` exceeds its threshold.
bool check_slo(const MetricStore& store, const std::string& chain, double now,
               const ProvisioningConfig& config);
// True when no sample in the window ending at `now` violates either bound.
bool slo_holds(const MetricStore& store, const std::string& chain, double now,
               const ProvisioningConfig& config);

struct ComputeFlag {
  InstanceId instance;
  std::string metric;  // "per_packet_time" or "cpu_mem"
  double current = 0.0;
  double baseline = 0.0;
  bool low_confidence = false;
};

struct InstanceProfile {
  InstanceId id;
  bool per_packet_metric = true;  // one packet in, one packet out
};

// Current window ends at `now`; the baseline window ends at `baseline_end`.
std::vector<ComputeFlag> detect_compute_bottlenecks(
    std::span<const InstanceProfile> instances, const MetricStore& store,
    double now, double baseline_end, const ProvisioningConfig& config);

struct CongestedVl {
  InstanceId from;
  InstanceId to;
  double min_available = 0.0;
};

struct NetworkReport {
  std::vector<CongestedVl> congested;
  std::map<InstanceId, int> incident;  // congested VLs per instance
};

// `vls` are the instance pairs currently carrying flow.
NetworkReport detect_network_bottlenecks(
    const DataCenterTopology& topo, const Placement& placement,
    std::span<const std::pair<InstanceId, InstanceId>> vls,
    const ProvisioningConfig& config);

enum class ActionKind {
  FlowDist,
  Scale,
  Migrate,
  FallbackScaleAll,
  Deprovision,
  None,
  Unmet,
};
const char* to_string(ActionKind k);
bool is_heavyweight(ActionKind k);

struct ActionRecord {
  int step = 0;
  double time = 0.0;
  Policy policy = Policy::Stratos;
  ActionKind kind = ActionKind::None;
  std::string targets;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

std::string actions_csv(std::span<const ActionRecord> log);

// Supplies per-chain offered demand (Mbps) at a point in time.
using DemandFn = std::function<std::map<std::string, double>(double)>;

// Multi-stage provisioning for one tenant.
class ProvisioningEngine {
 public:
  ProvisioningEngine(Deployment& deployment, const MetricStore& store,
                     ProvisioningConfig config, Policy policy,
                     BandwidthFn lp_bandwidth, DemandFn demand);

  Policy policy() const { return policy_; }
  const ProvisioningConfig& config() const { return config_; }

  // Computes and applies the starting distribution.
  void initialize(double now);

  // Launch completions, drains and deferred destruction. Call every tick
  // before step().
  void advance_lifecycle(double now);

  // Executes at most one provisioning stage.
  ActionRecord step(double now);

  const std::vector<ActionRecord>& log() const { return log_; }

  // Individual operations.
  // `allow` filters candidate racks (migration headroom); may be empty.
  MachineId place_new_instance(const std::string& element, double now,
                               const std::function<bool(RackId)>& allow = {});
  InstanceId horizontal_scale(const std::string& element, double now);
  // Nullopt when no location satisfies the headroom rule.
  std::optional<InstanceId> migrate_instance(InstanceId inst, double now);
  // Starts probation for one under-used instance of the chain, if any.
  std::optional<InstanceId> deprovision(const std::string& chain, double now);
  // Re-solves and applies the distribution per policy. Returns false when
  // the LP was infeasible and nothing was applied.
  bool redistribute(double now, bool allow_fallback, std::string* note = nullptr);

  // Instance pairs with positive flow in the applied distribution.
  std::vector<std::pair<InstanceId, InstanceId>> active_vls() const;
  double applied_objective() const;

 private:
  enum class Stage { Idle, WaitAfterFlowDist, Settling, Probation };

  ActionRecord record(double now, ActionKind kind, std::string targets,
                      double before);
  ActionRecord detect_and_act(double now);
  std::vector<std::string> violated_chains(double now) const;
  FlowDistribution score_distribution(const FlowProblem& p) const;

  Deployment& dep_;
  const MetricStore& store_;
  ProvisioningConfig config_;
  Policy policy_;
  BandwidthFn bandwidth_;
  DemandFn demand_;

  Stage stage_ = Stage::Idle;
  double stage_until_ = 0.0;
  double trigger_time_ = 0.0;
  bool fallback_done_ = false;
  double quiet_until_ = 0.0;  // no new episode or deprovision before this
  int step_ = 0;
  std::vector<ActionRecord> log_;

  struct Pending {
    InstanceId fresh;
    InstanceId replaces;  // valid for migrations
  };
  std::vector<Pending> launching_;
  std::vector<InstanceId> draining_;
  std::map<InstanceId, double> destroy_at_;

  // Probation state for de-provisioning.
  InstanceId probation_;
  FlowProblem saved_problem_;
  std::optional<FlowDistribution> saved_dist_;
};

}  // namespace sfc
