#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sfc/chain_compiler.hpp"
#include "sfc/flow_distribution.hpp"
#include "sfc/forwarding.hpp"
#include "sfc/topology.hpp"

namespace sfc {

enum class InstanceState { Launching, Active, Retired, Destroyed };

struct DeployedInstance {
  InstanceId id;
  std::string element;  // middlebox (possibly a clone) or endpoint name
  bool endpoint = false;
  MachineId machine;
  InstanceState state = InstanceState::Active;
  double ready_at = 0.0;
};

// Hypothetical change used when scoring a placement: one extra instance
// and/or one instance left out.
struct ProblemTweak {
  std::optional<std::pair<std::string, RackId>> extra;  // element, rack
  InstanceId extra_id;                                  // id to use for it
  InstanceId without;
};

// One tenant's chains deployed on a shared topology.
class Deployment {
 public:
  Deployment(DataCenterTopology topo, const MBoxCatalog& mboxes,
             const std::vector<LogicalChain>& chains, bool with_forwarding,
             std::string tenant = "tenant");

  DataCenterTopology& topology() { return topo_; }
  const DataCenterTopology& topology() const { return topo_; }
  Placement& placement() { return placement_; }
  const Placement& placement() const { return placement_; }
  const TransformedChains& transformed() const { return transformed_; }
  const std::vector<LogicalChain>& chains() const { return transformed_.chains; }
  const MBoxCatalog& catalog() const { return transformed_.mboxes; }
  ForwardingPlane* forwarding() { return forwarding_.get(); }
  const ForwardingPlane* forwarding() const { return forwarding_.get(); }
  const std::string& tenant() const { return tenant_; }

  bool is_endpoint(const std::string& element) const;
  bool is_mbox(const std::string& element) const;
  // Middlebox elements of the chain in order.
  std::vector<std::string> positions(const std::string& chain_id) const;
  const LogicalChain& chain(const std::string& chain_id) const;
  int chain_index(const std::string& chain_id) const;
  // Elements adjacent to `element` in any chain (endpoints included).
  std::set<std::string> neighbors(const std::string& element) const;

  // Places a new instance. Instances that are ready immediately join the
  // forwarding plane at once; otherwise call activate() when launched.
  InstanceId launch(const std::string& element, MachineId machine,
                    double ready_at = 0.0, bool ready = true);
  void activate(InstanceId inst);
  void retire(InstanceId inst);
  void restore(InstanceId inst);
  void destroy(InstanceId inst);

  const DeployedInstance& instance(InstanceId inst) const;
  std::vector<InstanceId> instances(const std::string& element,
                                    bool active_only = true) const;
  std::vector<InstanceId> live_instances() const;  // not destroyed
  int mbox_instance_count() const;                 // non-endpoint, live
  RackId rack_of(InstanceId inst) const;
  InstanceId next_id() const { return InstanceId(next_id_); }
  // Tags a new instance of `element` claims when it activates.
  int tags_needed(const std::string& element) const;
  // Unallocated tags minus those pending launches will claim.
  int tags_available() const;

  // LP input for the given chains (all when empty), demand per chain id.
  FlowProblem flow_problem(const std::map<std::string, double>& demand,
                           BandwidthFn bandwidth, double leeway,
                           const ProblemTweak& tweak = {},
                           const std::vector<std::string>& only = {}) const;

  // Records the distribution as the applied one and pushes path weights to
  // the forwarding plane.
  void apply_distribution(const FlowProblem& problem,
                          const FlowDistribution& dist);
  const std::optional<FlowDistribution>& applied() const { return applied_; }
  const FlowProblem& applied_problem() const { return applied_problem_; }
  // Restores an earlier applied state exactly.
  void set_applied(const FlowProblem& problem,
                   const std::optional<FlowDistribution>& dist);

  // Refreshes forwarding weights from the applied distribution (after the
  // path set changed).
  void refresh_weights();

 private:
  void extend_forwarding(InstanceId inst);

  std::string tenant_;
  DataCenterTopology topo_;
  Placement placement_;
  TransformedChains transformed_;
  std::map<std::string, std::vector<Subchain>> subchains_;
  std::unique_ptr<ForwardingPlane> forwarding_;
  std::map<InstanceId, DeployedInstance> instances_;
  int next_id_ = 0;
  std::optional<FlowDistribution> applied_;
  FlowProblem applied_problem_;
};

}  // namespace sfc
