#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sfc/chain_compiler.hpp"
#include "sfc/common.hpp"

namespace sfc {

// Per-tenant tag space. Tags are handed out in pairs (forward, reverse) and
// never reused.
class TagAllocator {
 public:
  static constexpr int kCapacity = 64;

  explicit TagAllocator(std::string tenant = {}) : tenant_(std::move(tenant)) {}

  std::pair<int, int> allocate();
  int allocated() const { return next_; }
  const std::string& tenant() const { return tenant_; }

 private:
  std::string tenant_;
  int next_ = 0;
};

// Flow identifier standing in for a 5-tuple. The top bit marks direction.
using FlowKey = std::uint64_t;
inline constexpr FlowKey kReverseBit = FlowKey{1} << 63;
inline FlowKey reverse_key(FlowKey k) { return k ^ kReverseBit; }
// Deterministic header rewrite applied by a mangling box named `box`.
FlowKey mangle_key(FlowKey k, const std::string& box);

struct InstancePath {
  int id = -1;
  std::string subchain;
  std::vector<InstanceId> instances;  // head ... exit
  int forward_tag = -1;
  int reverse_tag = -1;
  double weight = 0.0;

  int hops() const { return static_cast<int>(instances.size()) - 1; }
};

enum class Direction { Forward, Reverse };

struct FlowRule {
  MachineId vswitch;  // per-machine virtual switch
  int priority = 0;
  // Exactly one of the two match forms is used.
  std::optional<FlowKey> exact;
  int tag = -1;
  InstanceId in_port;
  // Actions.
  int set_tag = -1;
  InstanceId out_port;     // destination instance (tag rules)
  MachineId out_machine;   // machine hosting out_port
  bool tunnel = false;     // out_machine differs from vswitch

  std::string to_line() const;
};

// Pure synthesis of the tag rules for one tagged path. Locations come from
// `machine_of`, indexed by instance.
std::vector<FlowRule> proactive_rules(
    const InstancePath& path,
    const std::function<MachineId(InstanceId)>& machine_of);

// Deterministic weighted round robin over integer weights (nginx style).
class SmoothWrr {
 public:
  SmoothWrr() = default;
  explicit SmoothWrr(std::vector<int> weights);
  // Index of the next pick; throws NoPath when every weight is zero.
  int pick();
  const std::vector<int>& weights() const { return weights_; }

 private:
  std::vector<int> weights_;
  std::vector<long long> current_;
};

// Converts fractional weights to small integers preserving their ratios.
std::vector<int> integerize_weights(std::span<const double> weights);

enum class FlowState { Active, Draining, Finished };

struct Flow {
  int id = -1;
  std::string chain;
  FlowKey key = 0;  // key as emitted by the source
  InstanceId source;
  InstanceId sink;
  double rate_mbps = 0.0;
  FlowState state = FlowState::Active;
  std::vector<int> pinned;         // one path per subchain
  std::vector<FlowKey> seg_keys;   // forward key inside each subchain
};

struct FlowTrace {
  std::vector<InstanceId> forward;
  std::vector<InstanceId> reverse;

  bool operator==(const FlowTrace&) const = default;
};

// Forwarding controller for one tenant: owns the tag space, the per-machine
// rule tables and flow admission.
class ForwardingPlane {
 public:
  explicit ForwardingPlane(std::string tenant = {});

  enum class Role { Endpoint, Middlebox, Mangling };

  // Endpoints and middlebox instances must be registered before use.
  // `element` is the chain element name (middlebox or endpoint).
  void register_instance(InstanceId inst, const std::string& element,
                         MachineId machine, Role role);

  void add_chain(const std::string& chain_id, std::vector<Subchain> subchains);

  // Enumerates, tags and installs every path of the subchain over the
  // in-service instances. Used at initial deployment.
  std::vector<int> build_paths(const std::string& subchain_id);

  // Adds paths that include the newly registered instance, leaving existing
  // paths and rules untouched.
  std::vector<int> extend_paths_on_provisioning(const std::string& subchain_id,
                                                InstanceId fresh);

  // Replaces admission weights for the subchain's paths. Paths not listed get
  // weight 0. Pinned flows are unaffected.
  void set_weights(const std::string& subchain_id,
                   const std::map<int, double>& weights);

  // Removes the instance from admission (paths through it get weight 0).
  void retire_instance(InstanceId inst);
  // Undoes retire_instance; path weights were never touched.
  void restore_instance(InstanceId inst);
  bool in_service(InstanceId inst) const;
  // Active or draining flows pinned through the instance.
  int flows_through(InstanceId inst) const;
  // Deletes the instance and garbage-collects its paths' rules. Requires
  // zero flows through it.
  void destroy_instance(InstanceId inst);

  int admit_flow(const std::string& chain_id, FlowKey key, double rate_mbps,
                 InstanceId source = InstanceId{});
  void finish_flow(int flow_id);

  FlowTrace trace_flow(int flow_id) const;

  const Flow& flow(int flow_id) const;
  std::vector<int> active_flows() const;
  const InstancePath& path(int path_id) const;
  std::vector<int> paths_of(const std::string& subchain_id) const;
  const std::vector<Subchain>& subchains_of(const std::string& chain_id) const;

  std::size_t exact_rule_count() const { return exact_.size(); }
  std::size_t tag_rule_count() const { return tag_.size(); }
  // One rule per line, sorted; byte-stable.
  std::string dump_rules() const;
  const TagAllocator& tags() const { return tags_; }

  // Fault injection for audits: re-point a flow's forward reactive rule in
  // the given subchain to another path's tag.
  void corrupt_flow_rule(int flow_id, std::size_t subchain_index, int tag);

 private:
  struct InstanceEntry {
    std::string element;
    MachineId machine;
    bool mangling = false;
    bool endpoint = false;
    bool in_service = true;
  };
  struct SubchainEntry {
    Subchain sc;
    std::vector<int> paths;
    // Admission state keyed by head instance (-1: any head).
    std::map<int, SmoothWrr> wrr;
    std::map<int, std::vector<int>> wrr_paths;
  };
  using ExactKey = std::pair<int, FlowKey>;  // machine, key
  using TagKey = std::tuple<int, int, int>;  // machine, tag, in port

  int add_path(const std::string& subchain_id, std::vector<InstanceId> seq);
  void install(const FlowRule& r, int owner_path);
  MachineId machine_of(InstanceId inst) const;
  const InstanceEntry& entry(InstanceId inst) const;
  int pick_path(SubchainEntry& sc, InstanceId head);
  std::vector<std::vector<InstanceId>> candidates(const Subchain& sc) const;
  bool path_usable(const InstancePath& p) const;
  void invalidate_admission();

  std::string tenant_;
  TagAllocator tags_;
  std::map<InstanceId, InstanceEntry> instances_;
  std::map<std::string, std::vector<Subchain>> chains_;
  std::map<std::string, SubchainEntry> subchains_;
  std::vector<InstancePath> paths_;
  std::vector<char> path_alive_;
  std::map<int, int> path_flows_;
  std::vector<Flow> flows_;
  std::map<ExactKey, FlowRule> exact_;
  std::map<TagKey, FlowRule> tag_;
  std::map<TagKey, int> tag_owner_;
  // Mangler state: reverse key after the box -> reverse key before it.
  std::map<std::pair<int, FlowKey>, FlowKey> nat_;
};

}  // namespace sfc
