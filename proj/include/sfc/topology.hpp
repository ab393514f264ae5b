#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfc/common.hpp"

namespace sfc {

struct TopologySpec {
  int racks = 1;
  int machines_per_rack = 1;
  int slots_per_machine = 10;
  int agg_fanout = 25;   // racks per aggregation switch
  int core_fanout = 20;  // aggregation switches per core switch
  double link_capacity_mbps = 1000.0;
};

enum class Tier { Tor, Agg, Core };

struct Switch {
  SwitchId id;
  Tier tier;
};

struct Machine {
  MachineId id;
  RackId rack;
  int vm_slots = 0;
};

// A link endpoint is either a machine or a switch.
struct NodeRef {
  enum class Kind { Machine, Switch };
  Kind kind;
  int index;

  bool operator==(const NodeRef&) const = default;
};

struct PhysicalLink {
  LinkId id;
  NodeRef a;
  NodeRef b;
  double capacity = 0.0;
  double background_load = 0.0;
  double chain_load = 0.0;

  double available() const {
    double left = capacity - background_load - chain_load;
    return left > 0.0 ? left : 0.0;
  }
};

struct RackFlow {
  RackId from;
  RackId to;
  double mbps = 0.0;
};

struct MachineFlow {
  MachineId from;
  MachineId to;
  double mbps = 0.0;
};

// Three-tier tree data center: machine -> ToR -> aggregation -> core. Link
// loads are the only mutable part.
class DataCenterTopology {
 public:
  static DataCenterTopology build_tree(const TopologySpec& spec);

  const TopologySpec& spec() const { return spec_; }
  int rack_count() const { return spec_.racks; }
  int machine_count() const { return static_cast<int>(machines_.size()); }

  std::span<const Machine> machines() const { return machines_; }
  std::span<const Switch> switches() const { return switches_; }
  std::span<const PhysicalLink> links() const { return links_; }

  const Machine& machine(MachineId m) const;
  const PhysicalLink& link(LinkId l) const;
  RackId rack_of(MachineId m) const { return machine(m).rack; }
  std::span<const MachineId> machines_in(RackId r) const;
  SwitchId tor_of(RackId r) const { return SwitchId(r.value); }
  int agg_index(RackId r) const { return r.value / spec_.agg_fanout; }

  int count(Tier tier) const;

  // Unique switch-level path between two racks' ToR switches, ordered from
  // `from` towards `to`. Empty when the racks coincide.
  std::vector<LinkId> route(RackId from, RackId to) const;

  // Machine-to-machine path including the machine access links.
  std::vector<LinkId> machine_path(MachineId from, MachineId to) const;

  LinkId access_link(MachineId m) const { return LinkId(m.value); }

  // Number of switch-to-switch links between two racks (0, 2 or 4).
  int switch_hops(RackId a, RackId b) const;

  // Minimum available bandwidth along route(a, b); kUnbounded when a == b.
  double available_bandwidth(RackId a, RackId b) const;

  // Minimum available bandwidth along an arbitrary link path.
  double path_available(std::span<const LinkId> path) const;

  // Replace-all chain-load accounting.
  void apply_traffic(std::span<const RackFlow> flows);
  void apply_machine_traffic(std::span<const MachineFlow> flows);
  void set_chain_loads(std::span<const double> per_link);

  // Replace-all background accounting.
  void set_background(std::span<const RackFlow> flows);

  void validate_rack(RackId r) const;

 private:
  TopologySpec spec_;
  std::vector<Machine> machines_;
  std::vector<std::vector<MachineId>> rack_machines_;
  std::vector<Switch> switches_;
  std::vector<PhysicalLink> links_;
  std::vector<LinkId> tor_uplink_;  // per rack
  std::vector<LinkId> agg_uplink_;  // per aggregation switch
  int agg_count_ = 0;
  int core_count_ = 0;
};

// Instance -> machine mapping with per-machine slot accounting.
class Placement {
 public:
  explicit Placement(const DataCenterTopology& topo);

  void place(InstanceId inst, MachineId m);
  void remove(InstanceId inst);
  bool contains(InstanceId inst) const { return where_.count(inst) != 0; }

  MachineId machine_of(InstanceId inst) const;
  int occupied(MachineId m) const { return occupied_.at(m.value); }
  int free_slots(MachineId m) const;
  int free_slots(RackId r) const;
  // First machine in the rack with a free slot, or an invalid id.
  MachineId free_machine(RackId r) const;

  std::size_t size() const { return where_.size(); }
  const std::unordered_map<InstanceId, MachineId>& assignments() const {
    return where_;
  }

 private:
  void check_machine(MachineId m) const;

  std::vector<int> slots_;
  std::vector<std::vector<MachineId>> rack_machines_;
  std::unordered_map<InstanceId, MachineId> where_;
  std::vector<int> occupied_;
};

std::vector<LinkId> virtual_link_path(const DataCenterTopology& topo,
                                      const Placement& placement,
                                      InstanceId from, InstanceId to);

}  // namespace sfc
