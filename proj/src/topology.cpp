#include "sfc/topology.hpp"

#include <algorithm>
#include <sstream>

namespace sfc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::MissingPlacement: return "missing-placement";
    case ErrorKind::InvalidChainSet: return "invalid-chain-set";
    case ErrorKind::TagSpaceExhausted: return "tag-space-exhausted";
    case ErrorKind::NoPath: return "no-path";
    case ErrorKind::ForwardingHole: return "forwarding-hole";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::CapacityExhausted: return "capacity-exhausted";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

DataCenterTopology DataCenterTopology::build_tree(const TopologySpec& spec) {
  if (spec.racks < 1 || spec.machines_per_rack < 1 ||
      spec.slots_per_machine < 1 || spec.agg_fanout < 1 ||
      spec.core_fanout < 1) {
    throw Error(ErrorKind::InvalidSpec,
                "topology counts and fanouts must all be >= 1");
  }
  if (!(spec.link_capacity_mbps > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "link capacity must be positive");
  }
  DataCenterTopology t;
  t.spec_ = spec;
  t.agg_count_ = ceil_div(spec.racks, spec.agg_fanout);
  t.core_count_ = ceil_div(t.agg_count_, spec.core_fanout);
  if (t.core_count_ != 1) {
    std::ostringstream os;
    os << "tree needs a single core switch; " << t.agg_count_
       << " aggregation switches exceed core_fanout " << spec.core_fanout;
    throw Error(ErrorKind::InvalidSpec, os.str());
  }

  // Switch ids: ToRs [0, R), aggregation [R, R + A), core R + A.
  for (int r = 0; r < spec.racks; ++r) {
    t.switches_.push_back({SwitchId(r), Tier::Tor});
  }
  for (int a = 0; a < t.agg_count_; ++a) {
    t.switches_.push_back({SwitchId(spec.racks + a), Tier::Agg});
  }
  const int core = spec.racks + t.agg_count_;
  t.switches_.push_back({SwitchId(core), Tier::Core});

  // Link ids: machine access links first, so access_link(m) == m.
  t.rack_machines_.resize(spec.racks);
  for (int r = 0; r < spec.racks; ++r) {
    for (int k = 0; k < spec.machines_per_rack; ++k) {
      MachineId m(static_cast<int>(t.machines_.size()));
      t.machines_.push_back({m, RackId(r), spec.slots_per_machine});
      t.rack_machines_[r].push_back(m);
    }
  }
  auto add_link = [&](NodeRef a, NodeRef b) {
    LinkId id(static_cast<int>(t.links_.size()));
    t.links_.push_back({id, a, b, spec.link_capacity_mbps, 0.0, 0.0});
    return id;
  };
  for (const Machine& m : t.machines_) {
    add_link({NodeRef::Kind::Machine, m.id.value},
             {NodeRef::Kind::Switch, m.rack.value});
  }
  for (int r = 0; r < spec.racks; ++r) {
    t.tor_uplink_.push_back(
        add_link({NodeRef::Kind::Switch, r},
                 {NodeRef::Kind::Switch, spec.racks + r / spec.agg_fanout}));
  }
  for (int a = 0; a < t.agg_count_; ++a) {
    t.agg_uplink_.push_back(add_link({NodeRef::Kind::Switch, spec.racks + a},
                                     {NodeRef::Kind::Switch, core}));
  }
  return t;
}

const Machine& DataCenterTopology::machine(MachineId m) const {
  if (m.value < 0 || m.value >= machine_count()) {
    throw Error(ErrorKind::InvalidInput,
                "unknown machine " + std::to_string(m.value));
  }
  return machines_[m.value];
}

const PhysicalLink& DataCenterTopology::link(LinkId l) const {
  return links_.at(static_cast<std::size_t>(l.value));
}

std::span<const MachineId> DataCenterTopology::machines_in(RackId r) const {
  validate_rack(r);
  return rack_machines_[r.value];
}

int DataCenterTopology::count(Tier tier) const {
  switch (tier) {
    case Tier::Tor: return spec_.racks;
    case Tier::Agg: return agg_count_;
    case Tier::Core: return core_count_;
  }
  return 0;
}

void DataCenterTopology::validate_rack(RackId r) const {
  if (r.value < 0 || r.value >= spec_.racks) {
    throw Error(ErrorKind::InvalidInput,
                "unknown rack " + std::to_string(r.value));
  }
}

std::vector<LinkId> DataCenterTopology::route(RackId from, RackId to) const {
  validate_rack(from);
  validate_rack(to);
  if (from == to) return {};
  const int a1 = agg_index(from);
  const int a2 = agg_index(to);
  if (a1 == a2) return {tor_uplink_[from.value], tor_uplink_[to.value]};
  return {tor_uplink_[from.value], agg_uplink_[a1], agg_uplink_[a2],
          tor_uplink_[to.value]};
}

std::vector<LinkId> DataCenterTopology::machine_path(MachineId from,
                                                     MachineId to) const {
  if (from == to) {
    machine(from);
    return {};
  }
  std::vector<LinkId> path{access_link(from)};
  for (LinkId l : route(rack_of(from), rack_of(to))) path.push_back(l);
  path.push_back(access_link(to));
  return path;
}

int DataCenterTopology::switch_hops(RackId a, RackId b) const {
  validate_rack(a);
  validate_rack(b);
  if (a == b) return 0;
  return agg_index(a) == agg_index(b) ? 2 : 4;
}

double DataCenterTopology::path_available(std::span<const LinkId> path) const {
  double best = kUnbounded;
  for (LinkId l : path) best = std::min(best, links_[l.value].available());
  return best;
}

double DataCenterTopology::available_bandwidth(RackId a, RackId b) const {
  if (a == b) {
    validate_rack(a);
    return kUnbounded;
  }
  const auto path = route(a, b);
  return path_available(path);
}

void DataCenterTopology::apply_traffic(std::span<const RackFlow> flows) {
  for (const RackFlow& f : flows) {
    if (f.mbps < 0.0) {
      throw Error(ErrorKind::InvalidInput, "negative traffic volume");
    }
    validate_rack(f.from);
    validate_rack(f.to);
  }
  for (PhysicalLink& l : links_) l.chain_load = 0.0;
  for (const RackFlow& f : flows) {
    for (LinkId l : route(f.from, f.to)) links_[l.value].chain_load += f.mbps;
  }
}

void DataCenterTopology::apply_machine_traffic(
    std::span<const MachineFlow> flows) {
  for (const MachineFlow& f : flows) {
    if (f.mbps < 0.0) {
      throw Error(ErrorKind::InvalidInput, "negative traffic volume");
    }
    machine(f.from);
    machine(f.to);
  }
  for (PhysicalLink& l : links_) l.chain_load = 0.0;
  for (const MachineFlow& f : flows) {
    for (LinkId l : machine_path(f.from, f.to)) {
      links_[l.value].chain_load += f.mbps;
    }
  }
}

void DataCenterTopology::set_chain_loads(std::span<const double> per_link) {
  if (per_link.size() != links_.size()) {
    throw Error(ErrorKind::InvalidInput, "per-link load vector size mismatch");
  }
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (per_link[i] < 0.0) {
      throw Error(ErrorKind::InvalidInput, "negative link load");
    }
    links_[i].chain_load = per_link[i];
  }
}

void DataCenterTopology::set_background(std::span<const RackFlow> flows) {
  for (const RackFlow& f : flows) {
    if (f.mbps < 0.0) {
      throw Error(ErrorKind::InvalidInput, "negative background volume");
    }
    validate_rack(f.from);
    validate_rack(f.to);
  }
  for (PhysicalLink& l : links_) l.background_load = 0.0;
  for (const RackFlow& f : flows) {
    for (LinkId l : route(f.from, f.to)) {
      links_[l.value].background_load += f.mbps;
    }
  }
}

Placement::Placement(const DataCenterTopology& topo)
    : rack_machines_(topo.rack_count()), occupied_(topo.machine_count(), 0) {
  for (const Machine& m : topo.machines()) {
    slots_.push_back(m.vm_slots);
    rack_machines_[m.rack.value].push_back(m.id);
  }
}

void Placement::check_machine(MachineId m) const {
  if (m.value < 0 || m.value >= static_cast<int>(slots_.size())) {
    throw Error(ErrorKind::InvalidInput,
                "unknown machine " + std::to_string(m.value));
  }
}

void Placement::place(InstanceId inst, MachineId m) {
  check_machine(m);
  if (where_.count(inst)) {
    throw Error(ErrorKind::InvalidInput,
                "instance " + std::to_string(inst.value) + " already placed");
  }
  if (occupied_[m.value] >= slots_[m.value]) {
    throw Error(ErrorKind::CapacityExhausted,
                "machine " + std::to_string(m.value) + " has no free slot");
  }
  where_.emplace(inst, m);
  ++occupied_[m.value];
}

void Placement::remove(InstanceId inst) {
  auto it = where_.find(inst);
  if (it == where_.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "instance " + std::to_string(inst.value) + " is not placed");
  }
  --occupied_[it->second.value];
  where_.erase(it);
}

MachineId Placement::machine_of(InstanceId inst) const {
  auto it = where_.find(inst);
  if (it == where_.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "instance " + std::to_string(inst.value) + " is not placed");
  }
  return it->second;
}

int Placement::free_slots(MachineId m) const {
  check_machine(m);
  return slots_[m.value] - occupied_[m.value];
}

int Placement::free_slots(RackId r) const {
  int total = 0;
  for (MachineId m : rack_machines_.at(r.value)) total += free_slots(m);
  return total;
}

MachineId Placement::free_machine(RackId r) const {
  for (MachineId m : rack_machines_.at(r.value)) {
    if (free_slots(m) > 0) return m;
  }
  return MachineId{};
}

std::vector<LinkId> virtual_link_path(const DataCenterTopology& topo,
                                      const Placement& placement,
                                      InstanceId from, InstanceId to) {
  return topo.machine_path(placement.machine_of(from),
                           placement.machine_of(to));
}

}  // namespace sfc
