#include "sfc/deployment.hpp"

#include <algorithm>

namespace sfc {

Deployment::Deployment(DataCenterTopology topo, const MBoxCatalog& mboxes,
                       const std::vector<LogicalChain>& chains,
                       bool with_forwarding, std::string tenant)
    : tenant_(std::move(tenant)),
      topo_(std::move(topo)),
      placement_(topo_) {
  validate_chains(chains, mboxes);
  transformed_ = transform_chains(chains, mboxes);
  if (with_forwarding) forwarding_ = std::make_unique<ForwardingPlane>(tenant_);
  for (const auto& c : transformed_.chains) {
    auto subs = split_subchains(c, transformed_.mboxes);
    if (forwarding_) forwarding_->add_chain(c.id, subs);
    subchains_[c.id] = std::move(subs);
  }
}

bool Deployment::is_mbox(const std::string& element) const {
  return transformed_.mboxes.count(element) != 0;
}

bool Deployment::is_endpoint(const std::string& element) const {
  for (const auto& c : transformed_.chains) {
    if (c.source == element || c.sink == element) return true;
  }
  return false;
}

const LogicalChain& Deployment::chain(const std::string& chain_id) const {
  return transformed_.chains.at(static_cast<std::size_t>(chain_index(chain_id)));
}

int Deployment::chain_index(const std::string& chain_id) const {
  for (std::size_t k = 0; k < transformed_.chains.size(); ++k) {
    if (transformed_.chains[k].id == chain_id) return static_cast<int>(k);
  }
  throw Error(ErrorKind::InvalidInput, "unknown chain " + chain_id);
}

std::vector<std::string> Deployment::positions(const std::string& chain_id) const {
  return chain(chain_id).elements;
}

std::set<std::string> Deployment::neighbors(const std::string& element) const {
  std::set<std::string> out;
  for (const auto& c : transformed_.chains) {
    const auto seq = c.full_sequence();
    for (std::size_t k = 0; k < seq.size(); ++k) {
      if (seq[k] != element) continue;
      if (k > 0) out.insert(seq[k - 1]);
      if (k + 1 < seq.size()) out.insert(seq[k + 1]);
    }
  }
  return out;
}

InstanceId Deployment::launch(const std::string& element, MachineId machine,
                              double ready_at, bool ready) {
  if (!is_mbox(element) && !is_endpoint(element)) {
    throw Error(ErrorKind::InvalidInput, "unknown element " + element);
  }
  const InstanceId id(next_id_);
  placement_.place(id, machine);
  ++next_id_;
  DeployedInstance d;
  d.id = id;
  d.element = element;
  d.endpoint = !is_mbox(element);
  d.machine = machine;
  d.state = InstanceState::Launching;
  d.ready_at = ready_at;
  instances_.emplace(id, d);
  if (forwarding_) {
    const auto role = d.endpoint ? ForwardingPlane::Role::Endpoint
                      : transformed_.mboxes.at(element).is_mangling
                          ? ForwardingPlane::Role::Mangling
                          : ForwardingPlane::Role::Middlebox;
    forwarding_->register_instance(id, element, machine, role);
    forwarding_->retire_instance(id);
  }
  if (ready) activate(id);
  return id;
}

void Deployment::activate(InstanceId inst) {
  auto& d = instances_.at(inst);
  if (d.state != InstanceState::Launching) return;
  d.state = InstanceState::Active;
  if (forwarding_) {
    forwarding_->restore_instance(inst);
    extend_forwarding(inst);
  }
}

void Deployment::extend_forwarding(InstanceId inst) {
  const std::string& element = instances_.at(inst).element;
  for (const auto& [chain_id, subs] : subchains_) {
    for (const auto& sc : subs) {
      if (std::find(sc.elements.begin(), sc.elements.end(), element) ==
          sc.elements.end()) {
        continue;
      }
      bool complete = true;
      for (const auto& e : sc.elements) complete = complete && !instances(e).empty();
      if (!complete) continue;
      if (forwarding_->paths_of(sc.id).empty()) {
        forwarding_->build_paths(sc.id);
      } else {
        forwarding_->extend_paths_on_provisioning(sc.id, inst);
      }
    }
  }
  refresh_weights();
}

void Deployment::retire(InstanceId inst) {
  auto& d = instances_.at(inst);
  d.state = InstanceState::Retired;
  if (forwarding_) forwarding_->retire_instance(inst);
}

void Deployment::restore(InstanceId inst) {
  auto& d = instances_.at(inst);
  if (d.state != InstanceState::Retired) return;
  d.state = InstanceState::Active;
  if (forwarding_) forwarding_->restore_instance(inst);
}

void Deployment::destroy(InstanceId inst) {
  auto& d = instances_.at(inst);
  if (d.state == InstanceState::Destroyed) return;
  if (forwarding_) forwarding_->destroy_instance(inst);
  placement_.remove(inst);
  d.state = InstanceState::Destroyed;
}

const DeployedInstance& Deployment::instance(InstanceId inst) const {
  auto it = instances_.find(inst);
  if (it == instances_.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "unknown instance " + std::to_string(inst.value));
  }
  return it->second;
}

std::vector<InstanceId> Deployment::instances(const std::string& element,
                                              bool active_only) const {
  std::vector<InstanceId> out;
  for (const auto& [id, d] : instances_) {
    if (d.element != element || d.state == InstanceState::Destroyed) continue;
    if (active_only && d.state != InstanceState::Active) continue;
    out.push_back(id);
  }
  return out;
}

int Deployment::tags_needed(const std::string& element) const {
  if (!forwarding_) return 0;
  int total = 0;
  for (const auto& [chain_id, subs] : subchains_) {
    for (const auto& sc : subs) {
      for (std::size_t pos = 0; pos < sc.elements.size(); ++pos) {
        if (sc.elements[pos] != element) continue;
        int paths = 1;
        for (std::size_t k = 0; k < sc.elements.size(); ++k) {
          if (k != pos) paths *= static_cast<int>(instances(sc.elements[k], false).size());
        }
        total += 2 * paths;
      }
    }
  }
  return total;
}

int Deployment::tags_available() const {
  if (!forwarding_) return TagAllocator::kCapacity;
  int left = TagAllocator::kCapacity - forwarding_->tags().allocated();
  for (const auto& [id, d] : instances_) {
    if (d.state == InstanceState::Launching) left -= tags_needed(d.element);
  }
  return left;
}

std::vector<InstanceId> Deployment::live_instances() const {
  std::vector<InstanceId> out;
  for (const auto& [id, d] : instances_) {
    if (d.state != InstanceState::Destroyed) out.push_back(id);
  }
  return out;
}

int Deployment::mbox_instance_count() const {
  int n = 0;
  for (const auto& [_, d] : instances_) {
    if (!d.endpoint && d.state != InstanceState::Destroyed) ++n;
  }
  return n;
}

RackId Deployment::rack_of(InstanceId inst) const {
  return topo_.rack_of(instance(inst).machine);
}

FlowProblem Deployment::flow_problem(const std::map<std::string, double>& demand,
                                     BandwidthFn bandwidth, double leeway,
                                     const ProblemTweak& tweak,
                                     const std::vector<std::string>& only) const {
  FlowProblem p;
  p.bandwidth = std::move(bandwidth);
  p.leeway = leeway;
  auto members = [&](const std::string& element) {
    std::vector<InstanceId> ids;
    for (InstanceId i : instances(element)) {
      if (i != tweak.without) ids.push_back(i);
    }
    if (tweak.extra && tweak.extra->first == element) ids.push_back(tweak.extra_id);
    return ids;
  };
  auto note = [&](InstanceId i, const std::string& element) {
    InstanceInfo info;
    info.rack = (tweak.extra && i == tweak.extra_id) ? tweak.extra->second
                                                     : rack_of(i);
    info.capacity_mbps = is_mbox(element)
                             ? transformed_.mboxes.at(element).capacity_mbps
                             : kUnbounded;
    p.instances[i] = info;
  };
  for (const auto& c : transformed_.chains) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
      continue;
    }
    ChainFlowSpec spec;
    spec.id = c.id;
    auto it = demand.find(c.id);
    spec.demand = it == demand.end() ? 0.0 : it->second;
    spec.sources = members(c.source);
    for (InstanceId i : spec.sources) note(i, c.source);
    for (const auto& e : c.elements) {
      spec.positions.push_back(members(e));
      for (InstanceId i : spec.positions.back()) note(i, e);
      spec.gains.push_back(transformed_.mboxes.at(e).gain);
    }
    spec.sinks = members(c.sink);
    for (InstanceId i : spec.sinks) note(i, c.sink);
    p.chains.push_back(std::move(spec));
  }
  return p;
}

void Deployment::apply_distribution(const FlowProblem& problem,
                                    const FlowDistribution& dist) {
  applied_problem_ = problem;
  applied_ = dist;
  refresh_weights();
}

void Deployment::set_applied(const FlowProblem& problem,
                             const std::optional<FlowDistribution>& dist) {
  applied_problem_ = problem;
  applied_ = dist;
  refresh_weights();
}

void Deployment::refresh_weights() {
  if (!forwarding_ || !applied_) return;
  for (int c = 0; c < static_cast<int>(applied_problem_.chains.size()); ++c) {
    const std::string& id = applied_problem_.chains[c].id;
    const auto seq = chain(id).full_sequence();
    for (const auto& sc : subchains_.at(id)) {
      const auto pids = forwarding_->paths_of(sc.id);
      if (pids.empty()) continue;
      const auto k0 = static_cast<int>(
          std::find(seq.begin(), seq.end(), sc.head()) - seq.begin());
      std::vector<std::vector<InstanceId>> paths;
      for (int pid : pids) paths.push_back(forwarding_->path(pid).instances);
      const auto w = derive_path_weights(*applied_, c, k0, paths);
      std::map<int, double> weights;
      for (std::size_t k = 0; k < pids.size(); ++k) weights[pids[k]] = w[k];
      forwarding_->set_weights(sc.id, weights);
    }
  }
}

}  // namespace sfc
