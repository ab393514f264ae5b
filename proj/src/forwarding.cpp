#include "sfc/forwarding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sfc {

std::pair<int, int> TagAllocator::allocate() {
  if (next_ + 2 > kCapacity) {
    throw Error(ErrorKind::TagSpaceExhausted,
                "tenant " + tenant_ + " exhausted its " +
                    std::to_string(kCapacity) + " tags");
  }
  const int fwd = next_;
  next_ += 2;
  return {fwd, fwd + 1};
}

FlowKey mangle_key(FlowKey k, const std::string& box) {
  // FNV-1a over the box name, mixed with the key (splitmix64 finaliser).
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : box) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = (k & ~kReverseBit) ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return (z & ~kReverseBit) | (k & kReverseBit);
}

std::string FlowRule::to_line() const {
  char buf[160];
  std::string match;
  if (exact) {
    std::snprintf(buf, sizeof buf, "key=%016llx",
                  static_cast<unsigned long long>(*exact));
    match = buf;
  } else {
    std::snprintf(buf, sizeof buf, "tag=%02d in_port=vm%d", tag, in_port.value);
    match = buf;
  }
  std::string action;
  if (set_tag >= 0) {
    std::snprintf(buf, sizeof buf, "set_tag=%02d goto=tag_table", set_tag);
  } else if (tunnel) {
    std::snprintf(buf, sizeof buf, "output=tun:m%d:vm%d", out_machine.value,
                  out_port.value);
  } else {
    std::snprintf(buf, sizeof buf, "output=vm%d", out_port.value);
  }
  action = buf;
  std::snprintf(buf, sizeof buf, "m%04d, %d, ", vswitch.value, priority);
  return buf + match + ", " + action;
}

namespace {
constexpr int kExactPriority = 200;
constexpr int kTagPriority = 100;

FlowRule tag_rule(MachineId at, int tag, InstanceId from, InstanceId to,
                  MachineId to_machine) {
  FlowRule r;
  r.vswitch = at;
  r.priority = kTagPriority;
  r.tag = tag;
  r.in_port = from;
  r.out_port = to;
  r.out_machine = to_machine;
  r.tunnel = to_machine != at;
  return r;
}

FlowRule exact_rule(MachineId at, FlowKey key, int set_tag) {
  FlowRule r;
  r.vswitch = at;
  r.priority = kExactPriority;
  r.exact = key;
  r.set_tag = set_tag;
  return r;
}
}  // namespace

std::vector<FlowRule> proactive_rules(
    const InstancePath& path,
    const std::function<MachineId(InstanceId)>& machine_of) {
  std::vector<FlowRule> out;
  const auto& seq = path.instances;
  for (std::size_t h = 0; h + 1 < seq.size(); ++h) {
    const MachineId up = machine_of(seq[h]);
    const MachineId down = machine_of(seq[h + 1]);
    out.push_back(tag_rule(up, path.forward_tag, seq[h], seq[h + 1], down));
    out.push_back(tag_rule(down, path.reverse_tag, seq[h + 1], seq[h], up));
  }
  return out;
}

SmoothWrr::SmoothWrr(std::vector<int> weights)
    : weights_(std::move(weights)), current_(weights_.size(), 0) {}

int SmoothWrr::pick() {
  long long total = 0;
  int best = -1;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    current_[k] += weights_[k];
    total += weights_[k];
    if (weights_[k] > 0 && (best < 0 || current_[k] > current_[best])) {
      best = static_cast<int>(k);
    }
  }
  if (best < 0) throw Error(ErrorKind::NoPath, "no path with positive weight");
  current_[best] -= total;
  return best;
}

std::vector<int> integerize_weights(std::span<const double> weights) {
  std::vector<int> out(weights.size(), 0);
  double sum = 0.0;
  for (double w : weights) sum += std::max(0.0, w);
  if (sum <= 0.0) return out;
  for (int d = 1; d <= 1000; ++d) {
    bool exact = true;
    for (double w : weights) {
      const double x = std::max(0.0, w) / sum * d;
      if (std::abs(x - std::round(x)) > 1e-6) {
        exact = false;
        break;
      }
    }
    if (exact) {
      for (std::size_t k = 0; k < weights.size(); ++k) {
        out[k] = static_cast<int>(std::lround(std::max(0.0, weights[k]) / sum * d));
      }
      return out;
    }
  }
  int g = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out[k] = static_cast<int>(std::lround(std::max(0.0, weights[k]) / sum * 1e6));
    g = std::gcd(g, out[k]);
  }
  if (g > 1) {
    for (int& x : out) x /= g;
  }
  return out;
}

ForwardingPlane::ForwardingPlane(std::string tenant)
    : tenant_(tenant), tags_(std::move(tenant)) {}

void ForwardingPlane::register_instance(InstanceId inst,
                                        const std::string& element,
                                        MachineId machine, Role role) {
  if (instances_.count(inst)) {
    throw Error(ErrorKind::InvalidInput,
                "instance " + std::to_string(inst.value) + " already registered");
  }
  if (!machine.valid()) {
    throw Error(ErrorKind::MissingPlacement,
                "instance " + std::to_string(inst.value) + " has no machine");
  }
  InstanceEntry e;
  e.element = element;
  e.machine = machine;
  e.mangling = role == Role::Mangling;
  e.endpoint = role == Role::Endpoint;
  instances_.emplace(inst, std::move(e));
}

void ForwardingPlane::add_chain(const std::string& chain_id,
                                std::vector<Subchain> subchains) {
  for (const auto& sc : subchains) {
    SubchainEntry entry;
    entry.sc = sc;
    subchains_[sc.id] = std::move(entry);
  }
  chains_[chain_id] = std::move(subchains);
}

const ForwardingPlane::InstanceEntry& ForwardingPlane::entry(
    InstanceId inst) const {
  auto it = instances_.find(inst);
  if (it == instances_.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "instance " + std::to_string(inst.value) + " is not registered");
  }
  return it->second;
}

MachineId ForwardingPlane::machine_of(InstanceId inst) const {
  return entry(inst).machine;
}

bool ForwardingPlane::in_service(InstanceId inst) const {
  return entry(inst).in_service;
}

bool ForwardingPlane::path_usable(const InstancePath& p) const {
  return std::all_of(p.instances.begin(), p.instances.end(),
                     [&](InstanceId i) { return entry(i).in_service; });
}

void ForwardingPlane::invalidate_admission() {
  for (auto& [_, sc] : subchains_) {
    sc.wrr.clear();
    sc.wrr_paths.clear();
  }
}

std::vector<std::vector<InstanceId>> ForwardingPlane::candidates(
    const Subchain& sc) const {
  std::vector<std::vector<InstanceId>> per_elem;
  for (const auto& name : sc.elements) {
    std::vector<InstanceId> list;
    for (const auto& [id, e] : instances_) {
      if (e.element == name && e.in_service) list.push_back(id);
    }
    per_elem.push_back(std::move(list));
  }
  return per_elem;
}

int ForwardingPlane::add_path(const std::string& subchain_id,
                              std::vector<InstanceId> seq) {
  auto& sc = subchains_.at(subchain_id);
  for (int pid : sc.paths) {
    if (paths_[pid].instances == seq) return -1;
  }
  InstancePath p;
  p.id = static_cast<int>(paths_.size());
  p.subchain = subchain_id;
  p.instances = std::move(seq);
  std::tie(p.forward_tag, p.reverse_tag) = tags_.allocate();
  for (const FlowRule& r :
       proactive_rules(p, [&](InstanceId i) { return machine_of(i); })) {
    install(r, p.id);
  }
  paths_.push_back(p);
  path_alive_.push_back(1);
  sc.paths.push_back(p.id);
  sc.wrr.clear();
  sc.wrr_paths.clear();
  return p.id;
}

void ForwardingPlane::install(const FlowRule& r, int owner_path) {
  const TagKey key{r.vswitch.value, r.tag, r.in_port.value};
  if (tag_.count(key)) {
    throw Error(ErrorKind::InvalidInput, "conflicting tag rule: " + r.to_line());
  }
  tag_.emplace(key, r);
  tag_owner_.emplace(key, owner_path);
}

std::vector<int> ForwardingPlane::build_paths(const std::string& subchain_id) {
  const auto& sc = subchains_.at(subchain_id).sc;
  const auto per_elem = candidates(sc);
  std::vector<int> created;
  std::vector<std::size_t> idx(per_elem.size(), 0);
  for (const auto& list : per_elem) {
    if (list.empty()) return created;
  }
  while (true) {
    std::vector<InstanceId> seq;
    for (std::size_t k = 0; k < idx.size(); ++k) seq.push_back(per_elem[k][idx[k]]);
    const int id = add_path(subchain_id, std::move(seq));
    if (id >= 0) created.push_back(id);
    std::size_t k = idx.size();
    while (k > 0) {
      --k;
      if (++idx[k] < per_elem[k].size()) break;
      idx[k] = 0;
      if (k == 0) return created;
    }
    if (idx.empty()) return created;
  }
}

std::vector<int> ForwardingPlane::extend_paths_on_provisioning(
    const std::string& subchain_id, InstanceId fresh) {
  const auto& sc = subchains_.at(subchain_id).sc;
  const InstanceEntry& fe = entry(fresh);
  auto per_elem = candidates(sc);
  std::vector<int> created;
  for (std::size_t pos = 0; pos < sc.elements.size(); ++pos) {
    if (sc.elements[pos] != fe.element) continue;
    auto lists = per_elem;
    lists[pos] = {fresh};
    bool empty = false;
    for (const auto& l : lists) empty = empty || l.empty();
    if (empty) continue;
    std::vector<std::size_t> idx(lists.size(), 0);
    bool done = false;
    while (!done) {
      std::vector<InstanceId> seq;
      for (std::size_t k = 0; k < idx.size(); ++k) seq.push_back(lists[k][idx[k]]);
      const int id = add_path(subchain_id, std::move(seq));
      if (id >= 0) created.push_back(id);
      done = true;
      for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < lists[k].size()) {
          done = false;
          break;
        }
        idx[k] = 0;
      }
    }
  }
  return created;
}

void ForwardingPlane::set_weights(const std::string& subchain_id,
                                  const std::map<int, double>& weights) {
  auto& sc = subchains_.at(subchain_id);
  for (int pid : sc.paths) {
    auto it = weights.find(pid);
    paths_[pid].weight = it == weights.end() ? 0.0 : it->second;
  }
  sc.wrr.clear();
  sc.wrr_paths.clear();
}

void ForwardingPlane::retire_instance(InstanceId inst) {
  auto it = instances_.find(inst);
  if (it == instances_.end()) entry(inst);  // throws
  it->second.in_service = false;
  invalidate_admission();
}

void ForwardingPlane::restore_instance(InstanceId inst) {
  auto it = instances_.find(inst);
  if (it == instances_.end()) entry(inst);
  it->second.in_service = true;
  invalidate_admission();
}

int ForwardingPlane::flows_through(InstanceId inst) const {
  int n = 0;
  for (const auto& [pid, count] : path_flows_) {
    if (!path_alive_[pid] || count == 0) continue;
    const auto& seq = paths_[pid].instances;
    if (std::find(seq.begin(), seq.end(), inst) != seq.end()) n += count;
  }
  return n;
}

void ForwardingPlane::destroy_instance(InstanceId inst) {
  entry(inst);
  if (flows_through(inst) > 0) {
    throw Error(ErrorKind::InvalidInput,
                "instance " + std::to_string(inst.value) +
                    " still carries flows");
  }
  for (auto& [_, sc] : subchains_) {
    std::vector<int> keep;
    for (int pid : sc.paths) {
      const auto& seq = paths_[pid].instances;
      if (std::find(seq.begin(), seq.end(), inst) == seq.end()) {
        keep.push_back(pid);
        continue;
      }
      path_alive_[pid] = 0;
      for (auto it = tag_owner_.begin(); it != tag_owner_.end();) {
        if (it->second == pid) {
          tag_.erase(it->first);
          it = tag_owner_.erase(it);
        } else {
          ++it;
        }
      }
    }
    sc.paths = std::move(keep);
  }
  instances_.erase(inst);
  invalidate_admission();
}

int ForwardingPlane::pick_path(SubchainEntry& sc, InstanceId head) {
  const int key = head.valid() ? head.value : -1;
  auto it = sc.wrr.find(key);
  if (it == sc.wrr.end()) {
    std::vector<int> ids;
    std::vector<double> w;
    for (int pid : sc.paths) {
      const auto& p = paths_[pid];
      if (head.valid() && p.instances.front() != head) continue;
      if (!path_usable(p)) continue;
      ids.push_back(pid);
      w.push_back(p.weight);
    }
    if (ids.empty()) {
      throw Error(ErrorKind::NoPath, "subchain " + sc.sc.id +
                                         " has no usable path from head " +
                                         std::to_string(key));
    }
    if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; })) {
      std::fill(w.begin(), w.end(), 1.0);
    }
    sc.wrr_paths[key] = ids;
    it = sc.wrr.emplace(key, SmoothWrr(integerize_weights(w))).first;
  }
  return sc.wrr_paths.at(key)[static_cast<std::size_t>(it->second.pick())];
}

int ForwardingPlane::admit_flow(const std::string& chain_id, FlowKey key,
                                double rate_mbps, InstanceId source) {
  const auto& subs = subchains_of(chain_id);
  Flow f;
  f.id = static_cast<int>(flows_.size());
  f.chain = chain_id;
  f.key = key & ~kReverseBit;
  f.rate_mbps = rate_mbps;

  // Pick every segment first so a failure leaves no partial state.
  InstanceId head = source;
  FlowKey k = f.key;
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const int pid = pick_path(subchains_.at(subs[s].id), head);
    const auto& p = paths_[pid];
    if (s > 0) k = mangle_key(k, entry(p.instances.front()).element);
    f.pinned.push_back(pid);
    f.seg_keys.push_back(k);
    head = p.instances.back();
  }
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const auto& p = paths_[f.pinned[s]];
    const ExactKey fwd{machine_of(p.instances.front()).value, f.seg_keys[s]};
    const ExactKey rev{machine_of(p.instances.back()).value,
                       reverse_key(f.seg_keys[s])};
    if (exact_.count(fwd) || exact_.count(rev)) {
      throw Error(ErrorKind::InvalidInput, "flow key already admitted");
    }
  }
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const auto& p = paths_[f.pinned[s]];
    const MachineId hm = machine_of(p.instances.front());
    const MachineId em = machine_of(p.instances.back());
    exact_.emplace(ExactKey{hm.value, f.seg_keys[s]},
                   exact_rule(hm, f.seg_keys[s], p.forward_tag));
    exact_.emplace(ExactKey{em.value, reverse_key(f.seg_keys[s])},
                   exact_rule(em, reverse_key(f.seg_keys[s]), p.reverse_tag));
    if (s + 1 < subs.size()) {
      nat_[{p.instances.back().value, reverse_key(f.seg_keys[s + 1])}] =
          reverse_key(f.seg_keys[s]);
    }
    ++path_flows_[f.pinned[s]];
  }
  f.source = paths_[f.pinned.front()].instances.front();
  f.sink = paths_[f.pinned.back()].instances.back();
  flows_.push_back(std::move(f));
  return flows_.back().id;
}

void ForwardingPlane::finish_flow(int flow_id) {
  Flow& f = flows_.at(static_cast<std::size_t>(flow_id));
  if (f.state == FlowState::Finished) return;
  for (std::size_t s = 0; s < f.pinned.size(); ++s) {
    const auto& p = paths_[f.pinned[s]];
    exact_.erase({machine_of(p.instances.front()).value, f.seg_keys[s]});
    exact_.erase(
        {machine_of(p.instances.back()).value, reverse_key(f.seg_keys[s])});
    if (s + 1 < f.pinned.size()) {
      nat_.erase({p.instances.back().value, reverse_key(f.seg_keys[s + 1])});
    }
    --path_flows_[f.pinned[s]];
  }
  f.state = FlowState::Finished;
}

FlowTrace ForwardingPlane::trace_flow(int flow_id) const {
  const Flow& f = flow(flow_id);
  auto hole = [&](const char* what, InstanceId at) {
    return Error(ErrorKind::ForwardingHole,
                 "flow " + std::to_string(flow_id) + ": " + what +
                     " at instance " + std::to_string(at.value));
  };
  auto walk = [&](InstanceId cur, FlowKey key, bool reverse) {
    std::vector<InstanceId> seq{cur};
    int tag = -1;
    for (int step = 0; step < 256; ++step) {
      const MachineId m = machine_of(cur);
      if (tag < 0) {
        auto r = exact_.find({m.value, key});
        if (r == exact_.end()) throw hole("no reactive rule", cur);
        tag = r->second.set_tag;
      }
      auto r = tag_.find({m.value, tag, cur.value});
      if (r == tag_.end()) throw hole("no tag rule", cur);
      const InstanceId next = r->second.out_port;
      if (!instances_.count(next) || machine_of(next) != r->second.out_machine) {
        throw hole("stale output port", cur);
      }
      seq.push_back(next);
      cur = next;
      const InstanceEntry& e = entry(cur);
      if (e.endpoint) return seq;
      if (e.mangling) {
        if (reverse) {
          auto n = nat_.find({cur.value, key});
          if (n == nat_.end()) throw hole("no mangler state", cur);
          key = n->second;
        } else {
          key = mangle_key(key, e.element);
        }
        tag = -1;
      }
    }
    throw hole("forwarding loop", cur);
  };
  FlowTrace t;
  t.forward = walk(f.source, f.key, false);
  t.reverse = walk(f.sink, reverse_key(f.seg_keys.back()), true);
  return t;
}

const Flow& ForwardingPlane::flow(int flow_id) const {
  if (flow_id < 0 || flow_id >= static_cast<int>(flows_.size())) {
    throw Error(ErrorKind::InvalidInput, "unknown flow " + std::to_string(flow_id));
  }
  return flows_[static_cast<std::size_t>(flow_id)];
}

std::vector<int> ForwardingPlane::active_flows() const {
  std::vector<int> out;
  for (const auto& f : flows_) {
    if (f.state != FlowState::Finished) out.push_back(f.id);
  }
  return out;
}

const InstancePath& ForwardingPlane::path(int path_id) const {
  return paths_.at(static_cast<std::size_t>(path_id));
}

std::vector<int> ForwardingPlane::paths_of(const std::string& subchain_id) const {
  return subchains_.at(subchain_id).paths;
}

const std::vector<Subchain>& ForwardingPlane::subchains_of(
    const std::string& chain_id) const {
  auto it = chains_.find(chain_id);
  if (it == chains_.end()) {
    throw Error(ErrorKind::InvalidInput, "unknown chain " + chain_id);
  }
  return it->second;
}

std::string ForwardingPlane::dump_rules() const {
  std::vector<std::string> lines;
  for (const auto& [_, r] : exact_) lines.push_back(r.to_line());
  for (const auto& [_, r] : tag_) lines.push_back(r.to_line());
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

void ForwardingPlane::corrupt_flow_rule(int flow_id, std::size_t subchain_index,
                                        int tag) {
  const Flow& f = flow(flow_id);
  const auto& p = paths_[f.pinned.at(subchain_index)];
  auto it = exact_.find(
      {machine_of(p.instances.front()).value, f.seg_keys[subchain_index]});
  if (it != exact_.end()) it->second.set_tag = tag;
}

}  // namespace sfc
