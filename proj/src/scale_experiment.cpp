#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "sfc/flow_distribution.hpp"
#include "sfc/simulator.hpp"

namespace sfc {

double PolicyOutcome::share_at_least(double fraction) const {
  if (satisfaction.empty()) return 0.0;
  const auto n = std::count_if(satisfaction.begin(), satisfaction.end(),
                               [&](double s) { return s >= fraction - 1e-9; });
  return static_cast<double>(n) / static_cast<double>(satisfaction.size());
}

double PolicyOutcome::share_instances_at_least(double mbps) const {
  if (instance_mbps.empty()) return 0.0;
  const auto n = std::count_if(instance_mbps.begin(), instance_mbps.end(),
                               [&](double v) { return v >= mbps - 1e-9; });
  return static_cast<double>(n) / static_cast<double>(instance_mbps.size());
}

double PolicyOutcome::median_instance_mbps() const {
  if (instance_mbps.empty()) return 0.0;
  auto v = instance_mbps;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const PolicyOutcome& ScaleExperimentResult::of(Policy p) const {
  for (const auto& o : outcomes) {
    if (o.policy == p) return o;
  }
  throw Error(ErrorKind::InvalidInput, std::string("no outcome for ") + to_string(p));
}

std::string ScaleExperimentResult::distributions_csv() const {
  std::string out = "policy,distribution,index,value\n";
  char buf[128];
  for (const auto& o : outcomes) {
    auto emit = [&](const char* name, const std::vector<double>& xs) {
      for (std::size_t k = 0; k < xs.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.6f\n", to_string(o.policy),
                      name, k, xs[k]);
        out += buf;
      }
    };
    emit("satisfaction", o.satisfaction);
    emit("instance_mbps", o.instance_mbps);
    emit("inter_rack_mbps", o.inter_rack_mbps);
  }
  return out;
}

std::string ScaleExperimentResult::summary() const {
  std::string out;
  char buf[256];
  for (const auto& o : outcomes) {
    std::vector<double> s = o.satisfaction;
    std::sort(s.begin(), s.end());
    auto q = [&](double p) {
      return s.empty() ? 0.0 : s[static_cast<std::size_t>(p * (s.size() - 1))];
    };
    std::snprintf(buf, sizeof buf,
                  "%-11s chains>=30%%: %5.1f%%  chains>=85%%: %5.1f%%  "
                  "satisfaction p10/p50/p90: %.2f/%.2f/%.2f\n",
                  to_string(o.policy), 100.0 * o.share_at_least(0.30),
                  100.0 * o.share_at_least(0.85), q(0.1), q(0.5), q(0.9));
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "%-11s instances: %d  scale steps: %d  instances>=5Mbps: %5.1f%%  "
                  "median instance Mbps: %.1f  runtime: %.1fs\n",
                  to_string(o.policy), o.instances, o.scale_steps,
                  100.0 * o.share_instances_at_least(5.0), o.median_instance_mbps(),
                  o.runtime_s);
    out += buf;
  }
  return out;
}

namespace {

struct Inst {
  RackId rack;
  MachineId machine;
  double capacity = kUnbounded;
};

struct ChainState {
  std::vector<InstanceId> sources;
  std::vector<std::vector<InstanceId>> positions;
  std::vector<InstanceId> sinks;
  FlowDistribution dist;
  double served = 0.0;
  double seen = 0.0;  // served as the policy perceives it
  std::map<int, double> link_load;  // own load per link
  bool done = false;
};

class Experiment {
 public:
  Experiment(const ScaleExperimentConfig& cfg, Policy policy)
      : cfg_(cfg),
        policy_(policy),
        topo_(DataCenterTopology::build_tree(spec(cfg))),
        placement_(topo_),
        rng_(cfg.seed),
        load_(topo_.links().size(), 0.0) {}

  PolicyOutcome run() {
    const auto start = std::chrono::steady_clock::now();
    PolicyOutcome out;
    out.policy = policy_;
    chains_.resize(static_cast<std::size_t>(cfg_.chains));
    for (auto& c : chains_) {
      for (int k = 0; k < cfg_.generators; ++k) c.sources.push_back(place_random(kUnbounded));
      c.positions.resize(cfg_.boxes.size());
      for (std::size_t j = 0; j < cfg_.boxes.size(); ++j) {
        for (int k = 0; k < cfg_.initial_instances[j]; ++k) {
          c.positions[j].push_back(place_random(cfg_.capacities[j]));
        }
      }
      for (int k = 0; k < cfg_.servers; ++k) c.sinks.push_back(place_random(kUnbounded));
    }
    level_ = cfg_.fill_step_mbps > 0.0 ? cfg_.fill_step_mbps : demand();
    for (std::size_t c = 0; c < chains_.size(); ++c) commit(c, evaluate(c));

    for (int round = 0; round < cfg_.max_rounds; ++round) {
      bool progress = false;
      if (level_ < demand()) {
        // Raise every chain's target and let it grow into the new level
        // with the instances it already has.
        level_ = std::min(demand(), level_ + cfg_.fill_step_mbps);
        progress = true;
        for (std::size_t c = 0; c < chains_.size(); ++c) {
          if (chains_[c].done) continue;
          Eval ev = evaluate(c);
          if (ev.served > chains_[c].served + 1e-6 || ev.seen > chains_[c].seen + 1e-6) {
            commit(c, std::move(ev));
          }
        }
      }
      // Least-served chains pick free slots first.
      std::vector<std::size_t> order(chains_.size());
      for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
      std::stable_sort(order.begin(), order.end(), [this](std::size_t x, std::size_t y) {
        return chains_[x].served < chains_[y].served;
      });
      for (std::size_t c : order) {
        if (chains_[c].done) continue;
        if (scale_once(c)) {
          progress = true;
          ++out.scale_steps;
        }
      }
      if (!progress) break;
    }

    for (std::size_t c = 0; c < chains_.size(); ++c) {
      const auto& st = chains_[c];
      // Per-rack-pair bandwidth rows do not see links shared by several pairs.
      double lam = 1.0;
      for (const auto& [l, own] : st.link_load) {
        if (own <= 1e-9) continue;
        const double others = load_[l] - own;
        lam = std::min(lam, std::max(0.0, topo_.link(LinkId(l)).capacity - others) / own);
      }
      out.satisfaction.push_back(std::clamp(lam * st.served / demand(), 0.0, 1.0));
      double inter = 0.0;
      std::map<InstanceId, double> per_inst;
      for (const auto& e : st.dist.edges) {
        per_inst[e.to] += lam * e.mbps;
        if (e.from.valid() && inst_.at(e.from).rack != inst_.at(e.to).rack) {
          inter += lam * e.mbps;
        }
      }
      out.inter_rack_mbps.push_back(inter);
      for (const auto& pos : st.positions) {
        for (InstanceId i : pos) {
          out.instance_mbps.push_back(per_inst.count(i) ? per_inst[i] : 0.0);
        }
      }
    }
    out.instances = static_cast<int>(out.instance_mbps.size());
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  static TopologySpec spec(const ScaleExperimentConfig& cfg) {
    TopologySpec s;
    s.racks = cfg.racks;
    s.machines_per_rack = 1;
    s.slots_per_machine = cfg.slots_per_rack;
    s.agg_fanout = cfg.agg_fanout;
    s.core_fanout = cfg.core_fanout;
    s.link_capacity_mbps = cfg.link_capacity_mbps;
    return s;
  }

  double demand() const { return cfg_.generators * cfg_.generator_mbps; }
  double target() const { return std::min(demand(), level_); }

  InstanceId place_at(RackId r, double capacity) {
    const InstanceId id(next_id_++);
    place_as(id, r, capacity);
    return id;
  }

  InstanceId place_random(double capacity) {
    std::vector<int> open;
    for (int r = 0; r < topo_.rack_count(); ++r) {
      if (placement_.free_slots(RackId(r)) > 0) open.push_back(r);
    }
    if (open.empty()) throw Error(ErrorKind::CapacityExhausted, "scale experiment: no free slot");
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    return place_at(RackId(open[pick(rng_)]), capacity);
  }

  void unplace(InstanceId id) {
    placement_.remove(id);
    inst_.erase(id);
  }

  FlowProblem problem(std::size_t c) const {
    const auto& st = chains_[c];
    FlowProblem p;
    ChainFlowSpec spec;
    spec.id = "chain" + std::to_string(c);
    spec.demand = target();
    spec.sources = st.sources;
    spec.positions = st.positions;
    spec.sinks = st.sinks;
    spec.gains = cfg_.gains;
    p.chains.push_back(spec);
    auto note = [&](InstanceId i) { p.instances[i] = InstanceInfo{inst_.at(i).rack, inst_.at(i).capacity}; };
    for (InstanceId i : st.sources) note(i);
    for (const auto& pos : st.positions) {
      for (InstanceId i : pos) note(i);
    }
    for (InstanceId i : st.sinks) note(i);
    p.leeway = 0.15;
    // Residual bandwidth with this chain's own load taken out.
    p.bandwidth = [this, c](RackId a, RackId b) {
      if (a == b) return kUnbounded;
      const auto& own = chains_[c].link_load;
      double avail = kUnbounded;
      const auto path = topo_.machine_path(topo_.machines_in(a)[0], topo_.machines_in(b)[0]);
      for (LinkId l : path) {
        auto it = own.find(l.value);
        const double used = load_[l.value] - (it == own.end() ? 0.0 : it->second);
        avail = std::min(avail, std::max(0.0, topo_.link(l).capacity - used));
      }
      return avail;
    };
    return p;
  }

  struct Eval {
    FlowDistribution dist;
    double served = 0.0;
    double seen = 0.0;
    double objective = 0.0;
  };

  FlowDistribution solve_policy(const FlowProblem& p) const {
    if (policy_ == Policy::UniformFlow) return scale_to_fit(p, uniform_distribution(p));
    bool enough = true;
    for (std::size_t j = 0; j < p.chains[0].positions.size(); ++j) {
      double cap = 0.0;
      for (InstanceId i : p.chains[0].positions[j]) cap += inst_.at(i).capacity;
      enough = enough && cap >= target() * p.chains[0].volume_scale(static_cast<int>(j));
    }
    if (enough) {
      try {
        return solve_flow_distribution(p);
      } catch (const InfeasibleError&) {
      }
    }
    return solve_max_throughput(p);
  }

  double others_on(std::size_t c, int link) const {
    const auto& mine = chains_[c].link_load;
    auto it = mine.find(link);
    return load_[link] - (it == mine.end() ? 0.0 : it->second);
  }

  Eval evaluate(std::size_t c) const {
    FlowProblem p = problem(c);
    const BandwidthFn residual = p.bandwidth;
    // Rack-pair budgets tightened where pairs of this chain overlap on a link.
    std::map<std::pair<int, int>, double> budget;
    p.bandwidth = [&](RackId a, RackId b) {
      double v = residual(a, b);
      auto it = budget.find(std::minmax(a.value, b.value));
      if (it != budget.end()) v = std::min(v, it->second);
      return v;
    };
    auto pair_links = [&](int a, int b) {
      return topo_.machine_path(topo_.machines_in(RackId(a))[0],
                                topo_.machines_in(RackId(b))[0]);
    };
    Eval ev;
    for (int round = 0;; ++round) {
      ev.dist = solve_policy(p);
      if (policy_ == Policy::UniformFlow || round >= cfg_.bandwidth_refinements) break;
      std::map<std::pair<int, int>, double> pair_flow;
      for (const auto& e : ev.dist.edges) {
        if (!e.from.valid() || e.mbps <= 0.0) continue;
        const int a = inst_.at(e.from).rack.value;
        const int b = inst_.at(e.to).rack.value;
        if (a != b) pair_flow[std::minmax(a, b)] += e.mbps;
      }
      std::map<int, double> own;
      for (const auto& [pr, f] : pair_flow) {
        for (LinkId l : pair_links(pr.first, pr.second)) own[l.value] += f;
      }
      std::map<int, double> ratio;
      for (const auto& [l, v] : own) {
        const double free = topo_.link(LinkId(l)).capacity - others_on(c, l);
        if (v > free + 1e-6) ratio[l] = std::max(0.0, free) / v;
      }
      if (ratio.empty()) break;
      for (const auto& [pr, f] : pair_flow) {
        double r = 1.0;
        for (LinkId l : pair_links(pr.first, pr.second)) {
          auto it = ratio.find(l.value);
          if (it != ratio.end()) r = std::min(r, it->second);
        }
        if (r < 1.0) {
          auto it = budget.find(pr);
          budget[pr] = std::min(it == budget.end() ? kUnbounded : it->second, f * r);
        }
      }
    }
    // Rack-pair rows cannot see several pairs sharing one physical link, so
    // shrink the whole chain until every link it crosses fits.
    std::map<int, double> own;
    for (const auto& e : ev.dist.edges) {
      if (!e.from.valid() || e.mbps <= 0.0) continue;
      for (LinkId l : topo_.machine_path(inst_.at(e.from).machine, inst_.at(e.to).machine)) {
        own[l.value] += e.mbps;
      }
    }
    double lam = 1.0;
    for (const auto& [l, v] : own) {
      if (v <= 1e-9) continue;
      lam = std::min(lam, std::max(0.0, topo_.link(LinkId(l)).capacity - others_on(c, l)) / v);
    }
    if (lam < 1.0) {
      for (auto& e : ev.dist.edges) e.mbps *= lam;
      for (auto& s : ev.dist.served) s *= lam;
      ev.dist.objective *= lam;
    }
    ev.served = ev.dist.served.empty() ? 0.0 : ev.dist.served[0];
    ev.seen = ev.served;
    if (policy_ == Policy::UniformFlow) {
      // Compute-only view: the network is invisible to this policy.
      FlowProblem local = problem(c);
      local.bandwidth = [](RackId, RackId) { return kUnbounded; };
      const auto d = scale_to_fit(local, uniform_distribution(local));
      ev.seen = d.served.empty() ? 0.0 : d.served[0];
    }
    ev.objective = ev.dist.objective;
    return ev;
  }

  void commit(std::size_t c, Eval ev) {
    auto& st = chains_[c];
    for (const auto& [l, v] : st.link_load) load_[l] -= v;
    st.link_load.clear();
    for (const auto& e : ev.dist.edges) {
      if (!e.from.valid() || e.mbps <= 0.0) continue;
      for (LinkId l : topo_.machine_path(inst_.at(e.from).machine, inst_.at(e.to).machine)) {
        st.link_load[l.value] += e.mbps;
      }
    }
    for (const auto& [l, v] : st.link_load) load_[l] += v;
    st.dist = std::move(ev.dist);
    st.served = ev.served;
    st.seen = ev.seen;
  }

  // Racks to try for a new instance at position j, nearest tier first.
  std::vector<RackId> candidates(std::size_t c, std::size_t j) {
    if (policy_ == Policy::UniformFlow) {
      // Network-oblivious: one seeded-random rack with a free slot.
      std::vector<int> open;
      for (int r = 0; r < topo_.rack_count(); ++r) {
        if (placement_.free_slots(RackId(r)) > 0) open.push_back(r);
      }
      if (open.empty()) return {};
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      return {RackId(open[pick(rng_)])};
    }
    const auto& st = chains_[c];
    std::set<int> near;
    auto add = [&](const std::vector<InstanceId>& ids) {
      for (InstanceId i : ids) near.insert(inst_.at(i).rack.value);
    };
    add(j == 0 ? st.sources : st.positions[j - 1]);
    add(j + 1 == st.positions.size() ? st.sinks : st.positions[j + 1]);
    std::vector<RackId> tier1, tier2, tier3;
    for (int r = 0; r < topo_.rack_count(); ++r) {
      if (placement_.free_slots(RackId(r)) <= 0) continue;
      if (near.count(r)) {
        tier1.push_back(RackId(r));
        continue;
      }
      bool close = false;
      for (int n : near) close = close || topo_.switch_hops(RackId(r), RackId(n)) <= 2;
      (close ? tier2 : tier3).push_back(RackId(r));
    }
    for (auto* tier : {&tier1, &tier2, &tier3}) {
      if (tier->empty()) continue;
      if (static_cast<int>(tier->size()) > cfg_.max_candidates) {
        std::shuffle(tier->begin(), tier->end(), rng_);
        tier->resize(static_cast<std::size_t>(cfg_.max_candidates));
        std::sort(tier->begin(), tier->end());
      }
      return *tier;
    }
    return {};
  }

  void place_as(InstanceId id, RackId r, double capacity) {
    const MachineId m = placement_.free_machine(r);
    placement_.place(id, m);
    inst_[id] = Inst{r, m, capacity};
  }

  // Best placement for one extra instance at position j; nullopt if no slot.
  std::optional<std::pair<InstanceId, Eval>> try_add(std::size_t c, std::size_t j) {
    auto& pos = chains_[c].positions[j];
    const InstanceId id(next_id_);
    std::optional<Eval> best;
    RackId best_rack;
    for (RackId r : candidates(c, j)) {
      place_as(id, r, cfg_.capacities[j]);
      pos.push_back(id);
      Eval ev = evaluate(c);
      pos.pop_back();
      unplace(id);
      if (!best || ev.seen > best->seen + 1e-6 ||
          (std::abs(ev.seen - best->seen) <= 1e-6 && ev.served > best->served + 1e-6) ||
          (std::abs(ev.seen - best->seen) <= 1e-6 && std::abs(ev.served - best->served) <= 1e-6 &&
           ev.objective < best->objective - 1e-9)) {
        best = std::move(ev);
        best_rack = r;
      }
    }
    if (!best) return std::nullopt;
    place_as(id, best_rack, cfg_.capacities[j]);
    ++next_id_;
    return std::make_pair(id, std::move(*best));
  }

  bool scale_once(std::size_t c) {
    auto& st = chains_[c];
    if (st.seen >= cfg_.satisfied_fraction * target()) {
      if (target() >= demand()) st.done = true;
      return false;
    }
    // Saturated positions first, then the rest in chain order.
    std::vector<std::size_t> order;
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < st.positions.size(); ++j) {
      double load = 0.0;
      double cap = 0.0;
      for (InstanceId i : st.positions[j]) {
        load += st.dist.inflow(0, i);
        cap += inst_.at(i).capacity;
      }
      bool saturated = load >= 0.999 * cap;
      if (policy_ == Policy::UniformFlow) {
        saturated = false;
        for (InstanceId i : st.positions[j]) {
          saturated = saturated || st.dist.inflow(0, i) >= 0.999 * inst_.at(i).capacity;
        }
      }
      (saturated ? order : rest).push_back(j);
    }
    order.insert(order.end(), rest.begin(), rest.end());
    const double before = st.seen;
    const double before_footprint = st.dist.objective;
    for (std::size_t j : order) {
      auto added = try_add(c, j);
      if (!added) {
        st.done = true;
        return false;
      }
      const auto& ev = added->second;
      const bool gain = ev.seen > before + 1e-6 ||
                        (cfg_.accept_footprint_gain && ev.seen >= before - 1e-6 &&
                         ev.objective < before_footprint - cfg_.min_footprint_gain_mbps);
      if (gain) {
        st.positions[j].push_back(added->first);
        commit(c, std::move(added->second));
        return true;
      }
      unplace(added->first);
    }
    st.done = true;
    return false;
  }

  const ScaleExperimentConfig& cfg_;
  Policy policy_;
  DataCenterTopology topo_;
  Placement placement_;
  std::mt19937_64 rng_;
  std::vector<double> load_;
  std::map<InstanceId, Inst> inst_;
  std::vector<ChainState> chains_;
  int next_id_ = 0;
  double level_ = 0.0;  // current per-chain target while filling
};

}  // namespace

ScaleExperimentResult run_scale_experiment(const ScaleExperimentConfig& config) {
  if (config.chains < 1 || config.racks < 1 || config.slots_per_rack < 1 ||
      config.boxes.size() != config.initial_instances.size() ||
      config.boxes.size() != config.capacities.size() ||
      config.boxes.size() != config.gains.size() || config.generators < 1 ||
      config.servers < 1) {
    throw Error(ErrorKind::InvalidInput, "scale experiment: inconsistent template");
  }
  ScaleExperimentResult result;
  result.config = config;
  for (Policy p : {Policy::Stratos, Policy::UniformFlow}) {
    result.outcomes.push_back(Experiment(config, p).run());
  }
  return result;
}

}  // namespace sfc
