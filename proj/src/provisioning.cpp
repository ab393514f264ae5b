#include "sfc/provisioning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sfc {

const char* to_string(Policy p) {
  switch (p) {
    case Policy::Stratos: return "stratos";
    case Policy::HeavyWgt: return "heavywgt";
    case Policy::LocalView: return "localview";
    case Policy::UniformFlow: return "uniformflow";
  }
  return "unknown";
}

Policy parse_policy(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(c)));
  if (t == "stratos") return Policy::Stratos;
  if (t == "heavywgt") return Policy::HeavyWgt;
  if (t == "localview") return Policy::LocalView;
  if (t == "uniformflow") return Policy::UniformFlow;
  throw Error(ErrorKind::InvalidInput, "unknown policy " + text);
}

void ProvisioningConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::InvalidInput, what);
  };
  need(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
  need(beta > 1.0, "beta must exceed 1");
  need(delta_compute > 1.0, "delta_compute must exceed 1");
  need(delta_deprov > 0.0 && delta_deprov < 1.0, "delta_deprov must be in (0, 1)");
  need(rho >= 1.0, "rho must be at least 1");
  need(leeway > 0.0 && leeway < 0.5, "leeway must be in (0, 0.5)");
  need(slo_window_s > 0.0, "slo_window_s must be positive");
  need(post_flowdist_wait_s >= 0.0, "post_flowdist_wait_s must be >= 0");
  need(fallback_scale_count >= 1, "fallback_scale_count must be >= 1");
  need(delta_net >= 0.0, "delta_net must be >= 0");
  need(lp_link_utilization > 0.0 && lp_link_utilization <= 1.0,
       "lp_link_utilization must be in (0, 1]");
  need(launch_delay_s >= 0.0 && termination_delay_s >= 0.0,
       "lifecycle delays must be >= 0");
}

namespace {

bool window_covered(const MetricStore& store, const std::string& subject,
                    MetricKind kind, double now, double window) {
  return !store
              .range(subject, kind, -std::numeric_limits<double>::infinity(),
                     now - window + 1e-9)
              .empty();
}

std::optional<double> windowed(const MetricStore& store,
                               const std::string& subject, MetricKind kind,
                               double end, double duration, Aggregation agg) {
  return store.query(subject, kind, end, Window{duration, agg});
}

}  // namespace

bool check_slo(const MetricStore& store, const std::string& chain, double now,
               const ProvisioningConfig& config) {
  const std::string app = app_subject(chain);
  const double w = config.slo_window_s;
  auto sustained = [&](MetricKind kind, double threshold) {
    if (!window_covered(store, app, kind, now, w)) return false;
    const auto low = windowed(store, app, kind, now, w, Aggregation::Min);
    return low && *low > threshold;
  };
  return sustained(MetricKind::LatencyMs, config.slo_latency_ms) ||
         sustained(MetricKind::BacklogRequests, config.slo_backlog);
}

bool slo_holds(const MetricStore& store, const std::string& chain, double now,
               const ProvisioningConfig& config) {
  const std::string app = app_subject(chain);
  const double w = config.slo_window_s;
  const auto lat = windowed(store, app, MetricKind::LatencyMs, now, w,
                            Aggregation::Max);
  const auto back = windowed(store, app, MetricKind::BacklogRequests, now, w,
                             Aggregation::Max);
  return (!lat || *lat <= config.slo_latency_ms) &&
         (!back || *back <= config.slo_backlog);
}

std::vector<ComputeFlag> detect_compute_bottlenecks(
    std::span<const InstanceProfile> instances, const MetricStore& store,
    double now, double baseline_end, const ProvisioningConfig& config) {
  const double w = config.slo_window_s;
  std::vector<ComputeFlag> out;
  for (const auto& prof : instances) {
    const std::string s = instance_subject(prof.id);
    if (prof.per_packet_metric) {
      const auto cur = windowed(store, s, MetricKind::PerPacketTimeUs, now, w,
                                Aggregation::Mean);
      const auto base = windowed(store, s, MetricKind::PerPacketTimeUs,
                                 baseline_end, w, Aggregation::Mean);
      if (cur && base && *base > 0.0 &&
          *cur >= config.delta_compute * *base) {
        out.push_back({prof.id, "per_packet_time", *cur, *base, false});
        continue;
      }
    }
    auto level = [&](double end) -> std::optional<double> {
      const auto cpu = windowed(store, s, MetricKind::CpuFrac, end, w,
                                Aggregation::Mean);
      const auto mem = windowed(store, s, MetricKind::MemFrac, end, w,
                                Aggregation::Mean);
      if (!cpu && !mem) return std::nullopt;
      return std::max(cpu.value_or(0.0), mem.value_or(0.0));
    };
    const auto cur = level(now);
    if (!cur || *cur < config.alpha) continue;
    const auto base = level(baseline_end);
    if (!base) {
      out.push_back({prof.id, "cpu_mem", *cur, 0.0, true});
    } else if (*cur >= config.beta * *base) {
      out.push_back({prof.id, "cpu_mem", *cur, *base, false});
    }
  }
  return out;
}

NetworkReport detect_network_bottlenecks(
    const DataCenterTopology& topo, const Placement& placement,
    std::span<const std::pair<InstanceId, InstanceId>> vls,
    const ProvisioningConfig& config) {
  NetworkReport report;
  std::set<std::pair<InstanceId, InstanceId>> seen;
  for (const auto& [a, b] : vls) {
    if (!seen.insert({a, b}).second) continue;
    const auto path = virtual_link_path(topo, placement, a, b);
    if (path.empty()) continue;
    const double avail = topo.path_available(path);
    if (avail < config.delta_net) {
      report.congested.push_back({a, b, avail});
      ++report.incident[a];
      ++report.incident[b];
    }
  }
  return report;
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::FlowDist: return "flow_dist";
    case ActionKind::Scale: return "scale";
    case ActionKind::Migrate: return "migrate";
    case ActionKind::FallbackScaleAll: return "fallback_scale_all";
    case ActionKind::Deprovision: return "deprovision";
    case ActionKind::None: return "none";
    case ActionKind::Unmet: return "unmet";
  }
  return "unknown";
}

bool is_heavyweight(ActionKind k) {
  return k == ActionKind::Scale || k == ActionKind::Migrate ||
         k == ActionKind::FallbackScaleAll;
}

std::string actions_csv(std::span<const ActionRecord> log) {
  std::string out =
      "step,time,policy,kind,targets,objective_before,objective_after\n";
  char buf[256];
  for (const auto& a : log) {
    std::snprintf(buf, sizeof buf, "%d,%.3f,%s,%s,", a.step, a.time,
                  to_string(a.policy), to_string(a.kind));
    out += buf;
    out += a.targets;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", a.objective_before,
                  a.objective_after);
    out += buf;
  }
  return out;
}

ProvisioningEngine::ProvisioningEngine(Deployment& deployment,
                                       const MetricStore& store,
                                       ProvisioningConfig config, Policy policy,
                                       BandwidthFn lp_bandwidth, DemandFn demand)
    : dep_(deployment),
      store_(store),
      config_(config),
      policy_(policy),
      bandwidth_(std::move(lp_bandwidth)),
      demand_(std::move(demand)) {
  config_.validate();
}

double ProvisioningEngine::applied_objective() const {
  return dep_.applied() ? dep_.applied()->objective : 0.0;
}

ActionRecord ProvisioningEngine::record(double now, ActionKind kind,
                                        std::string targets, double before) {
  ActionRecord r;
  r.step = step_;
  r.time = now;
  r.policy = policy_;
  r.kind = kind;
  r.targets = std::move(targets);
  r.objective_before = before;
  r.objective_after = applied_objective();
  if (kind != ActionKind::None) log_.push_back(r);
  return r;
}

void ProvisioningEngine::initialize(double now) { redistribute(now, true); }

FlowDistribution ProvisioningEngine::score_distribution(
    const FlowProblem& p) const {
  if (policy_ == Policy::UniformFlow) return uniform_distribution(p);
  return solve_flow_distribution(p);
}

bool ProvisioningEngine::redistribute(double now, bool allow_fallback,
                                      std::string* note) {
  const FlowProblem p =
      dep_.flow_problem(demand_(now), bandwidth_, config_.leeway);
  if (policy_ == Policy::UniformFlow) {
    dep_.apply_distribution(p, uniform_distribution(p));
    return true;
  }
  try {
    dep_.apply_distribution(p, solve_flow_distribution(p));
    return true;
  } catch (const InfeasibleError& e) {
    if (note) *note = std::string("infeasible:") + to_string(e.family());
    if (!allow_fallback) return false;
  }
  try {
    dep_.apply_distribution(p, solve_max_throughput(p));
  } catch (const Error&) {
    dep_.apply_distribution(p, uniform_distribution(p));
  }
  return true;
}

std::vector<std::pair<InstanceId, InstanceId>> ProvisioningEngine::active_vls()
    const {
  std::vector<std::pair<InstanceId, InstanceId>> out;
  if (!dep_.applied()) return out;
  std::set<std::pair<InstanceId, InstanceId>> seen;
  for (const auto& e : dep_.applied()->edges) {
    if (!e.from.valid() || e.mbps <= 1e-9) continue;
    if (dep_.instance(e.from).state == InstanceState::Destroyed ||
        dep_.instance(e.to).state == InstanceState::Destroyed) {
      continue;
    }
    if (seen.insert({e.from, e.to}).second) out.emplace_back(e.from, e.to);
  }
  return out;
}

MachineId ProvisioningEngine::place_new_instance(
    const std::string& element, double now,
    const std::function<bool(RackId)>& allow) {
  const auto& topo = dep_.topology();
  const auto& placement = dep_.placement();
  const int racks = topo.rack_count();

  std::set<int> tier1;
  for (const auto& n : dep_.neighbors(element)) {
    for (InstanceId i : dep_.instances(n, false)) {
      tier1.insert(dep_.rack_of(i).value);
    }
  }
  std::vector<std::vector<int>> tiers(3);
  for (int r = 0; r < racks; ++r) {
    if (tier1.count(r)) {
      tiers[0].push_back(r);
      continue;
    }
    bool near = false;
    for (int t : tier1) {
      if (topo.switch_hops(RackId(r), RackId(t)) <= 2) {
        near = true;
        break;
      }
    }
    tiers[near ? 1 : 2].push_back(r);
  }

  bool any_free = false;
  for (int r = 0; r < racks; ++r) any_free = any_free || placement.free_slots(RackId(r)) > 0;
  if (!any_free) {
    throw Error(ErrorKind::CapacityExhausted, "no free VM slot for " + element);
  }

  for (const auto& tier : tiers) {
    std::vector<int> cands;
    for (int r : tier) {
      if (placement.free_slots(RackId(r)) <= 0) continue;
      if (allow && !allow(RackId(r))) continue;
      cands.push_back(r);
    }
    if (cands.empty()) continue;
    if (cands.size() == 1) return placement.free_machine(RackId(cands[0]));

    const auto demand = demand_(now);
    ProblemTweak tweak;
    tweak.extra_id = dep_.next_id();
    int best = -1;
    double best_obj = 0.0;
    std::vector<FlowProblem> problems;
    for (int r : cands) {
      tweak.extra = std::make_pair(element, RackId(r));
      problems.push_back(
          dep_.flow_problem(demand, bandwidth_, config_.leeway, tweak));
      try {
        const double obj = score_distribution(problems.back()).objective;
        if (best < 0 || obj < best_obj - 1e-9) {
          best = r;
          best_obj = obj;
        }
      } catch (const InfeasibleError&) {
      }
    }
    if (best >= 0) return placement.free_machine(RackId(best));

    // Every candidate infeasible: prefer served volume, then footprint.
    double best_served = -1.0;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      double served = 0.0;
      double obj = 0.0;
      try {
        const auto d = solve_max_throughput(problems[k]);
        for (double s : d.served) served += s;
        obj = d.objective;
      } catch (const Error&) {
        continue;
      }
      if (best < 0 || served > best_served + 1e-6 ||
          (std::abs(served - best_served) <= 1e-6 && obj < best_obj - 1e-9)) {
        best = cands[k];
        best_served = served;
        best_obj = obj;
      }
    }
    return placement.free_machine(RackId(best >= 0 ? best : cands[0]));
  }
  if (allow) return MachineId{};
  throw Error(ErrorKind::CapacityExhausted, "no free VM slot for " + element);
}

InstanceId ProvisioningEngine::horizontal_scale(const std::string& element,
                                                double now) {
  if (!dep_.is_mbox(element)) {
    throw Error(ErrorKind::InvalidInput, "cannot scale endpoint " + element);
  }
  if (dep_.tags_needed(element) > dep_.tags_available()) {
    throw Error(ErrorKind::TagSpaceExhausted, "no tags left for another " + element);
  }
  const MachineId m = place_new_instance(element, now);
  const bool ready = config_.launch_delay_s <= 0.0;
  const InstanceId id =
      dep_.launch(element, m, now + config_.launch_delay_s, ready);
  if (ready) {
    redistribute(now, true);
  } else {
    launching_.push_back({id, InstanceId{}});
  }
  return id;
}

std::optional<InstanceId> ProvisioningEngine::migrate_instance(InstanceId inst,
                                                               double now) {
  const auto& d = dep_.instance(inst);
  if (d.endpoint) return std::nullopt;
  double consumed = 0.0;
  if (dep_.applied()) consumed = dep_.applied()->instance_load(inst);
  std::vector<RackId> neighbor_racks;
  for (const auto& n : dep_.neighbors(d.element)) {
    for (InstanceId i : dep_.instances(n)) neighbor_racks.push_back(dep_.rack_of(i));
  }
  const RackId here = dep_.rack_of(inst);
  const auto& topo = dep_.topology();
  auto allow = [&](RackId r) {
    if (r == here) return false;
    for (RackId n : neighbor_racks) {
      if (!(topo.available_bandwidth(r, n) > config_.rho * consumed)) return false;
    }
    return true;
  };
  if (dep_.tags_needed(d.element) > dep_.tags_available()) return std::nullopt;
  const MachineId m = place_new_instance(d.element, now, allow);
  if (!m.valid()) return std::nullopt;
  const bool ready = config_.launch_delay_s <= 0.0;
  const InstanceId fresh =
      dep_.launch(d.element, m, now + config_.launch_delay_s, ready);
  launching_.push_back({fresh, inst});
  if (ready) advance_lifecycle(now);
  return fresh;
}

std::optional<InstanceId> ProvisioningEngine::deprovision(const std::string& chain,
                                                          double now) {
  if (probation_.valid()) return std::nullopt;
  const double w = config_.slo_window_s;
  InstanceId pick;
  double best_ratio = 0.0;
  for (const auto& element : dep_.positions(chain)) {
    if (!dep_.catalog().at(element).one_packet_in_out) continue;
    const auto act = dep_.instances(element);
    if (act.size() < 2) continue;
    for (InstanceId i : act) {
      const std::string s = instance_subject(i);
      const auto cur = windowed(store_, s, MetricKind::PerPacketTimeUs, now, w,
                                Aggregation::Mean);
      const auto base = windowed(store_, s, MetricKind::PerPacketTimeUs,
                                 now - w, w, Aggregation::Mean);
      if (!cur || !base || *base <= 0.0) continue;
      const double ratio = *cur / *base;
      if (ratio > config_.delta_deprov) continue;
      if (!pick.valid() || ratio < best_ratio - 1e-12) {
        pick = i;
        best_ratio = ratio;
      }
    }
  }
  if (!pick.valid()) return std::nullopt;
  saved_problem_ = dep_.applied_problem();
  saved_dist_ = dep_.applied();
  dep_.retire(pick);
  redistribute(now, true);
  probation_ = pick;
  stage_ = Stage::Probation;
  stage_until_ = now + w;
  return pick;
}

void ProvisioningEngine::advance_lifecycle(double now) {
  bool changed = false;
  std::string touched;
  for (auto it = launching_.begin(); it != launching_.end();) {
    const auto& d = dep_.instance(it->fresh);
    if (d.state == InstanceState::Launching && d.ready_at > now + 1e-9) {
      ++it;
      continue;
    }
    dep_.activate(it->fresh);
    if (it->replaces.valid()) {
      dep_.retire(it->replaces);
      draining_.push_back(it->replaces);
    }
    touched += (touched.empty() ? "" : ";") + std::string("active:") +
               std::to_string(it->fresh.value);
    changed = true;
    it = launching_.erase(it);
  }
  for (auto it = draining_.begin(); it != draining_.end();) {
    const auto* fw = dep_.forwarding();
    const int flows = fw ? fw->flows_through(*it) : 0;
    if (flows == 0) {
      destroy_at_[*it] = now + config_.termination_delay_s;
      it = draining_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = destroy_at_.begin(); it != destroy_at_.end();) {
    if (it->second <= now + 1e-9) {
      dep_.destroy(it->first);
      it = destroy_at_.erase(it);
    } else {
      ++it;
    }
  }
  if (changed) {
    const double before = applied_objective();
    redistribute(now, true);
    record(now, ActionKind::FlowDist, touched, before);
  }
}

std::vector<std::string> ProvisioningEngine::violated_chains(double now) const {
  std::vector<std::string> out;
  for (const auto& c : dep_.chains()) {
    if (check_slo(store_, c.id, now, config_)) out.push_back(c.id);
  }
  return out;
}

ActionRecord ProvisioningEngine::step(double now) {
  ++step_;
  const auto violated = violated_chains(now);
  switch (stage_) {
    case Stage::Probation: {
      if (now < stage_until_) return record(now, ActionKind::None, "", 0.0);
      bool ok = true;
      for (const auto& c : dep_.chains()) ok = ok && slo_holds(store_, c.id, now, config_);
      const double before = applied_objective();
      const InstanceId inst = probation_;
      probation_ = InstanceId{};
      stage_ = Stage::Idle;
      quiet_until_ = now + config_.deprovision_cooldown_s;
      if (ok) {
        draining_.push_back(inst);
        return record(now, ActionKind::Deprovision,
                      "destroy:" + std::to_string(inst.value), before);
      }
      dep_.restore(inst);
      dep_.set_applied(saved_problem_, saved_dist_);
      return record(now, ActionKind::Deprovision,
                    "restore:" + std::to_string(inst.value), before);
    }
    case Stage::Idle: {
      if (violated.empty()) {
        fallback_done_ = false;
        if (!config_.deprovision_enabled || now < quiet_until_ ||
            !launching_.empty() || !draining_.empty()) {
          return record(now, ActionKind::None, "", 0.0);
        }
        for (const auto& c : dep_.chains()) {
          const double before = applied_objective();
          if (auto inst = deprovision(c.id, now)) {
            return record(now, ActionKind::Deprovision,
                          "probation:" + std::to_string(inst->value), before);
          }
        }
        return record(now, ActionKind::None, "", 0.0);
      }
      if (now < quiet_until_) return record(now, ActionKind::None, "", 0.0);
      trigger_time_ = now;
      if (policy_ == Policy::Stratos) {
        const double before = applied_objective();
        std::string note;
        const bool ok = redistribute(now, false, &note);
        stage_ = Stage::WaitAfterFlowDist;
        stage_until_ = now + config_.post_flowdist_wait_s;
        std::string targets;
        for (const auto& c : violated) targets += (targets.empty() ? "" : ";") + c;
        if (!ok) targets += ";" + note;
        return record(now, ActionKind::FlowDist, targets, before);
      }
      return detect_and_act(now);
    }
    case Stage::WaitAfterFlowDist:
    case Stage::Settling: {
      if (now < stage_until_) return record(now, ActionKind::None, "", 0.0);
      if (violated.empty()) {
        stage_ = Stage::Idle;
        return record(now, ActionKind::None, "", 0.0);
      }
      return detect_and_act(now);
    }
  }
  return record(now, ActionKind::None, "", 0.0);
}

ActionRecord ProvisioningEngine::detect_and_act(double now) {
  auto violated = violated_chains(now);
  if (violated.empty()) {
    for (const auto& c : dep_.chains()) violated.push_back(c.id);
  }
  const double before = applied_objective();
  const double settle = config_.launch_delay_s + config_.slo_window_s;
  auto settle_after = [&](ActionKind kind, std::string targets) {
    stage_ = Stage::Settling;
    stage_until_ = now + settle;
    return record(now, kind, std::move(targets), before);
  };
  auto give_up = [&](std::string why) {
    stage_ = Stage::Idle;
    quiet_until_ = now + config_.slo_window_s;
    return record(now, ActionKind::Unmet, std::move(why), before);
  };

  // Ordered middlebox elements of the violated chains.
  std::vector<std::string> elements;
  for (const auto& c : violated) {
    for (const auto& e : dep_.positions(c)) {
      if (std::find(elements.begin(), elements.end(), e) == elements.end()) {
        elements.push_back(e);
      }
    }
  }

  try {
    // Compute bottlenecks, upstream first.
    std::vector<InstanceProfile> profiles;
    for (const auto& e : elements) {
      const bool ppt = dep_.catalog().at(e).one_packet_in_out;
      for (InstanceId i : dep_.instances(e)) profiles.push_back({i, ppt});
    }
    const auto flags = detect_compute_bottlenecks(
        profiles, store_, now, trigger_time_ - config_.slo_window_s, config_);
    for (const auto& e : elements) {
      for (const auto& f : flags) {
        if (dep_.instance(f.instance).element != e) continue;
        const InstanceId fresh = horizontal_scale(e, now);
        return settle_after(ActionKind::Scale,
                            e + ":" + std::to_string(fresh.value));
      }
    }

    if (policy_ == Policy::Stratos || policy_ == Policy::HeavyWgt) {
      const auto vls = active_vls();
      const auto report = detect_network_bottlenecks(
          dep_.topology(), dep_.placement(), vls, config_);
      std::vector<std::pair<int, InstanceId>> order;
      for (const auto& [inst, n] : report.incident) {
        if (!dep_.instance(inst).endpoint) order.emplace_back(-n, inst);
      }
      std::sort(order.begin(), order.end());
      if (!order.empty()) {
        const InstanceId victim = order.front().second;
        if (auto fresh = migrate_instance(victim, now)) {
          return settle_after(ActionKind::Migrate,
                              std::to_string(victim.value) + "->" +
                                  std::to_string(fresh->value));
        }
        const std::string e = dep_.instance(victim).element;
        const InstanceId fresh = horizontal_scale(e, now);
        return settle_after(ActionKind::Scale,
                            e + ":" + std::to_string(fresh.value));
      }
    } else {
      // Local view: only the access links of the instances' machines.
      const auto& topo = dep_.topology();
      for (const auto& e : elements) {
        for (InstanceId i : dep_.instances(e)) {
          const auto& l = topo.link(topo.access_link(dep_.instance(i).machine));
          if ((l.background_load + l.chain_load) / l.capacity >= config_.alpha) {
            const InstanceId fresh = horizontal_scale(e, now);
            return settle_after(ActionKind::Scale,
                                e + ":" + std::to_string(fresh.value));
          }
        }
      }
    }

    if (fallback_done_) return give_up("unmet");
    fallback_done_ = true;
    std::string targets;
    for (const auto& e : elements) {
      for (int k = 0; k < config_.fallback_scale_count; ++k) {
        const InstanceId fresh = horizontal_scale(e, now);
        targets += (targets.empty() ? "" : ";") + e + ":" +
                   std::to_string(fresh.value);
      }
    }
    return settle_after(ActionKind::FallbackScaleAll, targets);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::TagSpaceExhausted) return give_up("tag-space-exhausted");
    if (e.kind() != ErrorKind::CapacityExhausted) throw;
    return give_up("capacity-exhausted");
  }
}

}  // namespace sfc
