#include "sfc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sfc/deployment.hpp"
#include "sfc/scenario_io.hpp"
#include "sfc/telemetry.hpp"

namespace sfc {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void fail(const std::string& what) { throw Error(ErrorKind::InvalidInput, what); }

}  // namespace

void Scenario::validate() const {
  if (chains.empty()) fail("chains: at least one chain is required");
  if (!(tick_s > 0.0)) fail("run.tick_s must be positive");
  if (!(duration_s >= 0.0)) fail("run.duration_s must be >= 0");
  if (!(latency_base_ms > 0.0)) fail("run.latency_base_ms must be positive");
  if (!(request_kb > 0.0)) fail("run.request_kb must be positive");
  if (flows_per_tick < 0.0 || flow_lifetime_s <= 0.0) {
    fail("run: flow rate must be >= 0 and lifetime positive");
  }
  validate_chains(chains, mboxes);
  provisioning.validate();
  std::set<std::string> ids;
  std::set<std::string> elements;
  for (const auto& c : chains) {
    ids.insert(c.id);
    for (const auto& e : c.full_sequence()) elements.insert(e);
  }
  double prev = -1.0;
  for (const auto& w : workload) {
    if (w.time_s < prev) fail("workload: events must be time-sorted");
    prev = w.time_s;
    if (!ids.count(w.chain)) fail("workload: unknown chain " + w.chain);
    if (w.offered_mbps < 0.0) fail("workload: offered_mbps must be >= 0");
  }
  prev = -1.0;
  for (const auto& b : background) {
    if (b.time_s < prev) fail("background: events must be time-sorted");
    prev = b.time_s;
    if (!b.from.valid() || b.from.value >= topology.racks || !b.to.valid() ||
        b.to.value >= topology.racks) {
      fail("background: rack out of range");
    }
    if (b.mbps < 0.0 || b.duration_s < 0.0) {
      fail("background: mbps and duration_s must be >= 0");
    }
  }
  for (const auto& p : placements) {
    if (!elements.count(p.element)) fail("placements: unknown element " + p.element);
    if (p.count < 0) fail("placements: count must be >= 0");
    if (p.rack && (!p.rack->valid() || p.rack->value >= topology.racks)) {
      fail("placements: rack out of range for " + p.element);
    }
  }
  for (const auto& s : scripted) {
    if (!mboxes.count(s.element)) fail("scripted: unknown middlebox " + s.element);
  }
}

namespace {

double offered_at(const Scenario& sc, const std::string& chain, double t) {
  double v = 0.0;
  for (const auto& w : sc.workload) {
    if (w.time_s > t + 1e-9) break;
    if (w.chain == chain) v = w.offered_mbps;
  }
  return v;
}

// Transformed element names standing for a scenario element.
std::vector<std::string> expand_element(const TransformedChains& tc,
                                        const std::string& element) {
  auto it = tc.clones.find(element);
  if (it != tc.clones.end()) return it->second;
  return {element};
}

struct Physics {
  std::map<InstanceId, double> load;      // Mbps entering each instance
  std::vector<double> served;             // per chain
  std::vector<double> headroom;           // per chain, deliverable / offered
  std::vector<double> peak_util;          // per chain
  double max_link_util = 0.0;
  std::vector<EdgeFlow> edges;            // scaled to the current demand
};

Physics compute_physics(Deployment& dep, const std::vector<double>& offered,
                        const std::vector<BackgroundEvent>& active_bg) {
  auto& topo = dep.topology();
  std::vector<RackFlow> bg;
  for (const auto& b : active_bg) bg.push_back({b.from, b.to, b.mbps});
  topo.set_background(bg);

  const std::size_t nc = dep.chains().size();
  Physics ph;
  ph.served.assign(nc, 0.0);
  ph.headroom.assign(nc, 1e9);
  ph.peak_util.assign(nc, 0.0);

  const auto& applied = dep.applied();
  const FlowProblem& problem = dep.applied_problem();
  std::optional<FlowDistribution> uniform;
  for (std::size_t c = 0; c < nc && applied && c < problem.chains.size(); ++c) {
    const double have = c < applied->served.size() ? applied->served[c] : 0.0;
    const FlowDistribution* src = &*applied;
    double scale = 0.0;
    if (have > 1e-9) {
      scale = offered[c] / have;
    } else if (offered[c] > 0.0) {
      if (!uniform) uniform = uniform_distribution(problem);
      const double u = uniform->served[c];
      src = &*uniform;
      scale = u > 1e-9 ? offered[c] / u : 0.0;
    }
    for (const auto& e : src->edges) {
      if (e.chain != static_cast<int>(c)) continue;
      EdgeFlow s = e;
      s.mbps *= scale;
      ph.edges.push_back(s);
    }
  }

  std::vector<MachineFlow> mflows;
  std::vector<std::map<int, double>> chain_link(nc);
  for (const auto& e : ph.edges) {
    if (!dep.is_endpoint(dep.instance(e.to).element)) ph.load[e.to] += e.mbps;
    if (!e.from.valid() || e.mbps <= 0.0) continue;
    const MachineId a = dep.instance(e.from).machine;
    const MachineId b = dep.instance(e.to).machine;
    mflows.push_back({a, b, e.mbps});
    for (LinkId l : topo.machine_path(a, b)) chain_link[e.chain][l.value] += e.mbps;
  }
  topo.apply_machine_traffic(mflows);
  for (const auto& l : topo.links()) {
    ph.max_link_util =
        std::max(ph.max_link_util, (l.background_load + l.chain_load) / l.capacity);
  }

  for (std::size_t c = 0; c < nc; ++c) {
    double lam = 1e9;
    double peak = 0.0;
    std::set<InstanceId> used;
    for (const auto& e : ph.edges) {
      if (e.chain == static_cast<int>(c) && e.mbps > 1e-12) used.insert(e.to);
    }
    for (InstanceId i : used) {
      const auto& d = dep.instance(i);
      if (d.endpoint) continue;
      const double cap = dep.catalog().at(d.element).capacity_mbps;
      const double load = ph.load[i];
      if (load > 0.0) lam = std::min(lam, cap / load);
      peak = std::max(peak, load / cap);
    }
    for (const auto& [lid, mbps] : chain_link[c]) {
      if (mbps <= 1e-12) continue;
      const auto& l = topo.link(LinkId(lid));
      peak = std::max(peak, (l.background_load + l.chain_load) / l.capacity);
      if (l.chain_load > 0.0) {
        lam = std::min(lam, std::max(0.0, l.capacity - l.background_load) /
                                l.chain_load);
      }
    }
    ph.headroom[c] = lam;
    ph.peak_util[c] = peak;
    ph.served[c] = std::min(1.0, lam) * offered[c];
  }
  return ph;
}

struct TrackedFlow {
  int id = -1;
  std::string chain;
  double expires = 0.0;
  FlowTrace trace;
};

}  // namespace

RunResult run_scenario(const Scenario& sc, const RunOptions& opt) {
  sc.validate();
  Deployment dep(DataCenterTopology::build_tree(sc.topology), sc.mboxes,
                 sc.chains, sc.forwarding, sc.name);
  std::mt19937_64 rng(sc.seed);
  const auto& tc = dep.transformed();
  const int racks = dep.topology().rack_count();

  for (const auto& p : sc.placements) {
    for (const auto& element : expand_element(tc, p.element)) {
      for (int k = 0; k < p.count; ++k) {
        RackId rack;
        if (p.rack) {
          rack = *p.rack;
        } else {
          std::vector<int> open;
          for (int r = 0; r < racks; ++r) {
            if (dep.placement().free_slots(RackId(r)) > 0) open.push_back(r);
          }
          if (open.empty()) {
            throw Error(ErrorKind::CapacityExhausted,
                        "placements: no free slot for " + element);
          }
          std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
          rack = RackId(open[pick(rng)]);
        }
        const MachineId m = dep.placement().free_machine(rack);
        if (!m.valid()) {
          throw Error(ErrorKind::CapacityExhausted,
                      "placements: rack " + std::to_string(rack.value) +
                          " has no free slot for " + element);
        }
        dep.launch(element, m);
      }
    }
  }
  for (const auto& c : dep.chains()) {
    for (const auto& e : c.elements) {
      if (dep.instances(e).empty()) fail("placements: no instance of " + e);
    }
  }

  MetricStore store;
  const double lp_util = sc.provisioning.lp_link_utilization;
  const DataCenterTopology& topo = dep.topology();
  BandwidthFn lp_bandwidth = [&topo, lp_util](RackId a, RackId b) {
    if (a == b) return kUnbounded;
    double avail = kUnbounded;
    for (LinkId l : topo.route(a, b)) {
      const auto& link = topo.link(l);
      avail = std::min(avail, std::max(0.0, link.capacity * lp_util -
                                                link.background_load));
    }
    return avail;
  };
  DemandFn demand = [&sc](double t) {
    std::map<std::string, double> out;
    for (const auto& c : sc.chains) out[c.id] = offered_at(sc, c.id, t);
    return out;
  };
  ProvisioningEngine engine(dep, store, sc.provisioning, sc.policy,
                            lp_bandwidth, demand);

  const std::size_t nc = dep.chains().size();
  std::vector<std::string> mbox_names;
  for (const auto& [name, _] : tc.mboxes) {
    bool used = false;
    for (const auto& c : dep.chains()) {
      used = used || std::count(c.elements.begin(), c.elements.end(), name);
    }
    if (used) mbox_names.push_back(name);
  }

  RunResult result;
  result.resolved_config = dump_scenario(sc);
  std::vector<double> backlog(nc, 0.0), offered_sum(nc, 0.0), served_sum(nc, 0.0);
  std::vector<double> flow_acc(nc, 0.0);
  std::vector<TrackedFlow> flows;
  std::set<int> discrepant;
  auto* fw = dep.forwarding();

  auto checkpoint = [&](double t) {
    if (!fw) return;
    ++result.audit.checkpoints;
    for (const auto& f : flows) {
      std::string why;
      try {
        if (!(fw->trace_flow(f.id) == f.trace)) why = "instance sequence changed";
      } catch (const Error& e) {
        why = std::string("forwarding hole: ") + e.what();
      }
      if (!why.empty() && discrepant.insert(f.id).second) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "t=%.1f flow %d (%s): ", t, f.id,
                      f.chain.c_str());
        result.audit.details.push_back(buf + why);
      }
    }
  };

  engine.initialize(0.0);
  const long ticks = std::lround(sc.duration_s / sc.tick_s);
  std::size_t scripted_next = 0;
  for (long k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * sc.tick_s;
    std::vector<BackgroundEvent> active_bg;
    for (const auto& b : sc.background) {
      if (b.time_s <= t + 1e-9 &&
          (b.duration_s <= 0.0 || t < b.time_s + b.duration_s - 1e-9)) {
        active_bg.push_back(b);
      }
    }
    std::vector<double> offered(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      offered[c] = offered_at(sc, dep.chains()[c].id, t);
    }

    const std::size_t logged_before = engine.log().size();
    engine.advance_lifecycle(t);
    bool event = engine.log().size() != logged_before;
    while (scripted_next < sc.scripted.size() &&
           sc.scripted[scripted_next].time_s <= t + 1e-9) {
      for (const auto& e : expand_element(tc, sc.scripted[scripted_next].element)) {
        engine.horizontal_scale(e, t);
      }
      ++scripted_next;
      event = true;
    }

    // Flow churn.
    if (fw) {
      for (auto it = flows.begin(); it != flows.end();) {
        if (it->expires <= t + 1e-9) {
          fw->finish_flow(it->id);
          it = flows.erase(it);
        } else {
          ++it;
        }
      }
      for (std::size_t c = 0; c < nc; ++c) {
        if (offered[c] <= 0.0) continue;
        flow_acc[c] += sc.flows_per_tick;
        const auto& chain = dep.chains()[c];
        while (flow_acc[c] >= 1.0 - 1e-12) {
          flow_acc[c] -= 1.0;
          const FlowKey key = rng() & ~kReverseBit;
          const auto sources = dep.instances(chain.source);
          InstanceId src;
          if (!sources.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, sources.size() - 1);
            src = sources[pick(rng)];
          }
          int id = -1;
          try {
            id = fw->admit_flow(chain.id, key, offered[c] / 100.0, src);
          } catch (const Error&) {
            continue;
          }
          TrackedFlow tf{id, chain.id, t + sc.flow_lifetime_s, {}};
          ++result.audit.flows_checked;
          try {
            tf.trace = fw->trace_flow(id);
          } catch (const Error& e) {
            if (discrepant.insert(id).second) {
              result.audit.details.push_back("flow " + std::to_string(id) +
                                             " unroutable at admission: " + e.what());
            }
          }
          flows.push_back(std::move(tf));
        }
      }
      if (opt.corrupt_at_s && std::abs(*opt.corrupt_at_s - t) < sc.tick_s / 2) {
        for (const auto& f : flows) {
          if (f.chain != dep.chains()[0].id) continue;
          const auto& flow = fw->flow(f.id);
          const int own = fw->path(flow.pinned[0]).forward_tag;
          int foreign = own + 2;
          for (int pid : fw->paths_of(fw->subchains_of(f.chain)[0].id)) {
            if (fw->path(pid).forward_tag != own) {
              foreign = fw->path(pid).forward_tag;
              break;
            }
          }
          fw->corrupt_flow_rule(f.id, 0, foreign);
          event = true;
          break;
        }
      }
    }

    const Physics ph = compute_physics(dep, offered, active_bg);

    // Telemetry.
    for (InstanceId i : dep.live_instances()) {
      const auto& d = dep.instance(i);
      if (d.endpoint || d.state == InstanceState::Launching) continue;
      const auto& spec = dep.catalog().at(d.element);
      const auto it = ph.load.find(i);
      const double u = (it == ph.load.end() ? 0.0 : it->second) / spec.capacity_mbps;
      const double ppt = std::min(50.0 * spec.per_packet_base_us,
                                  spec.per_packet_base_us / std::max(1e-3, 1.0 - u));
      const std::string s = instance_subject(i);
      store.record({s, MetricKind::PerPacketTimeUs, t, ppt});
      store.record({s, MetricKind::CpuFrac, t, std::min(1.0, u)});
      store.record({s, MetricKind::MemFrac, t, std::min(1.0, 0.2 + 0.6 * std::min(1.0, u))});
    }
    for (const auto& l : topo.links()) {
      store.record({link_subject(l.id), MetricKind::LinkMbps, t,
                    l.background_load + l.chain_load});
    }
    const double per_request = 125.0 / sc.request_kb;  // requests per Mbit
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& chain = dep.chains()[c];
      const double deliverable = std::min(ph.headroom[c], 10.0) * offered[c];
      backlog[c] += (offered[c] - deliverable) * sc.tick_s * per_request;
      backlog[c] = std::clamp(backlog[c], 0.0, sc.backlog_cap);
      const double u = std::min(ph.peak_util[c], 0.999);
      const double latency =
          offered[c] > 0.0
              ? std::min(sc.latency_cap_ms, sc.latency_base_ms / (1.0 - u))
              : sc.latency_base_ms;
      const std::string app = app_subject(chain.id);
      store.record({app, MetricKind::LatencyMs, t, latency});
      store.record({app, MetricKind::BacklogRequests, t, backlog[c]});
      store.record({app, MetricKind::IngressMbps, t, offered[c]});
      double volume = ph.served[c];
      for (std::size_t j = 0; j < chain.elements.size(); ++j) {
        const double gain = dep.catalog().at(chain.elements[j]).gain;
        const std::string pos = position_subject(chain.id, static_cast<int>(j));
        store.record({pos, MetricKind::IngressMbps, t, volume});
        volume /= gain;
        store.record({pos, MetricKind::EgressMbps, t, volume});
      }
      offered_sum[c] += offered[c];
      served_sum[c] += ph.served[c];

      TickRecord rec;
      rec.time_s = t;
      rec.chain = chain.id;
      rec.offered_mbps = offered[c];
      rec.served_mbps = ph.served[c];
      rec.backlog = backlog[c];
      rec.latency_ms = latency;
      rec.max_link_util = ph.max_link_util;
      for (const auto& name : mbox_names) {
        rec.instances[name] = static_cast<int>(dep.instances(name, false).size());
      }
      result.series.push_back(std::move(rec));
    }

    if (sc.autoscale) {
      const std::size_t before = engine.log().size();
      engine.step(t);
      event = event || engine.log().size() != before;
    }
    if (event) checkpoint(t);
  }
  checkpoint(sc.duration_s);

  result.actions = engine.log();
  for (std::size_t c = 0; c < nc; ++c) {
    result.satisfaction[dep.chains()[c].id] =
        offered_sum[c] > 0.0 ? served_sum[c] / offered_sum[c] : 1.0;
  }
  std::vector<double> last_offered(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    last_offered[c] = offered_at(sc, dep.chains()[c].id, sc.duration_s);
  }
  const Physics end = compute_physics(dep, last_offered, {});
  for (InstanceId i : dep.live_instances()) {
    if (dep.instance(i).endpoint) continue;
    const auto it = end.load.find(i);
    result.final_instance_mbps[i] = it == end.load.end() ? 0.0 : it->second;
  }
  for (std::size_t c = 0; c < nc; ++c) result.final_inter_rack_mbps[dep.chains()[c].id] = 0.0;
  for (const auto& e : end.edges) {
    if (!e.from.valid() || dep.rack_of(e.from) == dep.rack_of(e.to)) continue;
    result.final_inter_rack_mbps[dep.chains()[e.chain].id] += e.mbps;
  }
  result.final_mbox_instances = dep.mbox_instance_count();
  result.audit.discrepant_flows.assign(discrepant.begin(), discrepant.end());
  if (opt.record_metrics_csv) result.metrics_csv = store.to_csv();
  return result;
}

AuditReport affinity_audit(const Scenario& scenario, const RunOptions& options) {
  Scenario sc = scenario;
  sc.forwarding = true;
  RunOptions opt = options;
  opt.record_metrics_csv = false;
  return run_scenario(sc, opt).audit;
}

std::string RunResult::timeseries_csv() const {
  std::string out = "time,chain,offered_mbps,served_mbps,backlog,latency_ms,max_link_util";
  if (!series.empty()) {
    for (const auto& [name, _] : series.front().instances) out += ",instances_" + name;
  }
  out += "\n";
  char buf[160];
  for (const auto& r : series) {
    std::snprintf(buf, sizeof buf, "%.3f,", r.time_s);
    out += buf;
    out += r.chain;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%.6f", r.offered_mbps,
                  r.served_mbps, r.backlog, r.latency_ms, r.max_link_util);
    out += buf;
    for (const auto& [_, n] : r.instances) out += "," + std::to_string(n);
    out += "\n";
  }
  return out;
}

std::string RunResult::actions_csv() const { return sfc::actions_csv(actions); }

std::string RunResult::distributions_csv() const {
  std::string out = "distribution,subject,value\n";
  for (const auto& [chain, v] : satisfaction) {
    out += "satisfaction," + chain + "," + fmt6(v) + "\n";
  }
  for (const auto& [inst, v] : final_instance_mbps) {
    out += "instance_mbps," + instance_subject(inst) + "," + fmt6(v) + "\n";
  }
  for (const auto& [chain, v] : final_inter_rack_mbps) {
    out += "inter_rack_mbps," + chain + "," + fmt6(v) + "\n";
  }
  return out;
}

int RunResult::count(ActionKind kind) const {
  return static_cast<int>(std::count_if(actions.begin(), actions.end(),
                                        [&](const auto& a) { return a.kind == kind; }));
}

int RunResult::heavyweight_count() const {
  int n = 0;
  for (const auto& a : actions) {
    if (!is_heavyweight(a.kind)) continue;
    // A fallback round counts once per instance launched.
    n += a.kind == ActionKind::FallbackScaleAll
             ? static_cast<int>(std::count(a.targets.begin(), a.targets.end(), ';')) + 1
             : 1;
  }
  return n;
}

void write_run_outputs(const RunResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + dir + "/" + name);
    f << text;
  };
  put("timeseries.csv", result.timeseries_csv());
  put("actions.csv", result.actions_csv());
  put("distributions.csv", result.distributions_csv());
  put("metrics.csv", result.metrics_csv);
  put("resolved-config.yaml", result.resolved_config);
}

}  // namespace sfc
