#include "sfc/scenario_io.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace sfc {

namespace {

[[noreturn]] void parse_error(const std::string& key, const YAML::Node& node,
                              const std::string& what) {
  std::string where = "key '" + key + "'";
  if (node.IsDefined() && node.Mark().line >= 0) {
    where += " (line " + std::to_string(node.Mark().line + 1) + ")";
  }
  throw Error(ErrorKind::Parse, where + ": " + what);
}

// Missing keys come back as invalid nodes that throw on most accessors.
bool present(const YAML::Node& n) { return n.IsDefined() && !n.IsNull(); }

// Map section with a closed key set.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::set<std::string> keys)
      : node_(present(node) ? node : YAML::Node()), path_(std::move(path)) {
    if (node_.IsNull()) return;
    if (!node_.IsMap()) parse_error(path_, node_, "expected a mapping");
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!keys.count(key)) parse_error(sub(key), kv.first, "unknown key");
    }
  }

  bool has(const std::string& key) const {
    return node_.IsMap() && node_[key].IsDefined() && !node_[key].IsNull();
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    return as<T>(node_[key], sub(key));
  }

  template <class T>
  T need(const std::string& key) const {
    if (!has(key)) parse_error(sub(key), node_, "required key missing");
    return as<T>(node_[key], sub(key));
  }

  YAML::Node node(const std::string& key) const {
    return node_.IsMap() ? node_[key] : YAML::Node();
  }
  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  static T as(const YAML::Node& n, const std::string& key) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      parse_error(key, n, std::is_same_v<T, bool>          ? "expected true/false"
                          : std::is_arithmetic_v<T>        ? "expected a number"
                                                           : "expected a string");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
};

std::vector<YAML::Node> sequence(const Section& parent, const std::string& key) {
  std::vector<YAML::Node> out;
  const auto n = parent.node(key);
  if (!n.IsDefined() || n.IsNull()) return out;
  if (!n.IsSequence()) parse_error(parent.sub(key), n, "expected a list");
  for (const auto& item : n) out.push_back(item);
  return out;
}

double non_negative(const Section& s, const std::string& key, double fallback) {
  const double v = s.get<double>(key, fallback);
  if (v < 0.0) parse_error(s.sub(key), s.node(key), "must be >= 0");
  return v;
}

Scenario from_yaml(const YAML::Node& root) {
  Scenario sc;
  Section top(root, "",
              {"name", "topology", "mboxes", "chains", "placements", "workload",
               "background", "scripted", "provisioning", "run"});
  if (!root.IsMap()) throw Error(ErrorKind::Parse, "scenario: expected a mapping");
  sc.name = top.get<std::string>("name", sc.name);

  Section topo(top.node("topology"), "topology",
               {"racks", "machines_per_rack", "slots_per_machine", "agg_fanout",
                "core_fanout", "link_capacity_mbps"});
  auto& ts = sc.topology;
  ts.racks = topo.get<int>("racks", ts.racks);
  ts.machines_per_rack = topo.get<int>("machines_per_rack", ts.machines_per_rack);
  ts.slots_per_machine = topo.get<int>("slots_per_machine", ts.slots_per_machine);
  ts.agg_fanout = topo.get<int>("agg_fanout", ts.agg_fanout);
  ts.core_fanout = topo.get<int>("core_fanout", ts.core_fanout);
  ts.link_capacity_mbps = topo.get<double>("link_capacity_mbps", ts.link_capacity_mbps);
  for (const char* k : {"racks", "machines_per_rack", "slots_per_machine",
                        "agg_fanout", "core_fanout"}) {
    if (topo.get<int>(k, 1) < 1) parse_error(topo.sub(k), topo.node(k), "must be >= 1");
  }
  if (!(ts.link_capacity_mbps > 0.0)) {
    parse_error("topology.link_capacity_mbps", topo.node("link_capacity_mbps"),
                "must be positive");
  }

  int idx = 0;
  for (const auto& item : sequence(top, "mboxes")) {
    Section m(item, "mboxes[" + std::to_string(idx++) + "]",
              {"name", "mangling", "gain", "capacity_mbps", "per_packet_base_us",
               "one_packet_in_out"});
    MBoxSpec spec;
    spec.name = m.need<std::string>("name");
    spec.is_mangling = m.get<bool>("mangling", spec.is_mangling);
    spec.gain = m.get<double>("gain", spec.gain);
    spec.capacity_mbps = m.get<double>("capacity_mbps", spec.capacity_mbps);
    spec.per_packet_base_us = m.get<double>("per_packet_base_us", spec.per_packet_base_us);
    spec.one_packet_in_out = m.get<bool>("one_packet_in_out", spec.one_packet_in_out);
    if (!(spec.gain > 0.0)) parse_error(m.sub("gain"), m.node("gain"), "must be positive");
    if (!(spec.capacity_mbps > 0.0)) {
      parse_error(m.sub("capacity_mbps"), m.node("capacity_mbps"), "must be positive");
    }
    if (sc.mboxes.count(spec.name)) {
      parse_error(m.sub("name"), m.node("name"), "duplicate middlebox " + spec.name);
    }
    sc.mboxes[spec.name] = spec;
  }

  idx = 0;
  std::set<std::string> chain_ids;
  for (const auto& item : sequence(top, "chains")) {
    const std::string path = "chains[" + std::to_string(idx++) + "]";
    Section c(item, path, {"id", "source", "elements", "sink", "traffic_class"});
    LogicalChain chain;
    chain.id = c.need<std::string>("id");
    chain.source = c.get<std::string>("source", chain.source);
    chain.sink = c.get<std::string>("sink", chain.sink);
    chain.traffic_class = c.get<std::string>("traffic_class", chain.id);
    for (const auto& e : sequence(c, "elements")) {
      const auto name = Section::as<std::string>(e, c.sub("elements"));
      if (!sc.mboxes.count(name)) {
        parse_error(c.sub("elements"), e, "undeclared middlebox " + name);
      }
      chain.elements.push_back(name);
    }
    if (chain.elements.empty()) {
      parse_error(c.sub("elements"), item, "a chain needs at least one middlebox");
    }
    if (!chain_ids.insert(chain.id).second) {
      parse_error(c.sub("id"), c.node("id"), "duplicate chain " + chain.id);
    }
    sc.chains.push_back(std::move(chain));
  }

  idx = 0;
  for (const auto& item : sequence(top, "placements")) {
    Section p(item, "placements[" + std::to_string(idx++) + "]",
              {"element", "count", "rack"});
    InitialPlacement ip;
    ip.element = p.need<std::string>("element");
    ip.count = p.get<int>("count", 1);
    if (ip.count < 0) parse_error(p.sub("count"), p.node("count"), "must be >= 0");
    if (p.has("rack")) {
      const int r = p.get<int>("rack", 0);
      if (r < 0 || r >= ts.racks) parse_error(p.sub("rack"), p.node("rack"), "rack out of range");
      ip.rack = RackId(r);
    }
    sc.placements.push_back(ip);
  }

  idx = 0;
  for (const auto& item : sequence(top, "workload")) {
    Section w(item, "workload[" + std::to_string(idx++) + "]",
              {"time_s", "chain", "offered_mbps"});
    WorkloadEvent ev;
    ev.time_s = non_negative(w, "time_s", 0.0);
    ev.chain = w.need<std::string>("chain");
    if (!chain_ids.count(ev.chain)) {
      parse_error(w.sub("chain"), w.node("chain"), "unknown chain " + ev.chain);
    }
    ev.offered_mbps = non_negative(w, "offered_mbps", 0.0);
    if (!sc.workload.empty() && ev.time_s < sc.workload.back().time_s) {
      parse_error(w.sub("time_s"), w.node("time_s"), "events must be time-sorted");
    }
    sc.workload.push_back(ev);
  }

  idx = 0;
  for (const auto& item : sequence(top, "background")) {
    Section b(item, "background[" + std::to_string(idx++) + "]",
              {"time_s", "from_rack", "to_rack", "mbps", "duration_s"});
    BackgroundEvent ev;
    ev.time_s = non_negative(b, "time_s", 0.0);
    for (const char* k : {"from_rack", "to_rack"}) {
      const int r = b.need<int>(k);
      if (r < 0 || r >= ts.racks) parse_error(b.sub(k), b.node(k), "rack out of range");
      (std::string(k) == "from_rack" ? ev.from : ev.to) = RackId(r);
    }
    ev.mbps = non_negative(b, "mbps", 0.0);
    ev.duration_s = non_negative(b, "duration_s", 0.0);
    if (!sc.background.empty() && ev.time_s < sc.background.back().time_s) {
      parse_error(b.sub("time_s"), b.node("time_s"), "events must be time-sorted");
    }
    sc.background.push_back(ev);
  }

  idx = 0;
  for (const auto& item : sequence(top, "scripted")) {
    Section s(item, "scripted[" + std::to_string(idx++) + "]", {"time_s", "element"});
    ScriptedScale ev;
    ev.time_s = non_negative(s, "time_s", 0.0);
    ev.element = s.need<std::string>("element");
    if (!sc.mboxes.count(ev.element)) {
      parse_error(s.sub("element"), s.node("element"), "undeclared middlebox " + ev.element);
    }
    sc.scripted.push_back(ev);
  }

  Section pr(top.node("provisioning"), "provisioning",
             {"alpha", "beta", "delta_compute", "delta_net", "delta_deprov", "rho",
              "leeway", "slo_latency_ms", "slo_backlog", "slo_window_s",
              "post_flowdist_wait_s", "fallback_scale_count", "launch_delay_s",
              "termination_delay_s", "lp_link_utilization", "deprovision_enabled",
              "deprovision_cooldown_s"});
  auto& cfg = sc.provisioning;
  cfg.alpha = pr.get("alpha", cfg.alpha);
  cfg.beta = pr.get("beta", cfg.beta);
  cfg.delta_compute = pr.get("delta_compute", cfg.delta_compute);
  cfg.delta_net = pr.get("delta_net", cfg.delta_net);
  cfg.delta_deprov = pr.get("delta_deprov", cfg.delta_deprov);
  cfg.rho = pr.get("rho", cfg.rho);
  cfg.leeway = pr.get("leeway", cfg.leeway);
  cfg.slo_latency_ms = pr.get("slo_latency_ms", cfg.slo_latency_ms);
  cfg.slo_backlog = pr.get("slo_backlog", cfg.slo_backlog);
  cfg.slo_window_s = pr.get("slo_window_s", cfg.slo_window_s);
  cfg.post_flowdist_wait_s = pr.get("post_flowdist_wait_s", cfg.post_flowdist_wait_s);
  cfg.fallback_scale_count = pr.get("fallback_scale_count", cfg.fallback_scale_count);
  cfg.launch_delay_s = pr.get("launch_delay_s", cfg.launch_delay_s);
  cfg.termination_delay_s = pr.get("termination_delay_s", cfg.termination_delay_s);
  cfg.lp_link_utilization = pr.get("lp_link_utilization", cfg.lp_link_utilization);
  cfg.deprovision_enabled = pr.get("deprovision_enabled", cfg.deprovision_enabled);
  cfg.deprovision_cooldown_s = pr.get("deprovision_cooldown_s", cfg.deprovision_cooldown_s);
  try {
    cfg.validate();
  } catch (const Error& e) {
    parse_error("provisioning", top.node("provisioning"), e.what());
  }

  Section run(top.node("run"), "run",
              {"policy", "autoscale", "seed", "duration_s", "tick_s",
               "latency_base_ms", "latency_cap_ms", "request_kb", "backlog_cap",
               "forwarding", "flows_per_tick", "flow_lifetime_s"});
  if (run.has("policy")) {
    try {
      sc.policy = parse_policy(run.get<std::string>("policy", ""));
    } catch (const Error& e) {
      parse_error("run.policy", run.node("policy"), e.what());
    }
  }
  sc.autoscale = run.get("autoscale", sc.autoscale);
  sc.seed = run.get<std::uint64_t>("seed", sc.seed);
  sc.duration_s = non_negative(run, "duration_s", sc.duration_s);
  sc.tick_s = run.get("tick_s", sc.tick_s);
  if (!(sc.tick_s > 0.0)) parse_error("run.tick_s", run.node("tick_s"), "must be positive");
  sc.latency_base_ms = run.get("latency_base_ms", sc.latency_base_ms);
  sc.latency_cap_ms = run.get("latency_cap_ms", sc.latency_cap_ms);
  sc.request_kb = run.get("request_kb", sc.request_kb);
  sc.backlog_cap = run.get("backlog_cap", sc.backlog_cap);
  sc.forwarding = run.get("forwarding", sc.forwarding);
  sc.flows_per_tick = non_negative(run, "flows_per_tick", sc.flows_per_tick);
  sc.flow_lifetime_s = run.get("flow_lifetime_s", sc.flow_lifetime_s);

  try {
    sc.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  return sc;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(e.mark.line + 1) +
                                      ": " + e.msg);
  }
  return from_yaml(root);
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Parse, "cannot read scenario " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

std::string dump_scenario(const Scenario& sc) {
  YAML::Emitter out;
  out.SetDoublePrecision(10);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << sc.name;
  const auto& ts = sc.topology;
  out << YAML::Key << "topology" << YAML::Value << YAML::BeginMap
      << YAML::Key << "racks" << YAML::Value << ts.racks
      << YAML::Key << "machines_per_rack" << YAML::Value << ts.machines_per_rack
      << YAML::Key << "slots_per_machine" << YAML::Value << ts.slots_per_machine
      << YAML::Key << "agg_fanout" << YAML::Value << ts.agg_fanout
      << YAML::Key << "core_fanout" << YAML::Value << ts.core_fanout
      << YAML::Key << "link_capacity_mbps" << YAML::Value << ts.link_capacity_mbps
      << YAML::EndMap;

  out << YAML::Key << "mboxes" << YAML::Value << YAML::BeginSeq;
  for (const auto& [name, m] : sc.mboxes) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << name
        << YAML::Key << "mangling" << YAML::Value << m.is_mangling
        << YAML::Key << "gain" << YAML::Value << m.gain
        << YAML::Key << "capacity_mbps" << YAML::Value << m.capacity_mbps
        << YAML::Key << "per_packet_base_us" << YAML::Value << m.per_packet_base_us
        << YAML::Key << "one_packet_in_out" << YAML::Value << m.one_packet_in_out
        << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "chains" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : sc.chains) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << c.id
        << YAML::Key << "source" << YAML::Value << c.source
        << YAML::Key << "elements" << YAML::Value << YAML::Flow << c.elements
        << YAML::Key << "sink" << YAML::Value << c.sink
        << YAML::Key << "traffic_class" << YAML::Value << c.traffic_class
        << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "placements" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : sc.placements) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "element" << YAML::Value
        << p.element << YAML::Key << "count" << YAML::Value << p.count;
    if (p.rack) out << YAML::Key << "rack" << YAML::Value << p.rack->value;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "workload" << YAML::Value << YAML::BeginSeq;
  for (const auto& w : sc.workload) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "time_s" << YAML::Value
        << w.time_s << YAML::Key << "chain" << YAML::Value << w.chain
        << YAML::Key << "offered_mbps" << YAML::Value << w.offered_mbps << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "background" << YAML::Value << YAML::BeginSeq;
  for (const auto& b : sc.background) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "time_s" << YAML::Value
        << b.time_s << YAML::Key << "from_rack" << YAML::Value << b.from.value
        << YAML::Key << "to_rack" << YAML::Value << b.to.value << YAML::Key
        << "mbps" << YAML::Value << b.mbps << YAML::Key << "duration_s"
        << YAML::Value << b.duration_s << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "scripted" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : sc.scripted) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "time_s" << YAML::Value
        << s.time_s << YAML::Key << "element" << YAML::Value << s.element
        << YAML::EndMap;
  }
  out << YAML::EndSeq;

  const auto& p = sc.provisioning;
  out << YAML::Key << "provisioning" << YAML::Value << YAML::BeginMap
      << YAML::Key << "alpha" << YAML::Value << p.alpha
      << YAML::Key << "beta" << YAML::Value << p.beta
      << YAML::Key << "delta_compute" << YAML::Value << p.delta_compute
      << YAML::Key << "delta_net" << YAML::Value << p.delta_net
      << YAML::Key << "delta_deprov" << YAML::Value << p.delta_deprov
      << YAML::Key << "rho" << YAML::Value << p.rho
      << YAML::Key << "leeway" << YAML::Value << p.leeway
      << YAML::Key << "slo_latency_ms" << YAML::Value << p.slo_latency_ms
      << YAML::Key << "slo_backlog" << YAML::Value << p.slo_backlog
      << YAML::Key << "slo_window_s" << YAML::Value << p.slo_window_s
      << YAML::Key << "post_flowdist_wait_s" << YAML::Value << p.post_flowdist_wait_s
      << YAML::Key << "fallback_scale_count" << YAML::Value << p.fallback_scale_count
      << YAML::Key << "launch_delay_s" << YAML::Value << p.launch_delay_s
      << YAML::Key << "termination_delay_s" << YAML::Value << p.termination_delay_s
      << YAML::Key << "lp_link_utilization" << YAML::Value << p.lp_link_utilization
      << YAML::Key << "deprovision_enabled" << YAML::Value << p.deprovision_enabled
      << YAML::Key << "deprovision_cooldown_s" << YAML::Value << p.deprovision_cooldown_s
      << YAML::EndMap;

  out << YAML::Key << "run" << YAML::Value << YAML::BeginMap
      << YAML::Key << "policy" << YAML::Value << to_string(sc.policy)
      << YAML::Key << "autoscale" << YAML::Value << sc.autoscale
      << YAML::Key << "seed" << YAML::Value << sc.seed
      << YAML::Key << "duration_s" << YAML::Value << sc.duration_s
      << YAML::Key << "tick_s" << YAML::Value << sc.tick_s
      << YAML::Key << "latency_base_ms" << YAML::Value << sc.latency_base_ms
      << YAML::Key << "latency_cap_ms" << YAML::Value << sc.latency_cap_ms
      << YAML::Key << "request_kb" << YAML::Value << sc.request_kb
      << YAML::Key << "backlog_cap" << YAML::Value << sc.backlog_cap
      << YAML::Key << "forwarding" << YAML::Value << sc.forwarding
      << YAML::Key << "flows_per_tick" << YAML::Value << sc.flows_per_tick
      << YAML::Key << "flow_lifetime_s" << YAML::Value << sc.flow_lifetime_s
      << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace sfc
