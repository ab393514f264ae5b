// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any
// fails.
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../support/flow_oracle.hpp"
#include "sfc/scenario_io.hpp"
#include "sfc/simulator.hpp"

using namespace sfc;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario load(const char* file) {
  return parse_scenario(std::string(SCENARIO_DIR) + "/" + file);
}

struct ScaleAverages {
  double strat30 = 0, strat85 = 0, uni30 = 0;
  double strat_inst5 = 0, strat_median = 0, uni_median = 0;
  double runtime = 0;
  std::string seed1_csv;
};

ScaleAverages scale_runs() {
  ScaleAverages a;
  const int seeds = 3;
  for (int s = 1; s <= seeds; ++s) {
    ScaleExperimentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto r = run_scale_experiment(cfg);
    const auto& st = r.of(Policy::Stratos);
    const auto& un = r.of(Policy::UniformFlow);
    a.strat30 += st.share_at_least(0.30) / seeds;
    a.strat85 += st.share_at_least(0.85) / seeds;
    a.uni30 += un.share_at_least(0.30) / seeds;
    a.strat_inst5 += st.share_instances_at_least(5.0) / seeds;
    a.strat_median += st.median_instance_mbps() / seeds;
    a.uni_median += un.median_instance_mbps() / seeds;
    a.runtime += st.runtime_s + un.runtime_s;
    if (s == 1) a.seed1_csv = r.distributions_csv();
  }
  return a;
}

void criteria_1_2(const ScaleAverages& a) {
  const bool all30 = a.strat30 >= 1.0 - 1e-9;
  const bool band85 = a.strat85 >= 0.30 - 1e-9 && a.strat85 <= 0.50 + 1e-9;
  const bool uni = a.uni30 <= 0.30 + 1e-9;
  report(1, "scale experiment", all30 && band85 && uni && a.runtime <= 600,
         fmt("stratos >=30%%: %.1f%% (need 100), >=85%%: %.1f%% (need 30-50), "
             "uniformflow >=30%%: %.1f%% (need <=30), runtime %.0fs",
             100 * a.strat30, 100 * a.strat85, 100 * a.uni30, a.runtime));
  report(2, "instance efficiency",
         a.strat_inst5 >= 0.80 && a.uni_median < a.strat_median,
         fmt("stratos instances >=5Mbps: %.1f%% (need 80), median Mbps "
             "uniformflow %.2f vs stratos %.2f (need lower)",
             100 * a.strat_inst5, a.uni_median, a.strat_median));
}

void criterion_3() {
  const Scenario base = load("testbed.yaml");
  // Phase boundaries come from the scenario itself.
  double transient = 1e300, persistent = 1e300;
  for (const auto& b : base.background) {
    if (b.duration_s == 0.0) persistent = std::min(persistent, b.time_s);
    else if (b.time_s > 0.0) transient = std::min(transient, b.time_s);
  }
  const double ramp = base.workload.size() > 1 ? base.workload[1].time_s : 0.0;

  std::map<Policy, RunResult> runs;
  for (Policy p : {Policy::Stratos, Policy::HeavyWgt, Policy::LocalView,
                   Policy::UniformFlow}) {
    Scenario s = base;
    s.policy = p;
    runs[p] = run_scenario(s);
  }
  std::vector<ActionRecord> acts;
  for (const auto& a : runs[Policy::Stratos].actions)
    if (a.kind != ActionKind::None) acts.push_back(a);

  bool first_flowdist = false;
  for (const auto& a : acts) {
    if (a.time < transient) continue;
    first_flowdist = a.kind == ActionKind::FlowDist;
    break;
  }
  // A burst is a maximal run of consecutive scale actions in the log.
  int bursts = 0;
  bool in_burst = false;
  bool migrate_ok = true;
  for (const auto& a : acts) {
    const bool scale = a.kind == ActionKind::Scale || a.kind == ActionKind::FallbackScaleAll;
    if (scale && !in_burst && a.time >= ramp) ++bursts;
    in_burst = scale;
    if (a.kind == ActionKind::Migrate && a.time < persistent) migrate_ok = false;
  }
  const int heavy = runs[Policy::Stratos].heavyweight_count();
  const int heavy_base = runs[Policy::HeavyWgt].heavyweight_count();
  const int inst = runs[Policy::Stratos].final_mbox_instances;
  bool fewest = true;
  std::string counts;
  for (const auto& [p, r] : runs) {
    counts += fmt(" %s=%d", to_string(p), r.final_mbox_instances);
    if (p != Policy::Stratos && inst > r.final_mbox_instances) fewest = false;
  }
  report(3, "policy comparison",
         first_flowdist && bursts == 1 && migrate_ok && heavy <= heavy_base && fewest,
         fmt("first response flow_dist: %s, scale bursts after ramp: %d, "
             "migrations only after %.0fs: %s, heavyweight stratos %d vs heavywgt %d, "
             "final instances:%s",
             first_flowdist ? "yes" : "no", bursts, persistent,
             migrate_ok ? "yes" : "no", heavy, heavy_base, counts.c_str()));
}

std::set<std::string> lines_of(const std::string& text) {
  std::set<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.insert(l);
  return out;
}

void criterion_4() {
  const Scenario s = load("audit.yaml");
  const AuditReport clean = affinity_audit(s);
  RunOptions opt;
  opt.corrupt_at_s = s.duration_s / 2;
  const AuditReport bad = affinity_audit(s, opt);

  // Two chains share a firewall and a proxy; only one continues to an IPS.
  MBoxCatalog cat;
  for (auto [n, m] : {std::pair{"FW", false}, {"Proxy", true}, {"IPS", false}}) {
    MBoxSpec spec;
    spec.name = n;
    spec.is_mangling = m;
    cat[n] = spec;
  }
  const std::vector<LogicalChain> chains = {
      {"red", "clients", {"FW", "Proxy"}, "servers", ""},
      {"blue", "clients", {"FW", "Proxy", "IPS"}, "servers", ""}};
  const auto t = transform_chains(chains, cat);
  const std::size_t clones = t.clones.count("Proxy") ? t.clones.at("Proxy").size() : 0;
  using Cut = std::vector<std::vector<std::string>>;
  auto cuts = [&](const LogicalChain& c) {
    Cut out;
    for (const auto& sc : split_subchains(c, t.mboxes)) out.push_back(sc.elements);
    return out;
  };
  const bool bounds =
      cuts(t.chains[0]) == Cut{{"clients", "FW", "Proxy_1"}, {"Proxy_1", "servers"}} &&
      cuts(t.chains[1]) == Cut{{"clients", "FW", "Proxy_2"}, {"Proxy_2", "IPS", "servers"}};

  // Rules present before scaling survive it unchanged.
  TopologySpec ts;
  ts.racks = 4;
  ts.machines_per_rack = 2;
  ts.slots_per_machine = 4;
  ts.agg_fanout = 2;
  Deployment dep(DataCenterTopology::build_tree(ts), cat, chains, true);
  auto machine = [&](int r) { return dep.placement().free_machine(RackId(r)); };
  dep.launch("clients", machine(0));
  dep.launch("servers", machine(3));
  dep.launch("FW", machine(0));
  dep.launch("Proxy_1", machine(1));
  dep.launch("Proxy_2", machine(1));
  dep.launch("IPS", machine(2));
  auto* fp = dep.forwarding();
  for (int k = 0; k < 6; ++k) {
    fp->admit_flow(k % 2 ? "red" : "blue", 1000 + k, 1.0, InstanceId());
  }
  const auto before = lines_of(fp->dump_rules());
  std::vector<FlowTrace> traces;
  for (int f : fp->active_flows()) traces.push_back(fp->trace_flow(f));
  dep.launch("FW", machine(2));
  dep.launch("IPS", machine(3));
  const auto after = lines_of(fp->dump_rules());
  bool kept = after.size() > before.size();
  for (const auto& l : before) kept = kept && after.count(l);
  const auto flows = fp->active_flows();
  for (std::size_t k = 0; k < flows.size(); ++k)
    kept = kept && fp->trace_flow(flows[k]) == traces[k];

  report(4, "composition correctness",
         clean.clean() && clean.flows_checked > 0 && bad.discrepant_flows.size() == 1 &&
             clones == 2 && bounds && kept,
         fmt("audit %d flows / %d checkpoints / %zu discrepancies, fault injection "
             "flagged %zu flow(s), proxy clones %zu, subchain cuts %s, pre-existing "
             "rules %s (%zu -> %zu)",
             clean.flows_checked, clean.checkpoints, clean.discrepant_flows.size(),
             bad.discrepant_flows.size(), clones, bounds ? "match" : "differ",
             kept ? "unchanged" : "changed", before.size(), after.size()));
}

void criterion_5() {
  std::mt19937_64 rng(77);
  int solved = 0, with_grid = 0, bad = 0;
  double worst = 0, conservation = 0;
  for (int trial = 0; trial < 120 && solved < 60; ++trial) {
    const FlowProblem p = oracle::random_problem(rng, 60000, 0.05);
    const auto grid = oracle::grid_min(p, 0.05);
    std::optional<FlowDistribution> d;
    try {
      d = solve_flow_distribution(p);
    } catch (const InfeasibleError&) {
    }
    if (grid && !d) ++bad;
    if (!d) continue;
    ++solved;
    const auto a = oracle::audit(p, *d);
    worst = std::max(worst, a.worst);
    conservation = std::max(conservation, a.conservation);
    if (grid) {
      ++with_grid;
      if (d->objective > *grid + 1e-6 * (1.0 + *grid)) ++bad;
    }
  }
  report(5, "flow distribution optimality",
         solved >= 50 && bad == 0 && worst <= 1e-6 && conservation <= 1e-9,
         fmt("%d solved instances (%d with feasible grid points), worst relative "
             "violation %.2e, conservation error %.2e, grid beats solver %d times",
             solved, with_grid, worst, conservation, bad));
}

void criterion_6() {
  const BenchResult b = bench_controller(1000);
  report(6, "controller scalability",
         b.lp_mean_ms < 200 && b.lp_per_sec >= 40 && b.placements_per_sec >= 50,
         fmt("solve mean %.3f ms, %.0f solves/s, %.0f placements/s",
             b.lp_mean_ms, b.lp_per_sec, b.placements_per_sec));
}

void criterion_7(const std::string& scale_seed1) {
  auto digest = [](const RunResult& r) {
    return std::hash<std::string>{}(r.timeseries_csv() + r.actions_csv() +
                                    r.distributions_csv() + r.metrics_csv);
  };
  bool same = true;
  std::string detail;
  for (const char* f : {"testbed.yaml", "audit.yaml", "minimal.yaml"}) {
    const Scenario s = load(f);
    const auto h1 = digest(run_scenario(s));
    const auto h2 = digest(run_scenario(s));
    same = same && h1 == h2;
    detail += fmt("%s %016zx%s ", f, h1, h1 == h2 ? "" : " (differs)");
  }
  ScaleExperimentConfig cfg;
  cfg.seed = 1;
  const bool scale_same = run_scale_experiment(cfg).distributions_csv() == scale_seed1;
  report(7, "determinism", same && scale_same,
         detail + fmt("scale-exp seed 1 %s", scale_same ? "identical" : "differs"));
}

}  // namespace

int main() {
  auto guarded = [](int id, const char* name, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("error: ") + e.what());
    }
  };
  ScaleAverages avg;
  guarded(1, "scale experiment", [&] {
    avg = scale_runs();
    criteria_1_2(avg);
  });
  guarded(3, "policy comparison", criterion_3);
  guarded(4, "composition correctness", criterion_4);
  guarded(5, "flow distribution optimality", criterion_5);
  guarded(6, "controller scalability", criterion_6);
  guarded(7, "determinism", [&] { criterion_7(avg.seed1_csv); });
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
