#include <chrono>
#include <cstdio>
#include <random>

#include "sfc/deployment.hpp"
#include "sfc/provisioning.hpp"
#include "sfc/simulator.hpp"

namespace sfc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

MBoxCatalog bench_catalog() {
  MBoxCatalog m;
  m["fw"] = MBoxSpec{"fw", false, 1.0, 100.0, 10.0, true};
  m["ids"] = MBoxSpec{"ids", false, 1.0, 80.0, 20.0, true};
  m["proxy"] = MBoxSpec{"proxy", false, 1.0, 120.0, 15.0, true};
  return m;
}

std::vector<LogicalChain> bench_chains() {
  return {
      {"web", "clients", {"fw", "ids"}, "servers", "web"},
      {"mail", "clients", {"fw", "proxy"}, "servers", "mail"},
      {"scan", "clients", {"ids"}, "servers", "scan"},
  };
}

TopologySpec bench_topology() {
  TopologySpec t;
  t.racks = 20;
  t.machines_per_rack = 2;
  t.slots_per_machine = 4;
  t.agg_fanout = 5;
  t.core_fanout = 4;
  return t;
}

}  // namespace

std::string BenchResult::table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "operation            mean_ms   ops_per_sec\n"
                "flow_distribution  %9.3f  %12.1f\n"
                "placement          %9.3f  %12.1f\n"
                "trivial_solve      %9.3f\n"
                "tenants            %9d\n",
                lp_mean_ms, lp_per_sec, placement_mean_ms, placements_per_sec,
                trivial_lp_ms, tenants);
  return buf;
}

BenchResult bench_controller(int tenants, std::uint64_t seed) {
  if (tenants < 1) throw Error(ErrorKind::InvalidInput, "bench: tenants must be >= 1");
  BenchResult out;
  out.tenants = tenants;
  std::mt19937_64 rng(seed);
  const auto catalog = bench_catalog();
  const auto chains = bench_chains();
  const auto base = DataCenterTopology::build_tree(bench_topology());
  const BandwidthFn bandwidth = [&base](RackId a, RackId b) {
    return base.available_bandwidth(a, b);
  };

  double lp_total = 0.0;
  double place_total = 0.0;
  int lp_count = 0;
  int place_count = 0;
  for (int t = 0; t < tenants; ++t) {
    Deployment dep(base, catalog, chains, false, "tenant" + std::to_string(t));
    std::uniform_int_distribution<int> rack(0, base.rack_count() - 1);
    auto put = [&](const std::string& e, int n) {
      for (int k = 0; k < n; ++k) {
        MachineId m;
        while (!m.valid()) m = dep.placement().free_machine(RackId(rack(rng)));
        dep.launch(e, m);
      }
    };
    put("clients", 2);
    put("fw", 2);
    put("ids", 2);
    put("proxy", 2);
    put("servers", 2);
    std::uniform_real_distribution<double> load(20.0, 60.0);
    const std::map<std::string, double> demand{
        {"web", load(rng)}, {"mail", load(rng)}, {"scan", load(rng)}};
    const FlowProblem p = dep.flow_problem(demand, bandwidth, 0.15);

    auto t0 = Clock::now();
    try {
      dep.apply_distribution(p, solve_flow_distribution(p));
    } catch (const InfeasibleError&) {
      dep.apply_distribution(p, solve_max_throughput(p));
    }
    lp_total += ms_since(t0);
    ++lp_count;

    MetricStore store;
    ProvisioningEngine engine(dep, store, ProvisioningConfig{}, Policy::Stratos,
                              bandwidth, [demand](double) { return demand; });
    t0 = Clock::now();
    engine.place_new_instance("ids", 0.0);
    place_total += ms_since(t0);
    ++place_count;
  }
  out.lp_mean_ms = lp_total / lp_count;
  out.lp_per_sec = 1000.0 * lp_count / lp_total;
  out.placement_mean_ms = place_total / place_count;
  out.placements_per_sec = 1000.0 * place_count / place_total;

  // One chain, one instance per element.
  MBoxCatalog one{{"fw", MBoxSpec{"fw", false, 1.0, 100.0, 10.0, true}}};
  TopologySpec small;
  small.racks = 1;
  Deployment dep(DataCenterTopology::build_tree(small), one,
                 {{"solo", "clients", {"fw"}, "servers", "solo"}}, false);
  const MachineId m = dep.placement().free_machine(RackId(0));
  dep.launch("clients", m);
  dep.launch("fw", m);
  dep.launch("servers", m);
  const FlowProblem p = dep.flow_problem({{"solo", 10.0}}, bandwidth, 0.15);
  const auto t0 = Clock::now();
  const int reps = 50;
  for (int k = 0; k < reps; ++k) solve_flow_distribution(p);
  out.trivial_lp_ms = ms_since(t0) / reps;
  return out;
}

}  // namespace sfc
