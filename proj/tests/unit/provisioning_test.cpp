#include <gtest/gtest.h>

#include "sfc/provisioning.hpp"

using namespace sfc;

namespace {

ProvisioningConfig window10() {
  ProvisioningConfig c;
  c.slo_window_s = 10.0;
  c.slo_latency_ms = 45.0;
  c.slo_backlog = 10.0;
  return c;
}

void latency(MetricStore& s, double t, double v) {
  s.record({app_subject("web"), MetricKind::LatencyMs, t, v});
}

}  // namespace

TEST(Slo, ViolationNeedsFullWindowAboveThreshold) {
  const auto c = window10();
  MetricStore s;
  for (int t = 0; t <= 20; ++t) latency(s, t, t >= 8 ? 60.0 : 20.0);
  // Samples above 45 start at t=8; the window [now-10, now] is all high
  // from now=18 onward.
  for (int now = 5; now <= 20; ++now) {
    EXPECT_EQ(check_slo(s, "web", now, c), now >= 18) << now;
  }
}

TEST(Slo, PartialHistoryNeverViolates) {
  const auto c = window10();
  MetricStore s;
  for (int t = 0; t <= 5; ++t) latency(s, t, 100.0);
  EXPECT_FALSE(check_slo(s, "web", 5.0, c));
  for (int t = 6; t <= 10; ++t) latency(s, t, 100.0);
  EXPECT_TRUE(check_slo(s, "web", 10.0, c));
}

TEST(Slo, BacklogAloneTriggers) {
  const auto c = window10();
  MetricStore s;
  for (int t = 0; t <= 12; ++t) {
    latency(s, t, 1.0);
    s.record({app_subject("web"), MetricKind::BacklogRequests, double(t), 11.0});
  }
  EXPECT_TRUE(check_slo(s, "web", 12.0, c));
  EXPECT_FALSE(slo_holds(s, "web", 12.0, c));
}

TEST(Slo, HoldsRequiresNoSampleAbove) {
  const auto c = window10();
  MetricStore s;
  for (int t = 0; t <= 20; ++t) latency(s, t, t == 15 ? 50.0 : 10.0);
  EXPECT_FALSE(slo_holds(s, "web", 20.0, c));
  EXPECT_TRUE(slo_holds(s, "web", 30.0, c));
  EXPECT_TRUE(slo_holds(s, "other", 20.0, c));
}

TEST(ComputeDetector, PerPacketTimeDoubling) {
  ProvisioningConfig c;
  MetricStore s;
  const InstanceId a(1), b(2);
  for (int t = 0; t <= 40; ++t) {
    s.record({instance_subject(a), MetricKind::PerPacketTimeUs, double(t), t > 25 ? 21.0 : 10.0});
    s.record({instance_subject(b), MetricKind::PerPacketTimeUs, double(t), t > 25 ? 19.0 : 10.0});
  }
  std::vector<InstanceProfile> prof{{a, true}, {b, true}};
  const auto flags = detect_compute_bottlenecks(prof, s, 40.0, 20.0, c);
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].instance, a);
  EXPECT_EQ(flags[0].metric, "per_packet_time");
  EXPECT_NEAR(flags[0].current, 21.0, 1e-12);
  EXPECT_NEAR(flags[0].baseline, 10.0, 1e-12);
}

TEST(ComputeDetector, CpuLevelAndGrowth) {
  ProvisioningConfig c;  // alpha 0.85, beta 1.1
  MetricStore s;
  const InstanceId hot(1), steady(2), fresh(3);
  for (int t = 0; t <= 40; ++t) {
    s.record({instance_subject(hot), MetricKind::CpuFrac, double(t), t > 25 ? 0.9 : 0.5});
    s.record({instance_subject(steady), MetricKind::CpuFrac, double(t), 0.9});
    if (t > 30) s.record({instance_subject(fresh), MetricKind::MemFrac, double(t), 0.95});
  }
  std::vector<InstanceProfile> prof{{hot, false}, {steady, false}, {fresh, false}};
  const auto flags = detect_compute_bottlenecks(prof, s, 40.0, 20.0, c);
  ASSERT_EQ(flags.size(), 2u);
  EXPECT_EQ(flags[0].instance, hot);
  EXPECT_FALSE(flags[0].low_confidence);
  EXPECT_EQ(flags[1].instance, fresh);
  EXPECT_TRUE(flags[1].low_confidence);
}

TEST(NetworkDetector, FlagsLowAvailability) {
  TopologySpec spec;
  spec.racks = 3;
  spec.machines_per_rack = 1;
  spec.agg_fanout = 3;
  spec.link_capacity_mbps = 1000;
  auto topo = DataCenterTopology::build_tree(spec);
  Placement pl(topo);
  pl.place(InstanceId(0), topo.machines_in(RackId(0))[0]);
  pl.place(InstanceId(1), topo.machines_in(RackId(1))[0]);
  pl.place(InstanceId(2), topo.machines_in(RackId(2))[0]);
  pl.place(InstanceId(3), topo.machines_in(RackId(2))[0]);
  std::vector<RackFlow> bg{{RackId(0), RackId(1), 960.0}};
  topo.set_background(bg);
  ProvisioningConfig c;
  c.delta_net = 50;
  std::vector<std::pair<InstanceId, InstanceId>> vls{
      {InstanceId(0), InstanceId(1)}, {InstanceId(0), InstanceId(1)},
      {InstanceId(0), InstanceId(2)}, {InstanceId(2), InstanceId(3)}};
  const auto rep = detect_network_bottlenecks(topo, pl, vls, c);
  // Both routes leave rack 0 over its loaded uplink; the rack-local pair
  // has no physical path.
  ASSERT_EQ(rep.congested.size(), 2u);
  EXPECT_NEAR(rep.congested[0].min_available, 40.0, 1e-9);
  EXPECT_NEAR(rep.congested[1].min_available, 40.0, 1e-9);
  EXPECT_EQ(rep.incident.at(InstanceId(0)), 2);
  EXPECT_EQ(rep.incident.at(InstanceId(1)), 1);
  EXPECT_EQ(rep.incident.at(InstanceId(2)), 1);
  EXPECT_FALSE(rep.incident.count(InstanceId(3)));
}

TEST(Placement, TiersFillNearestRacksFirst) {
  TopologySpec spec;
  spec.racks = 4;
  spec.machines_per_rack = 1;
  spec.slots_per_machine = 3;
  spec.agg_fanout = 2;
  auto topo = DataCenterTopology::build_tree(spec);
  MBoxCatalog cat{{"fw", MBoxSpec{"fw"}}};
  LogicalChain ch;
  ch.id = "web";
  ch.elements = {"fw"};
  Deployment dep(topo, cat, {ch}, false);
  const MachineId m0 = topo.machines_in(RackId(0))[0];
  dep.launch("clients", m0);
  dep.launch("fw", m0);
  dep.launch("servers", m0);
  MetricStore store;
  auto bw = [](RackId, RackId) { return 1000.0; };
  auto demand = [](double) { return std::map<std::string, double>{{"web", 10.0}}; };
  ProvisioningEngine eng(dep, store, ProvisioningConfig{}, Policy::Stratos, bw, demand);
  // Rack 0 is full; rack 1 shares the aggregation switch.
  const MachineId m1 = eng.place_new_instance("fw", 0.0);
  EXPECT_EQ(topo.rack_of(m1), RackId(1));
  dep.placement().place(InstanceId(900), m1);
  dep.placement().place(InstanceId(901), m1);
  dep.placement().place(InstanceId(902), m1);
  const MachineId m2 = eng.place_new_instance("fw", 0.0);
  EXPECT_GE(topo.rack_of(m2).value, 2);
  // Allow filter excludes racks.
  const MachineId m3 =
      eng.place_new_instance("fw", 0.0, [](RackId r) { return r.value == 3; });
  EXPECT_EQ(topo.rack_of(m3), RackId(3));
}

TEST(Policy, ParseAndPrint) {
  for (Policy p : {Policy::Stratos, Policy::HeavyWgt, Policy::LocalView, Policy::UniformFlow})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_EQ(parse_policy("STRATOS"), Policy::Stratos);
  EXPECT_THROW(parse_policy("greedy"), Error);
}

TEST(Actions, CsvHeaderAndRows) {
  std::vector<ActionRecord> log(1);
  log[0].step = 3;
  log[0].time = 85;
  log[0].kind = ActionKind::FlowDist;
  log[0].targets = "web";
  log[0].objective_before = 2;
  log[0].objective_after = 1;
  EXPECT_EQ(actions_csv(log),
            "step,time,policy,kind,targets,objective_before,objective_after\n"
            "3,85.000,stratos,flow_dist,web,2.000000,1.000000\n");
  EXPECT_TRUE(is_heavyweight(ActionKind::Scale));
  EXPECT_TRUE(is_heavyweight(ActionKind::FallbackScaleAll));
  EXPECT_FALSE(is_heavyweight(ActionKind::FlowDist));
}

TEST(Config, ValidationRejectsBadValues) {
  ProvisioningConfig c;
  EXPECT_NO_THROW(c.validate());
  c.leeway = 0.6;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.lp_link_utilization = 0;
  EXPECT_THROW(c.validate(), Error);
}
