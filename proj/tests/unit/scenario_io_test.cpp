#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include "sfc/scenario_io.hpp"

using namespace sfc;

namespace {

const char* kMinimal = R"(name: tiny
topology:
  racks: 2
mboxes:
  - name: fw
chains:
  - id: web
    elements: [fw]
placements:
  - {element: clients, rack: 0}
  - {element: fw, rack: 0}
  - {element: servers, rack: 1}
workload:
  - {time_s: 0, chain: web, offered_mbps: 10}
)";

std::string parse_message(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    return e.what();
  }
  ADD_FAILURE() << "parse succeeded";
  return {};
}

}  // namespace

TEST(ScenarioIo, DefaultsApplied) {
  const Scenario s = parse_scenario_text(kMinimal);
  EXPECT_EQ(s.name, "tiny");
  EXPECT_EQ(s.topology.racks, 2);
  EXPECT_DOUBLE_EQ(s.provisioning.leeway, 0.15);
  EXPECT_DOUBLE_EQ(s.provisioning.alpha, 0.85);
  EXPECT_DOUBLE_EQ(s.tick_s, 1.0);
  EXPECT_EQ(s.policy, Policy::Stratos);
  ASSERT_EQ(s.chains.size(), 1u);
  EXPECT_EQ(s.chains[0].source, "clients");
  EXPECT_EQ(s.chains[0].sink, "servers");
  EXPECT_DOUBLE_EQ(s.mboxes.at("fw").gain, 1.0);
  ASSERT_EQ(s.placements.size(), 3u);
  EXPECT_EQ(s.placements[2].rack, RackId(1));
}

TEST(ScenarioIo, UnknownKeyNamedWithLine) {
  std::string text = kMinimal;
  text += "provisioning:\n  alpah: 0.9\n";
  const std::string msg = parse_message(text);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  EXPECT_NE(msg.find("provisioning.alpah"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line " + std::to_string(lines)), std::string::npos) << msg;
}

TEST(ScenarioIo, UndeclaredMiddleboxNamed) {
  std::string text = kMinimal;
  text.replace(text.find("[fw]"), 4, "[fw, ids]");
  const std::string msg = parse_message(text);
  EXPECT_NE(msg.find("ids"), std::string::npos) << msg;
  EXPECT_NE(msg.find("undeclared"), std::string::npos) << msg;
}

TEST(ScenarioIo, RangeAndOrderErrors) {
  std::string bad_rack = kMinimal;
  bad_rack.replace(bad_rack.find("servers, rack: 1"), 16, "servers, rack: 9");
  EXPECT_NE(parse_message(bad_rack).find("rack out of range"), std::string::npos);

  std::string bad_chain = kMinimal;
  bad_chain.replace(bad_chain.find("chain: web"), 10, "chain: api");
  EXPECT_NE(parse_message(bad_chain).find("unknown chain api"), std::string::npos);

  EXPECT_NE(parse_message("topology: [1, 2\n").find("line"), std::string::npos);
}

TEST(ScenarioIo, DumpRoundTrips) {
  const Scenario a = parse_scenario_text(kMinimal);
  const std::string d1 = dump_scenario(a);
  const Scenario b = parse_scenario_text(d1);
  EXPECT_EQ(dump_scenario(b), d1);
  EXPECT_EQ(b.placements.size(), a.placements.size());
  EXPECT_DOUBLE_EQ(b.provisioning.leeway, a.provisioning.leeway);
}

TEST(ScenarioIo, ShippedScenariosParse) {
  for (const char* f : {"minimal.yaml", "audit.yaml", "testbed.yaml"}) {
    const Scenario s = parse_scenario(std::string(SCENARIO_DIR) + "/" + f);
    EXPECT_NO_THROW(s.validate()) << f;
  }
  EXPECT_THROW(parse_scenario("/nonexistent/x.yaml"), Error);
}
