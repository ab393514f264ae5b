#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "sfc/chain_compiler.hpp"

namespace {

using namespace sfc;

MBoxCatalog catalog(std::initializer_list<std::pair<const char*, bool>> boxes) {
  MBoxCatalog m;
  for (const auto& [name, mangling] : boxes) {
    MBoxSpec s;
    s.name = name;
    s.is_mangling = mangling;
    m[name] = s;
  }
  return m;
}

// The two-tenant-chain deployment: red = FW -> Proxy, blue = FW -> Proxy -> IPS.
std::vector<LogicalChain> red_blue() {
  return {{"red", "clients", {"FW", "Proxy"}, "servers", ""},
          {"blue", "clients", {"FW", "Proxy", "IPS"}, "servers", ""}};
}

// Paths from `v` to a sink over the union of chain edges, by direct
// enumeration of chain suffix combinations.
std::set<std::vector<std::string>> paths_from(const std::vector<LogicalChain>& chains,
                                              const std::string& v) {
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& c : chains) {
    const auto seq = c.full_sequence();
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) adj[seq[k]].insert(seq[k + 1]);
  }
  std::set<std::vector<std::string>> out;
  std::vector<std::string> cur;
  std::function<void(const std::string&)> dfs = [&](const std::string& u) {
    if (adj[u].empty()) {
      out.insert(cur);
      return;
    }
    for (const auto& w : adj[u]) {
      cur.push_back(w);
      dfs(w);
      cur.pop_back();
    }
  };
  dfs(v);
  return out;
}

TEST(LogicalGraph, ProxyHasTwoSuccessors) {
  const auto chains = red_blue();
  const auto g = build_logical_graph(chains);
  EXPECT_EQ(g.out_degree("Proxy"), 2u);
  EXPECT_TRUE(g.vertices().count("clients"));
  EXPECT_TRUE(g.vertices().count("IPS"));
  EXPECT_EQ(g.chains_on("FW", "Proxy"), (std::set<std::string>{"blue", "red"}));
}

TEST(LogicalGraph, SingleChainTwoEdges) {
  const std::vector<LogicalChain> chains = {{"a", "clients", {"A"}, "servers", ""}};
  EXPECT_EQ(build_logical_graph(chains).edge_count(), 2u);
}

TEST(LogicalGraph, DisjointChainsFormTwoComponents) {
  const std::vector<LogicalChain> chains = {{"x", "c1", {"A", "B"}, "s1", ""},
                                            {"y", "c2", {"C"}, "s2", ""}};
  const auto comps = build_logical_graph(chains).components();
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0], (std::vector<std::string>{"A", "B", "c1", "s1"}));
  EXPECT_EQ(comps[1], (std::vector<std::string>{"C", "c2", "s2"}));
}

TEST(LogicalGraph, CycleIsRejected) {
  const std::vector<LogicalChain> chains = {{"x", "clients", {"A", "B"}, "servers", ""},
                                            {"y", "clients", {"B", "A"}, "servers", ""}};
  try {
    build_logical_graph(chains);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidChainSet);
  }
}

TEST(ValidateChains, RejectsBadInput) {
  const auto m = catalog({{"A", false}});
  const std::vector<LogicalChain> unknown = {{"x", "clients", {"Z"}, "servers", ""}};
  EXPECT_THROW(validate_chains(unknown, m), Error);
  const std::vector<LogicalChain> repeat = {{"x", "clients", {"A", "A"}, "servers", ""}};
  EXPECT_THROW(validate_chains(repeat, m), Error);
  const std::vector<LogicalChain> dup = {{"x", "clients", {"A"}, "servers", ""},
                                         {"x", "clients", {"A"}, "servers", ""}};
  EXPECT_THROW(validate_chains(dup, m), Error);
}

TEST(Transform, ProxyGetsOneClonePerChain) {
  const auto chains = red_blue();
  const auto t = transform_chains(chains, catalog({{"FW", false}, {"Proxy", true}, {"IPS", false}}));
  ASSERT_EQ(t.clones.at("Proxy").size(), 2u);
  EXPECT_EQ(t.chains[0].elements, (std::vector<std::string>{"FW", "Proxy_1"}));
  EXPECT_EQ(t.chains[1].elements, (std::vector<std::string>{"FW", "Proxy_2", "IPS"}));
  EXPECT_EQ(t.origin.at("Proxy_2"), "Proxy");
  EXPECT_FALSE(t.mboxes.count("Proxy"));
  EXPECT_EQ(build_logical_graph(t.chains).out_degree("Proxy_1"), 1u);
}

TEST(Transform, IdentityWithoutManglers) {
  const auto chains = red_blue();
  const auto t = transform_chains(chains, catalog({{"FW", false}, {"Proxy", false}, {"IPS", false}}));
  for (std::size_t k = 0; k < chains.size(); ++k) {
    EXPECT_EQ(t.chains[k].elements, chains[k].elements);
  }
  EXPECT_TRUE(t.clones.empty());
}

TEST(Transform, SharedNatWithThreeSuffixes) {
  const std::vector<LogicalChain> chains = {
      {"a", "clients", {"NAT", "A"}, "servers", ""},
      {"b", "clients", {"NAT", "B"}, "servers", ""},
      {"c", "clients", {"NAT", "A", "B"}, "servers", ""}};
  const auto m = catalog({{"NAT", true}, {"A", false}, {"B", false}});
  const auto t = transform_chains(chains, m);
  EXPECT_EQ(t.clones.at("NAT").size(), paths_from(chains, "NAT").size());
  EXPECT_EQ(t.clones.at("NAT").size(), 3u);
}

TEST(Transform, RandomChainSetsSatisfyInvariants) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> boxes = {"M0", "M1", "M2", "M3", "M4", "M5", "M6", "M7"};
  for (int trial = 0; trial < 150; ++trial) {
    MBoxCatalog m;
    for (const auto& b : boxes) {
      MBoxSpec s;
      s.name = b;
      s.is_mangling = rng() % 3 == 0;
      m[b] = s;
    }
    std::vector<LogicalChain> chains;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int c = 0; c < n; ++c) {
      LogicalChain lc;
      lc.id = "c" + std::to_string(c);
      for (const auto& b : boxes) {
        if (rng() % 3 == 0) lc.elements.push_back(b);
      }
      if (lc.elements.empty()) lc.elements.push_back(boxes[rng() % boxes.size()]);
      lc.sink = rng() % 2 ? "servers" : "backend";
      chains.push_back(lc);
    }
    const auto t = transform_chains(chains, m);
    ASSERT_EQ(t.chains.size(), chains.size());

    // The first mangling box in topological order sees the original graph.
    const auto order = build_logical_graph(chains).topological_order();
    for (const auto& v : order) {
      if (!m.count(v) || !m.at(v).is_mangling) continue;
      EXPECT_EQ(t.clones.at(v).size(), std::max<std::size_t>(1, paths_from(chains, v).size()))
          << "trial " << trial << " box " << v;
      break;
    }

    // Soundness: no mangling vertex keeps out-degree above one.
    const auto g = build_logical_graph(t.chains);
    for (const auto& v : g.vertices()) {
      auto it = t.mboxes.find(v);
      if (it != t.mboxes.end() && it->second.is_mangling) {
        EXPECT_LE(g.out_degree(v), 1u) << "trial " << trial << " " << v;
      }
    }
    // Equivalence: mapping clones back recovers the input.
    for (std::size_t k = 0; k < chains.size(); ++k) {
      std::vector<std::string> back;
      for (const auto& e : t.chains[k].elements) back.push_back(t.origin.at(e));
      EXPECT_EQ(back, chains[k].elements) << "trial " << trial;
    }
    // Subchains: cuts exactly at mangling boxes, pure interiors.
    for (const auto& c : t.chains) {
      const auto subs = split_subchains(c, t.mboxes);
      std::size_t mangling = 0;
      for (const auto& e : c.elements) mangling += t.mboxes.at(e).is_mangling ? 1 : 0;
      EXPECT_EQ(subs.size(), mangling + 1);
      std::vector<std::string> joined = subs.front().elements;
      for (std::size_t s = 1; s < subs.size(); ++s) {
        EXPECT_EQ(subs[s].head(), subs[s - 1].exit());
        EXPECT_TRUE(t.mboxes.at(subs[s].head()).is_mangling);
        joined.insert(joined.end(), subs[s].elements.begin() + 1, subs[s].elements.end());
      }
      EXPECT_EQ(joined, c.full_sequence());
      for (const auto& sc : subs) {
        for (std::size_t k = 1; k + 1 < sc.elements.size(); ++k) {
          EXPECT_FALSE(t.mboxes.at(sc.elements[k]).is_mangling);
        }
      }
    }
  }
}

TEST(Subchains, ProxySplitsTheChain) {
  const LogicalChain c{"blue", "clients", {"FW", "Proxy", "IPS"}, "servers", ""};
  const auto subs = split_subchains(c, catalog({{"FW", false}, {"Proxy", true}, {"IPS", false}}));
  ASSERT_EQ(subs.size(), 2u);
  EXPECT_EQ(subs[0].elements, (std::vector<std::string>{"clients", "FW", "Proxy"}));
  EXPECT_EQ(subs[1].elements, (std::vector<std::string>{"Proxy", "IPS", "servers"}));
}

TEST(Subchains, NoManglerMeansOneSubchain) {
  const LogicalChain c{"x", "clients", {"FW", "IPS"}, "servers", ""};
  EXPECT_EQ(split_subchains(c, catalog({{"FW", false}, {"IPS", false}})).size(), 1u);
}

TEST(Subchains, TwoManglersMeanThreeSubchains) {
  const LogicalChain c{"x", "clients", {"NAT", "Proxy"}, "servers", ""};
  const auto subs = split_subchains(c, catalog({{"NAT", true}, {"Proxy", true}}));
  ASSERT_EQ(subs.size(), 3u);
  EXPECT_EQ(subs[1].elements, (std::vector<std::string>{"NAT", "Proxy"}));
}

}  // namespace
