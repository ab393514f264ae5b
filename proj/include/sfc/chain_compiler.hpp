#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfc/common.hpp"

namespace sfc {

struct MBoxSpec {
  std::string name;
  bool is_mangling = false;  // mangling or connection-terminating
  double gain = 1.0;         // ingress/egress volume ratio seed
  double capacity_mbps = 100.0;
  double per_packet_base_us = 10.0;
  // Middleboxes that do not emit one packet per packet received cannot be
  // judged by per-packet time; detection falls back to CPU/memory.
  bool one_packet_in_out = true;
};

using MBoxCatalog = std::map<std::string, MBoxSpec>;

struct LogicalChain {
  std::string id;
  std::string source = "clients";
  std::vector<std::string> elements;
  std::string sink = "servers";
  std::string traffic_class;

  // source, elements..., sink
  std::vector<std::string> full_sequence() const;
};

// Union of all chain edges; vertices are middlebox names plus endpoints.
class LogicalGraph {
 public:
  const std::set<std::string>& vertices() const { return vertices_; }
  const std::map<std::pair<std::string, std::string>, std::set<std::string>>&
  edges() const {
    return edges_;
  }

  std::vector<std::string> successors(const std::string& v) const;
  std::size_t out_degree(const std::string& v) const;
  std::size_t edge_count() const { return edges_.size(); }
  // Chains using the edge a -> b (empty if absent).
  std::set<std::string> chains_on(const std::string& a,
                                  const std::string& b) const;

  // Kahn's algorithm, lexicographically smallest ready vertex first.
  std::vector<std::string> topological_order() const;

  // Every path from `v` to a vertex without successors, excluding `v` itself,
  // in lexicographic order.
  std::vector<std::vector<std::string>> downstream_paths(
      const std::string& v) const;

  // Weakly connected components, each sorted; components ordered by their
  // smallest vertex.
  std::vector<std::vector<std::string>> components() const;

 private:
  friend LogicalGraph build_logical_graph(std::span<const LogicalChain>);

  std::set<std::string> vertices_;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> edges_;
  std::map<std::string, std::vector<std::string>> adj_;
};

// Checks ids are unique, elements do not repeat within a chain, every element
// names a catalogued middlebox, and endpoints do not shadow middleboxes.
void validate_chains(std::span<const LogicalChain> chains,
                     const MBoxCatalog& mboxes);

// Throws InvalidChainSet when the union graph has a cycle.
LogicalGraph build_logical_graph(std::span<const LogicalChain> chains);

struct TransformedChains {
  std::vector<LogicalChain> chains;
  MBoxCatalog mboxes;  // original catalogue plus clone entries
  // Mangling middlebox -> its clones, clone i serving downstream path i.
  // Boxes with a single downstream path map to themselves.
  std::map<std::string, std::vector<std::string>> clones;
  std::map<std::string, std::string> origin;  // clone -> original name
};

TransformedChains transform_chains(std::span<const LogicalChain> chains,
                                   const MBoxCatalog& mboxes);

std::string clone_name(const std::string& base, std::size_t index);

struct Subchain {
  std::string id;
  std::string chain_id;
  // Head first, exit target last. The head is the client endpoint or a
  // mangling box; the exit is the next mangling box or the server endpoint.
  std::vector<std::string> elements;

  const std::string& head() const { return elements.front(); }
  const std::string& exit() const { return elements.back(); }
};

std::vector<Subchain> split_subchains(const LogicalChain& chain,
                                      const MBoxCatalog& mboxes);

}  // namespace sfc
