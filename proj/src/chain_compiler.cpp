#include "sfc/chain_compiler.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace sfc {

std::vector<std::string> LogicalChain::full_sequence() const {
  std::vector<std::string> seq;
  seq.reserve(elements.size() + 2);
  seq.push_back(source);
  seq.insert(seq.end(), elements.begin(), elements.end());
  seq.push_back(sink);
  return seq;
}

std::vector<std::string> LogicalGraph::successors(const std::string& v) const {
  auto it = adj_.find(v);
  return it == adj_.end() ? std::vector<std::string>{} : it->second;
}

std::size_t LogicalGraph::out_degree(const std::string& v) const {
  auto it = adj_.find(v);
  return it == adj_.end() ? 0 : it->second.size();
}

std::set<std::string> LogicalGraph::chains_on(const std::string& a,
                                              const std::string& b) const {
  auto it = edges_.find({a, b});
  return it == edges_.end() ? std::set<std::string>{} : it->second;
}

std::vector<std::string> LogicalGraph::topological_order() const {
  std::map<std::string, int> indegree;
  for (const auto& v : vertices_) indegree[v] = 0;
  for (const auto& [edge, _] : edges_) ++indegree[edge.second];
  std::priority_queue<std::string, std::vector<std::string>,
                      std::greater<std::string>>
      ready;
  for (const auto& [v, d] : indegree) {
    if (d == 0) ready.push(v);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string v = ready.top();
    ready.pop();
    order.push_back(v);
    for (const auto& w : successors(v)) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (order.size() != vertices_.size()) {
    throw Error(ErrorKind::InvalidChainSet, "chain set forms a cycle");
  }
  return order;
}

std::vector<std::vector<std::string>> LogicalGraph::downstream_paths(
    const std::string& v) const {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> stack;
  std::function<void(const std::string&)> walk = [&](const std::string& u) {
    const auto next = successors(u);
    if (next.empty()) {
      out.push_back(stack);
      return;
    }
    for (const auto& w : next) {
      stack.push_back(w);
      walk(w);
      stack.pop_back();
    }
  };
  walk(v);
  if (out.size() == 1 && out.front().empty()) out.clear();
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::string>> LogicalGraph::components() const {
  std::map<std::string, std::string> parent;
  for (const auto& v : vertices_) parent[v] = v;
  std::function<std::string(const std::string&)> find =
      [&](const std::string& x) -> std::string {
    if (parent[x] == x) return x;
    return parent[x] = find(parent[x]);
  };
  for (const auto& [edge, _] : edges_) {
    auto a = find(edge.first);
    auto b = find(edge.second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& v : vertices_) groups[find(v)].push_back(v);
  std::vector<std::vector<std::string>> out;
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

void validate_chains(std::span<const LogicalChain> chains,
                     const MBoxCatalog& mboxes) {
  std::set<std::string> ids;
  for (const auto& c : chains) {
    if (c.id.empty()) {
      throw Error(ErrorKind::InvalidChainSet, "chain with empty id");
    }
    if (!ids.insert(c.id).second) {
      throw Error(ErrorKind::InvalidChainSet, "duplicate chain id " + c.id);
    }
    if (mboxes.count(c.source) || mboxes.count(c.sink)) {
      throw Error(ErrorKind::InvalidChainSet,
                  "chain " + c.id + " endpoint shadows a middlebox name");
    }
    if (c.source == c.sink) {
      throw Error(ErrorKind::InvalidChainSet,
                  "chain " + c.id + " has identical source and sink");
    }
    std::set<std::string> seen;
    for (const auto& e : c.elements) {
      if (!mboxes.count(e)) {
        throw Error(ErrorKind::InvalidChainSet,
                    "chain " + c.id + " references undeclared middlebox " + e);
      }
      if (!seen.insert(e).second) {
        throw Error(ErrorKind::InvalidChainSet,
                    "chain " + c.id + " repeats middlebox " + e);
      }
    }
  }
}

LogicalGraph build_logical_graph(std::span<const LogicalChain> chains) {
  LogicalGraph g;
  for (const auto& c : chains) {
    const auto seq = c.full_sequence();
    for (const auto& v : seq) g.vertices_.insert(v);
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
      auto [it, fresh] = g.edges_.try_emplace({seq[k], seq[k + 1]});
      it->second.insert(c.id);
      if (fresh) g.adj_[seq[k]].push_back(seq[k + 1]);
    }
  }
  for (auto& [_, next] : g.adj_) std::sort(next.begin(), next.end());
  g.topological_order();  // cycle check
  return g;
}

std::string clone_name(const std::string& base, std::size_t index) {
  return base + "_" + std::to_string(index + 1);
}

TransformedChains transform_chains(std::span<const LogicalChain> chains,
                                   const MBoxCatalog& mboxes) {
  TransformedChains out;
  out.chains.assign(chains.begin(), chains.end());
  out.mboxes = mboxes;
  for (const auto& [name, _] : mboxes) out.origin[name] = name;

  // Vertices are visited in the original topological order; each clone step
  // rebuilds the graph so downstream boxes see the already-split upstream.
  const auto order = build_logical_graph(out.chains).topological_order();
  for (const auto& v : order) {
    auto spec = mboxes.find(v);
    if (spec == mboxes.end() || !spec->second.is_mangling) continue;

    const LogicalGraph g = build_logical_graph(out.chains);
    auto paths = g.downstream_paths(v);
    if (paths.size() <= 1) {
      out.clones[v] = {v};
      continue;
    }
    // Clone numbering follows the first chain taking each path; paths that
    // no single chain takes keep lexicographic order at the end.
    std::vector<std::vector<std::string>> ordered;
    for (const auto& c : out.chains) {
      auto pos = std::find(c.elements.begin(), c.elements.end(), v);
      if (pos == c.elements.end()) continue;
      std::vector<std::string> suffix(pos + 1, c.elements.end());
      suffix.push_back(c.sink);
      if (std::find(ordered.begin(), ordered.end(), suffix) == ordered.end()) {
        ordered.push_back(std::move(suffix));
      }
    }
    for (const auto& path : paths) {
      if (std::find(ordered.begin(), ordered.end(), path) == ordered.end()) {
        ordered.push_back(path);
      }
    }
    paths = std::move(ordered);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      names.push_back(clone_name(v, k));
      MBoxSpec copy = spec->second;
      copy.name = names.back();
      out.mboxes[copy.name] = copy;
      out.origin[copy.name] = v;
    }
    for (auto& c : out.chains) {
      auto pos = std::find(c.elements.begin(), c.elements.end(), v);
      if (pos == c.elements.end()) continue;
      std::vector<std::string> suffix(pos + 1, c.elements.end());
      suffix.push_back(c.sink);
      auto hit = std::find(paths.begin(), paths.end(), suffix);
      *pos = names[static_cast<std::size_t>(hit - paths.begin())];
    }
    out.mboxes.erase(v);
    out.origin.erase(v);
    out.clones[v] = std::move(names);
  }
  return out;
}

std::vector<Subchain> split_subchains(const LogicalChain& chain,
                                      const MBoxCatalog& mboxes) {
  const auto seq = chain.full_sequence();
  std::vector<std::size_t> cuts{0};
  for (std::size_t k = 1; k + 1 < seq.size(); ++k) {
    auto it = mboxes.find(seq[k]);
    if (it != mboxes.end() && it->second.is_mangling) cuts.push_back(k);
  }
  cuts.push_back(seq.size() - 1);

  std::vector<Subchain> out;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    Subchain sc;
    sc.chain_id = chain.id;
    sc.id = chain.id + "/" + std::to_string(s);
    sc.elements.assign(seq.begin() + static_cast<std::ptrdiff_t>(cuts[s]),
                       seq.begin() + static_cast<std::ptrdiff_t>(cuts[s + 1]) +
                           1);
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace sfc
