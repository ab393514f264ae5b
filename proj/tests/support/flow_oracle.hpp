#pragma once

// Independent checks for flow-distribution results: constraint audit and a
// brute-force grid search over split fractions. Shared by unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sfc/flow_distribution.hpp"

namespace oracle {

using sfc::EdgeFlow;
using sfc::FlowDistribution;
using sfc::FlowProblem;
using sfc::InstanceId;
using sfc::RackId;

inline double rel(double err, double scale) { return err / std::max(1.0, std::fabs(scale)); }

struct Audit {
  double worst = 0.0;               // largest relative violation, all families
  double conservation = 0.0;        // largest relative conservation error
  std::string worst_row;
};

inline void note(Audit& a, double v, const std::string& row) {
  if (v > a.worst) {
    a.worst = v;
    a.worst_row = row;
  }
}

inline RackId rack(const FlowProblem& p, InstanceId i) { return p.instances.at(i).rack; }

inline double footprint(const FlowProblem& p, const std::vector<EdgeFlow>& edges) {
  double total = 0.0;
  for (const auto& e : edges) {
    if (e.from.valid() && rack(p, e.from) != rack(p, e.to)) total += e.mbps;
  }
  return total;
}

// Audits conservation, coverage, per-rack-pair bandwidth and the balance band
// (using any leeway the solver reports as widened).
inline Audit audit(const FlowProblem& p, const FlowDistribution& d) {
  Audit a;
  for (const auto& e : d.edges) note(a, rel(std::max(0.0, -e.mbps), e.mbps), "nonneg");
  for (std::size_t c = 0; c < p.chains.size(); ++c) {
    const auto& ch = p.chains[c];
    const int ci = static_cast<int>(c);
    auto in_at = [&](int boundary, InstanceId i) {
      double s = 0.0;
      for (const auto& e : d.edges) {
        if (e.chain == ci && e.boundary == boundary && e.to == i) s += e.mbps;
      }
      return s;
    };
    auto out_at = [&](int boundary, InstanceId i) {
      double s = 0.0;
      for (const auto& e : d.edges) {
        if (e.chain == ci && e.boundary == boundary && e.from == i) s += e.mbps;
      }
      return s;
    };
    const int boundaries = static_cast<int>(ch.positions.size()) + (ch.sinks.empty() ? 0 : 1);
    for (int j = 0; j < static_cast<int>(ch.positions.size()); ++j) {
      if (j + 1 >= boundaries) continue;
      for (InstanceId i : ch.positions[j]) {
        const double in = in_at(j, i);
        const double err = rel(std::fabs(in - out_at(j + 1, i) * ch.gains[j]), in);
        a.conservation = std::max(a.conservation, err);
        note(a, err, "conservation");
      }
    }
    double entering = 0.0;
    for (const auto& e : d.edges) {
      if (e.chain == ci && e.boundary == 0) entering += e.mbps;
    }
    note(a, rel(std::fabs(entering - ch.demand), ch.demand), "coverage");
    for (InstanceId s : ch.sources) {
      const double want = ch.demand / static_cast<double>(ch.sources.size());
      note(a, rel(std::fabs(out_at(0, s) - want), want), "source share");
    }
  }
  std::map<std::pair<RackId, RackId>, double> pair_load;
  for (const auto& e : d.edges) {
    if (!e.from.valid()) continue;
    RackId x = rack(p, e.from);
    RackId y = rack(p, e.to);
    if (x == y) continue;
    if (y < x) std::swap(x, y);
    pair_load[{x, y}] += e.mbps;
  }
  for (const auto& [rp, load] : pair_load) {
    const double cap = p.bandwidth ? p.bandwidth(rp.first, rp.second) : sfc::kUnbounded;
    if (std::isfinite(cap)) note(a, rel(std::max(0.0, load - cap), cap), "bandwidth");
  }
  std::map<InstanceId, double> target;
  std::map<InstanceId, double> load;
  for (std::size_t c = 0; c < p.chains.size(); ++c) {
    const auto& ch = p.chains[c];
    double scale = 1.0;
    for (std::size_t j = 0; j < ch.positions.size(); ++j) {
      for (InstanceId i : ch.positions[j]) {
        target[i] += ch.demand * scale / static_cast<double>(ch.positions[j].size());
      }
      scale /= ch.gains[j];
    }
    for (const auto& e : d.edges) {
      if (e.chain == static_cast<int>(c) &&
          e.boundary < static_cast<int>(ch.positions.size())) {
        load[e.to] += e.mbps;
      }
    }
  }
  for (const auto& [i, t] : target) {
    const auto w = d.widened_leeway.find(i);
    const double eps = w == d.widened_leeway.end() ? p.leeway : w->second;
    const double l = load[i];
    note(a, rel(std::max(0.0, (1.0 - eps) * t - l), t), "balance low");
    note(a, rel(std::max(0.0, l - (1.0 + eps) * t), t), "balance high");
  }
  return a;
}

// All splits of 1 into `parts` multiples of `step`.
inline std::vector<std::vector<double>> simplex_grid(int parts, double step) {
  const int units = static_cast<int>(std::lround(1.0 / step));
  std::vector<std::vector<double>> out;
  std::vector<int> cur(parts, 0);
  std::function<void(int, int)> rec = [&](int k, int left) {
    if (k == parts - 1) {
      cur[k] = left;
      std::vector<double> v;
      for (int u : cur) v.push_back(u * step);
      out.push_back(v);
      return;
    }
    for (int u = 0; u <= left; ++u) {
      cur[k] = u;
      rec(k + 1, left - u);
    }
  };
  rec(0, units);
  return out;
}

// Number of grid points grid_min would visit.
inline double grid_size(const FlowProblem& p, double step) {
  double total = 1.0;
  for (const auto& ch : p.chains) {
    const int boundaries = ch.boundary_count();
    for (int b = 0; b < boundaries; ++b) {
      const double per = static_cast<double>(simplex_grid(static_cast<int>(ch.downstream(b).size()), step).size());
      const std::size_t ups = b == 0 ? std::max<std::size_t>(1, ch.sources.size())
                                     : ch.positions[b - 1].size();
      total *= std::pow(per, static_cast<double>(ups));
    }
  }
  return total;
}

// Minimum footprint over every grid point satisfying the constraints
// (tolerance 1e-9 relative), nullopt when none does. Leeway is the problem's
// base value.
inline std::optional<double> grid_min(const FlowProblem& p, double step) {
  struct Slot {
    int chain;
    int boundary;
    int up_index;  // -1: location-free origin
  };
  std::vector<Slot> slots;
  std::vector<std::vector<std::vector<double>>> options;
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    const auto& ch = p.chains[c];
    for (int b = 0; b < ch.boundary_count(); ++b) {
      const auto grid = simplex_grid(static_cast<int>(ch.downstream(b).size()), step);
      const int ups = b == 0 ? static_cast<int>(ch.sources.size())
                             : static_cast<int>(ch.positions[b - 1].size());
      if (ups == 0) {
        slots.push_back({c, b, -1});
        options.push_back(grid);
      }
      for (int u = 0; u < ups; ++u) {
        slots.push_back({c, b, u});
        options.push_back(grid);
      }
    }
  }
  std::optional<double> best;
  std::vector<std::size_t> choice(slots.size(), 0);
  while (true) {
    FlowDistribution d;
    // Walk each chain stage by stage, pushing volume through the splits.
    std::size_t s = 0;
    for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
      const auto& ch = p.chains[c];
      std::map<InstanceId, double> inflow;
      for (int b = 0; b < ch.boundary_count(); ++b) {
        const auto downs = ch.downstream(b);
        std::map<InstanceId, double> next;
        auto emit = [&](InstanceId from, double volume) {
          const auto& split = options[s][choice[s]];
          for (std::size_t k = 0; k < downs.size(); ++k) {
            const double v = volume * split[k];
            d.edges.push_back({c, b, from, downs[k], v});
            next[downs[k]] += v;
          }
          ++s;
        };
        if (b == 0) {
          if (ch.sources.empty()) {
            emit(InstanceId{}, ch.demand);
          } else {
            for (InstanceId src : ch.sources) {
              emit(src, ch.demand / static_cast<double>(ch.sources.size()));
            }
          }
        } else {
          for (InstanceId u : ch.positions[b - 1]) emit(u, inflow[u] / ch.gains[b - 1]);
        }
        inflow = next;
      }
    }
    if (audit(p, d).worst <= 1e-9) {
      const double f = footprint(p, d.edges);
      if (!best || f < *best) best = f;
    }
    std::size_t k = 0;
    while (k < choice.size() && ++choice[k] == options[k].size()) {
      choice[k] = 0;
      ++k;
    }
    if (k == choice.size()) break;
  }
  return best;
}

// Random small problem: up to 3 chains over two shared middlebox types with
// up to 3 instances per position, random racks, gains and pair bandwidth.
inline FlowProblem random_problem(std::mt19937_64& rng, double max_grid, double step) {
  std::uniform_int_distribution<int> racks(0, 2);
  std::uniform_real_distribution<double> demand(10.0, 100.0);
  const double gains[] = {1.0, 0.8, 1.25, 2.0};
  const double leeways[] = {0.15, 0.3, 0.5};
  while (true) {
    FlowProblem p;
    p.leeway = leeways[rng() % 3];
    int next = 0;
    std::map<std::string, std::vector<InstanceId>> pool;
    auto make = [&](double cap) {
      InstanceId id(next++);
      p.instances[id] = {RackId(racks(rng)), cap};
      return id;
    };
    for (const char* el : {"A", "B"}) {
      const int n = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < n; ++k) pool[el].push_back(make(1000.0));
    }
    const int chains = 1 + static_cast<int>(rng() % 3);
    for (int c = 0; c < chains; ++c) {
      sfc::ChainFlowSpec ch;
      ch.id = "c" + std::to_string(c);
      ch.demand = demand(rng);
      const int shape = static_cast<int>(rng() % 3);
      if (shape == 0) ch.positions = {pool["A"]};
      if (shape == 1) ch.positions = {pool["B"]};
      if (shape == 2) ch.positions = {pool["A"], pool["B"]};
      for (std::size_t j = 0; j < ch.positions.size(); ++j) ch.gains.push_back(gains[rng() % 4]);
      if (rng() % 2) ch.sources.push_back(make(0.0));
      ch.sinks.push_back(make(0.0));
      p.chains.push_back(ch);
    }
    std::map<std::pair<int, int>, double> bw;
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) {
        bw[{a, b}] = rng() % 3 == 0 ? 20.0 + static_cast<double>(rng() % 80) : sfc::kUnbounded;
      }
    }
    p.bandwidth = [bw](RackId a, RackId b) {
      if (a == b) return sfc::kUnbounded;
      if (b < a) std::swap(a, b);
      return bw.at({a.value, b.value});
    };
    if (grid_size(p, step) <= max_grid) return p;
  }
}

}  // namespace oracle
