#include "sfc/flow_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace sfc {

void CostMatrix::set(InstanceId a, InstanceId b, double cost) {
  cost_[{a, b}] = cost;
  cost_[{b, a}] = cost;
}

double CostMatrix::operator()(InstanceId a, InstanceId b) const {
  auto it = cost_.find({a, b});
  if (it == cost_.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "no cost entry for instance pair " + std::to_string(a.value) +
                    "," + std::to_string(b.value));
  }
  return it->second;
}

CostMatrix build_cost_matrix(const DataCenterTopology& topo,
                             const Placement& placement,
                             std::span<const InstanceId> instances) {
  std::vector<RackId> racks;
  racks.reserve(instances.size());
  for (InstanceId i : instances) {
    racks.push_back(topo.rack_of(placement.machine_of(i)));
  }
  CostMatrix m;
  for (std::size_t a = 0; a < instances.size(); ++a) {
    for (std::size_t b = a; b < instances.size(); ++b) {
      m.set(instances[a], instances[b], racks[a] == racks[b] ? 0.0 : 1.0);
    }
  }
  return m;
}

std::span<const InstanceId> ChainFlowSpec::upstream(int boundary) const {
  if (boundary == 0) return sources;
  return positions.at(static_cast<std::size_t>(boundary - 1));
}

std::span<const InstanceId> ChainFlowSpec::downstream(int boundary) const {
  if (boundary < static_cast<int>(positions.size())) {
    return positions[static_cast<std::size_t>(boundary)];
  }
  return sinks;
}

double ChainFlowSpec::volume_scale(int position) const {
  double s = 1.0;
  for (int l = 0; l < position; ++l) s /= gains.at(static_cast<std::size_t>(l));
  return s;
}

double FlowDistribution::inflow(int chain, InstanceId inst) const {
  double total = 0.0;
  for (const EdgeFlow& e : edges) {
    if (e.chain == chain && e.to == inst) total += e.mbps;
  }
  return total;
}

double FlowDistribution::outflow(int chain, InstanceId inst) const {
  double total = 0.0;
  for (const EdgeFlow& e : edges) {
    if (e.chain == chain && e.from == inst) total += e.mbps;
  }
  return total;
}

double FlowDistribution::instance_load(InstanceId inst) const {
  double total = 0.0;
  for (const EdgeFlow& e : edges) {
    if (e.to == inst) total += e.mbps;
  }
  return total;
}

double FlowDistribution::boundary_total(int chain, int boundary) const {
  double total = 0.0;
  for (const EdgeFlow& e : edges) {
    if (e.chain == chain && e.boundary == boundary) total += e.mbps;
  }
  return total;
}

double FlowDistribution::flow(int chain, int boundary, InstanceId from,
                              InstanceId to) const {
  for (const EdgeFlow& e : edges) {
    if (e.chain == chain && e.boundary == boundary && e.from == from &&
        e.to == to) {
      return e.mbps;
    }
  }
  return 0.0;
}

const char* to_string(ConstraintFamily f) {
  switch (f) {
    case ConstraintFamily::None: return "none";
    case ConstraintFamily::Bandwidth: return "bandwidth";
    case ConstraintFamily::LoadBalance: return "load-balance";
    case ConstraintFamily::Capacity: return "capacity";
  }
  return "unknown";
}

namespace {

const InstanceInfo& info(const FlowProblem& p, InstanceId i) {
  auto it = p.instances.find(i);
  if (it == p.instances.end()) {
    throw Error(ErrorKind::MissingPlacement,
                "instance " + std::to_string(i.value) + " has no placement");
  }
  return it->second;
}

double edge_cost(const FlowProblem& p, InstanceId from, InstanceId to) {
  if (!from.valid()) return 0.0;
  return info(p, from).rack == info(p, to).rack ? 0.0 : 1.0;
}

void check_problem(const FlowProblem& p) {
  for (const auto& c : p.chains) {
    if (c.positions.empty()) {
      throw Error(ErrorKind::InvalidInput, "chain " + c.id + " has no positions");
    }
    if (c.gains.size() != c.positions.size()) {
      throw Error(ErrorKind::InvalidInput,
                  "chain " + c.id + " needs one gain factor per position");
    }
    if (c.demand < 0.0) {
      throw Error(ErrorKind::InvalidInput, "chain " + c.id + " has negative demand");
    }
    for (std::size_t j = 0; j < c.positions.size(); ++j) {
      if (c.positions[j].empty()) {
        throw Error(ErrorKind::InvalidInput,
                    "chain " + c.id + " position " + std::to_string(j) +
                        " has no instance");
      }
      if (!(c.gains[j] > 0.0)) {
        throw Error(ErrorKind::InvalidInput,
                    "chain " + c.id + " has a non-positive gain factor");
      }
    }
  }
}

std::string var_name(const EdgeFlow& e) {
  std::ostringstream os;
  os << "f[c" << e.chain << ",b" << e.boundary << ",";
  if (e.from.valid()) {
    os << "i" << e.from.value;
  } else {
    os << "src";
  }
  os << ">i" << e.to.value << "]";
  return os.str();
}

std::string chain_tag(int c) { return "c" + std::to_string(c); }
std::string inst_tag(InstanceId i) { return "i" + std::to_string(i.value); }

// Shared skeleton: edge variables with footprint costs, conservation and pair
// bandwidth rows. Coverage, balance and capacity are added by the callers.
BuiltLp build_core(const FlowProblem& p) {
  check_problem(p);
  BuiltLp out;
  auto& lp = out.problem;
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    const auto& ch = p.chains[c];
    for (int b = 0; b < ch.boundary_count(); ++b) {
      const auto downs = ch.downstream(b);
      auto ups = ch.upstream(b);
      const InstanceId origin[] = {InstanceId{}};
      if (ups.empty()) ups = origin;
      for (InstanceId u : ups) {
        for (InstanceId d : downs) {
          EdgeFlow e{c, b, u, d, 0.0};
          lp.add_var(var_name(e), edge_cost(p, u, d));
          out.edges.push_back(e);
        }
      }
    }
  }

  // Inflow = outflow * gain at every position that forwards further.
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    const auto& ch = p.chains[c];
    for (int j = 0; j < static_cast<int>(ch.positions.size()); ++j) {
      if (j + 1 >= ch.boundary_count()) continue;
      for (InstanceId i : ch.positions[j]) {
        lp::Constraint row;
        row.sense = lp::Sense::Equal;
        row.label = "conserve " + chain_tag(c) + " p" + std::to_string(j) + " " +
                    inst_tag(i);
        for (int v = 0; v < static_cast<int>(out.edges.size()); ++v) {
          const auto& e = out.edges[v];
          if (e.chain != c) continue;
          if (e.boundary == j && e.to == i) row.terms.push_back({v, 1.0});
          if (e.boundary == j + 1 && e.from == i) {
            row.terms.push_back({v, -ch.gains[j]});
          }
        }
        lp.add(std::move(row));
      }
    }
  }

  // Per unordered rack pair, all chains' cross-rack edge flows.
  std::map<std::pair<RackId, RackId>, std::vector<int>> pairs;
  for (int v = 0; v < static_cast<int>(out.edges.size()); ++v) {
    const auto& e = out.edges[v];
    if (!e.from.valid()) continue;
    RackId a = info(p, e.from).rack;
    RackId b = info(p, e.to).rack;
    if (a == b) continue;
    if (b < a) std::swap(a, b);
    pairs[{a, b}].push_back(v);
  }
  for (const auto& [rp, vars] : pairs) {
    const double cap = p.bandwidth ? p.bandwidth(rp.first, rp.second)
                                   : kUnbounded;
    if (!std::isfinite(cap)) continue;
    lp::Constraint row;
    row.sense = lp::Sense::LessEq;
    row.rhs = std::max(0.0, cap);
    row.label = "bandwidth r" + std::to_string(rp.first.value) + "-r" +
                std::to_string(rp.second.value);
    for (int v : vars) row.terms.push_back({v, 1.0});
    lp.add(std::move(row));
  }
  return out;
}

// Per-instance target load summed over chains using the instance.
std::map<InstanceId, double> balance_targets(const FlowProblem& p) {
  std::map<InstanceId, double> target;
  for (const auto& ch : p.chains) {
    for (int j = 0; j < static_cast<int>(ch.positions.size()); ++j) {
      const double share = ch.demand * ch.volume_scale(j) /
                           static_cast<double>(ch.positions[j].size());
      for (InstanceId i : ch.positions[j]) target[i] += share;
    }
  }
  return target;
}

// Inflow terms restricted to middlebox positions (sinks have no load rows).
std::vector<lp::Term> mbox_inflow_terms(const FlowProblem& p, const BuiltLp& lp,
                                        InstanceId i) {
  std::vector<lp::Term> terms;
  for (int v = 0; v < static_cast<int>(lp.edges.size()); ++v) {
    const auto& e = lp.edges[v];
    if (e.to != i) continue;
    const auto& ch = p.chains[e.chain];
    if (e.boundary < static_cast<int>(ch.positions.size())) {
      terms.push_back({v, 1.0});
    }
  }
  return terms;
}

void add_coverage(const FlowProblem& p, BuiltLp& out, bool with_lambda) {
  auto& lp = out.problem;
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    const auto& ch = p.chains[c];
    int lambda = -1;
    if (with_lambda) {
      lambda = lp.add_var("lambda[" + chain_tag(c) + "]", -ch.demand);
      out.lambda_vars.push_back(lambda);
      lp.add({{{lambda, 1.0}}, lp::Sense::LessEq, 1.0,
              "Lambda " + chain_tag(c)});
    }
    lp::Constraint cover;
    cover.sense = lp::Sense::Equal;
    cover.label = "cover " + chain_tag(c);
    for (int v = 0; v < static_cast<int>(out.edges.size()); ++v) {
      const auto& e = out.edges[v];
      if (e.chain == c && e.boundary == 0) cover.terms.push_back({v, 1.0});
    }
    if (with_lambda) {
      cover.terms.push_back({lambda, -ch.demand});
    } else {
      cover.rhs = ch.demand;
    }
    lp.add(std::move(cover));

    // Each endpoint source emits an equal share of the chain's volume.
    const double share =
        ch.sources.empty() ? 0.0 : 1.0 / static_cast<double>(ch.sources.size());
    for (InstanceId s : ch.sources) {
      lp::Constraint row;
      row.sense = lp::Sense::Equal;
      row.label = "cover " + chain_tag(c) + " src " + inst_tag(s);
      for (int v = 0; v < static_cast<int>(out.edges.size()); ++v) {
        const auto& e = out.edges[v];
        if (e.chain == c && e.boundary == 0 && e.from == s) {
          row.terms.push_back({v, 1.0});
        }
      }
      if (with_lambda) {
        row.terms.push_back({lambda, -ch.demand * share});
      } else {
        row.rhs = ch.demand * share;
      }
      lp.add(std::move(row));
    }
  }
}

BuiltLp build_distribution(const FlowProblem& p,
                           const std::map<InstanceId, double>& overrides,
                           bool with_balance) {
  BuiltLp out = build_core(p);
  add_coverage(p, out, false);
  if (!with_balance) return out;
  for (const auto& [inst, target] : balance_targets(p)) {
    auto it = overrides.find(inst);
    const double eps = it == overrides.end() ? p.leeway : it->second;
    auto terms = mbox_inflow_terms(p, out, inst);
    out.problem.add({terms, lp::Sense::GreaterEq, (1.0 - eps) * target,
                     "balance " + inst_tag(inst) + " lower"});
    out.problem.add({std::move(terms), lp::Sense::LessEq, (1.0 + eps) * target,
                     "balance " + inst_tag(inst) + " upper"});
  }
  return out;
}

FlowDistribution extract(const FlowProblem& p, const BuiltLp& built,
                         const lp::Solution& sol) {
  FlowDistribution d;
  d.edges = built.edges;
  for (std::size_t v = 0; v < d.edges.size(); ++v) {
    double x = sol.x[v];
    d.edges[v].mbps = x < 1e-12 ? 0.0 : x;
  }
  d.objective = footprint(p, d.edges);
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    const double served = d.boundary_total(c, 0);
    d.served.push_back(served);
    const double demand = p.chains[c].demand;
    d.fraction.push_back(demand > 0.0 ? std::min(1.0, served / demand) : 1.0);
  }
  return d;
}

std::set<InstanceId> shared_instances(const FlowProblem& p) {
  std::map<InstanceId, std::set<int>> users;
  for (int c = 0; c < static_cast<int>(p.chains.size()); ++c) {
    for (const auto& pos : p.chains[c].positions) {
      for (InstanceId i : pos) users[i].insert(c);
    }
  }
  std::set<InstanceId> out;
  for (const auto& [i, cs] : users) {
    if (cs.size() > 1) out.insert(i);
  }
  return out;
}

lp::Solution run(const lp::Problem& problem) {
  lp::Solution sol = lp::solve(problem);
  if (sol.status == lp::Status::IterationLimit) {
    throw Error(ErrorKind::Infeasible, "LP solver hit its iteration limit");
  }
  if (sol.status == lp::Status::Unbounded) {
    throw Error(ErrorKind::InvalidInput, "flow LP is unbounded");
  }
  return sol;
}

}  // namespace

double footprint(const FlowProblem& problem, std::span<const EdgeFlow> edges) {
  double total = 0.0;
  for (const EdgeFlow& e : edges) {
    if (e.mbps != 0.0) total += edge_cost(problem, e.from, e.to) * e.mbps;
  }
  return total;
}

BuiltLp build_distribution_lp(const FlowProblem& problem,
                              const std::map<InstanceId, double>& overrides) {
  return build_distribution(problem, overrides, true);
}

FlowDistribution solve_flow_distribution(const FlowProblem& problem) {
  std::map<InstanceId, double> overrides;
  const auto shared = shared_instances(problem);
  double eps = problem.leeway;
  while (true) {
    const BuiltLp built = build_distribution(problem, overrides, true);
    const lp::Solution sol = run(built.problem);
    if (sol.status == lp::Status::Optimal) {
      FlowDistribution d = extract(problem, built, sol);
      d.widened_leeway = overrides;
      return d;
    }
    if (shared.empty() || eps >= 0.35 - 1e-12) break;
    eps = std::min(0.35, eps + 0.05);
    for (InstanceId i : shared) overrides[i] = eps;
  }
  const BuiltLp relaxed = build_distribution(problem, {}, false);
  const lp::Solution probe = run(relaxed.problem);
  if (probe.status == lp::Status::Optimal) {
    throw InfeasibleError(ConstraintFamily::LoadBalance,
                          "flow distribution infeasible: load-balance "
                          "band cannot be met");
  }
  throw InfeasibleError(ConstraintFamily::Bandwidth,
                        "flow distribution infeasible: inter-rack bandwidth "
                        "cannot carry the demand");
}

BuiltLp build_max_throughput_lp(const FlowProblem& problem) {
  BuiltLp out = build_core(problem);
  // First stage prices throughput only; footprint returns in the second.
  for (std::size_t v = 0; v < out.edges.size(); ++v) out.problem.objective[v] = 0.0;
  add_coverage(problem, out, true);
  std::set<InstanceId> seen;
  for (const auto& ch : problem.chains) {
    for (const auto& pos : ch.positions) {
      for (InstanceId i : pos) {
        if (!seen.insert(i).second) continue;
        out.problem.add({mbox_inflow_terms(problem, out, i), lp::Sense::LessEq,
                         info(problem, i).capacity_mbps,
                         "Cap " + inst_tag(i)});
      }
    }
  }
  return out;
}

FlowDistribution solve_max_throughput(const FlowProblem& problem) {
  BuiltLp built = build_max_throughput_lp(problem);
  const lp::Solution first = run(built.problem);
  if (first.status != lp::Status::Optimal) {
    throw InfeasibleError(ConstraintFamily::Capacity,
                          "max-throughput LP infeasible");
  }
  const double best = -first.objective;

  // Lexicographic second stage: hold throughput, minimise footprint.
  lp::Problem second = built.problem;
  lp::Constraint hold;
  hold.sense = lp::Sense::GreaterEq;
  hold.rhs = best - 1e-7 * std::max(1.0, best);
  hold.label = "Hold throughput";
  for (std::size_t c = 0; c < built.lambda_vars.size(); ++c) {
    const int v = built.lambda_vars[c];
    hold.terms.push_back({v, problem.chains[c].demand});
    second.objective[v] = 0.0;
  }
  for (std::size_t v = 0; v < built.edges.size(); ++v) {
    const auto& e = built.edges[v];
    second.objective[v] = edge_cost(problem, e.from, e.to);
  }
  second.add(std::move(hold));
  const lp::Solution sol = run(second);
  return extract(problem, built,
                 sol.status == lp::Status::Optimal ? sol : first);
}

FlowDistribution uniform_distribution(const FlowProblem& problem) {
  check_problem(problem);
  FlowDistribution d;
  for (int c = 0; c < static_cast<int>(problem.chains.size()); ++c) {
    const auto& ch = problem.chains[c];
    for (int b = 0; b < ch.boundary_count(); ++b) {
      const auto downs = ch.downstream(b);
      const double nd = static_cast<double>(downs.size());
      if (b == 0) {
        if (ch.sources.empty()) {
          for (InstanceId i : downs) {
            d.edges.push_back({c, 0, InstanceId{}, i, ch.demand / nd});
          }
        } else {
          const double per_src =
              ch.demand / static_cast<double>(ch.sources.size());
          for (InstanceId s : ch.sources) {
            for (InstanceId i : downs) d.edges.push_back({c, 0, s, i, per_src / nd});
          }
        }
        continue;
      }
      const int j = b - 1;
      const double in_each = ch.demand * ch.volume_scale(j) /
                             static_cast<double>(ch.positions[j].size());
      const double out_each = in_each / ch.gains[j];
      for (InstanceId u : ch.positions[j]) {
        for (InstanceId i : downs) d.edges.push_back({c, b, u, i, out_each / nd});
      }
    }
    d.served.push_back(ch.demand);
    d.fraction.push_back(1.0);
  }
  d.objective = footprint(problem, d.edges);
  return d;
}

FlowDistribution scale_to_fit(const FlowProblem& problem,
                              const FlowDistribution& dist) {
  double lambda = 1.0;
  std::map<InstanceId, double> load;
  std::map<std::pair<RackId, RackId>, double> cross;
  for (const EdgeFlow& e : dist.edges) {
    const auto& ch = problem.chains.at(static_cast<std::size_t>(e.chain));
    if (e.boundary < static_cast<int>(ch.positions.size())) load[e.to] += e.mbps;
    if (!e.from.valid()) continue;
    RackId a = info(problem, e.from).rack;
    RackId b = info(problem, e.to).rack;
    if (a == b) continue;
    if (b < a) std::swap(a, b);
    cross[{a, b}] += e.mbps;
  }
  for (const auto& [i, l] : load) {
    if (l > 0.0) lambda = std::min(lambda, info(problem, i).capacity_mbps / l);
  }
  for (const auto& [rp, f] : cross) {
    if (f <= 0.0 || !problem.bandwidth) continue;
    const double cap = problem.bandwidth(rp.first, rp.second);
    if (std::isfinite(cap)) lambda = std::min(lambda, std::max(0.0, cap) / f);
  }
  FlowDistribution out = dist;
  for (EdgeFlow& e : out.edges) e.mbps *= lambda;
  out.objective = footprint(problem, out.edges);
  out.served.clear();
  out.fraction.clear();
  for (int c = 0; c < static_cast<int>(problem.chains.size()); ++c) {
    const double served = out.boundary_total(c, 0);
    out.served.push_back(served);
    const double demand = problem.chains[c].demand;
    out.fraction.push_back(demand > 0.0 ? std::min(1.0, served / demand) : 1.0);
  }
  return out;
}

std::vector<double> derive_path_weights(
    const FlowDistribution& dist, int chain, int first_boundary,
    std::span<const std::vector<InstanceId>> paths) {
  std::vector<double> w(paths.size(), 0.0);
  if (paths.empty()) return w;
  std::map<std::pair<int, InstanceId>, double> out_total;
  for (const EdgeFlow& e : dist.edges) {
    if (e.chain == chain) out_total[{e.boundary, e.from}] += e.mbps;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& p = paths[k];
    double weight = 1.0;
    for (std::size_t h = 0; h + 1 < p.size(); ++h) {
      const int b = first_boundary + static_cast<int>(h);
      const double total = out_total[{b, p[h]}];
      weight *= total > 0.0 ? dist.flow(chain, b, p[h], p[h + 1]) / total : 0.0;
    }
    w[k] = weight;
    sum += weight;
  }
  if (sum <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(paths.size()));
    return w;
  }
  for (double& x : w) x /= sum;
  return w;
}

std::string dump_lp(const FlowProblem& problem) {
  const BuiltLp built = build_distribution_lp(problem);
  std::string text = lp::dump(built.problem);
  return "[footprint] objective = inter-rack footprint\n" + text;
}

}  // namespace sfc
