#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfc/common.hpp"
#include "sfc/lp.hpp"
#include "sfc/topology.hpp"

namespace sfc {

// Binary rack-distance cost between instances: 1 across racks, 0 within.
class CostMatrix {
 public:
  void set(InstanceId a, InstanceId b, double cost);
  double operator()(InstanceId a, InstanceId b) const;
  std::size_t size() const { return cost_.size(); }

 private:
  std::map<std::pair<InstanceId, InstanceId>, double> cost_;
};

CostMatrix build_cost_matrix(const DataCenterTopology& topo,
                             const Placement& placement,
                             std::span<const InstanceId> instances);

struct InstanceInfo {
  RackId rack;
  double capacity_mbps = 0.0;
};

// One transformed chain as the LP sees it. Sources and sinks are endpoint
// instances; either may be empty, in which case traffic originates from (or
// terminates at) a location-free endpoint.
struct ChainFlowSpec {
  std::string id;
  double demand = 0.0;  // offered volume at the source, Mbps
  std::vector<InstanceId> sources;
  std::vector<std::vector<InstanceId>> positions;
  std::vector<InstanceId> sinks;
  std::vector<double> gains;  // ingress/egress per position, > 0

  // Number of stage boundaries carrying edge flows. Boundary 0 feeds the
  // first position; boundary positions.size() feeds the sinks.
  int boundary_count() const {
    return static_cast<int>(positions.size()) + (sinks.empty() ? 0 : 1);
  }
  std::span<const InstanceId> upstream(int boundary) const;
  std::span<const InstanceId> downstream(int boundary) const;
  // Volume multiplier entering position j relative to the demand.
  double volume_scale(int position) const;
};

using BandwidthFn = std::function<double(RackId, RackId)>;

struct FlowProblem {
  std::vector<ChainFlowSpec> chains;
  std::unordered_map<InstanceId, InstanceInfo> instances;
  BandwidthFn bandwidth;  // b(r, r'); kUnbounded when unconstrained
  double leeway = 0.15;
};

struct EdgeFlow {
  int chain = 0;
  int boundary = 0;
  InstanceId from;  // invalid when the source is location-free
  InstanceId to;
  double mbps = 0.0;
};

struct FlowDistribution {
  std::vector<EdgeFlow> edges;
  double objective = 0.0;        // inter-rack footprint
  std::vector<double> served;    // per chain, Mbps entering the chain
  std::vector<double> fraction;  // per chain, served / demand (1 if no demand)
  // Per-instance leeway actually used; entries exist only where widened.
  std::map<InstanceId, double> widened_leeway;

  double inflow(int chain, InstanceId inst) const;
  double outflow(int chain, InstanceId inst) const;
  double instance_load(InstanceId inst) const;  // summed over chains
  double boundary_total(int chain, int boundary) const;
  double flow(int chain, int boundary, InstanceId from, InstanceId to) const;
};

enum class ConstraintFamily { None, Bandwidth, LoadBalance, Capacity };
const char* to_string(ConstraintFamily f);

class InfeasibleError : public Error {
 public:
  InfeasibleError(ConstraintFamily family, const std::string& what)
      : Error(ErrorKind::Infeasible, what), family_(family) {}
  ConstraintFamily family() const { return family_; }

 private:
  ConstraintFamily family_;
};

// Inter-rack footprint of an arbitrary set of edge flows.
double footprint(const FlowProblem& problem, std::span<const EdgeFlow> edges);

// Minimum-footprint distribution under conservation, coverage, inter-rack
// bandwidth and two-sided load balance. Widens the balance band of shared
// instances in 0.05 steps up to 0.35 before reporting infeasibility.
FlowDistribution solve_flow_distribution(const FlowProblem& problem);

// Maximises served volume with per-instance capacity and no balance
// constraint, then minimises footprint at that throughput.
FlowDistribution solve_max_throughput(const FlowProblem& problem);

// Equal split at every stage, no optimisation.
FlowDistribution uniform_distribution(const FlowProblem& problem);

// Largest lambda in [0, 1] such that scaling every chain of `dist` by lambda
// respects instance capacities and inter-rack bandwidth; returns the scaled
// distribution.
FlowDistribution scale_to_fit(const FlowProblem& problem,
                              const FlowDistribution& dist);

// `paths` hold consecutive-stage instance sequences; the hop from paths[k][h]
// to paths[k][h+1] is read at boundary `first_boundary + h`. Weight is the
// product of conditional split fractions, normalised to sum 1. Falls back to
// uniform weights when the segment carries no flow.
std::vector<double> derive_path_weights(
    const FlowDistribution& dist, int chain, int first_boundary,
    std::span<const std::vector<InstanceId>> paths);

// Builders exposed for the debug dump and for tests that audit constraints.
struct BuiltLp {
  lp::Problem problem;
  std::vector<EdgeFlow> edges;  // variable k <-> edges[k]
  std::vector<int> lambda_vars;
};

BuiltLp build_distribution_lp(
    const FlowProblem& problem,
    const std::map<InstanceId, double>& leeway_override = {});
BuiltLp build_max_throughput_lp(const FlowProblem& problem);

// Constraint listing grouped by constraint family.
std::string dump_lp(const FlowProblem& problem);

}  // namespace sfc
