#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfc/common.hpp"

namespace sfc {

enum class MetricKind {
  PerPacketTimeUs,
  CpuFrac,
  MemFrac,
  LinkMbps,
  LatencyMs,
  BacklogRequests,
  IngressMbps,
  EgressMbps,
};

const char* to_string(MetricKind kind);

// Subject naming used across the simulator.
std::string instance_subject(InstanceId inst);
std::string link_subject(LinkId link);
std::string app_subject(const std::string& chain);
std::string position_subject(const std::string& chain, int position);

struct MetricSample {
  std::string subject;
  MetricKind kind;
  double time_s = 0.0;
  double value = 0.0;
};

enum class Aggregation { Mean, Min, Max };

struct Window {
  double duration_s = 10.0;
  Aggregation aggregation = Aggregation::Mean;
};

class MetricStore {
 public:
  // Timestamps must not decrease per (subject, kind).
  void record(const MetricSample& sample);

  // Aggregate over samples with time in [now - duration, now]; nullopt when
  // the window is empty or the subject is unknown.
  std::optional<double> query(const std::string& subject, MetricKind kind,
                              double now, const Window& window) const;

  // Samples in [from, to], in time order.
  std::vector<std::pair<double, double>> range(const std::string& subject,
                                               MetricKind kind, double from,
                                               double to) const;

  std::size_t size() const { return count_; }

  // `timestamp,subject,kind,value`, sorted by timestamp then subject, kind.
  std::string to_csv() const;

 private:
  using Series = std::vector<std::pair<double, double>>;
  std::map<std::pair<std::string, MetricKind>, Series> series_;
  std::size_t count_ = 0;
};

struct GainEstimate {
  double value = 1.0;
  bool degenerate = false;  // clamped because a side was zero
};

// Mean ingress over mean egress for the chain position, clamped to
// [1e-3, 1e3]. Nullopt when either side has no samples.
std::optional<GainEstimate> compute_gain_factor(const MetricStore& store,
                                                const std::string& chain,
                                                int position, double now,
                                                const Window& window);

// Mean offered rate at the chain source over the window (0 when idle).
double measure_chain_volume(const MetricStore& store, const std::string& chain,
                            double now, const Window& window);

}  // namespace sfc
