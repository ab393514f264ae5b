#include "sfc/telemetry.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

namespace sfc {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::PerPacketTimeUs: return "per_packet_time_us";
    case MetricKind::CpuFrac: return "cpu_frac";
    case MetricKind::MemFrac: return "mem_frac";
    case MetricKind::LinkMbps: return "link_mbps";
    case MetricKind::LatencyMs: return "latency_ms";
    case MetricKind::BacklogRequests: return "backlog_requests";
    case MetricKind::IngressMbps: return "ingress_mbps";
    case MetricKind::EgressMbps: return "egress_mbps";
  }
  return "unknown";
}

std::string instance_subject(InstanceId inst) {
  return "inst:" + std::to_string(inst.value);
}
std::string link_subject(LinkId link) {
  return "link:" + std::to_string(link.value);
}
std::string app_subject(const std::string& chain) { return "app:" + chain; }
std::string position_subject(const std::string& chain, int position) {
  return "pos:" + chain + ":" + std::to_string(position);
}

void MetricStore::record(const MetricSample& s) {
  if (!(s.value >= 0.0)) {
    throw Error(ErrorKind::InvalidInput,
                "negative metric value for " + s.subject);
  }
  if ((s.kind == MetricKind::CpuFrac || s.kind == MetricKind::MemFrac) &&
      s.value > 1.0) {
    throw Error(ErrorKind::InvalidInput, "utilization above 1 for " + s.subject);
  }
  Series& series = series_[{s.subject, s.kind}];
  if (!series.empty() && s.time_s < series.back().first) {
    throw Error(ErrorKind::InvalidInput,
                "out-of-order sample for " + s.subject);
  }
  series.emplace_back(s.time_s, s.value);
  ++count_;
}

std::vector<std::pair<double, double>> MetricStore::range(
    const std::string& subject, MetricKind kind, double from, double to) const {
  auto it = series_.find({subject, kind});
  if (it == series_.end()) return {};
  const Series& s = it->second;
  auto lo = std::lower_bound(s.begin(), s.end(), from,
                             [](const auto& p, double t) { return p.first < t; });
  auto hi = std::upper_bound(s.begin(), s.end(), to,
                             [](double t, const auto& p) { return t < p.first; });
  return {lo, hi};
}

std::optional<double> MetricStore::query(const std::string& subject,
                                         MetricKind kind, double now,
                                         const Window& window) const {
  const auto samples = range(subject, kind, now - window.duration_s, now);
  if (samples.empty()) return std::nullopt;
  double acc = samples.front().second;
  double sum = 0.0;
  for (const auto& [_, v] : samples) {
    sum += v;
    if (window.aggregation == Aggregation::Min) acc = std::min(acc, v);
    if (window.aggregation == Aggregation::Max) acc = std::max(acc, v);
  }
  if (window.aggregation == Aggregation::Mean) {
    return sum / static_cast<double>(samples.size());
  }
  return acc;
}

std::string MetricStore::to_csv() const {
  std::vector<std::tuple<double, std::string, std::string, double>> rows;
  rows.reserve(count_);
  for (const auto& [key, series] : series_) {
    for (const auto& [t, v] : series) {
      rows.emplace_back(t, key.first, to_string(key.second), v);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
           std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
  });
  std::string out = "timestamp,subject,kind,value\n";
  char buf[64];
  for (const auto& [t, subject, kind, v] : rows) {
    std::snprintf(buf, sizeof buf, "%.3f,", t);
    out += buf;
    out += subject + "," + kind + ",";
    std::snprintf(buf, sizeof buf, "%.6f\n", v);
    out += buf;
  }
  return out;
}

std::optional<GainEstimate> compute_gain_factor(const MetricStore& store,
                                                const std::string& chain,
                                                int position, double now,
                                                const Window& window) {
  const Window mean{window.duration_s, Aggregation::Mean};
  const std::string subject = position_subject(chain, position);
  const auto in = store.query(subject, MetricKind::IngressMbps, now, mean);
  const auto out = store.query(subject, MetricKind::EgressMbps, now, mean);
  if (!in || !out) return std::nullopt;
  constexpr double kLow = 1e-3;
  constexpr double kHigh = 1e3;
  GainEstimate g;
  if (*out <= 0.0) {
    g.value = *in > 0.0 ? kHigh : 1.0;
    g.degenerate = true;
    return g;
  }
  const double raw = *in / *out;
  g.value = std::clamp(raw, kLow, kHigh);
  g.degenerate = g.value != raw;
  return g;
}

double measure_chain_volume(const MetricStore& store, const std::string& chain,
                            double now, const Window& window) {
  const Window mean{window.duration_s, Aggregation::Mean};
  return store.query(app_subject(chain), MetricKind::IngressMbps, now, mean)
      .value_or(0.0);
}

}  // namespace sfc
