#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace fullbrain {

/// Latency statistics in seconds. Percentiles use the nearest-rank method.
struct LatencySummary {
  std::size_t count = 0;
  double avg = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

inline double nearest_rank(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline LatencySummary summarize(std::vector<double> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.avg = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  s.p50 = nearest_rank(samples, 50.0);
  s.p95 = nearest_rank(samples, 95.0);
  s.max = samples.back();
  return s;
}

}  // namespace fullbrain
