#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace loadveil {

// Uniformly sampled active-power series in watts.
struct PowerTrace {
  std::int64_t start_index = 0;
  double step_seconds = 1.0;
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) * step_seconds;
  }
};

// Per-appliance ground-truth state indices, companion to a PowerTrace.
struct StateTrace {
  std::string appliance;
  std::vector<int> states;
};

inline void validate_trace(const PowerTrace& trace) {
  if (trace.samples.empty()) {
    throw std::invalid_argument("power trace must hold at least one sample");
  }
  if (!(trace.step_seconds > 0.0)) {
    throw std::invalid_argument("power trace step must be positive");
  }
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const double w = trace.samples[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("power trace sample " + std::to_string(i) +
                                  " is negative or not finite");
    }
  }
}

// Sample-wise sum of equally shaped traces.
inline PowerTrace aggregate(const std::vector<PowerTrace>& traces) {
  if (traces.empty()) {
    throw std::invalid_argument("aggregate: empty trace list");
  }
  const std::size_t n = traces.front().samples.size();
  const double step = traces.front().step_seconds;
  for (const auto& t : traces) {
    if (t.samples.size() != n) {
      throw std::invalid_argument("aggregate: trace length mismatch");
    }
    if (t.step_seconds != step) {
      throw std::invalid_argument("aggregate: trace step mismatch");
    }
  }
  PowerTrace out;
  out.start_index = traces.front().start_index;
  out.step_seconds = step;
  out.samples.assign(n, 0.0);
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] += t.samples[i];
  }
  return out;
}

// Sliding-window median of odd order; boundary samples are replicated so the
// output has the same length as the input.
inline PowerTrace median_filter(const PowerTrace& trace, int order = 5) {
  if (order < 1 || order % 2 == 0) {
    throw std::invalid_argument("median_filter: order must be odd and >= 1");
  }
  validate_trace(trace);
  if (order == 1) return trace;

  const auto n = static_cast<std::int64_t>(trace.samples.size());
  const std::int64_t half = order / 2;
  PowerTrace out = trace;
  std::vector<double> window(static_cast<std::size_t>(order));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = -half; k <= half; ++k) {
      const std::int64_t j = std::clamp<std::int64_t>(i + k, 0, n - 1);
      window[static_cast<std::size_t>(k + half)] =
          trace.samples[static_cast<std::size_t>(j)];
    }
    auto mid = window.begin() + order / 2;
    std::nth_element(window.begin(), mid, window.end());
    out.samples[static_cast<std::size_t>(i)] = *mid;
  }
  return out;
}

}  // namespace loadveil
