#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "loadveil/appliance.hpp"
#include "loadveil/trace.hpp"

namespace loadveil {
namespace metrics {

// Root-mean-square deviation between two equally shaped power traces.
inline double rmse(const PowerTrace& d, const PowerTrace& e) {
  if (d.samples.size() != e.samples.size() || d.samples.empty()) {
    throw std::invalid_argument("rmse: traces must be nonempty and equal length");
  }
  if (d.step_seconds != e.step_seconds) {
    throw std::invalid_argument("rmse: trace step mismatch");
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const double diff = d.samples[i] - e.samples[i];
    sum_sq += diff * diff;
  }
  return std::sqrt(sum_sq / static_cast<double>(d.samples.size()));
}

struct AccuracyReport {
  std::map<std::string, double> per_appliance;
  double total = 0.0;
};

// Reduces a multi-state trace to ON/OFF using the model's state powers; any
// state drawing power counts as ON. Estimated traces from the disaggregator
// are already 0/1 and pass through unchanged.
inline std::vector<int> to_on_off(const StateTrace& trace,
                                  const ApplianceModel& model) {
  std::vector<int> on(trace.states.size());
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const int s = trace.states[i];
    if (s < 0 || s >= model.state_count()) {
      throw std::invalid_argument("to_on_off: state index out of range for " +
                                  model.name);
    }
    on[i] = model.is_on(s) ? 1 : 0;
  }
  return on;
}

namespace detail {

inline double mean_of(const std::map<std::string, double>& values) {
  double sum = 0.0;
  for (const auto& [name, v] : values) {
    (void)name;
    sum += v;
  }
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

}  // namespace detail

// Per-appliance (TP+TN)/n over ON/OFF series keyed by appliance name; total
// is the unweighted mean across appliances.
inline AccuracyReport accuracy(
    const std::map<std::string, std::vector<int>>& estimated,
    const std::map<std::string, std::vector<int>>& truth) {
  if (estimated.size() != truth.size()) {
    throw std::invalid_argument("accuracy: appliance-set mismatch");
  }
  AccuracyReport report;
  for (const auto& [name, truth_series] : truth) {
    const auto it = estimated.find(name);
    if (it == estimated.end()) {
      throw std::invalid_argument("accuracy: no estimate for \"" + name + "\"");
    }
    const auto& est_series = it->second;
    if (est_series.size() != truth_series.size() || truth_series.empty()) {
      throw std::invalid_argument("accuracy: length mismatch for \"" + name +
                                  "\"");
    }
    std::size_t agree = 0;
    for (std::size_t i = 0; i < truth_series.size(); ++i) {
      const bool est_on = est_series[i] != 0;
      const bool true_on = truth_series[i] != 0;
      if (est_on == true_on) ++agree;
    }
    report.per_appliance[name] =
        static_cast<double>(agree) / static_cast<double>(truth_series.size());
  }
  report.total = detail::mean_of(report.per_appliance);
  return report;
}

// Accuracy of the estimator that declares every appliance OFF at all times:
// per appliance it equals the OFF fraction of the truth.
inline AccuracyReport all_off_reference(
    const std::map<std::string, std::vector<int>>& truth) {
  AccuracyReport report;
  for (const auto& [name, series] : truth) {
    if (series.empty()) {
      throw std::invalid_argument("all_off_reference: empty truth for \"" +
                                  name + "\"");
    }
    std::size_t off = 0;
    for (int s : series) {
      if (s == 0) ++off;
    }
    report.per_appliance[name] =
        static_cast<double>(off) / static_cast<double>(series.size());
  }
  report.total = detail::mean_of(report.per_appliance);
  return report;
}

// Total absolute energy moved by the hiding device, in kWh.
inline double energy_turnover_kwh(const std::vector<double>& device_power_w,
                                  double step_seconds) {
  if (!(step_seconds > 0.0)) {
    throw std::invalid_argument("energy_turnover_kwh: step must be positive");
  }
  double sum_abs = 0.0;
  for (double p : device_power_w) sum_abs += std::abs(p);
  return sum_abs * step_seconds / 3.6e6;
}

}  // namespace metrics
}  // namespace loadveil
