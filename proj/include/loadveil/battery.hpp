#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace loadveil {
namespace battery {

// Lead-acid style storage description. SOC limits are fractions of the rated
// capacity; charge and discharge share the same C-rate cap.
struct BatteryConfig {
  double rated_capacity_ah = 100.0;
  double nominal_voltage_v = 12.0;
  double soc_min = 0.20;
  double soc_max = 0.90;
  double initial_soc = 0.55;
  double c_rate_per_hour = 0.3;

  double capacity_wh() const { return rated_capacity_ah * nominal_voltage_v; }
};

struct BatteryState {
  double soc = 0.55;
};

inline void validate_config(const BatteryConfig& c) {
  if (!(c.rated_capacity_ah > 0.0) || !(c.nominal_voltage_v > 0.0) ||
      !(c.c_rate_per_hour > 0.0)) {
    throw std::invalid_argument("battery: capacity, voltage and C-rate must be positive");
  }
  if (!(0.0 <= c.soc_min && c.soc_min < c.initial_soc &&
        c.initial_soc < c.soc_max && c.soc_max <= 1.0)) {
    throw std::invalid_argument(
        "battery: need 0 <= soc_min < initial_soc < soc_max <= 1");
  }
}

// Symmetric rate cap in watts: V * C-rate * capacity.
inline double max_power_w(const BatteryConfig& c) {
  return c.nominal_voltage_v * c.c_rate_per_hour * c.rated_capacity_ah;
}

struct PowerRange {
  double min_w = 0.0;  // most negative admissible (discharge)
  double max_w = 0.0;  // most positive admissible (charge)

  bool contains(double power_w, double tol_w = 1e-9) const {
    return power_w >= min_w - tol_w && power_w <= max_w + tol_w;
  }
};

// Power window admissible for the next dt seconds: the rate cap intersected
// with whatever would pin SOC to its window boundary within dt. Positive is
// charging. Always contains 0.
inline PowerRange feasible_power_range(const BatteryState& s,
                                       const BatteryConfig& c,
                                       double dt_seconds) {
  if (!(dt_seconds > 0.0)) {
    throw std::invalid_argument("battery: dt must be positive");
  }
  const double rate_w = max_power_w(c);
  const double to_full_w =
      (c.soc_max - s.soc) * c.capacity_wh() * 3600.0 / dt_seconds;
  const double to_empty_w =
      (s.soc - c.soc_min) * c.capacity_wh() * 3600.0 / dt_seconds;
  PowerRange r;
  r.max_w = std::max(0.0, std::min(rate_w, to_full_w));
  r.min_w = std::min(0.0, -std::min(rate_w, to_empty_w));
  return r;
}

// Coulomb counting at constant nominal voltage, zero round-trip losses:
//   soc' = soc + power * dt / (V * C * 3600)
// Callers must stay inside feasible_power_range; violating it is an
// algorithm bug, not a recoverable state.
inline BatteryState step(const BatteryState& s, const BatteryConfig& c,
                         double power_w, double dt_seconds) {
  const PowerRange range = feasible_power_range(s, c, dt_seconds);
  const double tol = 1e-9 * std::max(1.0, max_power_w(c));
  if (!range.contains(power_w, tol)) {
    throw std::domain_error("battery step outside feasible range: " +
                            std::to_string(power_w) + " W not in [" +
                            std::to_string(range.min_w) + ", " +
                            std::to_string(range.max_w) + "]");
  }
  double soc = s.soc + power_w * dt_seconds / (c.capacity_wh() * 3600.0);
  // Snap rounding residue at the window boundaries.
  if (soc > c.soc_max && soc <= c.soc_max + 1e-9) soc = c.soc_max;
  if (soc < c.soc_min && soc >= c.soc_min - 1e-9) soc = c.soc_min;
  return BatteryState{soc};
}

}  // namespace battery
}  // namespace loadveil
