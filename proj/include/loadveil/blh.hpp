#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "loadveil/battery.hpp"
#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"

namespace loadveil {
namespace blh {

// Stepping-framework settings. beta_w is the quantization step of the
// metered load; with a symmetric battery rate cap it defaults to that cap.
// The SOC forcing band sits strictly inside the battery's hard window.
struct SteppingConfig {
  double beta_w = 0.0;
  double soc_force_low = 0.25;
  double soc_force_high = 0.85;
};

inline SteppingConfig default_stepping_config(
    const battery::BatteryConfig& bc) {
  return SteppingConfig{battery::max_power_w(bc), 0.25, 0.85};
}

inline void validate_config(const SteppingConfig& sc,
                            const battery::BatteryConfig& bc) {
  if (!(sc.beta_w > 0.0)) {
    throw std::invalid_argument("stepping: beta_w must be positive");
  }
  if (!(bc.soc_min < sc.soc_force_low && sc.soc_force_low < sc.soc_force_high &&
        sc.soc_force_high < bc.soc_max)) {
    throw std::invalid_argument(
        "stepping: need soc_min < soc_force_low < soc_force_high < soc_max");
  }
}

struct LevelChoice {
  double metered_w = 0.0;
  bool fallback = false;
};

// Lazy Stepping 2 level selection. Candidates are the quantized levels just
// below and just above net demand; a level is admissible iff the battery can
// supply the difference. Order of precedence:
//   1. SOC at or beyond a forcing threshold picks the draining/filling level
//      (falling through to the other candidate if the forced one is blocked),
//   2. hold the previous metered level while it stays a candidate,
//   3. otherwise pick uniformly at random among admissible candidates,
//   4. with no admissible candidate, pass net through and flag the sample.
inline LevelChoice ls2_choose_level(double net_w, double prev_metered_w,
                                    double soc,
                                    const battery::PowerRange& feasible,
                                    const SteppingConfig& cfg, Rng& rng) {
  if (!(net_w >= 0.0) || !std::isfinite(net_w)) {
    throw std::invalid_argument("ls2: net demand must be finite and >= 0");
  }
  const double beta = cfg.beta_w;
  const double lower = std::floor(net_w / beta) * beta;
  const double upper = std::ceil(net_w / beta) * beta;
  const bool lower_ok = feasible.contains(lower - net_w);
  const bool upper_ok = feasible.contains(upper - net_w);
  const bool two_levels = upper != lower;

  if (soc >= cfg.soc_force_high) {
    if (lower_ok) return {lower, false};
    if (two_levels && upper_ok) return {upper, false};
    return {net_w, true};
  }
  if (soc <= cfg.soc_force_low) {
    if (upper_ok) return {upper, false};
    if (two_levels && lower_ok) return {lower, false};
    return {net_w, true};
  }
  if (prev_metered_w == lower && lower_ok) return {lower, false};
  if (prev_metered_w == upper && upper_ok) return {upper, false};
  if (lower_ok && two_levels && upper_ok) {
    return {rng.coin() ? upper : lower, false};
  }
  if (lower_ok) return {lower, false};
  if (two_levels && upper_ok) return {upper, false};
  return {net_w, true};
}

struct BlhOutput {
  PowerTrace metered;
  std::vector<double> battery_power_w;  // positive = charging
  std::vector<double> soc;              // after each step
  std::vector<std::uint8_t> fallback;

  double fallback_fraction() const {
    if (fallback.empty()) return 0.0;
    std::int64_t n = 0;
    for (auto f : fallback) n += f;
    return static_cast<double>(n) / static_cast<double>(fallback.size());
  }
};

// Runs Lazy Stepping 2 over a net-demand trace. Deterministic given the seed.
inline BlhOutput run_blh(const PowerTrace& net,
                         const battery::BatteryConfig& battery_config,
                         const SteppingConfig& stepping_config,
                         std::uint64_t seed) {
  validate_trace(net);
  battery::validate_config(battery_config);
  validate_config(stepping_config, battery_config);

  Rng rng(derive_seed(seed, "blh:ls2"));
  const double dt = net.step_seconds;
  const double beta = stepping_config.beta_w;
  const std::size_t n = net.samples.size();

  BlhOutput out;
  out.metered.start_index = net.start_index;
  out.metered.step_seconds = dt;
  out.metered.samples.resize(n);
  out.battery_power_w.resize(n);
  out.soc.resize(n);
  out.fallback.resize(n);

  battery::BatteryState state{battery_config.initial_soc};

  // Hold reference before the first sample: the level nearest net[0],
  // ties resolving upward.
  const double first = net.samples[0];
  const double lo0 = std::floor(first / beta) * beta;
  const double hi0 = std::ceil(first / beta) * beta;
  double prev_level = (first - lo0 < hi0 - first) ? lo0 : hi0;

  for (std::size_t t = 0; t < n; ++t) {
    const double net_w = net.samples[t];
    const auto range = battery::feasible_power_range(state, battery_config, dt);
    const auto choice = ls2_choose_level(net_w, prev_level, state.soc, range,
                                         stepping_config, rng);
    double bp = 0.0;
    if (!choice.fallback) {
      bp = choice.metered_w - net_w;
      state = battery::step(state, battery_config, bp, dt);
    }
    out.metered.samples[t] = net_w + bp;
    out.battery_power_w[t] = bp;
    out.soc[t] = state.soc;
    out.fallback[t] = choice.fallback ? 1 : 0;
    prev_level = choice.fallback ? net_w : choice.metered_w;
  }
  return out;
}

}  // namespace blh
}  // namespace loadveil
