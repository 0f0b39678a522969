#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"

namespace loadveil {
namespace llh {

// Boiler-noise settings. The daily target is what the boiler must consume on
// average; mu_set_w is the equivalent constant load.
struct LlhConfig {
  double p_max_w = 1600.0;
  double alpha = 0.9;
  double daily_target_kwh = 5.0;
  double gap_limit_kwh = 0.5;
  double frame_max_seconds = 3600.0;
  double frame_min_seconds = 60.0;
  int hold_samples = 1;  // draws per noise value; 1 = redraw every sample

  double mu_set_w() const { return daily_target_kwh * 1000.0 / 24.0; }
};

inline void validate_config(const LlhConfig& c) {
  if (!(c.p_max_w > 0.0) || !(c.alpha > 0.0) || !(c.gap_limit_kwh > 0.0)) {
    throw std::invalid_argument("llh: p_max, alpha and gap limit must be positive");
  }
  if (!(0.0 < c.frame_min_seconds && c.frame_min_seconds <= c.frame_max_seconds)) {
    throw std::invalid_argument("llh: need 0 < frame_min <= frame_max");
  }
  const double mu = c.mu_set_w();
  if (!(mu > 0.0 && mu < c.p_max_w)) {
    throw std::invalid_argument("llh: daily target must put mu_set in (0, p_max)");
  }
  if (c.hold_samples < 1) {
    throw std::invalid_argument("llh: hold_samples must be >= 1");
  }
}

// Second beta shape for a target mean: beta = alpha * (1 - mu) / mu, so that
// Beta(alpha, beta) has expectation mu.
inline double derive_beta(double alpha, double mu_norm) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("derive_beta: alpha must be positive");
  }
  if (!(mu_norm > 0.0 && mu_norm < 1.0)) {
    throw std::invalid_argument("derive_beta: mean must lie in (0, 1)");
  }
  return alpha * (1.0 - mu_norm) / mu_norm;
}

// Running energy balance against the constant-load equivalent.
struct NoiseBudget {
  double mu_set_w = 0.0;
  double cumulative_gap_wh = 0.0;  // realized minus mu_set * elapsed
};

struct NoiseFrame {
  double mu_w = 0.0;
  double duration_seconds = 0.0;
  double beta_shape = 0.0;
};

// Chooses the next noise frame. Normal frames draw their expectation from
// the middle band [p_max/4, 3*p_max/4]; once the cumulative gap leaves the
// +-gap_limit band the expectation is clamped to the corrective side of
// mu_set until the balance recovers.
inline NoiseFrame next_frame(const NoiseBudget& budget, const LlhConfig& cfg,
                             Rng& rng) {
  NoiseFrame frame;
  frame.duration_seconds =
      rng.uniform_range(cfg.frame_min_seconds, cfg.frame_max_seconds);
  const double limit_wh = cfg.gap_limit_kwh * 1000.0;
  if (budget.cumulative_gap_wh > limit_wh) {
    double u = rng.uniform();
    while (u == 0.0) u = rng.uniform();  // keep the frame mean off 0 exactly
    frame.mu_w = u * budget.mu_set_w;
  } else if (budget.cumulative_gap_wh < -limit_wh) {
    frame.mu_w = budget.mu_set_w +
                 rng.uniform_pos() * (cfg.p_max_w - budget.mu_set_w);
  } else {
    frame.mu_w = rng.uniform_range(cfg.p_max_w / 4.0, 3.0 * cfg.p_max_w / 4.0);
  }
  const double mu_norm = frame.mu_w / cfg.p_max_w;
  frame.beta_shape = mu_norm < 1.0 ? derive_beta(cfg.alpha, mu_norm) : 0.0;
  return frame;
}

// Worst-case daily realized energy implied by the clamp rule: the balance can
// sit one gap limit plus one full frame's excursion away from the target.
inline std::pair<double, double> bound_daily_energy(const LlhConfig& cfg) {
  const double frame_h = cfg.frame_max_seconds / 3600.0;
  const double lo = cfg.daily_target_kwh - cfg.gap_limit_kwh -
                    cfg.mu_set_w() * frame_h / 1000.0;
  const double hi = cfg.daily_target_kwh + cfg.gap_limit_kwh +
                    (cfg.p_max_w - cfg.mu_set_w()) * frame_h / 1000.0;
  return {lo, hi};
}

struct FrameRecord {
  std::int64_t start_sample = 0;
  std::int64_t duration_samples = 0;
  double mu_w = 0.0;
  double beta_shape = 0.0;
  double gap_at_start_wh = 0.0;
};

struct LlhOutput {
  PowerTrace metered;
  PowerTrace noise;
  std::vector<FrameRecord> frames;
  std::vector<double> daily_realized_kwh;
  double final_gap_wh = 0.0;
};

// Overlays net demand with frame-structured boiler noise. Days are counted
// from absolute sample index 0; the budget gap carries across midnight.
// Deterministic given the seed.
inline LlhOutput run_llh(const PowerTrace& net, const LlhConfig& cfg,
                         std::uint64_t seed) {
  validate_trace(net);
  validate_config(cfg);

  Rng rng(derive_seed(seed, "llh:noise"));
  const double dt = net.step_seconds;
  const std::size_t n = net.samples.size();

  LlhOutput out;
  out.metered.start_index = net.start_index;
  out.metered.step_seconds = dt;
  out.metered.samples.resize(n);
  out.noise.start_index = net.start_index;
  out.noise.step_seconds = dt;
  out.noise.samples.resize(n);

  NoiseBudget budget{cfg.mu_set_w(), 0.0};
  std::int64_t frame_left = 0;
  std::int64_t frame_pos = 0;
  double beta_shape = 0.0;
  double held_noise = 0.0;
  const auto day0 = static_cast<std::size_t>(
      static_cast<double>(net.start_index) * dt / 86400.0);

  for (std::size_t t = 0; t < n; ++t) {
    if (frame_left == 0) {
      const NoiseFrame frame = next_frame(budget, cfg, rng);
      frame_left = std::max<std::int64_t>(
          1, std::llround(frame.duration_seconds / dt));
      frame_pos = 0;
      beta_shape = frame.beta_shape;
      out.frames.push_back({static_cast<std::int64_t>(t), frame_left,
                            frame.mu_w, frame.beta_shape,
                            budget.cumulative_gap_wh});
    }
    if (frame_pos % cfg.hold_samples == 0) {
      held_noise = cfg.p_max_w * rng.beta(cfg.alpha, beta_shape);
    }
    const double noise = held_noise;
    out.noise.samples[t] = noise;
    out.metered.samples[t] = net.samples[t] + noise;
    budget.cumulative_gap_wh += (noise - budget.mu_set_w) * dt / 3600.0;

    const auto day = static_cast<std::size_t>(
        (static_cast<double>(net.start_index) + static_cast<double>(t)) * dt /
        86400.0) - day0;
    if (day >= out.daily_realized_kwh.size()) {
      out.daily_realized_kwh.resize(day + 1, 0.0);
    }
    out.daily_realized_kwh[day] += noise * dt / 3.6e6;

    --frame_left;
    ++frame_pos;
  }
  out.final_gap_wh = budget.cumulative_gap_wh;
  return out;
}

}  // namespace llh
}  // namespace loadveil
