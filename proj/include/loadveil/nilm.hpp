#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "loadveil/appliance.hpp"
#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"

namespace loadveil {
namespace nilm {

struct FilterConfig {
  int particle_count = 1000;
  double likelihood_sigma_w = 30.0;
  double on_probability_threshold = 0.5;
  double resample_ess_fraction = 0.5;
};

inline void validate_config(const FilterConfig& c) {
  if (c.particle_count < 10) {
    throw std::invalid_argument("nilm: need at least 10 particles");
  }
  if (!(c.likelihood_sigma_w > 0.0)) {
    throw std::invalid_argument("nilm: likelihood sigma must be positive");
  }
  if (!(c.on_probability_threshold > 0.0 &&
        c.on_probability_threshold < 1.0)) {
    throw std::invalid_argument("nilm: ON threshold must lie in (0, 1)");
  }
  if (!(c.resample_ess_fraction >= 0.0 && c.resample_ess_fraction <= 1.0)) {
    throw std::invalid_argument("nilm: ESS fraction must lie in [0, 1]");
  }
}

// 1 / sum(w^2) for normalized weights; N for uniform weights, 1 when a single
// particle carries everything.
inline double effective_sample_size(const std::vector<double>& weights) {
  double sum_sq = 0.0;
  for (double w : weights) sum_sq += w * w;
  if (sum_sq <= 0.0) {
    throw std::domain_error("effective_sample_size: all weights are zero");
  }
  return 1.0 / sum_sq;
}

// Ancestor indices for systematic resampling with offset u0 in [0, 1):
// particle j is drawn at cumulative position (j + u0) / N.
inline std::vector<std::size_t> systematic_resample_indices(
    const std::vector<double>& weights, double u0) {
  const std::size_t n = weights.size();
  if (n == 0) {
    throw std::invalid_argument("systematic_resample_indices: empty weights");
  }
  if (!(u0 >= 0.0 && u0 < 1.0)) {
    throw std::invalid_argument("systematic_resample_indices: u0 not in [0,1)");
  }
  std::vector<std::size_t> ancestors(n);
  std::size_t k = 0;
  double cumulative = weights[0];
  for (std::size_t j = 0; j < n; ++j) {
    const double position = (static_cast<double>(j) + u0) /
                            static_cast<double>(n);
    while (position > cumulative && k + 1 < n) {
      ++k;
      cumulative += weights[k];
    }
    ancestors[j] = k;
  }
  return ancestors;
}

struct DisaggregationResult {
  std::vector<std::string> names;                 // input model order
  std::vector<StateTrace> estimated;              // 0/1 per appliance
  std::vector<std::vector<double>> posterior_on;  // per appliance, per sample
  int underflow_resets = 0;
  int resample_count = 0;
};

// SIR particle filter over the joint appliance state space. Each particle is
// one state index per appliance; particles start in state 0 everywhere and
// are propagated through the true transition matrices (strongest-attacker
// convention). Weights use a Gaussian kernel over the residual between the
// observation and the particle's summed state powers, rescaled by the best
// residual of the step so a bad step degrades gracefully instead of
// underflowing. Internally the appliances are processed in name order with
// one derived random stream each, so permuting the model list permutes only
// the result keys.
inline DisaggregationResult disaggregate(const PowerTrace& observed,
                                         const std::vector<ApplianceModel>& models,
                                         const FilterConfig& cfg,
                                         std::uint64_t seed) {
  validate_config(cfg);
  if (models.empty()) {
    throw std::invalid_argument("disaggregate: empty model list");
  }
  for (const auto& m : models) validate_model(m);
  for (double w : observed.samples) {
    if (!std::isfinite(w)) {
      throw std::invalid_argument("disaggregate: non-finite observation");
    }
  }

  const std::size_t n_appl = models.size();
  std::vector<std::size_t> canon(n_appl);
  std::iota(canon.begin(), canon.end(), std::size_t{0});
  std::sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
    return models[a].name < models[b].name;
  });
  for (std::size_t k = 1; k < n_appl; ++k) {
    if (models[canon[k - 1]].name == models[canon[k]].name) {
      throw std::invalid_argument("disaggregate: duplicate appliance name \"" +
                                  models[canon[k]].name + "\"");
    }
  }

  const std::size_t n_particles = static_cast<std::size_t>(cfg.particle_count);
  const std::size_t n_samples = observed.samples.size();

  DisaggregationResult out;
  out.names.resize(n_appl);
  out.estimated.resize(n_appl);
  out.posterior_on.resize(n_appl);
  for (std::size_t a = 0; a < n_appl; ++a) {
    out.names[a] = models[a].name;
    out.estimated[a].appliance = models[a].name;
    out.estimated[a].states.resize(n_samples, 0);
    out.posterior_on[a].resize(n_samples, 0.0);
  }

  std::vector<Rng> streams;
  streams.reserve(n_appl);
  for (std::size_t k = 0; k < n_appl; ++k) {
    streams.emplace_back(
        derive_seed(seed, "nilm:prop:" + models[canon[k]].name));
  }
  Rng resample_rng(derive_seed(seed, "nilm:resample"));

  // Joint states stored flat: particle i's state for canonical slot k is
  // state[i * n_appl + k].
  std::vector<std::uint8_t> state(n_particles * n_appl, 0);
  std::vector<std::uint8_t> scratch(state.size());
  std::vector<double> weights(n_particles, 1.0 / static_cast<double>(n_particles));
  std::vector<double> predicted(n_particles);
  const double inv_two_sigma_sq =
      1.0 / (2.0 * cfg.likelihood_sigma_w * cfg.likelihood_sigma_w);
  const double ess_trigger =
      cfg.resample_ess_fraction * static_cast<double>(n_particles);

  for (std::size_t t = 0; t < n_samples; ++t) {
    if (t > 0) {
      for (std::size_t k = 0; k < n_appl; ++k) {
        const ApplianceModel& model = models[canon[k]];
        const int n_states = model.state_count();
        Rng& rng = streams[k];
        for (std::size_t i = 0; i < n_particles; ++i) {
          const auto cur = state[i * n_appl + k];
          const auto& row = model.transition_matrix[cur];
          double u = rng.uniform();
          int next = n_states - 1;
          for (int s = 0; s < n_states; ++s) {
            u -= row[static_cast<std::size_t>(s)];
            if (u < 0.0) {
              next = s;
              break;
            }
          }
          state[i * n_appl + k] = static_cast<std::uint8_t>(next);
        }
      }
    }

    std::fill(predicted.begin(), predicted.end(), 0.0);
    for (std::size_t k = 0; k < n_appl; ++k) {
      const auto& powers = models[canon[k]].state_powers;
      for (std::size_t i = 0; i < n_particles; ++i) {
        predicted[i] += powers[state[i * n_appl + k]];
      }
    }

    const double y = observed.samples[t];
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_particles; ++i) {
      const double r = y - predicted[i];
      predicted[i] = r * r;  // reuse the buffer for squared residuals
      best_sq = std::min(best_sq, predicted[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n_particles; ++i) {
      weights[i] *= std::exp(-(predicted[i] - best_sq) * inv_two_sigma_sq);
      sum += weights[i];
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      std::fill(weights.begin(), weights.end(),
                1.0 / static_cast<double>(n_particles));
      ++out.underflow_resets;
    } else {
      for (auto& w : weights) w /= sum;
    }

    for (std::size_t k = 0; k < n_appl; ++k) {
      const ApplianceModel& model = models[canon[k]];
      double on_mass = 0.0;
      for (std::size_t i = 0; i < n_particles; ++i) {
        if (model.is_on(state[i * n_appl + k])) on_mass += weights[i];
      }
      const std::size_t slot = canon[k];
      out.posterior_on[slot][t] = on_mass;
      out.estimated[slot].states[t] =
          on_mass > cfg.on_probability_threshold ? 1 : 0;
    }

    if (effective_sample_size(weights) < ess_trigger) {
      const auto ancestors =
          systematic_resample_indices(weights, resample_rng.uniform());
      for (std::size_t j = 0; j < n_particles; ++j) {
        const std::size_t src = ancestors[j] * n_appl;
        std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(src), n_appl,
                    scratch.begin() + static_cast<std::ptrdiff_t>(j * n_appl));
      }
      state.swap(scratch);
      std::fill(weights.begin(), weights.end(),
                1.0 / static_cast<double>(n_particles));
      ++out.resample_count;
    }
  }
  return out;
}

}  // namespace nilm
}  // namespace loadveil
