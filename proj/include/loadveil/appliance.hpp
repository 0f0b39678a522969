#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"

namespace loadveil {

// Per-appliance HMM: state 0 is OFF at 0 W, a state is ON iff its power
// level is positive.
struct ApplianceModel {
  std::string name;
  std::vector<double> state_powers;
  std::vector<std::vector<double>> transition_matrix;

  int state_count() const { return static_cast<int>(state_powers.size()); }
  bool is_on(int state) const {
    return state_powers[static_cast<std::size_t>(state)] > 0.0;
  }
  std::set<int> on_states() const {
    std::set<int> on;
    for (int s = 0; s < state_count(); ++s) {
      if (is_on(s)) on.insert(s);
    }
    return on;
  }
};

inline void validate_model(const ApplianceModel& model) {
  if (model.name.empty()) {
    throw std::invalid_argument("appliance model needs a name");
  }
  if (model.state_powers.empty() || model.state_powers[0] != 0.0) {
    throw std::invalid_argument("appliance '" + model.name +
                                "': state 0 must exist and draw 0 W");
  }
  for (double p : model.state_powers) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("appliance '" + model.name +
                                  "': state powers must be nonnegative");
    }
  }
  const auto n = model.state_powers.size();
  if (model.transition_matrix.size() != n) {
    throw std::invalid_argument("appliance '" + model.name +
                                "': transition matrix must be square over states");
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = model.transition_matrix[r];
    if (row.size() != n) {
      throw std::invalid_argument("appliance '" + model.name +
                                  "': transition row " + std::to_string(r) +
                                  " has wrong width");
    }
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("appliance '" + model.name +
                                    "': negative transition probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("appliance '" + model.name +
                                  "': transition row " + std::to_string(r) +
                                  " does not sum to 1");
    }
  }
}

struct SynthesisResult {
  PowerTrace power;
  StateTrace states;
};

// Markov-chain sampling of one appliance, starting in state 0.
inline SynthesisResult synthesize(const ApplianceModel& model,
                                  std::int64_t duration_samples,
                                  std::uint64_t seed,
                                  double step_seconds = 1.0) {
  validate_model(model);
  if (duration_samples < 1) {
    throw std::invalid_argument("synthesize: duration must be >= 1 sample");
  }
  Rng rng(seed);
  const int n_states = model.state_count();

  SynthesisResult out;
  out.power.step_seconds = step_seconds;
  out.power.samples.resize(static_cast<std::size_t>(duration_samples));
  out.states.appliance = model.name;
  out.states.states.resize(static_cast<std::size_t>(duration_samples));

  int state = 0;
  for (std::int64_t t = 0; t < duration_samples; ++t) {
    out.states.states[static_cast<std::size_t>(t)] = state;
    out.power.samples[static_cast<std::size_t>(t)] =
        model.state_powers[static_cast<std::size_t>(state)];
    if (t + 1 < duration_samples) {
      const auto& row = model.transition_matrix[static_cast<std::size_t>(state)];
      double u = rng.uniform();
      int next = n_states - 1;
      for (int s = 0; s < n_states; ++s) {
        u -= row[static_cast<std::size_t>(s)];
        if (u < 0.0) {
          next = s;
          break;
        }
      }
      state = next;
    }
  }
  return out;
}

// ---- JSON model documents ---------------------------------------------------
// An appliance document is an array of {name, state_powers, transition_matrix}.

inline ApplianceModel model_from_json(const nlohmann::json& j) {
  ApplianceModel m;
  m.name = j.at("name").get<std::string>();
  m.state_powers = j.at("state_powers").get<std::vector<double>>();
  m.transition_matrix =
      j.at("transition_matrix").get<std::vector<std::vector<double>>>();
  validate_model(m);
  return m;
}

inline std::vector<ApplianceModel> models_from_json(const nlohmann::json& doc) {
  const nlohmann::json* arr = &doc;
  if (doc.is_object() && doc.contains("appliances")) arr = &doc.at("appliances");
  if (!arr->is_array() || arr->empty()) {
    throw std::invalid_argument("appliance document must be a nonempty array");
  }
  std::vector<ApplianceModel> models;
  models.reserve(arr->size());
  for (const auto& j : *arr) models.push_back(model_from_json(j));
  return models;
}

inline nlohmann::json models_to_json(const std::vector<ApplianceModel>& models) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) {
    arr.push_back({{"name", m.name},
                   {"state_powers", m.state_powers},
                   {"transition_matrix", m.transition_matrix}});
  }
  return arr;
}

namespace detail {

// Two-state chain with the given mean dwell times (in samples).
inline ApplianceModel two_state(std::string name, double on_power_w,
                                double off_dwell, double on_dwell) {
  ApplianceModel m;
  m.name = std::move(name);
  m.state_powers = {0.0, on_power_w};
  const double a = 1.0 / off_dwell;
  const double b = 1.0 / on_dwell;
  m.transition_matrix = {{1.0 - a, a}, {b, 1.0 - b}};
  return m;
}

// Cyclic chain visiting states in `order`, dwelling `dwells[i]` samples in
// order[i]. Stationary occupancy is proportional to the dwell times.
inline ApplianceModel cyclic(std::string name, std::vector<double> powers,
                             std::vector<int> order,
                             std::vector<double> dwells) {
  ApplianceModel m;
  m.name = std::move(name);
  m.state_powers = std::move(powers);
  const auto n = m.state_powers.size();
  m.transition_matrix.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto from = static_cast<std::size_t>(order[k]);
    const auto to = static_cast<std::size_t>(order[(k + 1) % order.size()]);
    const double leave = 1.0 / dwells[k];
    m.transition_matrix[from][from] = 1.0 - leave;
    m.transition_matrix[from][to] = leave;
  }
  return m;
}

}  // namespace detail

// Synthetic 7-appliance household. The state counts and power levels follow
// the usual demo set for second-resolution disaggregation work; the dwell
// times (and hence duty cycles) are hand-chosen and make no claim to match
// any measured dataset.
inline std::vector<ApplianceModel> default_household() {
  std::vector<ApplianceModel> h;
  h.push_back(detail::cyclic("TV", {0.0, 10.0, 160.0}, {0, 1, 2},
                             {3600.0, 600.0, 1800.0}));
  h.push_back(detail::two_state("coffee machine", 1280.0, 1380.0, 120.0));
  h.push_back(detail::two_state("dishwasher", 1900.0, 68400.0, 3600.0));
  h.push_back(detail::cyclic("fridge", {0.0, 8.0, 80.0, 230.0}, {0, 3, 2, 1},
                             {520.0, 100.0, 300.0, 80.0}));
  h.push_back(detail::two_state("hoover", 1200.0, 4400.0, 600.0));
  h.push_back(detail::two_state("water kettle", 1700.0, 8820.0, 180.0));
  h.push_back(detail::cyclic("washing machine", {0.0, 130.0, 240.0, 1920.0},
                             {0, 1, 2, 3}, {860.0, 540.0, 400.0, 200.0}));
  for (const auto& m : h) validate_model(m);
  return h;
}

}  // namespace loadveil
