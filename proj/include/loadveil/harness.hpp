#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loadveil/appliance.hpp"
#include "loadveil/battery.hpp"
#include "loadveil/blh.hpp"
#include "loadveil/llh.hpp"
#include "loadveil/metrics.hpp"
#include "loadveil/nilm.hpp"
#include "loadveil/rng.hpp"
#include "loadveil/trace.hpp"
#include "loadveil/trace_io.hpp"

namespace loadveil {
namespace harness {

// Preprocessing applied to the metered trace before the disaggregation
// attack; RMSE is always computed on the unfiltered trace.
inline constexpr int kMedianFilterOrder = 5;

enum class Technique { none, blh, llh };

inline std::string technique_name(Technique t) {
  switch (t) {
    case Technique::blh: return "blh";
    case Technique::llh: return "llh";
    default: return "none";
  }
}

struct NilmBlock {
  bool enabled = true;
  nilm::FilterConfig filter;
};

struct OutputsBlock {
  std::string directory = "out";
  bool write_traces = true;
};

struct ScenarioConfig {
  std::string id;  // derived from technique and parameter when empty
  std::vector<ApplianceModel> household;
  std::string household_csv;  // per-appliance trace file; replaces synthesis
  double duration_days = 1.0;
  double step_seconds = 1.0;
  std::uint64_t seed = 1;
  Technique technique = Technique::none;
  battery::BatteryConfig battery_config;
  std::optional<blh::SteppingConfig> stepping;  // default derives from battery
  llh::LlhConfig llh_config;
  NilmBlock nilm_block;
  OutputsBlock outputs;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj,
                       const std::vector<std::string>& allowed,
                       const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw std::invalid_argument("config: unknown key \"" + it.key() +
                                  "\" in " + where);
    }
  }
}

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

inline std::uint64_t read_seed(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw std::invalid_argument("config: seed must be an integer");
}

inline std::string resolve_path(const std::string& path,
                                const std::string& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace detail

// Number of samples implied by the duration; must come out integral.
inline std::int64_t sample_count(const ScenarioConfig& cfg) {
  const double exact = cfg.duration_days * 86400.0 / cfg.step_seconds;
  const double rounded = std::round(exact);
  if (!(rounded >= 1.0) || std::abs(exact - rounded) > 1e-6) {
    throw std::invalid_argument(
        "config: duration_days x 86400 / step_seconds must be a positive "
        "integer sample count");
  }
  return static_cast<std::int64_t>(rounded);
}

// Experiment axis value carried into result rows: battery capacity for BLH,
// daily energy target for LLH, zero for the identity technique.
inline double scenario_parameter(const ScenarioConfig& cfg) {
  switch (cfg.technique) {
    case Technique::blh: return cfg.battery_config.rated_capacity_ah;
    case Technique::llh: return cfg.llh_config.daily_target_kwh;
    default: return 0.0;
  }
}

inline std::string default_id(const ScenarioConfig& cfg) {
  switch (cfg.technique) {
    case Technique::blh:
      return "blh_" + detail::short_number(cfg.battery_config.rated_capacity_ah) +
             "Ah";
    case Technique::llh:
      return "llh_" + detail::short_number(cfg.llh_config.daily_target_kwh) +
             "kWh";
    default:
      return "none";
  }
}

// Parses one scenario document. Relative file paths are resolved against
// base_dir (the config file's directory in CLI use). Unknown keys anywhere
// are errors so that `validate` catches typos.
inline ScenarioConfig parse_scenario(const nlohmann::json& doc,
                                     const std::string& base_dir = "") {
  if (!doc.is_object()) {
    throw std::invalid_argument("config: document must be a JSON object");
  }
  detail::check_keys(doc,
                     {"id", "duration_days", "step_seconds", "seed",
                      "technique", "household", "battery", "blh", "llh",
                      "nilm", "outputs"},
                     "top level");

  ScenarioConfig cfg;
  if (doc.contains("id")) cfg.id = doc.at("id").get<std::string>();
  if (doc.contains("duration_days")) {
    cfg.duration_days = doc.at("duration_days").get<double>();
  }
  if (doc.contains("step_seconds")) {
    cfg.step_seconds = doc.at("step_seconds").get<double>();
  }
  if (doc.contains("seed")) cfg.seed = detail::read_seed(doc.at("seed"));
  if (!(cfg.duration_days > 0.0) || !(cfg.step_seconds > 0.0)) {
    throw std::invalid_argument(
        "config: duration_days and step_seconds must be positive");
  }

  if (!doc.contains("household")) {
    throw std::invalid_argument("config: missing household");
  }
  const auto& hh = doc.at("household");
  if (hh.is_array()) {
    cfg.household = models_from_json(hh);
  } else if (hh.is_object()) {
    detail::check_keys(hh, {"file", "csv", "models"}, "household");
    if (hh.contains("file") == hh.contains("csv")) {
      throw std::invalid_argument(
          "config: household object needs exactly one of \"file\" or \"csv\"");
    }
    if (hh.contains("file")) {
      const auto path =
          detail::resolve_path(hh.at("file").get<std::string>(), base_dir);
      std::ifstream in(path);
      if (!in) {
        throw std::invalid_argument("config: cannot open household file: " +
                                    path);
      }
      cfg.household = models_from_json(nlohmann::json::parse(in));
    } else {
      cfg.household_csv =
          detail::resolve_path(hh.at("csv").get<std::string>(), base_dir);
      if (hh.contains("models")) {
        const auto path =
            detail::resolve_path(hh.at("models").get<std::string>(), base_dir);
        std::ifstream in(path);
        if (!in) {
          throw std::invalid_argument("config: cannot open models file: " +
                                      path);
        }
        cfg.household = models_from_json(nlohmann::json::parse(in));
      }
    }
  } else {
    throw std::invalid_argument(
        "config: household must be a model array or an object");
  }

  const bool has_blh_block = doc.contains("blh") || doc.contains("battery");
  const bool has_llh_block = doc.contains("llh");
  std::string tech = "";
  if (doc.contains("technique")) {
    tech = doc.at("technique").get<std::string>();
  } else if (has_blh_block && !has_llh_block) {
    tech = "blh";
  } else if (has_llh_block && !has_blh_block) {
    tech = "llh";
  } else if (!has_blh_block && !has_llh_block) {
    tech = "none";
  } else {
    throw std::invalid_argument(
        "config: both blh/battery and llh blocks present; exactly one "
        "technique block is allowed");
  }

  if (tech == "none") {
    cfg.technique = Technique::none;
    if (has_blh_block || has_llh_block) {
      throw std::invalid_argument(
          "config: technique \"none\" must not carry blh/battery/llh blocks");
    }
  } else if (tech == "blh") {
    cfg.technique = Technique::blh;
    if (has_llh_block) {
      throw std::invalid_argument(
          "config: technique \"blh\" must not carry an llh block");
    }
    if (!doc.contains("battery")) {
      throw std::invalid_argument("config: technique \"blh\" needs a battery block");
    }
  } else if (tech == "llh") {
    cfg.technique = Technique::llh;
    if (has_blh_block) {
      throw std::invalid_argument(
          "config: technique \"llh\" must not carry blh/battery blocks");
    }
    if (!doc.contains("llh")) {
      throw std::invalid_argument("config: technique \"llh\" needs an llh block");
    }
  } else {
    throw std::invalid_argument("config: unknown technique \"" + tech + "\"");
  }

  if (doc.contains("battery")) {
    const auto& b = doc.at("battery");
    detail::check_keys(b,
                       {"capacity_ah", "voltage_v", "soc_min", "soc_max",
                        "initial_soc", "c_rate_per_hour"},
                       "battery");
    auto& bc = cfg.battery_config;
    if (b.contains("capacity_ah")) bc.rated_capacity_ah = b.at("capacity_ah").get<double>();
    if (b.contains("voltage_v")) bc.nominal_voltage_v = b.at("voltage_v").get<double>();
    if (b.contains("soc_min")) bc.soc_min = b.at("soc_min").get<double>();
    if (b.contains("soc_max")) bc.soc_max = b.at("soc_max").get<double>();
    if (b.contains("initial_soc")) bc.initial_soc = b.at("initial_soc").get<double>();
    if (b.contains("c_rate_per_hour")) bc.c_rate_per_hour = b.at("c_rate_per_hour").get<double>();
    battery::validate_config(bc);
  }
  if (doc.contains("blh")) {
    const auto& s = doc.at("blh");
    detail::check_keys(s, {"beta_override_w", "soc_force_low", "soc_force_high"},
                       "blh");
    blh::SteppingConfig sc = blh::default_stepping_config(cfg.battery_config);
    if (s.contains("beta_override_w")) sc.beta_w = s.at("beta_override_w").get<double>();
    if (s.contains("soc_force_low")) sc.soc_force_low = s.at("soc_force_low").get<double>();
    if (s.contains("soc_force_high")) sc.soc_force_high = s.at("soc_force_high").get<double>();
    cfg.stepping = sc;
  }
  if (doc.contains("llh")) {
    const auto& l = doc.at("llh");
    detail::check_keys(l,
                       {"daily_target_kwh", "p_max_w", "alpha", "gap_limit_kwh",
                        "frame_min_s", "frame_max_s", "hold_samples"},
                       "llh");
    auto& lc = cfg.llh_config;
    if (l.contains("daily_target_kwh")) lc.daily_target_kwh = l.at("daily_target_kwh").get<double>();
    if (l.contains("p_max_w")) lc.p_max_w = l.at("p_max_w").get<double>();
    if (l.contains("alpha")) lc.alpha = l.at("alpha").get<double>();
    if (l.contains("gap_limit_kwh")) lc.gap_limit_kwh = l.at("gap_limit_kwh").get<double>();
    if (l.contains("frame_min_s")) lc.frame_min_seconds = l.at("frame_min_s").get<double>();
    if (l.contains("frame_max_s")) lc.frame_max_seconds = l.at("frame_max_s").get<double>();
    if (l.contains("hold_samples")) lc.hold_samples = l.at("hold_samples").get<int>();
    llh::validate_config(lc);
  }
  if (doc.contains("nilm")) {
    const auto& n = doc.at("nilm");
    detail::check_keys(
        n, {"enabled", "particles", "sigma_w", "threshold", "ess_fraction"},
        "nilm");
    auto& nb = cfg.nilm_block;
    if (n.contains("enabled")) nb.enabled = n.at("enabled").get<bool>();
    if (n.contains("particles")) nb.filter.particle_count = n.at("particles").get<int>();
    if (n.contains("sigma_w")) nb.filter.likelihood_sigma_w = n.at("sigma_w").get<double>();
    if (n.contains("threshold")) nb.filter.on_probability_threshold = n.at("threshold").get<double>();
    if (n.contains("ess_fraction")) nb.filter.resample_ess_fraction = n.at("ess_fraction").get<double>();
    nilm::validate_config(nb.filter);
  }
  if (doc.contains("outputs")) {
    const auto& o = doc.at("outputs");
    detail::check_keys(o, {"directory", "write_traces"}, "outputs");
    if (o.contains("directory")) {
      cfg.outputs.directory =
          detail::resolve_path(o.at("directory").get<std::string>(), base_dir);
    }
    if (o.contains("write_traces")) {
      cfg.outputs.write_traces = o.at("write_traces").get<bool>();
    }
  }

  if (cfg.household.empty() && cfg.household_csv.empty()) {
    throw std::invalid_argument("config: household resolves to no appliances");
  }
  if (cfg.household_csv.empty()) sample_count(cfg);  // validates integrality
  if (cfg.nilm_block.enabled && cfg.household.empty()) {
    throw std::invalid_argument(
        "config: the attack needs appliance models; give household \"models\" "
        "or disable nilm");
  }
  if (cfg.technique == Technique::blh) {
    blh::validate_config(cfg.stepping ? *cfg.stepping
                                      : blh::default_stepping_config(cfg.battery_config),
                         cfg.battery_config);
  }
  if (cfg.id.empty()) cfg.id = default_id(cfg);
  return cfg;
}

struct ScenarioResult {
  std::string id;
  std::string technique;
  double parameter = 0.0;
  double rmse_w = 0.0;
  double turnover_kwh = 0.0;
  bool nilm_ran = false;
  metrics::AccuracyReport accuracy;  // empty when the attack is disabled
  double all_off_total = 0.0;
  double fallback_fraction = 0.0;           // BLH
  std::vector<double> daily_realized_kwh;   // LLH
  PowerTrace net;
  PowerTrace metered;
  std::vector<double> device_power_w;  // battery power (signed) or noise
  std::vector<double> soc;             // BLH
  std::vector<std::uint8_t> fallback;  // BLH
  std::string error;  // nonempty marks a failed sweep scenario
};

// Full pipeline for one scenario: build the household, aggregate net demand,
// obfuscate, attack the median-filtered metered trace, score.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  ScenarioResult res;
  res.id = cfg.id.empty() ? default_id(cfg) : cfg.id;
  res.technique = technique_name(cfg.technique);
  res.parameter = scenario_parameter(cfg);

  // Ground truth: per-appliance power plus ON/OFF series.
  std::vector<PowerTrace> appliance_power;
  std::map<std::string, std::vector<int>> truth_on;
  if (!cfg.household_csv.empty()) {
    auto traces = load_traces_csv(cfg.household_csv);
    for (auto& [name, trace] : traces) {
      std::vector<int> on(trace.samples.size());
      for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        on[i] = trace.samples[i] > 0.0 ? 1 : 0;
      }
      truth_on.emplace(name, std::move(on));
      appliance_power.push_back(std::move(trace));
    }
  } else {
    const std::int64_t n = sample_count(cfg);
    for (const auto& model : cfg.household) {
      auto synth = synthesize(model, n, derive_seed(cfg.seed, "synth:" + model.name),
                              cfg.step_seconds);
      truth_on.emplace(model.name, metrics::to_on_off(synth.states, model));
      appliance_power.push_back(std::move(synth.power));
    }
  }
  res.net = aggregate(appliance_power);

  switch (cfg.technique) {
    case Technique::none: {
      res.metered = res.net;
      break;
    }
    case Technique::blh: {
      const auto stepping = cfg.stepping
                                ? *cfg.stepping
                                : blh::default_stepping_config(cfg.battery_config);
      auto out = blh::run_blh(res.net, cfg.battery_config, stepping, cfg.seed);
      res.metered = std::move(out.metered);
      res.device_power_w = std::move(out.battery_power_w);
      res.soc = std::move(out.soc);
      res.fallback = std::move(out.fallback);
      res.fallback_fraction = 0.0;
      if (!res.fallback.empty()) {
        std::int64_t f = 0;
        for (auto b : res.fallback) f += b;
        res.fallback_fraction =
            static_cast<double>(f) / static_cast<double>(res.fallback.size());
      }
      break;
    }
    case Technique::llh: {
      auto out = llh::run_llh(res.net, cfg.llh_config, cfg.seed);
      res.metered = std::move(out.metered);
      res.device_power_w = std::move(out.noise.samples);
      res.daily_realized_kwh = std::move(out.daily_realized_kwh);
      break;
    }
  }

  res.rmse_w = metrics::rmse(res.net, res.metered);
  res.turnover_kwh =
      metrics::energy_turnover_kwh(res.device_power_w, res.metered.step_seconds);
  res.all_off_total = metrics::all_off_reference(truth_on).total;

  if (cfg.nilm_block.enabled) {
    const auto filtered = median_filter(res.metered, kMedianFilterOrder);
    const auto attack =
        nilm::disaggregate(filtered, cfg.household, cfg.nilm_block.filter,
                           cfg.seed);
    std::map<std::string, std::vector<int>> estimated;
    for (std::size_t a = 0; a < attack.names.size(); ++a) {
      estimated.emplace(attack.names[a], attack.estimated[a].states);
    }
    res.accuracy = metrics::accuracy(estimated, truth_on);
    res.nilm_ran = true;
  }
  return res;
}

namespace detail {

inline void set_json_path(nlohmann::json& doc, const std::string& path,
                          const nlohmann::json& value) {
  nlohmann::json* node = &doc;
  std::string token;
  std::stringstream ss(path);
  std::vector<std::string> parts;
  while (std::getline(ss, token, '.')) {
    if (token.empty()) {
      throw std::invalid_argument("sweep: bad axis path \"" + path + "\"");
    }
    parts.push_back(token);
  }
  if (parts.empty()) {
    throw std::invalid_argument("sweep: empty axis path");
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

inline bool axis_is_scenario_parameter(const std::string& axis_path) {
  return axis_path == "battery.capacity_ah" ||
         axis_path == "llh.daily_target_kwh";
}

}  // namespace detail

// Runs the base config once per axis value. Every scenario gets a seed
// derived from the base seed and the axis value itself (not its position),
// so results are independent of axis order and of what else runs in the
// sweep. Failures are captured per scenario in the result's error field.
inline std::vector<ScenarioResult> run_sweep(
    const nlohmann::json& base_doc, const std::string& axis_path,
    const std::vector<nlohmann::json>& values, int jobs = 1,
    const std::string& base_dir = "") {
  if (values.empty()) {
    throw std::invalid_argument("sweep: axis needs at least one value");
  }
  std::uint64_t base_seed = 1;
  if (base_doc.is_object() && base_doc.contains("seed")) {
    base_seed = detail::read_seed(base_doc.at("seed"));
  }
  const bool explicit_id =
      base_doc.is_object() && base_doc.contains("id");

  std::vector<nlohmann::json> docs;
  docs.reserve(values.size());
  std::vector<std::string> tags;
  for (const auto& value : values) {
    nlohmann::json doc = base_doc;
    detail::set_json_path(doc, axis_path, value);
    const std::string tag = axis_path + "=" + value.dump();
    doc["seed"] = derive_seed(base_seed, "sweep:" + tag);
    tags.push_back(tag);
    docs.push_back(std::move(doc));
  }

  std::vector<ScenarioResult> results(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= docs.size()) return;
      try {
        ScenarioConfig cfg = parse_scenario(docs[i], base_dir);
        if (explicit_id || !detail::axis_is_scenario_parameter(axis_path)) {
          cfg.id += "_" + detail::sanitize_id(tags[i]);
        }
        results[i] = run_scenario(cfg);
      } catch (const std::exception& e) {
        results[i].id = tags[i];
        results[i].error = e.what();
      }
    }
  };

  const int n_threads = std::clamp<int>(
      jobs, 1, static_cast<int>(std::max<std::size_t>(1, values.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

// Materializes results.csv (one row per completed scenario), plotdata.csv
// (turnover/rmse pairs) and, when asked, one trace CSV per scenario. Failed
// scenarios are skipped here; the caller reports their error strings.
inline void emit_results(const std::vector<ScenarioResult>& results,
                         const std::string& out_dir, bool write_traces = true) {
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);

  std::set<std::string> appliances;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    for (const auto& [name, acc] : r.accuracy.per_appliance) {
      (void)acc;
      appliances.insert(name);
    }
  }

  std::ofstream res_out(dir / "results.csv");
  if (!res_out) {
    throw std::runtime_error("emit_results: cannot write results.csv in " +
                             out_dir);
  }
  res_out << "id,technique,parameter,rmse_w,turnover_kwh,acc_total";
  for (const auto& name : appliances) {
    res_out << ",acc_" << detail::sanitize_id(name);
  }
  res_out << ",all_off_total,fallback_fraction,daily_kwh_min,daily_kwh_max\n";
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    res_out << r.id << ',' << r.technique << ','
            << loadveil::detail::format_full(r.parameter) << ','
            << loadveil::detail::format_full(r.rmse_w) << ','
            << loadveil::detail::format_full(r.turnover_kwh) << ',';
    if (r.nilm_ran) res_out << loadveil::detail::format_full(r.accuracy.total);
    for (const auto& name : appliances) {
      res_out << ',';
      const auto it = r.accuracy.per_appliance.find(name);
      if (it != r.accuracy.per_appliance.end()) {
        res_out << loadveil::detail::format_full(it->second);
      }
    }
    res_out << ',' << loadveil::detail::format_full(r.all_off_total) << ',';
    if (r.technique == "blh") {
      res_out << loadveil::detail::format_full(r.fallback_fraction);
    }
    res_out << ',';
    if (!r.daily_realized_kwh.empty()) {
      const auto [lo, hi] = std::minmax_element(r.daily_realized_kwh.begin(),
                                                r.daily_realized_kwh.end());
      res_out << loadveil::detail::format_full(*lo) << ','
              << loadveil::detail::format_full(*hi);
    } else {
      res_out << ',';
    }
    res_out << '\n';
  }
  res_out.close();
  if (!res_out) {
    throw std::runtime_error("emit_results: short write on results.csv in " +
                             out_dir);
  }

  std::ofstream plot_out(dir / "plotdata.csv");
  if (!plot_out) {
    throw std::runtime_error("emit_results: cannot write plotdata.csv in " +
                             out_dir);
  }
  plot_out << "turnover_kwh,rmse_w\n";
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    plot_out << loadveil::detail::format_full(r.turnover_kwh) << ','
             << loadveil::detail::format_full(r.rmse_w) << '\n';
  }
  plot_out.close();
  if (!plot_out) {
    throw std::runtime_error("emit_results: short write on plotdata.csv in " +
                             out_dir);
  }

  if (!write_traces) return;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    std::vector<double> time(r.metered.samples.size());
    for (std::size_t i = 0; i < time.size(); ++i) {
      time[i] = (static_cast<double>(r.metered.start_index) +
                 static_cast<double>(i)) *
                r.metered.step_seconds;
    }
    std::vector<std::string> names{"time", "net_w", "metered_w"};
    std::vector<const std::vector<double>*> cols{&time, &r.net.samples,
                                                 &r.metered.samples};
    std::vector<double> fallback_col;
    if (r.technique == "blh") {
      names.insert(names.end(), {"soc", "fallback"});
      fallback_col.assign(r.fallback.begin(), r.fallback.end());
      cols.push_back(&r.soc);
      cols.push_back(&fallback_col);
    } else if (r.technique == "llh") {
      names.push_back("noise_w");
      cols.push_back(&r.device_power_w);
    }
    const auto path = dir / ("trace_" + detail::sanitize_id(r.id) + ".csv");
    write_series_csv(path.string(), names, cols);
  }
}

}  // namespace harness
}  // namespace loadveil
