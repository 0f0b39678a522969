#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <loadveil/loadveil.hpp>

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  return nlohmann::json::parse(in);
}

std::string config_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

// Seed precedence: config < --seed < LOADVEIL_SEED.
void apply_seed_overrides(nlohmann::json& doc, bool seed_given,
                          std::uint64_t seed_flag) {
  if (seed_given) doc["seed"] = seed_flag;
  if (const char* env = std::getenv("LOADVEIL_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw std::runtime_error("LOADVEIL_SEED is not an integer: " +
                               std::string(env));
    }
    doc["seed"] = static_cast<std::uint64_t>(v);
  }
}

struct Axis {
  std::string path;
  std::vector<nlohmann::json> values;
};

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
    throw std::runtime_error("bad --axis, expected name=v1,v2,...: " + spec);
  }
  Axis axis;
  axis.path = spec.substr(0, eq);
  std::string token;
  std::stringstream ss(spec.substr(eq + 1));
  while (std::getline(ss, token, ',')) {
    if (token.empty()) {
      throw std::runtime_error("bad --axis, empty value in: " + spec);
    }
    nlohmann::json v = nlohmann::json::parse(token, nullptr, false);
    if (v.is_discarded()) v = token;  // not a JSON literal: keep as string
    axis.values.push_back(std::move(v));
  }
  if (axis.values.empty()) {
    throw std::runtime_error("bad --axis, no values in: " + spec);
  }
  return axis;
}

void print_result_line(const loadveil::harness::ScenarioResult& r) {
  std::printf("%-24s rmse %10.3f W   turnover %9.4f kWh", r.id.c_str(),
              r.rmse_w, r.turnover_kwh);
  if (r.nilm_ran) std::printf("   acc %6.4f", r.accuracy.total);
  if (r.technique == "blh") std::printf("   fallback %5.3f", r.fallback_fraction);
  std::printf("\n");
}

std::string output_dir_from(const nlohmann::json& doc,
                            const std::string& base_dir,
                            const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (doc.contains("outputs") && doc.at("outputs").contains("directory")) {
    return loadveil::harness::detail::resolve_path(
        doc.at("outputs").at("directory").get<std::string>(), base_dir);
  }
  return "out";
}

bool write_traces_from(const nlohmann::json& doc) {
  if (doc.contains("outputs") && doc.at("outputs").contains("write_traces")) {
    return doc.at("outputs").at("write_traces").get<bool>();
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"load-hiding obfuscation and disaggregation harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::string axis_spec;
  std::uint64_t seed_flag = 0;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, bool with_axis) {
    sub->add_option("--config", config_path, "scenario config (JSON)")
        ->required();
    sub->add_option("--out", out_flag, "output directory (overrides config)");
    sub->add_option("--seed", seed_flag, "override the config seed");
    sub->add_option("--jobs", jobs, "worker threads for sweeps")
        ->check(CLI::PositiveNumber);
    if (with_axis) {
      sub->add_option("--axis", axis_spec,
                      "sweep axis as <config.path>=<v1,v2,...>")
          ->required();
    }
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run a single scenario");
  add_common(cmd_run, false);
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "run the scenario once per axis value");
  add_common(cmd_sweep, true);
  CLI::App* cmd_validate =
      app.add_subcommand("validate", "check a config without running it");
  cmd_validate->add_option("--config", config_path, "scenario config (JSON)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json doc = load_config(config_path);
    const std::string base_dir = config_dir(config_path);

    if (cmd_validate->parsed()) {
      const auto cfg = loadveil::harness::parse_scenario(doc, base_dir);
      std::printf("config ok: id=%s technique=%s", cfg.id.c_str(),
                  loadveil::harness::technique_name(cfg.technique).c_str());
      if (cfg.household_csv.empty()) {
        std::printf(" samples=%lld",
                    static_cast<long long>(loadveil::harness::sample_count(cfg)));
      } else {
        std::printf(" household_csv=%s", cfg.household_csv.c_str());
      }
      std::printf(" appliances=%zu nilm=%s\n", cfg.household.size(),
                  cfg.nilm_block.enabled ? "on" : "off");
      return 0;
    }

    const bool seed_given =
        (cmd_run->parsed() && cmd_run->count("--seed") > 0) ||
        (cmd_sweep->parsed() && cmd_sweep->count("--seed") > 0);
    apply_seed_overrides(doc, seed_given, seed_flag);

    if (cmd_run->parsed()) {
      auto cfg = loadveil::harness::parse_scenario(doc, base_dir);
      if (!out_flag.empty()) cfg.outputs.directory = out_flag;
      const auto result = loadveil::harness::run_scenario(cfg);
      loadveil::harness::emit_results({result}, cfg.outputs.directory,
                                      cfg.outputs.write_traces);
      print_result_line(result);
      std::printf("results written to %s\n", cfg.outputs.directory.c_str());
      return 0;
    }

    const Axis axis = parse_axis(axis_spec);
    const auto results =
        loadveil::harness::run_sweep(doc, axis.path, axis.values, jobs, base_dir);
    const std::string out_dir = output_dir_from(doc, base_dir, out_flag);
    loadveil::harness::emit_results(results, out_dir, write_traces_from(doc));
    bool any_failed = false;
    for (const auto& r : results) {
      if (r.error.empty()) {
        print_result_line(r);
      } else {
        any_failed = true;
        std::fprintf(stderr, "scenario %s failed: %s\n", r.id.c_str(),
                     r.error.c_str());
      }
    }
    std::printf("results written to %s\n", out_dir.c_str());
    return any_failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
