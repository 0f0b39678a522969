#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <loadveil/harness.hpp>

using namespace loadveil;
using harness::ScenarioConfig;
using harness::Technique;
using nlohmann::json;

namespace {

json small_household() {
  json kettle;
  kettle["name"] = "kettle";
  kettle["state_powers"] = {0.0, 1700.0};
  kettle["transition_matrix"] = {{0.99, 0.01}, {0.01, 0.99}};
  json heater;
  heater["name"] = "heater";
  heater["state_powers"] = {0.0, 800.0};
  heater["transition_matrix"] = {{0.995, 0.005}, {0.02, 0.98}};
  return json::array({kettle, heater});
}

// 600 one-second samples: fast enough to run the full pipeline many times.
json base_blh_doc() {
  json doc;
  doc["duration_days"] = 600.0 / 86400.0;
  doc["seed"] = 5;
  doc["household"] = small_household();
  doc["battery"]["capacity_ah"] = 100.0;
  doc["nilm"]["particles"] = 50;
  return doc;
}

json base_llh_doc() {
  json doc;
  doc["duration_days"] = 600.0 / 86400.0;
  doc["seed"] = 5;
  doc["household"] = small_household();
  doc["llh"]["daily_target_kwh"] = 5.0;
  doc["nilm"]["particles"] = 50;
  return doc;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_scenario rejects malformed documents") {
  REQUIRE_THROWS_AS(harness::parse_scenario(json::array()),
                    std::invalid_argument);

  auto doc = base_blh_doc();
  doc["speling"] = 1;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["battery"]["capacity"] = 10;  // unknown battery key
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_llh_doc();
  doc["llh"]["frame_min_seconds"] = 60;  // key is frame_min_s
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["nilm"]["resample"] = 0.5;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["outputs"]["dir"] = "x";
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  // Exactly one technique block.
  doc = base_blh_doc();
  doc["llh"]["daily_target_kwh"] = 5.0;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc.erase("battery");
  doc["technique"] = "blh";
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_llh_doc();
  doc.erase("llh");
  doc["technique"] = "llh";
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["technique"] = "none";  // carries a battery block
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["technique"] = "quantize";
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc.erase("household");
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["household"] = json::array();
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["seed"] = 1.5;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  doc = base_blh_doc();
  doc["duration_days"] = -1.0;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  // 86400 / 7 is not an integer sample count.
  doc = base_blh_doc();
  doc["duration_days"] = 1.0;
  doc["step_seconds"] = 7.0;
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);

  // A CSV household without models cannot feed the attack.
  doc = base_blh_doc();
  doc["household"] = json::object();
  doc["household"]["csv"] = "somewhere.csv";
  REQUIRE_THROWS_AS(harness::parse_scenario(doc), std::invalid_argument);
}

TEST_CASE("parse_scenario derives ids and infers techniques") {
  auto blh = harness::parse_scenario(base_blh_doc());
  REQUIRE(blh.technique == Technique::blh);  // inferred from the battery block
  REQUIRE(blh.id == "blh_100Ah");
  REQUIRE(harness::scenario_parameter(blh) == 100.0);

  auto llh = harness::parse_scenario(base_llh_doc());
  REQUIRE(llh.technique == Technique::llh);
  REQUIRE(llh.id == "llh_5kWh");
  REQUIRE(harness::scenario_parameter(llh) == 5.0);

  json none;
  none["duration_days"] = 600.0 / 86400.0;
  none["household"] = small_household();
  auto plain = harness::parse_scenario(none);
  REQUIRE(plain.technique == Technique::none);
  REQUIRE(plain.id == "none");
  REQUIRE(harness::scenario_parameter(plain) == 0.0);

  auto named = base_blh_doc();
  named["id"] = "my experiment/run";
  REQUIRE(harness::parse_scenario(named).id == "my experiment/run");

  // Defaults carried into sub-configs.
  REQUIRE(blh.battery_config.nominal_voltage_v == 12.0);
  REQUIRE(blh.nilm_block.enabled);
  REQUIRE(blh.nilm_block.filter.particle_count == 50);
  REQUIRE(llh.llh_config.p_max_w == 1600.0);
  REQUIRE(blh.outputs.directory == "out");
}

TEST_CASE("sample counts must come out integral") {
  auto doc = base_blh_doc();
  doc["duration_days"] = 1.0;
  doc["step_seconds"] = 0.5;
  REQUIRE(harness::sample_count(harness::parse_scenario(doc)) == 172800);
  doc["step_seconds"] = 60.0;
  REQUIRE(harness::sample_count(harness::parse_scenario(doc)) == 1440);
}

TEST_CASE("set_json_path patches nested keys") {
  json doc;
  doc["a"] = 1;
  harness::detail::set_json_path(doc, "a", json(2));
  REQUIRE(doc["a"] == 2);
  harness::detail::set_json_path(doc, "b.c.d", json("x"));
  REQUIRE(doc["b"]["c"]["d"] == "x");
  REQUIRE_THROWS_AS(harness::detail::set_json_path(doc, "", json(1)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(harness::detail::set_json_path(doc, "a..b", json(1)),
                    std::invalid_argument);
}

TEST_CASE("identity technique reports zero hiding") {
  json doc;
  doc["duration_days"] = 600.0 / 86400.0;
  doc["seed"] = 5;
  doc["household"] = small_household();
  doc["nilm"]["enabled"] = false;
  const auto res = harness::run_scenario(harness::parse_scenario(doc));
  REQUIRE(res.technique == "none");
  REQUIRE(res.rmse_w == 0.0);
  REQUIRE(res.turnover_kwh == 0.0);
  REQUIRE(res.metered.samples == res.net.samples);
  REQUIRE(!res.nilm_ran);
  REQUIRE(res.accuracy.per_appliance.empty());
}

TEST_CASE("blh scenario wires the pipeline together") {
  const auto res = harness::run_scenario(harness::parse_scenario(base_blh_doc()));
  REQUIRE(res.technique == "blh");
  REQUIRE(res.parameter == 100.0);
  REQUIRE(res.net.samples.size() == 600);

  // Reported metrics re-derive from the reported traces.
  REQUIRE(res.rmse_w == metrics::rmse(res.net, res.metered));
  REQUIRE(res.turnover_kwh ==
          metrics::energy_turnover_kwh(res.device_power_w,
                                       res.metered.step_seconds));
  std::int64_t falls = 0;
  for (auto f : res.fallback) falls += f;
  REQUIRE(res.fallback_fraction ==
          static_cast<double>(falls) / static_cast<double>(res.fallback.size()));

  for (std::size_t t = 0; t < res.net.samples.size(); ++t) {
    REQUIRE(res.metered.samples[t] ==
            res.net.samples[t] + res.device_power_w[t]);
    REQUIRE(res.soc[t] >= 0.20);
    REQUIRE(res.soc[t] <= 0.90);
  }

  REQUIRE(res.nilm_ran);
  REQUIRE(res.accuracy.per_appliance.count("kettle") == 1);
  REQUIRE(res.accuracy.per_appliance.count("heater") == 1);
  REQUIRE(res.accuracy.total >= 0.0);
  REQUIRE(res.accuracy.total <= 1.0);
  REQUIRE(res.all_off_total >= 0.0);
  REQUIRE(res.all_off_total <= 1.0);
  REQUIRE(res.daily_realized_kwh.empty());
}

TEST_CASE("llh scenario adds noise on top of net demand") {
  const auto res = harness::run_scenario(harness::parse_scenario(base_llh_doc()));
  REQUIRE(res.technique == "llh");
  REQUIRE(res.daily_realized_kwh.size() == 1);
  for (std::size_t t = 0; t < res.net.samples.size(); ++t) {
    REQUIRE(res.metered.samples[t] ==
            res.net.samples[t] + res.device_power_w[t]);
    REQUIRE(res.device_power_w[t] >= 0.0);
    REQUIRE(res.device_power_w[t] <= 1600.0);
  }
  REQUIRE(res.rmse_w == metrics::rmse(res.net, res.metered));
}

TEST_CASE("scenarios are deterministic and share ground truth by seed") {
  const auto a = harness::run_scenario(harness::parse_scenario(base_blh_doc()));
  const auto b = harness::run_scenario(harness::parse_scenario(base_blh_doc()));
  REQUIRE(a.rmse_w == b.rmse_w);
  REQUIRE(a.turnover_kwh == b.turnover_kwh);
  REQUIRE(a.metered.samples == b.metered.samples);
  REQUIRE(a.accuracy.total == b.accuracy.total);

  // The same seed and household produce the same net demand under either
  // technique, so RMSE comparisons across techniques are apples to apples.
  const auto c = harness::run_scenario(harness::parse_scenario(base_llh_doc()));
  REQUIRE(a.net.samples == c.net.samples);
}

TEST_CASE("sweeps derive per-value seeds and keep value-keyed ids") {
  const auto doc = base_blh_doc();
  const std::vector<json> values{json(10), json(100)};
  const auto rows =
      harness::run_sweep(doc, "battery.capacity_ah", values, 2);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].error.empty());
  REQUIRE(rows[1].error.empty());
  REQUIRE(rows[0].id == "blh_10Ah");
  REQUIRE(rows[1].id == "blh_100Ah");

  // Each sweep row reproduces a standalone run of the patched document with
  // the derived seed.
  json patched = doc;
  patched["battery"]["capacity_ah"] = values[0];
  patched["seed"] = derive_seed(5, "sweep:battery.capacity_ah=10");
  const auto alone = harness::run_scenario(harness::parse_scenario(patched));
  REQUIRE(alone.rmse_w == rows[0].rmse_w);
  REQUIRE(alone.turnover_kwh == rows[0].turnover_kwh);
  REQUIRE(alone.metered.samples == rows[0].metered.samples);
  REQUIRE(alone.accuracy.total == rows[0].accuracy.total);
}

TEST_CASE("sweep results are independent of axis order") {
  const auto doc = base_llh_doc();
  const std::vector<json> forward{json(2.5), json(5.0), json(7.5)};
  const std::vector<json> backward{json(7.5), json(5.0), json(2.5)};
  const auto a = harness::run_sweep(doc, "llh.daily_target_kwh", forward, 3);
  const auto b = harness::run_sweep(doc, "llh.daily_target_kwh", backward, 1);

  std::map<std::string, const harness::ScenarioResult*> by_id;
  for (const auto& r : b) by_id[r.id] = &r;
  for (const auto& r : a) {
    REQUIRE(r.error.empty());
    const auto* match = by_id.at(r.id);
    REQUIRE(r.rmse_w == match->rmse_w);
    REQUIRE(r.turnover_kwh == match->turnover_kwh);
    REQUIRE(r.metered.samples == match->metered.samples);
  }
}

TEST_CASE("a failing sweep point is captured without sinking the rest") {
  const auto doc = base_blh_doc();
  const std::vector<json> values{json(10), json(-5)};
  const auto rows = harness::run_sweep(doc, "battery.capacity_ah", values, 1);
  REQUIRE(rows[0].error.empty());
  REQUIRE(!rows[1].error.empty());
  REQUIRE(rows[1].id == "battery.capacity_ah=-5");
}

TEST_CASE("sweeping a non-parameter axis tags the scenario ids") {
  const auto doc = base_blh_doc();
  const std::vector<json> values{json(50), json(60)};
  const auto rows = harness::run_sweep(doc, "nilm.particles", values, 1);
  REQUIRE(rows[0].id != rows[1].id);
  REQUIRE(rows[0].id.find("blh_100Ah") == 0);
  REQUIRE(rows[0].id.find("particles") != std::string::npos);
  REQUIRE(rows[0].id.find('=') == std::string::npos);  // sanitized for files
}

TEST_CASE("emit_results writes a header even with nothing to report") {
  const auto dir = fresh_dir("loadveil_emit_empty");
  harness::emit_results({}, dir.string());
  REQUIRE(slurp(dir / "results.csv") ==
          "id,technique,parameter,rmse_w,turnover_kwh,acc_total,"
          "all_off_total,fallback_fraction,daily_kwh_min,daily_kwh_max\n");
  REQUIRE(slurp(dir / "plotdata.csv") == "turnover_kwh,rmse_w\n");
}

TEST_CASE("emit_results output is byte stable across reruns") {
  const auto rows = harness::run_sweep(base_blh_doc(), "battery.capacity_ah",
                                       {json(10), json(100)}, 2);
  const auto dir_a = fresh_dir("loadveil_emit_a");
  const auto dir_b = fresh_dir("loadveil_emit_b");
  harness::emit_results(rows, dir_a.string());
  const auto rows_again = harness::run_sweep(
      base_blh_doc(), "battery.capacity_ah", {json(10), json(100)}, 1);
  harness::emit_results(rows_again, dir_b.string());
  REQUIRE(slurp(dir_a / "results.csv") == slurp(dir_b / "results.csv"));
  REQUIRE(slurp(dir_a / "plotdata.csv") == slurp(dir_b / "plotdata.csv"));
  REQUIRE(slurp(dir_a / "trace_blh_10Ah.csv") ==
          slurp(dir_b / "trace_blh_10Ah.csv"));
}

TEST_CASE("results.csv cells line up with the header") {
  auto blh_rows = harness::run_sweep(base_blh_doc(), "battery.capacity_ah",
                                     {json(100)}, 1);
  auto llh_rows =
      harness::run_sweep(base_llh_doc(), "llh.daily_target_kwh", {json(5)}, 1);
  std::vector<harness::ScenarioResult> all;
  all.push_back(blh_rows[0]);
  all.push_back(llh_rows[0]);

  const auto dir = fresh_dir("loadveil_emit_cells");
  harness::emit_results(all, dir.string(), false);

  std::stringstream file(slurp(dir / "results.csv"));
  std::string line;
  REQUIRE(std::getline(file, line));
  const auto header = split_cells(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    REQUIRE(it != header.end());
    return static_cast<std::size_t>(it - header.begin());
  };

  REQUIRE(std::getline(file, line));
  const auto blh_cells = split_cells(line);
  REQUIRE(blh_cells.size() == header.size());
  REQUIRE(blh_cells[col("id")] == "blh_100Ah");
  REQUIRE(blh_cells[col("technique")] == "blh");
  REQUIRE(!blh_cells[col("acc_kettle")].empty());
  REQUIRE(!blh_cells[col("fallback_fraction")].empty());
  REQUIRE(blh_cells[col("daily_kwh_min")].empty());
  REQUIRE(blh_cells[col("daily_kwh_max")].empty());

  REQUIRE(std::getline(file, line));
  const auto llh_cells = split_cells(line);
  REQUIRE(llh_cells.size() == header.size());
  REQUIRE(llh_cells[col("technique")] == "llh");
  REQUIRE(llh_cells[col("fallback_fraction")].empty());
  REQUIRE(!llh_cells[col("daily_kwh_min")].empty());
  REQUIRE(!llh_cells[col("daily_kwh_max")].empty());

  // plotdata holds exactly the turnover/rmse pairs, full precision.
  std::stringstream plot(slurp(dir / "plotdata.csv"));
  REQUIRE(std::getline(plot, line));
  REQUIRE(line == "turnover_kwh,rmse_w");
  REQUIRE(std::getline(plot, line));
  REQUIRE(line == loadveil::detail::format_full(all[0].turnover_kwh) + "," +
                      loadveil::detail::format_full(all[0].rmse_w));
}

TEST_CASE("emitted trace files revalidate against the run") {
  const auto blh_res =
      harness::run_scenario(harness::parse_scenario(base_blh_doc()));
  const auto llh_res =
      harness::run_scenario(harness::parse_scenario(base_llh_doc()));
  const auto dir = fresh_dir("loadveil_emit_traces");
  harness::emit_results({blh_res, llh_res}, dir.string(), true);

  // BLH trace: net and metered round-trip exactly; SOC stays in the window;
  // every non-fallback sample sits on the battery's quantization grid.
  const auto blh_cols = load_traces_csv((dir / "trace_blh_100Ah.csv").string());
  REQUIRE(blh_cols.count("net_w") == 1);
  REQUIRE(blh_cols.count("metered_w") == 1);
  REQUIRE(blh_cols.count("soc") == 1);
  REQUIRE(blh_cols.count("fallback") == 1);
  REQUIRE(blh_cols.at("net_w").samples == blh_res.net.samples);
  REQUIRE(blh_cols.at("metered_w").samples == blh_res.metered.samples);
  battery::BatteryConfig bc;
  bc.rated_capacity_ah = 100.0;
  const double beta = battery::max_power_w(bc);
  const auto& metered = blh_cols.at("metered_w").samples;
  const auto& soc = blh_cols.at("soc").samples;
  const auto& fallback = blh_cols.at("fallback").samples;
  for (std::size_t t = 0; t < metered.size(); ++t) {
    REQUIRE((fallback[t] == 0.0 || fallback[t] == 1.0));
    REQUIRE(soc[t] >= 0.20);
    REQUIRE(soc[t] <= 0.90);
    if (fallback[t] == 0.0) {
      const double k = std::round(metered[t] / beta);
      REQUIRE(std::abs(metered[t] - k * beta) <= 1e-6);
    }
  }

  // LLH trace: the noise column explains the metered trace exactly.
  const auto llh_cols = load_traces_csv((dir / "trace_llh_5kWh.csv").string());
  REQUIRE(llh_cols.count("noise_w") == 1);
  const auto& lnet = llh_cols.at("net_w").samples;
  const auto& lmet = llh_cols.at("metered_w").samples;
  const auto& noise = llh_cols.at("noise_w").samples;
  REQUIRE(lnet == llh_res.net.samples);
  for (std::size_t t = 0; t < lmet.size(); ++t) {
    REQUIRE(lmet[t] == lnet[t] + noise[t]);
  }
}
