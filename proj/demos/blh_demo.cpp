// Obfuscates six hours of the synthetic household with Lazy Stepping 2 and a
// 100 Ah battery, then prints a short excerpt and the run statistics.
#include <cstdio>

#include <loadveil/loadveil.hpp>

int main() {
  using namespace loadveil;

  const auto household = default_household();
  const std::int64_t samples = 6 * 3600;  // six hours at 1 s
  const std::uint64_t seed = 2024;

  std::vector<PowerTrace> power;
  for (const auto& model : household) {
    power.push_back(
        synthesize(model, samples, derive_seed(seed, "synth:" + model.name))
            .power);
  }
  const PowerTrace net = aggregate(power);

  battery::BatteryConfig bat;
  bat.rated_capacity_ah = 100.0;
  const auto stepping = blh::default_stepping_config(bat);
  const auto out = blh::run_blh(net, bat, stepping, seed);

  std::printf("battery: %.0f Ah @ %.0f V, step size beta = %.0f W\n",
              bat.rated_capacity_ah, bat.nominal_voltage_v, stepping.beta_w);
  std::printf("%8s %10s %10s %12s %6s\n", "t [s]", "net [W]", "meter [W]",
              "battery [W]", "soc");
  for (std::int64_t t = 0; t < samples; t += 1800) {
    const auto i = static_cast<std::size_t>(t);
    std::printf("%8lld %10.1f %10.1f %12.1f %6.3f\n",
                static_cast<long long>(t), net.samples[i],
                out.metered.samples[i], out.battery_power_w[i], out.soc[i]);
  }

  const double rmse = metrics::rmse(net, out.metered);
  const double turnover =
      metrics::energy_turnover_kwh(out.battery_power_w, 1.0);
  std::printf("\nrmse %.2f W, battery turnover %.4f kWh, fallback %.4f\n",
              rmse, turnover, out.fallback_fraction());
  return 0;
}
