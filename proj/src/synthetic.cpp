#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "pgdcrnn/data.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

double FundamentalDiagram::hourly_flow(double density) const {
  if (density <= 0.0) return 0.0;
  if (density >= jam_density) return 0.0;
  if (density <= critical_density()) return free_flow_speed * density;
  return wave_speed * (jam_density - density);
}

double FundamentalDiagram::speed(double density) const {
  if (density <= critical_density()) return free_flow_speed;
  if (density >= jam_density) return 0.0;
  return hourly_flow(density) / density;
}

double FundamentalDiagram::congested_flow_for_speed(double v) const {
  if (v <= 0.0) return 0.0;
  return v * wave_speed * jam_density / (v + wave_speed) / 12.0;
}

namespace {

constexpr double kMilesPerDegreeLat = 69.09;

bool weekend_day(std::int64_t epoch) {
  const std::int64_t days = epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400;
  const std::int64_t weekday = ((days + 4) % 7 + 7) % 7;
  return weekday == 0 || weekday == 6;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticScenario &sc) {
  if (sc.n_nodes == 0 || sc.clusters == 0 || sc.days == 0) {
    throw_config("synthetic scenario needs nodes, clusters and days");
  }
  if (sc.missing_rate < 0.0 || sc.missing_rate >= 1.0) {
    throw_config("missing_rate must lie in [0, 1)");
  }
  const FundamentalDiagram &fd = sc.diagram;
  const double kc = fd.critical_density();
  const std::size_t N = sc.n_nodes;
  const std::size_t ticks_per_day = 86400 / kTickSeconds;
  const std::size_t T = sc.days * ticks_per_day;
  const std::int64_t start = parse_iso8601(sc.start);

  std::mt19937_64 rng(sc.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticData out;
  out.cluster_of.resize(N);
  std::vector<std::size_t> position(N);
  std::vector<double> depth(N);
  const char *sensor_types[] = {"loop", "magnetometer", "radar"};
  for (std::size_t i = 0; i < N; ++i) {
    out.cluster_of[i] = i % sc.clusters;
    position[i] = i / sc.clusters;
    const double lat = 34.0 + static_cast<double>(out.cluster_of[i]) * sc.cluster_gap_miles / kMilesPerDegreeLat;
    const double miles_per_deg_lon = kMilesPerDegreeLat * std::cos(lat * std::numbers::pi / 180.0);
    SensorMeta m;
    char id[32];
    std::snprintf(id, sizeof(id), "S%03zu", i + 1);
    m.sensor_id = id;
    m.latitude = lat;
    m.longitude = -118.0 + static_cast<double>(position[i]) * sc.spacing_miles / miles_per_deg_lon;
    m.district = "D" + std::to_string(out.cluster_of[i] + 3);
    m.sensor_type = sensor_types[rng() % 3];
    m.lane_type = unit(rng) < 0.8 ? "mainline" : "hov";
    out.meta.push_back(std::move(m));
    depth[i] = 0.5 + 0.5 * unit(rng);
  }

  // Day-to-day severity per cluster, shared by its nodes.
  std::vector<double> day_factor(sc.days * sc.clusters);
  for (double &f : day_factor) f = 0.8 + 0.2 * unit(rng);

  std::vector<std::string> ids;
  for (const auto &m : out.meta) ids.push_back(m.sensor_id);
  out.panel = TimeSeriesPanel(start, T, ids, {"speed", "flow"});
  out.congested.assign(T * N, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t t = 0; t < T; ++t) {
    const std::int64_t ts = start + static_cast<std::int64_t>(t) * kTickSeconds;
    const std::size_t day = t / ticks_per_day;
    const double hour = static_cast<double>(t % ticks_per_day) * kTickSeconds / 3600.0;
    const bool weekend = weekend_day(ts);
    const double shape = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (hour - 4.0) / 24.0);
    const double base = kc * (0.2 + 0.65 * shape) * (weekend ? 0.7 : 1.0);
    for (std::size_t n = 0; n < N; ++n) {
      double density = base;
      if (!weekend || sc.weekend_congestion) {
        const double delay_h = static_cast<double>(position[n]) * sc.spacing_miles *
                               sc.lag_minutes_per_mile / 60.0;
        for (const auto &w : sc.congestion) {
          const double s = w.start_hour + delay_h, e = w.end_hour + delay_h;
          if (hour < s || hour >= e || e <= s) continue;
          const double phase = (hour - s) / (e - s);
          const double sev = w.severity * depth[n] * day_factor[day * sc.clusters + out.cluster_of[n]];
          const double onset = kc * 1.05;
          const double peak = kc + (0.6 * fd.jam_density - kc) * sev;
          density = std::max(density, onset + (std::max(peak, onset) - onset) * std::sin(std::numbers::pi * phase));
          out.congested[t * N + n] = 1;
        }
      }
      double speed = fd.speed(density) + sc.speed_noise * gauss(rng);
      double flow = fd.flow_per_tick(density) + sc.flow_noise * gauss(rng);
      out.panel.at(t, n, 0) = std::max(speed, 0.0);
      out.panel.at(t, n, 1) = std::max(flow, 0.0);
      if (sc.missing_rate > 0.0 && unit(rng) < sc.missing_rate) {
        out.panel.set_missing(t, n, 0, true);
        out.panel.set_missing(t, n, 1, true);
      }
    }
  }
  return out;
}

}  // namespace pgdcrnn
