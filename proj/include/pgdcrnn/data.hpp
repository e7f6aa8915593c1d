#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pgdcrnn/graph.hpp"
#include "pgdcrnn/tensor.hpp"

namespace pgdcrnn {

struct SubgraphBundle;

constexpr std::int64_t kTickSeconds = 300;

/// Seconds since 1970-01-01T00:00:00 for "YYYY-MM-DDTHH:MM:SS" (UTC, no
/// offset; a trailing 'Z' is accepted).
std::int64_t parse_iso8601(const std::string &text);
std::string format_iso8601(std::int64_t epoch_seconds);

/// [time x node x feature] values on a uniform 5-minute grid.
class TimeSeriesPanel {
 public:
  TimeSeriesPanel() = default;
  TimeSeriesPanel(std::int64_t start_epoch, std::size_t n_ticks,
                  std::vector<std::string> node_ids, std::vector<std::string> features);

  std::size_t n_ticks() const noexcept { return n_ticks_; }
  std::size_t n_nodes() const noexcept { return node_ids_.size(); }
  std::size_t n_features() const noexcept { return features_.size(); }
  std::int64_t start_epoch() const noexcept { return start_epoch_; }
  std::int64_t timestamp(std::size_t tick) const {
    return start_epoch_ + static_cast<std::int64_t>(tick) * kTickSeconds;
  }
  const std::vector<std::string> &node_ids() const noexcept { return node_ids_; }
  const std::vector<std::string> &features() const noexcept { return features_; }
  std::size_t feature_index(const std::string &name) const;
  std::size_t node_index(const std::string &id) const;

  double &at(std::size_t t, std::size_t n, std::size_t f) { return values_[offset(t, n, f)]; }
  double at(std::size_t t, std::size_t n, std::size_t f) const { return values_[offset(t, n, f)]; }
  bool missing(std::size_t t, std::size_t n, std::size_t f) const {
    return missing_[offset(t, n, f)] != 0;
  }
  void set_missing(std::size_t t, std::size_t n, std::size_t f, bool m) {
    missing_[offset(t, n, f)] = m ? 1 : 0;
  }
  std::size_t missing_count() const;

  std::vector<double> &values() noexcept { return values_; }
  const std::vector<double> &values() const noexcept { return values_; }
  const std::vector<std::uint8_t> &missing_mask() const noexcept { return missing_; }

  /// Ticks [begin, end).
  TimeSeriesPanel slice_ticks(std::size_t begin, std::size_t end) const;
  /// Columns for the given node indices, in that order.
  TimeSeriesPanel select_nodes(const std::vector<std::size_t> &nodes) const;

  friend bool operator==(const TimeSeriesPanel &, const TimeSeriesPanel &) = default;

 private:
  std::size_t offset(std::size_t t, std::size_t n, std::size_t f) const {
    return (t * node_ids_.size() + n) * features_.size() + f;
  }

  std::int64_t start_epoch_ = 0;
  std::size_t n_ticks_ = 0;
  std::vector<std::string> node_ids_;
  std::vector<std::string> features_;
  std::vector<double> values_;
  std::vector<std::uint8_t> missing_;
};

/// Long-format CSV `timestamp,sensor_id,speed,flow`; empty fields are
/// missing, absent (tick, sensor) rows are missing too. Node order follows
/// `node_order` when given, else ascending sensor id.
TimeSeriesPanel read_timeseries_csv(const std::string &path,
                                    const std::vector<std::string> &node_order = {});
void write_timeseries_csv(const std::string &path, const TimeSeriesPanel &panel);

void save_panel_binary(const std::string &path, const TimeSeriesPanel &panel);
TimeSeriesPanel load_panel_binary(const std::string &path);

enum class ImputeMethod { kTemporalMean, kTemporalMedian, kLinearInterpolation };
ImputeMethod impute_method_from_string(const std::string &s);
const char *to_string(ImputeMethod m);

/// Fills every missing entry. Temporal methods use the slot (node, feature,
/// time of day, weekday vs weekend) computed over ticks [0, pool_end);
/// pool_end = 0 means all ticks. Empty slots fall back to the node's
/// feature mean, then to the feature's global mean.
TimeSeriesPanel impute(const TimeSeriesPanel &panel, ImputeMethod method,
                       std::size_t pool_end = 0);

struct SplitFractions {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

struct PanelSplit {
  TimeSeriesPanel train, valid, test;
  std::size_t train_end = 0, valid_end = 0;
};

/// Chronological split with floor rounding for train and valid; test takes
/// the remainder. Every slice must hold at least `min_ticks` ticks.
PanelSplit split(const TimeSeriesPanel &panel, const SplitFractions &fractions,
                 std::size_t min_ticks);
std::pair<std::size_t, std::size_t> split_points(std::size_t n_ticks,
                                                 const SplitFractions &fractions);

/// Per-feature population mean and standard deviation.
struct FeatureScaler {
  std::vector<std::string> features;
  std::vector<double> mean;
  std::vector<double> stddev;

  double transform(double x, std::size_t feature) const {
    return (x - mean[feature]) / stddev[feature];
  }
  double inverse(double z, std::size_t feature) const {
    return z * stddev[feature] + mean[feature];
  }
  friend bool operator==(const FeatureScaler &, const FeatureScaler &) = default;
};

/// Fits on non-missing entries only.
FeatureScaler fit_scaler(const TimeSeriesPanel &train);
TimeSeriesPanel transform(const TimeSeriesPanel &panel, const FeatureScaler &scaler);
TimeSeriesPanel inverse_transform(const TimeSeriesPanel &panel, const FeatureScaler &scaler);
/// `values` has the feature axis last; feature_map[q] is the scaler feature
/// of column q.
Tensor inverse_transform(const Tensor &values, const FeatureScaler &scaler,
                         const std::vector<std::size_t> &feature_map);
Tensor transform(const Tensor &values, const FeatureScaler &scaler,
                 const std::vector<std::size_t> &feature_map);

/// Sliding windows: sample i reads ticks [s_i, s_i + T') as input and
/// [s_i + T', s_i + T' + T) as target.
struct WindowedDataset {
  TimeSeriesPanel panel;
  std::size_t look_back = 12;
  std::size_t horizon = 12;
  std::vector<std::size_t> starts;
  std::vector<std::size_t> input_features;
  std::vector<std::size_t> output_features;

  std::size_t size() const noexcept { return starts.size(); }
  std::size_t n_nodes() const noexcept { return panel.n_nodes(); }
  /// [T' x N x P]
  Tensor sample_input(std::size_t i) const;
  /// [T x N x Q]
  Tensor sample_target(std::size_t i) const;
  /// Frame t of the batch in node-major layout: [N * B x P] (inputs) or
  /// [N * B x Q] (targets), row = node * B + b.
  Tensor input_frame(const std::vector<std::size_t> &batch, std::size_t t) const;
  Tensor target_frame(const std::vector<std::size_t> &batch, std::size_t t) const;
};

/// Features default to all panel features for both input and output.
WindowedDataset make_windows(const TimeSeriesPanel &panel, std::size_t look_back,
                             std::size_t horizon, std::size_t stride = 1,
                             std::vector<std::size_t> input_features = {},
                             std::vector<std::size_t> output_features = {});
std::size_t window_count(std::size_t n_ticks, std::size_t look_back, std::size_t horizon,
                         std::size_t stride = 1);

void save_windows_binary(const std::string &path, const WindowedDataset &windows);
WindowedDataset load_windows_binary(const std::string &path);

/// Columns of the bundle's local nodes, in local order (halos included).
TimeSeriesPanel slice_for_partition(const TimeSeriesPanel &panel, const SubgraphBundle &bundle);

/// Triangular speed-density-flow relation. Density in vehicles per mile,
/// speeds in mph, flows in vehicles per 5 minutes.
struct FundamentalDiagram {
  double free_flow_speed = 65.0;
  double wave_speed = 12.0;
  double jam_density = 160.0;

  double critical_density() const {
    return wave_speed * jam_density / (free_flow_speed + wave_speed);
  }
  double hourly_flow(double density) const;
  double speed(double density) const;
  double flow_per_tick(double density) const { return hourly_flow(density) / 12.0; }
  /// Flow on the congested branch at the given speed (speed < free flow).
  double congested_flow_for_speed(double speed) const;
  double capacity_per_tick() const { return flow_per_tick(critical_density()); }
};

struct CongestionWindow {
  double start_hour = 7.0;
  double end_hour = 9.0;
  double severity = 1.0;  // 0..1
};

struct SyntheticScenario {
  std::size_t n_nodes = 24;
  std::size_t clusters = 2;
  std::size_t days = 14;
  std::string start = "2018-01-01T00:00:00";  // a Monday
  std::vector<CongestionWindow> congestion{{7.0, 9.0, 1.0}, {16.5, 18.5, 0.8}};
  bool weekend_congestion = false;
  double speed_noise = 1.0;  // mph, Gaussian sd
  double flow_noise = 3.0;   // vehicles per 5 min, Gaussian sd
  double spacing_miles = 0.5;
  double cluster_gap_miles = 30.0;
  /// Upstream propagation delay of congestion, minutes per mile.
  double lag_minutes_per_mile = 4.0;
  double missing_rate = 0.0;
  FundamentalDiagram diagram;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::vector<SensorMeta> meta;
  TimeSeriesPanel panel;  // features: speed, flow
  /// True where the tick lies inside a node's (lagged) congestion window.
  std::vector<std::uint8_t> congested;  // [time x node]
  /// Ground-truth cluster of each node.
  std::vector<std::size_t> cluster_of;
};

SyntheticData generate_synthetic(const SyntheticScenario &scenario);

}  // namespace pgdcrnn
