#include "pgdcrnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/training.hpp"

namespace pgdcrnn {

CovResult coefficient_of_variation(const TimeSeriesPanel &panel, const std::string &feature) {
  const std::size_t f = panel.feature_index(feature);
  CovResult r;
  for (std::size_t n = 0; n < panel.n_nodes(); ++n) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < panel.n_ticks(); ++t) {
      if (!panel.missing(t, n, f)) sum += panel.at(t, n, f), ++cnt;
    }
    const double mean = cnt ? sum / static_cast<double>(cnt) : 0.0;
    if (cnt == 0 || mean == 0.0) {
      r.cov.push_back(0.0);
      r.valid.push_back(false);
      r.errors.push_back(panel.node_ids()[n] + ": " + (cnt ? "zero mean" : "no observations"));
      continue;
    }
    double sq = 0.0;
    for (std::size_t t = 0; t < panel.n_ticks(); ++t) {
      if (!panel.missing(t, n, f)) sq += (panel.at(t, n, f) - mean) * (panel.at(t, n, f) - mean);
    }
    r.cov.push_back(std::sqrt(sq / static_cast<double>(cnt)) / mean);
    r.valid.push_back(true);
    r.errors.emplace_back();
  }
  return r;
}

int bin_mae(double mae) {
  if (mae < 1.0) return 0;
  if (mae < 3.0) return 1;
  if (mae < 5.0) return 2;
  return 3;
}

void write_error_records_csv(const std::string &path, const std::vector<ErrorRecord> &records) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "sensor_id,mae,mae_class,cov,district,sensor_type,lane_type\n";
  for (const auto &r : records) {
    out << r.node_id << ',' << csv::format_double(r.mae) << ',' << r.mae_class << ','
        << csv::format_double(r.cov) << ',' << r.district << ',' << r.sensor_type << ','
        << r.lane_type << '\n';
  }
}

bool fd_envelope_contains(const FundamentalDiagram &fd, double speed, double flow, double tol) {
  if (!(tol >= 0.0) || tol >= 1.0) throw_config("envelope tolerance must lie in [0, 1)");
  if (speed < 0.0 || flow < 0.0) return false;
  const double vf = fd.free_flow_speed;
  // Free-flow branch: speed vf, flow anywhere in (0, capacity].
  if (std::abs(speed - vf) <= tol * vf && flow <= (1.0 + tol) * fd.capacity_per_tick()) return true;
  // Congested branch parametrized by its speed u in (0, vf].
  const double u_lo = speed / (1.0 + tol);
  const double u_hi = std::min(vf, tol > 0.0 ? speed / (1.0 - tol) : speed);
  if (u_lo > u_hi || u_hi <= 0.0) return false;
  return flow >= (1.0 - tol) * fd.congested_flow_for_speed(u_lo) &&
         flow <= (1.0 + tol) * fd.congested_flow_for_speed(u_hi);
}

std::vector<FdRow> emit_fundamental_diagram(const Checkpoint &ckpt, const WindowedDataset &windows,
                                            const Tensor &predictions) {
  std::size_t q_speed = 0, q_flow = 0;
  bool has_speed = false, has_flow = false;
  for (std::size_t q = 0; q < ckpt.output_features.size(); ++q) {
    const std::string &name = ckpt.scaler.features.at(ckpt.output_features[q]);
    if (name == "speed") q_speed = q, has_speed = true;
    if (name == "flow") q_flow = q, has_flow = true;
  }
  if (!has_speed || !has_flow) throw_config("flow not forecast: checkpoint outputs one feature");
  const std::size_t S = windows.size(), T = ckpt.config.horizon, N = ckpt.node_ids.size(),
                    Q = ckpt.config.output_dim;
  if (predictions.shape() != Shape{S, T, N, Q}) throw_config("predictions do not match windows");
  std::vector<FdRow> rows;
  for (std::size_t n = 0; n < N; ++n) {
    if (n < ckpt.halo.size() && ckpt.halo[n]) continue;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t base = ((s * T + t) * N + n) * Q;
        rows.push_back({ckpt.node_ids[n], windows.panel.timestamp(windows.starts[s] + windows.look_back + t),
                        t + 1, predictions[base + q_speed], predictions[base + q_flow]});
      }
    }
  }
  return rows;
}

void write_fd_csv(const std::string &path, const std::vector<FdRow> &rows) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "sensor_id,timestamp,step,speed,flow\n";
  for (const auto &r : rows) {
    out << r.node_id << ',' << format_iso8601(r.timestamp) << ',' << r.step << ','
        << csv::format_double(r.speed) << ',' << csv::format_double(r.flow) << '\n';
  }
}

namespace {

double quantile_sorted(const std::vector<double> &v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

BoxStats mae_distribution_stats(std::vector<double> values) {
  if (values.empty()) throw_data("no values for distribution statistics");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.n = values.size();
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.lower_whisker = b.q1;
  b.upper_whisker = b.q3;
  for (double v : values) {
    if (v < lo || v > hi) {
      b.outliers.push_back(v);
    } else {
      b.lower_whisker = std::min(b.lower_whisker, v);
      b.upper_whisker = std::max(b.upper_whisker, v);
    }
  }
  return b;
}

void write_box_csv(const std::string &path, const std::vector<std::string> &labels,
                   const std::vector<BoxStats> &stats) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "label,n,min,q1,median,q3,max,lower_whisker,upper_whisker,outliers\n";
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const BoxStats &b = stats[i];
    out << labels.at(i) << ',' << b.n;
    for (double v : {b.min, b.q1, b.median, b.q3, b.max, b.lower_whisker, b.upper_whisker}) {
      out << ',' << csv::format_double(v);
    }
    out << ',';
    for (std::size_t k = 0; k < b.outliers.size(); ++k) {
      out << (k ? ";" : "") << csv::format_double(b.outliers[k]);
    }
    out << '\n';
  }
}

}  // namespace pgdcrnn
