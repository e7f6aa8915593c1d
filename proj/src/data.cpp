#include "pgdcrnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/partition.hpp"

namespace pgdcrnn {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t &y, unsigned &m, unsigned &d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

bool is_weekend(std::int64_t epoch) {
  const std::int64_t days = floor_div(epoch, 86400);
  const std::int64_t weekday = ((days + 4) % 7 + 7) % 7;  // 0 = Sunday
  return weekday == 0 || weekday == 6;
}

std::size_t tick_of_day(std::int64_t epoch) {
  const std::int64_t sec = epoch - floor_div(epoch, 86400) * 86400;
  return static_cast<std::size_t>(sec / kTickSeconds);
}

}  // namespace

std::int64_t parse_iso8601(const std::string &text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  const int got = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  if (got < 6 || (got == 7 && tail != 'Z') || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 ||
      mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
    throw_data("bad ISO-8601 timestamp '" + text + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
         h * 3600 + mi * 60 + s;
}

std::string format_iso8601(std::int64_t epoch) {
  const std::int64_t days = floor_div(epoch, 86400);
  const std::int64_t sec = epoch - days * 86400;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d, static_cast<long long>(sec / 3600),
                static_cast<long long>((sec / 60) % 60), static_cast<long long>(sec % 60));
  return buf;
}

TimeSeriesPanel::TimeSeriesPanel(std::int64_t start_epoch, std::size_t n_ticks,
                                 std::vector<std::string> node_ids,
                                 std::vector<std::string> features)
    : start_epoch_(start_epoch),
      n_ticks_(n_ticks),
      node_ids_(std::move(node_ids)),
      features_(std::move(features)),
      values_(n_ticks_ * node_ids_.size() * features_.size(), 0.0),
      missing_(values_.size(), 0) {}

std::size_t TimeSeriesPanel::feature_index(const std::string &name) const {
  for (std::size_t f = 0; f < features_.size(); ++f) {
    if (features_[f] == name) return f;
  }
  throw_data("panel has no feature '" + name + "'");
}

std::size_t TimeSeriesPanel::node_index(const std::string &id) const {
  for (std::size_t n = 0; n < node_ids_.size(); ++n) {
    if (node_ids_[n] == id) return n;
  }
  throw_data("panel has no sensor '" + id + "'");
}

std::size_t TimeSeriesPanel::missing_count() const {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 1));
}

TimeSeriesPanel TimeSeriesPanel::slice_ticks(std::size_t begin, std::size_t end) const {
  if (begin > end || end > n_ticks_) throw_config("slice_ticks: bad range");
  TimeSeriesPanel out(timestamp(begin), end - begin, node_ids_, features_);
  const std::size_t stride = node_ids_.size() * features_.size();
  std::copy(values_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
            values_.begin() + static_cast<std::ptrdiff_t>(end * stride), out.values_.begin());
  std::copy(missing_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
            missing_.begin() + static_cast<std::ptrdiff_t>(end * stride), out.missing_.begin());
  return out;
}

TimeSeriesPanel TimeSeriesPanel::select_nodes(const std::vector<std::size_t> &nodes) const {
  std::vector<std::string> ids;
  for (std::size_t n : nodes) ids.push_back(node_ids_.at(n));
  TimeSeriesPanel out(start_epoch_, n_ticks_, std::move(ids), features_);
  for (std::size_t t = 0; t < n_ticks_; ++t) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t f = 0; f < features_.size(); ++f) {
        out.at(t, i, f) = at(t, nodes[i], f);
        out.set_missing(t, i, f, missing(t, nodes[i], f));
      }
    }
  }
  return out;
}

TimeSeriesPanel read_timeseries_csv(const std::string &path,
                                    const std::vector<std::string> &node_order) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c_ts = t.column("timestamp");
  const std::size_t c_id = t.column("sensor_id");
  const std::size_t c_speed = t.column("speed");
  const std::size_t c_flow = t.column("flow");
  if (t.rows.empty()) throw_data(path + ": no rows");
  std::vector<std::int64_t> stamps;
  std::int64_t lo = 0, hi = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::int64_t s = parse_iso8601(t.rows[r][c_ts]);
    if (s % kTickSeconds != 0) {
      throw_data(path + ":" + std::to_string(t.lines[r]) + ": timestamp not on the 5-minute grid");
    }
    stamps.push_back(s);
    lo = r == 0 ? s : std::min(lo, s);
    hi = r == 0 ? s : std::max(hi, s);
  }
  std::vector<std::string> ids = node_order;
  if (ids.empty()) {
    for (const auto &row : t.rows) ids.push_back(row[c_id]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < ids.size(); ++i) lookup.emplace(ids[i], i);
  const auto n_ticks = static_cast<std::size_t>((hi - lo) / kTickSeconds + 1);
  TimeSeriesPanel panel(lo, n_ticks, ids, {"speed", "flow"});
  std::vector<std::uint8_t> seen(n_ticks * ids.size(), 0);
  std::fill(seen.begin(), seen.end(), 0);
  for (std::size_t tick = 0; tick < n_ticks; ++tick) {
    for (std::size_t n = 0; n < ids.size(); ++n) {
      panel.set_missing(tick, n, 0, true);
      panel.set_missing(tick, n, 1, true);
    }
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.lines[r]);
    auto it = lookup.find(row[c_id]);
    if (it == lookup.end()) {
      if (!node_order.empty()) continue;  // sensors outside the graph
      throw_data(where + ": unknown sensor");
    }
    const auto tick = static_cast<std::size_t>((stamps[r] - lo) / kTickSeconds);
    auto &flag = seen[tick * ids.size() + it->second];
    if (flag) throw_data(where + ": duplicate (timestamp, sensor_id)");
    flag = 1;
    const std::size_t cols[2] = {c_speed, c_flow};
    for (std::size_t f = 0; f < 2; ++f) {
      const std::string &cell = row[cols[f]];
      if (cell.empty()) continue;
      const double v = csv::parse_double(cell, where + " " + panel.features()[f]);
      if (!std::isfinite(v)) continue;
      panel.at(tick, it->second, f) = v;
      panel.set_missing(tick, it->second, f, false);
    }
  }
  return panel;
}

void write_timeseries_csv(const std::string &path, const TimeSeriesPanel &panel) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  const std::size_t f_speed = panel.feature_index("speed");
  const std::size_t f_flow = panel.feature_index("flow");
  out << "timestamp,sensor_id,speed,flow\n";
  for (std::size_t t = 0; t < panel.n_ticks(); ++t) {
    const std::string ts = format_iso8601(panel.timestamp(t));
    for (std::size_t n = 0; n < panel.n_nodes(); ++n) {
      out << ts << ',' << panel.node_ids()[n] << ',';
      if (!panel.missing(t, n, f_speed)) out << csv::format_double(panel.at(t, n, f_speed));
      out << ',';
      if (!panel.missing(t, n, f_flow)) out << csv::format_double(panel.at(t, n, f_flow));
      out << '\n';
    }
  }
}

namespace {

constexpr char kPanelMagic[8] = {'P', 'G', 'D', 'P', 'A', 'N', 'L', '1'};
constexpr char kWindowMagic[8] = {'P', 'G', 'D', 'W', 'I', 'N', 'D', '1'};

template <typename T>
void put(std::ostream &out, const T &v) {
  out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &in) {
  T v{};
  in.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!in) throw_data("truncated binary file");
  return v;
}

void put_string(std::ostream &out, const std::string &s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream &in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1u << 20)) throw_data("corrupt string length in binary file");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw_data("truncated binary file");
  return s;
}

void write_panel(std::ostream &out, const TimeSeriesPanel &panel) {
  put<std::int64_t>(out, panel.start_epoch());
  put<std::uint64_t>(out, panel.n_ticks());
  put<std::uint64_t>(out, panel.n_nodes());
  put<std::uint64_t>(out, panel.n_features());
  for (const auto &id : panel.node_ids()) put_string(out, id);
  for (const auto &f : panel.features()) put_string(out, f);
  out.write(reinterpret_cast<const char *>(panel.values().data()),
            static_cast<std::streamsize>(panel.values().size() * sizeof(double)));
  out.write(reinterpret_cast<const char *>(panel.missing_mask().data()),
            static_cast<std::streamsize>(panel.missing_mask().size()));
}

TimeSeriesPanel read_panel(std::istream &in) {
  const auto start = get<std::int64_t>(in);
  const auto ticks = get<std::uint64_t>(in);
  const auto nodes = get<std::uint64_t>(in);
  const auto feats = get<std::uint64_t>(in);
  std::vector<std::string> ids, features;
  for (std::uint64_t i = 0; i < nodes; ++i) ids.push_back(get_string(in));
  for (std::uint64_t i = 0; i < feats; ++i) features.push_back(get_string(in));
  TimeSeriesPanel panel(start, ticks, std::move(ids), std::move(features));
  in.read(reinterpret_cast<char *>(panel.values().data()),
          static_cast<std::streamsize>(panel.values().size() * sizeof(double)));
  std::vector<std::uint8_t> mask(panel.values().size());
  in.read(reinterpret_cast<char *>(mask.data()), static_cast<std::streamsize>(mask.size()));
  if (!in) throw_data("truncated panel payload");
  std::size_t i = 0;
  for (std::size_t t = 0; t < ticks; ++t) {
    for (std::size_t n = 0; n < nodes; ++n) {
      for (std::size_t f = 0; f < feats; ++f) panel.set_missing(t, n, f, mask[i++] != 0);
    }
  }
  return panel;
}

}  // namespace

void save_panel_binary(const std::string &path, const TimeSeriesPanel &panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path + "'");
  out.write(kPanelMagic, sizeof(kPanelMagic));
  write_panel(out, panel);
}

TimeSeriesPanel load_panel_binary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPanelMagic, sizeof(magic)) != 0) {
    throw_data(path + ": not a panel file");
  }
  return read_panel(in);
}

void save_windows_binary(const std::string &path, const WindowedDataset &w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path + "'");
  out.write(kWindowMagic, sizeof(kWindowMagic));
  put<std::uint64_t>(out, w.look_back);
  put<std::uint64_t>(out, w.horizon);
  for (const auto *list : {&w.starts, &w.input_features, &w.output_features}) {
    put<std::uint64_t>(out, list->size());
    for (std::size_t v : *list) put<std::uint64_t>(out, v);
  }
  write_panel(out, w.panel);
}

WindowedDataset load_windows_binary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kWindowMagic, sizeof(magic)) != 0) {
    throw_data(path + ": not a windowed dataset file");
  }
  WindowedDataset w;
  w.look_back = get<std::uint64_t>(in);
  w.horizon = get<std::uint64_t>(in);
  for (auto *list : {&w.starts, &w.input_features, &w.output_features}) {
    const auto n = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n; ++i) list->push_back(get<std::uint64_t>(in));
  }
  w.panel = read_panel(in);
  return w;
}

ImputeMethod impute_method_from_string(const std::string &s) {
  if (s == "temporal_mean") return ImputeMethod::kTemporalMean;
  if (s == "temporal_median") return ImputeMethod::kTemporalMedian;
  if (s == "linear_interpolation") return ImputeMethod::kLinearInterpolation;
  throw_config("unknown imputation method '" + s + "'");
}

const char *to_string(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::kTemporalMean: return "temporal_mean";
    case ImputeMethod::kTemporalMedian: return "temporal_median";
    case ImputeMethod::kLinearInterpolation: return "linear_interpolation";
  }
  return "?";
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TimeSeriesPanel impute(const TimeSeriesPanel &panel, ImputeMethod method, std::size_t pool_end) {
  const std::size_t T = panel.n_ticks(), N = panel.n_nodes(), F = panel.n_features();
  if (pool_end == 0 || pool_end > T) pool_end = T;
  TimeSeriesPanel out = panel;

  // Fallback statistics over the pool.
  std::vector<double> node_sum(N * F, 0.0), feat_sum(F, 0.0);
  std::vector<std::size_t> node_cnt(N * F, 0), feat_cnt(F, 0);
  for (std::size_t t = 0; t < pool_end; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        if (panel.missing(t, n, f)) continue;
        node_sum[n * F + f] += panel.at(t, n, f);
        ++node_cnt[n * F + f];
        feat_sum[f] += panel.at(t, n, f);
        ++feat_cnt[f];
      }
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    if (feat_cnt[f] == 0) {
      bool any_missing = false;
      for (std::size_t t = 0; t < T && !any_missing; ++t) {
        for (std::size_t n = 0; n < N; ++n) any_missing = any_missing || panel.missing(t, n, f);
      }
      if (any_missing || pool_end == 0) throw_data("feature entirely missing: " + panel.features()[f]);
    }
  }
  auto fallback = [&](std::size_t n, std::size_t f) {
    if (node_cnt[n * F + f]) return node_sum[n * F + f] / static_cast<double>(node_cnt[n * F + f]);
    return feat_sum[f] / static_cast<double>(feat_cnt[f]);
  };

  if (method == ImputeMethod::kLinearInterpolation) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        std::ptrdiff_t prev = -1;
        for (std::size_t t = 0; t <= T; ++t) {
          if (t < T && panel.missing(t, n, f)) continue;
          // Fill the gap (prev, t).
          for (std::size_t g = static_cast<std::size_t>(prev + 1); g < t; ++g) {
            double v;
            if (prev < 0 && t == T) {
              v = fallback(n, f);
            } else if (prev < 0) {
              v = panel.at(t, n, f);
            } else if (t == T) {
              v = panel.at(static_cast<std::size_t>(prev), n, f);
            } else {
              const double a = panel.at(static_cast<std::size_t>(prev), n, f);
              const double b = panel.at(t, n, f);
              const double frac = static_cast<double>(g - static_cast<std::size_t>(prev)) /
                                  static_cast<double>(t - static_cast<std::size_t>(prev));
              v = a + (b - a) * frac;
            }
            out.at(g, n, f) = v;
            out.set_missing(g, n, f, false);
          }
          prev = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    return out;
  }

  // Slots: (time of day, weekend flag) per node and feature.
  constexpr std::size_t kSlotsPerDay = 86400 / kTickSeconds;
  std::map<std::size_t, std::vector<double>> slots;
  auto slot_key = [&](std::size_t t, std::size_t n, std::size_t f) {
    const std::int64_t ts = panel.timestamp(t);
    const std::size_t day_slot = tick_of_day(ts) + (is_weekend(ts) ? kSlotsPerDay : 0);
    return (n * F + f) * 2 * kSlotsPerDay + day_slot;
  };
  for (std::size_t t = 0; t < pool_end; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        if (!panel.missing(t, n, f)) slots[slot_key(t, n, f)].push_back(panel.at(t, n, f));
      }
    }
  }
  std::map<std::size_t, double> slot_value;
  for (auto &[key, vals] : slots) {
    if (method == ImputeMethod::kTemporalMedian) {
      slot_value[key] = median_of(vals);
    } else {
      double s = 0.0;
      for (double v : vals) s += v;
      slot_value[key] = s / static_cast<double>(vals.size());
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) {
        if (!panel.missing(t, n, f)) continue;
        auto it = slot_value.find(slot_key(t, n, f));
        out.at(t, n, f) = it != slot_value.end() ? it->second : fallback(n, f);
        out.set_missing(t, n, f, false);
      }
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> split_points(std::size_t n_ticks,
                                                 const SplitFractions &fr) {
  if (fr.train < 0 || fr.valid < 0 || fr.test < 0 ||
      std::abs(fr.train + fr.valid + fr.test - 1.0) > 1e-9) {
    throw_config("split fractions must be nonnegative and sum to 1");
  }
  const double n = static_cast<double>(n_ticks);
  const auto train = static_cast<std::size_t>(std::floor(n * fr.train + 1e-9));
  const auto valid = static_cast<std::size_t>(std::floor(n * fr.valid + 1e-9));
  return {train, train + valid};
}

PanelSplit split(const TimeSeriesPanel &panel, const SplitFractions &fractions,
                 std::size_t min_ticks) {
  const auto [train_end, valid_end] = split_points(panel.n_ticks(), fractions);
  const std::size_t lens[3] = {train_end, valid_end - train_end, panel.n_ticks() - valid_end};
  const char *names[3] = {"train", "valid", "test"};
  for (int i = 0; i < 3; ++i) {
    if (lens[i] < min_ticks) {
      throw_data(std::string(names[i]) + " slice has " + std::to_string(lens[i]) +
                 " ticks, fewer than the window length " + std::to_string(min_ticks));
    }
  }
  PanelSplit s;
  s.train = panel.slice_ticks(0, train_end);
  s.valid = panel.slice_ticks(train_end, valid_end);
  s.test = panel.slice_ticks(valid_end, panel.n_ticks());
  s.train_end = train_end;
  s.valid_end = valid_end;
  return s;
}

FeatureScaler fit_scaler(const TimeSeriesPanel &train) {
  FeatureScaler s;
  s.features = train.features();
  const std::size_t F = train.n_features();
  for (std::size_t f = 0; f < F; ++f) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < train.n_ticks(); ++t) {
      for (std::size_t n = 0; n < train.n_nodes(); ++n) {
        if (!train.missing(t, n, f)) sum += train.at(t, n, f), ++cnt;
      }
    }
    if (cnt == 0) throw_data("feature entirely missing: " + train.features()[f]);
    const double mean = sum / static_cast<double>(cnt);
    double sq = 0.0;
    for (std::size_t t = 0; t < train.n_ticks(); ++t) {
      for (std::size_t n = 0; n < train.n_nodes(); ++n) {
        if (!train.missing(t, n, f)) sq += (train.at(t, n, f) - mean) * (train.at(t, n, f) - mean);
      }
    }
    const double sd = std::sqrt(sq / static_cast<double>(cnt));
    if (!(sd > 0.0)) throw_numerical("degenerate feature scale: " + train.features()[f]);
    s.mean.push_back(mean);
    s.stddev.push_back(sd);
  }
  return s;
}

namespace {

TimeSeriesPanel map_panel(const TimeSeriesPanel &panel, const FeatureScaler &scaler, bool inverse) {
  if (scaler.features != panel.features()) throw_config("scaler features do not match the panel");
  TimeSeriesPanel out = panel;
  const std::size_t F = panel.n_features();
  auto &v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t f = i % F;
    v[i] = inverse ? scaler.inverse(v[i], f) : scaler.transform(v[i], f);
  }
  return out;
}

}  // namespace

TimeSeriesPanel transform(const TimeSeriesPanel &panel, const FeatureScaler &scaler) {
  return map_panel(panel, scaler, false);
}

TimeSeriesPanel inverse_transform(const TimeSeriesPanel &panel, const FeatureScaler &scaler) {
  return map_panel(panel, scaler, true);
}

Tensor inverse_transform(const Tensor &values, const FeatureScaler &scaler,
                         const std::vector<std::size_t> &feature_map) {
  const std::size_t q = feature_map.size();
  if (q == 0 || values.size() % q != 0) throw_config("inverse_transform: feature axis mismatch");
  Tensor out = values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scaler.inverse(out[i], feature_map[i % q]);
  return out;
}

Tensor transform(const Tensor &values, const FeatureScaler &scaler,
                 const std::vector<std::size_t> &feature_map) {
  const std::size_t q = feature_map.size();
  if (q == 0 || values.size() % q != 0) throw_config("transform: feature axis mismatch");
  Tensor out = values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scaler.transform(out[i], feature_map[i % q]);
  return out;
}

std::size_t window_count(std::size_t n_ticks, std::size_t look_back, std::size_t horizon,
                         std::size_t stride) {
  if (stride == 0) throw_config("stride must be >= 1");
  if (n_ticks < look_back + horizon) return 0;
  return (n_ticks - (look_back + horizon)) / stride + 1;
}

WindowedDataset make_windows(const TimeSeriesPanel &panel, std::size_t look_back,
                             std::size_t horizon, std::size_t stride,
                             std::vector<std::size_t> input_features,
                             std::vector<std::size_t> output_features) {
  if (look_back < 1 || horizon < 1) throw_config("look_back and horizon must be >= 1");
  if (panel.n_ticks() < look_back + horizon) {
    throw_data("panel of " + std::to_string(panel.n_ticks()) + " ticks is shorter than a window (" +
               std::to_string(look_back + horizon) + ")");
  }
  WindowedDataset w;
  w.panel = panel;
  w.look_back = look_back;
  w.horizon = horizon;
  const std::size_t count = window_count(panel.n_ticks(), look_back, horizon, stride);
  for (std::size_t i = 0; i < count; ++i) w.starts.push_back(i * stride);
  if (input_features.empty()) {
    for (std::size_t f = 0; f < panel.n_features(); ++f) input_features.push_back(f);
  }
  if (output_features.empty()) output_features = input_features;
  for (std::size_t f : input_features) {
    if (f >= panel.n_features()) throw_config("input feature out of range");
  }
  for (std::size_t f : output_features) {
    if (f >= panel.n_features()) throw_config("output feature out of range");
  }
  w.input_features = std::move(input_features);
  w.output_features = std::move(output_features);
  return w;
}

Tensor WindowedDataset::sample_input(std::size_t i) const {
  const std::size_t N = n_nodes(), P = input_features.size();
  Tensor x({look_back, N, P});
  for (std::size_t t = 0; t < look_back; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t p = 0; p < P; ++p) {
        x[(t * N + n) * P + p] = panel.at(starts.at(i) + t, n, input_features[p]);
      }
    }
  }
  return x;
}

Tensor WindowedDataset::sample_target(std::size_t i) const {
  const std::size_t N = n_nodes(), Q = output_features.size();
  Tensor y({horizon, N, Q});
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t q = 0; q < Q; ++q) {
        y[(t * N + n) * Q + q] = panel.at(starts.at(i) + look_back + t, n, output_features[q]);
      }
    }
  }
  return y;
}

namespace {

Tensor batch_frame(const TimeSeriesPanel &panel, const std::vector<std::size_t> &starts,
                   const std::vector<std::size_t> &batch, std::size_t offset,
                   const std::vector<std::size_t> &features) {
  const std::size_t N = panel.n_nodes(), B = batch.size(), C = features.size();
  Tensor frame({N * B, C});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t tick = starts.at(batch[b]) + offset;
      for (std::size_t c = 0; c < C; ++c) frame[(n * B + b) * C + c] = panel.at(tick, n, features[c]);
    }
  }
  return frame;
}

}  // namespace

Tensor WindowedDataset::input_frame(const std::vector<std::size_t> &batch, std::size_t t) const {
  return batch_frame(panel, starts, batch, t, input_features);
}

Tensor WindowedDataset::target_frame(const std::vector<std::size_t> &batch, std::size_t t) const {
  return batch_frame(panel, starts, batch, look_back + t, output_features);
}

TimeSeriesPanel slice_for_partition(const TimeSeriesPanel &panel, const SubgraphBundle &bundle) {
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t n = 0; n < panel.n_nodes(); ++n) lookup.emplace(panel.node_ids()[n], n);
  std::vector<std::size_t> cols;
  for (const auto &m : bundle.graph.nodes) {
    auto it = lookup.find(m.sensor_id);
    if (it == lookup.end()) throw_data("panel has no column for sensor '" + m.sensor_id + "'");
    cols.push_back(it->second);
  }
  return panel.select_nodes(cols);
}

}  // namespace pgdcrnn
