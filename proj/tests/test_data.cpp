#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pgdcrnn/data.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/partition.hpp"
#include "support.hpp"

using namespace pgdcrnn;
using namespace testing_support;

namespace {

constexpr std::size_t kDay = 288;

/// One node, one feature, three weeks from a Monday: value = 50 + day + slot/100.
TimeSeriesPanel three_week_panel() {
  TimeSeriesPanel p(parse_iso8601("2018-01-01T00:00:00"), 21 * kDay, {"a"}, {"speed"});
  for (std::size_t t = 0; t < p.n_ticks(); ++t) {
    p.at(t, 0, 0) = 50.0 + static_cast<double>(t / kDay) + static_cast<double>(t % kDay) / 100.0;
  }
  return p;
}

}  // namespace

TEST_CASE("iso8601 parse and format") {
  CHECK(parse_iso8601("1970-01-01T00:00:00") == 0);
  CHECK(parse_iso8601("2018-01-01T00:05:00Z") == 1514764800 + 300);
  CHECK(parse_iso8601("2000-02-29T12:00:00") == 951825600);
  CHECK(format_iso8601(951825600) == "2000-02-29T12:00:00");
  CHECK(format_iso8601(parse_iso8601("1969-12-31T23:55:00")) == "1969-12-31T23:55:00");
  CHECK_THROWS_AS(parse_iso8601("2018-13-01T00:00:00"), Error);
  CHECK_THROWS_AS(parse_iso8601("yesterday"), Error);
}

TEST_CASE("timeseries csv round trip and validation") {
  TempDir dir("data");
  TimeSeriesPanel p(parse_iso8601("2018-01-01T00:00:00"), 4, {"a", "b"}, {"speed", "flow"});
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t n = 0; n < 2; ++n) {
      p.at(t, n, 0) = 60.0 + 0.1 * static_cast<double>(t) + static_cast<double>(n) / 3.0;
      p.at(t, n, 1) = 20.0 + static_cast<double>(t * n);
    }
  }
  p.at(2, 1, 0) = 0.0;
  p.set_missing(2, 1, 0, true);
  write_timeseries_csv(dir.file("ts.csv"), p);
  const TimeSeriesPanel back = read_timeseries_csv(dir.file("ts.csv"));
  CHECK(back == p);
  CHECK(back.missing_count() == 1);
  CHECK(read_timeseries_csv(dir.file("ts.csv"), {"b", "a"}).node_ids() == std::vector<std::string>{"b", "a"});

  std::ofstream(dir.file("gap.csv")) << "timestamp,sensor_id,speed,flow\n"
                                        "2018-01-01T00:00:00,a,60,10\n"
                                        "2018-01-01T00:15:00,a,61,\n";
  const TimeSeriesPanel gap = read_timeseries_csv(dir.file("gap.csv"));
  CHECK(gap.n_ticks() == 4);
  CHECK(gap.missing(1, 0, 0));
  CHECK(gap.missing(3, 0, 1));
  CHECK_FALSE(gap.missing(3, 0, 0));

  std::ofstream(dir.file("off.csv")) << "timestamp,sensor_id,speed,flow\n2018-01-01T00:01:00,a,60,10\n";
  CHECK_THROWS_AS(read_timeseries_csv(dir.file("off.csv")), Error);
  std::ofstream(dir.file("dup.csv")) << "timestamp,sensor_id,speed,flow\n"
                                        "2018-01-01T00:00:00,a,60,10\n2018-01-01T00:00:00,a,61,10\n";
  CHECK_THROWS_AS(read_timeseries_csv(dir.file("dup.csv")), Error);
  std::ofstream(dir.file("nocol.csv")) << "timestamp,sensor_id,speed\n2018-01-01T00:00:00,a,60\n";
  CHECK_THROWS_AS(read_timeseries_csv(dir.file("nocol.csv")), Error);
  std::ofstream(dir.file("bad.csv")) << "timestamp,sensor_id,speed,flow\n2018-01-01T00:00:00,a,fast,10\n";
  CHECK_THROWS_AS(read_timeseries_csv(dir.file("bad.csv")), Error);
  CHECK_THROWS_AS(read_timeseries_csv(dir.file("absent.csv")), Error);
}

TEST_CASE("binary panel and window round trip") {
  TempDir dir("bin");
  TimeSeriesPanel p = three_week_panel().slice_ticks(0, 50);
  p.set_missing(3, 0, 0, true);
  save_panel_binary(dir.file("p.bin"), p);
  CHECK(load_panel_binary(dir.file("p.bin")) == p);
  const WindowedDataset w = make_windows(p, 4, 3, 2);
  save_windows_binary(dir.file("w.bin"), w);
  const WindowedDataset back = load_windows_binary(dir.file("w.bin"));
  CHECK(back.panel == w.panel);
  CHECK(back.starts == w.starts);
  CHECK(back.look_back == 4);
  CHECK_THROWS_AS(load_panel_binary(dir.file("w.bin")), Error);
}

TEST_CASE("temporal mean and median match hand-computed slot statistics") {
  TimeSeriesPanel p = three_week_panel();
  // Wednesday of week two, slot 100.
  p.set_missing(9 * kDay + 100, 0, 0, true);
  // Sunday of week two, slot 7.
  p.set_missing(13 * kDay + 7, 0, 0, true);
  REQUIRE(p.missing_count() == 2);

  const TimeSeriesPanel mean = impute(p, ImputeMethod::kTemporalMean);
  CHECK(mean.missing_count() == 0);
  // Weekday days other than day 9: sum of day offsets 126 over 14 days.
  CHECK(mean.at(9 * kDay + 100, 0, 0) == doctest::Approx(50.0 + 9.0 + 1.0));
  // Weekend days 5, 6, 12, 19, 20: mean offset 12.4.
  CHECK(mean.at(13 * kDay + 7, 0, 0) == doctest::Approx(50.0 + 12.4 + 0.07));
  // Observed entries are untouched.
  CHECK(mean.at(5, 0, 0) == p.at(5, 0, 0));

  const TimeSeriesPanel med = impute(p, ImputeMethod::kTemporalMedian);
  CHECK(med.at(9 * kDay + 100, 0, 0) == doctest::Approx(50.0 + 9.0 + 1.0));
  CHECK(med.at(13 * kDay + 7, 0, 0) == doctest::Approx(50.0 + 12.0 + 0.07));

  // Pool limited to the first week: only days 0..4 feed the weekday slot.
  const TimeSeriesPanel pooled = impute(p, ImputeMethod::kTemporalMean, 7 * kDay);
  CHECK(pooled.at(9 * kDay + 100, 0, 0) == doctest::Approx(50.0 + 2.0 + 1.0));
}

TEST_CASE("impute fallbacks and linear interpolation") {
  TimeSeriesPanel p(parse_iso8601("2018-01-01T00:00:00"), 6, {"a", "b"}, {"speed"});
  const double va[] = {1, 2, 3, 4, 5, 6};
  for (std::size_t t = 0; t < 6; ++t) {
    p.at(t, 0, 0) = va[t];
    p.at(t, 1, 0) = 10.0;
    p.set_missing(t, 1, 0, true);
  }
  p.set_missing(0, 0, 0, true);
  p.set_missing(2, 0, 0, true);
  p.set_missing(3, 0, 0, true);
  p.set_missing(5, 0, 0, true);
  // Node b has no observations: feature mean of node a's observed 2 and 5.
  const TimeSeriesPanel m = impute(p, ImputeMethod::kTemporalMean);
  CHECK(m.at(0, 1, 0) == doctest::Approx(3.5));
  CHECK(m.at(2, 0, 0) == doctest::Approx(3.5));  // empty slot, node mean
  const TimeSeriesPanel li = impute(p, ImputeMethod::kLinearInterpolation);
  CHECK(li.at(0, 0, 0) == 2.0);
  CHECK(li.at(2, 0, 0) == doctest::Approx(3.0));
  CHECK(li.at(3, 0, 0) == doctest::Approx(4.0));
  CHECK(li.at(5, 0, 0) == 5.0);
  CHECK(li.at(3, 1, 0) == doctest::Approx(3.5));
  CHECK(li.missing_count() == 0);

  TimeSeriesPanel empty(0, 2, {"a"}, {"speed"});
  empty.set_missing(0, 0, 0, true);
  empty.set_missing(1, 0, 0, true);
  CHECK_THROWS_AS(impute(empty, ImputeMethod::kTemporalMean), Error);
  CHECK_THROWS_AS(impute_method_from_string("zero"), Error);
}

TEST_CASE("chronological split") {
  const auto [a, b] = split_points(100, {});
  CHECK(a == 70);
  CHECK(b == 80);
  const TimeSeriesPanel p = three_week_panel().slice_ticks(0, 101);
  const PanelSplit s = split(p, {}, 5);
  CHECK(s.train.n_ticks() == 70);
  CHECK(s.valid.n_ticks() == 10);
  CHECK(s.test.n_ticks() == 21);
  CHECK(s.test.start_epoch() == p.timestamp(80));
  CHECK_THROWS_AS(split(p, {}, 15), Error);
  CHECK_THROWS_AS(split_points(100, {0.5, 0.1, 0.1}), Error);
}

TEST_CASE("scaler round trip and degenerate features") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(40.0, 12.0);
  TimeSeriesPanel p(0, 50, {"a", "b", "c"}, {"speed", "flow"});
  for (double &v : p.values()) v = g(rng);
  p.set_missing(1, 1, 1, true);
  p.at(1, 1, 1) = 1e9;  // ignored by the fit
  const FeatureScaler s = fit_scaler(p);
  const TimeSeriesPanel z = transform(p, s);
  double sum = 0.0;
  for (std::size_t t = 0; t < 50; ++t) {
    for (std::size_t n = 0; n < 3; ++n) sum += z.at(t, n, 0);
  }
  CHECK(std::abs(sum) < 1e-9);
  const TimeSeriesPanel back = inverse_transform(z, s);
  for (std::size_t i = 0; i < p.values().size(); ++i) {
    if (!p.missing_mask()[i]) CHECK(std::abs(back.values()[i] - p.values()[i]) <= 1e-9);
  }
  Tensor x({2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const Tensor rt = inverse_transform(transform(x, s, {1, 0}), s, {1, 0});
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(rt[i] - x[i]) <= 1e-12);

  TimeSeriesPanel flat(0, 5, {"a"}, {"speed"});
  for (double &v : flat.values()) v = 3.0;
  try {
    fit_scaler(flat);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
  }
}

TEST_CASE("window counts and frame layout") {
  for (std::size_t total : {24u, 25u, 100u, 301u}) {
    for (std::size_t stride : {1u, 3u}) {
      const std::size_t closed = total >= 24 ? (total - 24) / stride + 1 : 0;
      CHECK(window_count(total, 12, 12, stride) == closed);
    }
  }
  CHECK(window_count(23, 12, 12) == 0);
  TimeSeriesPanel p(0, 10, {"a", "b"}, {"speed", "flow"});
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t n = 0; n < 2; ++n) {
      p.at(t, n, 0) = static_cast<double>(100 * t + n);
      p.at(t, n, 1) = -static_cast<double>(100 * t + n);
    }
  }
  const WindowedDataset w = make_windows(p, 3, 2, 1, {0, 1}, {1});
  CHECK(w.size() == 10 - 5 + 1);
  const Tensor in = w.sample_input(2);
  CHECK(in.shape() == Shape{3, 2, 2});
  CHECK(in[0] == 200.0);
  const Tensor tg = w.sample_target(2);
  CHECK(tg.shape() == Shape{2, 2, 1});
  CHECK(tg[1] == -501.0);
  const Tensor frame = w.input_frame({0, 4}, 1);  // rows node * B + b
  CHECK(frame.shape() == Shape{4, 2});
  CHECK(frame.at(0, 0) == 100.0);
  CHECK(frame.at(1, 0) == 500.0);
  CHECK(frame.at(2, 0) == 101.0);
  CHECK(frame.at(3, 1) == -501.0);
  CHECK(w.target_frame({1}, 0).at(1, 0) == -401.0);
  CHECK_THROWS_AS(make_windows(p, 0, 2), Error);
}

TEST_CASE("partition slicing uses local order") {
  TimeSeriesPanel p(0, 3, {"s0", "s1", "s2"}, {"speed"});
  for (std::size_t n = 0; n < 3; ++n) p.at(0, n, 0) = static_cast<double>(n);
  const SensorGraph g = graph_from_weights(placeholder_meta(3), SparseMatrix(3, 3));
  const auto bundles = extract_subgraphs(g, {{1, 0, 1}, 2}, {{0}, {}});
  const TimeSeriesPanel s = slice_for_partition(p, bundles[0]);
  CHECK(s.node_ids() == std::vector<std::string>{"s0", "s1"});
  const TimeSeriesPanel s1 = slice_for_partition(p, bundles[1]);
  CHECK(s1.node_ids() == std::vector<std::string>{"s0", "s2"});
  CHECK(s1.at(0, 1, 0) == 2.0);
}

TEST_CASE("synthetic generator follows the fundamental diagram") {
  SyntheticScenario sc;
  sc.days = 2;
  sc.speed_noise = 0.0;
  sc.flow_noise = 0.0;
  const SyntheticData d = generate_synthetic(sc);
  CHECK(d.meta.size() == 24);
  CHECK(d.panel.n_ticks() == 2 * kDay);
  const FundamentalDiagram &fd = sc.diagram;
  std::size_t congested = 0;
  for (std::size_t t = 0; t < d.panel.n_ticks(); ++t) {
    for (std::size_t n = 0; n < 24; ++n) {
      const double v = d.panel.at(t, n, 0), q = d.panel.at(t, n, 1);
      if (d.congested[t * 24 + n]) {
        ++congested;
        CHECK(v < fd.free_flow_speed);
        CHECK(q == doctest::Approx(fd.congested_flow_for_speed(v)));
      } else {
        CHECK(v == fd.free_flow_speed);
        CHECK(q <= fd.capacity_per_tick() + 1e-9);
      }
    }
  }
  CHECK(congested > 0);
  CHECK(generate_synthetic(sc).panel == d.panel);
  CHECK(fd.critical_density() == doctest::Approx(12.0 * 160.0 / 77.0));
  CHECK(fd.speed(fd.critical_density()) == doctest::Approx(65.0));
  CHECK(fd.speed(160.0) == doctest::Approx(0.0).epsilon(1e-12));
}
