#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/graph.hpp"
#include "support.hpp"

using namespace pgdcrnn;
using namespace testing_support;

namespace {

std::vector<SensorMeta> random_meta(std::size_t n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> lat(33.9, 34.1), lon(-118.2, -117.9);
  std::vector<SensorMeta> out = placeholder_meta(n);
  for (auto &m : out) {
    m.latitude = lat(rng);
    m.longitude = lon(rng);
  }
  return out;
}

}  // namespace

TEST_CASE("haversine against known distances") {
  CHECK(haversine_miles(34.0, -118.0, 34.0, -118.0) == 0.0);
  // One degree of latitude on a 3958.8 mile sphere.
  CHECK(haversine_miles(34.0, -118.0, 35.0, -118.0) == doctest::Approx(69.0934).epsilon(1e-4));
  // Los Angeles to San Francisco, about 347 miles great-circle.
  CHECK(haversine_miles(34.0522, -118.2437, 37.7749, -122.4194) == doctest::Approx(347.4).epsilon(3e-3));
  CHECK(haversine_miles(34.0, -118.0, 34.1, -118.2) == haversine_miles(34.1, -118.2, 34.0, -118.0));
}

TEST_CASE("gaussian kernel") {
  CHECK(gaussian_kernel(0.0, 2.0) == 1.0);
  CHECK(gaussian_kernel(2.0, 2.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("knn candidates match brute force") {
  std::mt19937_64 rng(21);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + trial * 2;
    const auto meta = random_meta(n, rng);
    const std::size_t k = 1 + trial % 4;
    const auto got = knn_candidates(meta, k);
    std::set<NodePair> want;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) d.push_back({haversine_miles(meta[i].latitude, meta[i].longitude, meta[j].latitude, meta[j].longitude), j});
      }
      std::sort(d.begin(), d.end());
      for (std::size_t q = 0; q < std::min(k, n - 1); ++q) want.insert({i, d[q].second});
    }
    CHECK(got == want);
  }
}

TEST_CASE("adjacency: auto sigma, threshold and directed weights") {
  const auto meta = meta_along_meridian({0.0, 1.0, 2.0, 10.0});
  TableDistance table(4);
  table.set(0, 1, 1.0);
  table.set(1, 0, 3.0);
  table.set(1, 2, 2.0);
  table.set(2, 3, 8.0);
  const std::set<NodePair> pairs{{0, 1}, {1, 0}, {1, 2}, {2, 3}};
  KernelConfig cfg;
  cfg.threshold = 16.0;  // keep d <= 4 miles
  const SensorGraph g = build_adjacency(meta, pairs, table, cfg);
  // Population sd of {1, 3, 2, 8}.
  const double mean = 14.0 / 4.0;
  const double sd = std::sqrt(((1 - mean) * (1 - mean) + (3 - mean) * (3 - mean) + (2 - mean) * (2 - mean) +
                               (8 - mean) * (8 - mean)) / 4.0);
  CHECK(g.sigma == doctest::Approx(sd).epsilon(1e-14));
  CHECK(g.n_edges() == 3);
  CHECK(g.adjacency.at(0, 1) == doctest::Approx(std::exp(-1.0 / (sd * sd))));
  CHECK(g.adjacency.at(1, 0) == doctest::Approx(std::exp(-9.0 / (sd * sd))));
  CHECK_FALSE(g.adjacency.contains(2, 3));
  CHECK(g.edge_miles.size() == g.n_edges());

  cfg.threshold_on = ThresholdOn::kWeight;
  cfg.threshold = 0.5;
  cfg.sigma_mode = SigmaMode::kFixed;
  cfg.sigma = 2.0;
  const SensorGraph w = build_adjacency(meta, pairs, table, cfg);
  // exp(-d^2/4) >= 0.5 keeps d = 1 only.
  CHECK(w.n_edges() == 1);
  CHECK(w.adjacency.contains(0, 1));
  cfg.self_loops = true;
  CHECK(build_adjacency(meta, pairs, table, cfg).adjacency.at(3, 3) == 1.0);
}

TEST_CASE("adjacency error paths") {
  const auto meta = meta_along_meridian({0.0, 1.0});
  TableDistance table(2);
  CHECK_THROWS_AS(build_adjacency(meta, {{0, 1}}, table, {}), Error);  // missing pair
  CHECK_THROWS_AS(table.set(0, 1, -1.0), Error);
  table.set(0, 1, 1.0);
  // A single distance has zero spread.
  try {
    build_adjacency(meta, {{0, 1}}, table, {});
    FAIL("expected a numerical error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
  }
  auto dup = meta;
  dup[1].sensor_id = dup[0].sensor_id;
  CHECK_THROWS_AS(validate_meta(dup), Error);
  auto bad = meta;
  bad[0].latitude = 123.0;
  CHECK_THROWS_AS(validate_meta(bad), Error);
}

TEST_CASE("canonical order and node index") {
  auto meta = placeholder_meta(3);
  meta[0].sensor_id = "c";
  meta[1].sensor_id = "a";
  meta[2].sensor_id = "b";
  const auto sorted = canonical_order(meta);
  CHECK(sorted[0].sensor_id == "a");
  CHECK(sorted[2].sensor_id == "c");
  NodeIndex idx({"x", "y"});
  CHECK(idx.index("y") == 1);
  CHECK_THROWS_AS(idx.index("z"), Error);
  CHECK_THROWS_AS(NodeIndex({"x", "x"}), Error);
}

TEST_CASE("sensor csv and graph json round trip") {
  TempDir dir("graph");
  std::mt19937_64 rng(4);
  auto meta = random_meta(6, rng);
  meta[2].district = "D4";
  meta[3].lane_type = "hov";
  write_sensor_csv(dir.file("s.csv"), meta);
  CHECK(read_sensor_csv(dir.file("s.csv")) == meta);

  const SensorGraph g = build_adjacency(meta, knn_candidates(meta, 3), HaversineDistance(meta), {});
  save_graph(dir.file("g.json"), g);
  const SensorGraph h = load_graph(dir.file("g.json"));
  CHECK(h.adjacency == g.adjacency);
  CHECK(h.nodes == g.nodes);
  CHECK(h.sigma == g.sigma);
  CHECK(h.edge_miles == g.edge_miles);

  std::ofstream(dir.file("broken.json")) << "{\"nodes\": [";
  CHECK_THROWS_AS(load_graph(dir.file("broken.json")), Error);
}

TEST_CASE("distance table from csv") {
  TempDir dir("dist");
  std::ofstream(dir.file("d.csv")) << "from_id,to_id,miles\na,b,1.5\nb,a,2.5\n";
  const TableDistance t = TableDistance::from_csv(dir.file("d.csv"), NodeIndex({"a", "b", "c"}));
  CHECK(t.distance(0, 1) == 1.5);
  CHECK(t.distance(1, 0) == 2.5);
  CHECK(t.distance(2, 2) == 0.0);
  CHECK_THROWS_AS(t.distance(0, 2), Error);
  // Rows naming sensors outside the network are skipped.
  std::ofstream(dir.file("extra.csv")) << "from_id,to_id,miles\na,zz,1\nb,a,2\n";
  const TableDistance e = TableDistance::from_csv(dir.file("extra.csv"), NodeIndex({"a", "b"}));
  CHECK(e.distance(1, 0) == 2.0);
  CHECK_THROWS_AS(e.distance(0, 1), Error);
  std::ofstream(dir.file("neg.csv")) << "from_id,to_id,miles\na,b,-1\n";
  CHECK_THROWS_AS(TableDistance::from_csv(dir.file("neg.csv"), NodeIndex({"a", "b"})), Error);
}

TEST_CASE("routing client against a local server") {
  httplib::Server server;
  server.Get("/distance", [](const httplib::Request &req, httplib::Response &res) {
    const double a = std::stod(req.get_param_value("src_lat"));
    const double b = std::stod(req.get_param_value("dst_lat"));
    if (a == b) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"miles": )" + std::to_string(std::abs(a - b) * 100.0) + "}", "application/json");
  });
  server.Get("/bare", [](const httplib::Request &, httplib::Response &res) { res.set_content("4.25", "text/plain"); });
  server.Get("/junk", [](const httplib::Request &, httplib::Response &res) { res.set_content("nope", "text/plain"); });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto meta = placeholder_meta(3);
  meta[0].latitude = 34.0;
  meta[1].latitude = 34.5;
  meta[2].latitude = 34.0;
  RoutingClientDistance client("127.0.0.1", port, meta);
  CHECK(client.distance(0, 1) == doctest::Approx(50.0));
  CHECK_THROWS_AS(client.distance(0, 2), Error);
  CHECK(RoutingClientDistance("127.0.0.1", port, meta, "/bare").distance(0, 1) == 4.25);
  CHECK_THROWS_AS(RoutingClientDistance("127.0.0.1", port, meta, "/junk").distance(0, 1), Error);
  server.stop();
  th.join();
  CHECK_THROWS_AS(RoutingClientDistance("127.0.0.1", port, meta, "/distance",
                                        std::chrono::milliseconds(300)).distance(0, 1),
                  Error);
}
