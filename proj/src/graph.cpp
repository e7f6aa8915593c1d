#include "pgdcrnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

NodeIndex::NodeIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!lookup_.emplace(ids_[i], i).second) throw_data("duplicate sensor id '" + ids_[i] + "'");
  }
}

std::size_t NodeIndex::index(const std::string &id) const {
  auto it = lookup_.find(id);
  if (it == lookup_.end()) throw_data("unknown sensor id '" + id + "'");
  return it->second;
}

const char *to_string(ThresholdOn t) {
  return t == ThresholdOn::kDistanceSq ? "distance_sq" : "weight";
}

ThresholdOn threshold_on_from_string(const std::string &s) {
  if (s == "distance_sq") return ThresholdOn::kDistanceSq;
  if (s == "weight") return ThresholdOn::kWeight;
  throw_config("threshold_on must be 'distance_sq' or 'weight', got '" + s + "'");
}

std::vector<SensorMeta> canonical_order(std::vector<SensorMeta> meta) {
  std::stable_sort(meta.begin(), meta.end(), [](const SensorMeta &a, const SensorMeta &b) {
    return a.sensor_id < b.sensor_id;
  });
  return meta;
}

void validate_meta(const std::vector<SensorMeta> &meta) {
  if (meta.empty()) throw_data("empty graph");
  std::vector<std::string> ids;
  for (const auto &m : meta) {
    if (m.sensor_id.empty()) throw_data("empty sensor id");
    if (!(m.latitude >= -90.0 && m.latitude <= 90.0)) {
      throw_data("sensor '" + m.sensor_id + "': latitude out of range");
    }
    if (!(m.longitude >= -180.0 && m.longitude <= 180.0)) {
      throw_data("sensor '" + m.sensor_id + "': longitude out of range");
    }
    ids.push_back(m.sensor_id);
  }
  NodeIndex check(std::move(ids));
}

std::set<NodePair> knn_candidates(const std::vector<SensorMeta> &meta, std::size_t k) {
  if (k < 1) throw_config("knn_candidates: k must be at least 1");
  validate_meta(meta);
  const std::size_t n = meta.size();
  const std::size_t take = std::min(k, n - 1);
  std::set<NodePair> pairs;
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < n; ++i) {
    ranked.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      ranked.emplace_back(haversine_miles(meta[i].latitude, meta[i].longitude,
                                          meta[j].latitude, meta[j].longitude),
                          j);
    }
    // Pair ordering gives ascending distance, then ascending index.
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                      ranked.end());
    for (std::size_t r = 0; r < take; ++r) pairs.emplace(i, ranked[r].second);
  }
  return pairs;
}

double gaussian_kernel(double miles, double sigma) {
  return std::exp(-(miles * miles) / (sigma * sigma));
}

SensorGraph build_adjacency(const std::vector<SensorMeta> &meta,
                            const std::set<NodePair> &pairs,
                            const DistanceProvider &provider,
                            const KernelConfig &config) {
  validate_meta(meta);
  const std::size_t n = meta.size();
  std::vector<std::pair<NodePair, double>> measured;
  measured.reserve(pairs.size());
  for (const auto &[i, j] : pairs) {
    if (i >= n || j >= n) throw_config("build_adjacency: pair index out of range");
    const double d = provider.distance(i, j);
    if (!std::isfinite(d)) {
      throw_data("distance " + meta[i].sensor_id + "->" + meta[j].sensor_id + " is not finite");
    }
    if (d < 0.0) {
      throw_data("negative distance " + meta[i].sensor_id + "->" + meta[j].sensor_id);
    }
    measured.push_back({{i, j}, d});
  }

  double sigma = config.sigma;
  if (config.sigma_mode == SigmaMode::kAuto) {
    if (measured.empty()) throw_numerical("degenerate kernel width");
    double mean = 0.0;
    for (const auto &m : measured) mean += m.second;
    mean /= static_cast<double>(measured.size());
    double var = 0.0;
    for (const auto &m : measured) var += (m.second - mean) * (m.second - mean);
    var /= static_cast<double>(measured.size());
    sigma = std::sqrt(var);
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw_numerical("degenerate kernel width");

  std::vector<Triplet> triplets;
  std::vector<std::pair<NodePair, double>> kept_miles;
  for (const auto &[pair, d] : measured) {
    if (pair.first == pair.second && !config.self_loops) continue;
    const double w = gaussian_kernel(d, sigma);
    const bool pass = config.threshold_on == ThresholdOn::kDistanceSq
                          ? d * d <= config.threshold
                          : w >= config.threshold;
    if (!pass || !(w > 0.0)) continue;
    triplets.push_back({pair.first, pair.second, w});
    kept_miles.push_back({pair, d});
  }
  if (config.self_loops) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!pairs.count({i, i})) {
        triplets.push_back({i, i, 1.0});
        kept_miles.push_back({{i, i}, 0.0});
      }
    }
  }

  SensorGraph g;
  g.nodes = meta;
  std::vector<std::string> ids;
  for (const auto &m : meta) ids.push_back(m.sensor_id);
  g.index = NodeIndex(std::move(ids));
  g.adjacency = SparseMatrix::from_triplets(n, n, std::move(triplets));
  std::sort(kept_miles.begin(), kept_miles.end());
  for (const auto &km : kept_miles) g.edge_miles.push_back(km.second);
  g.kernel = config;
  g.sigma = sigma;
  return g;
}

SensorGraph graph_from_weights(std::vector<SensorMeta> meta, SparseMatrix adjacency) {
  if (adjacency.rows() != meta.size() || adjacency.cols() != meta.size()) {
    throw_config("graph_from_weights: adjacency size does not match node count");
  }
  SensorGraph g;
  std::vector<std::string> ids;
  for (const auto &m : meta) ids.push_back(m.sensor_id);
  g.index = NodeIndex(std::move(ids));
  g.nodes = std::move(meta);
  g.adjacency = std::move(adjacency);
  return g;
}

std::vector<SensorMeta> placeholder_meta(std::size_t n) {
  std::vector<SensorMeta> meta(n);
  for (std::size_t i = 0; i < n; ++i) meta[i].sensor_id = "s" + std::to_string(i);
  return meta;
}

std::vector<SensorMeta> read_sensor_csv(const std::string &path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c_id = t.column("sensor_id");
  const std::size_t c_lat = t.column("latitude");
  const std::size_t c_lon = t.column("longitude");
  const std::size_t c_district = t.column("district");
  const std::size_t c_type = t.column("sensor_type");
  const std::size_t c_lane = t.column("lane_type");
  std::vector<SensorMeta> meta;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.lines[r]);
    SensorMeta m;
    m.sensor_id = row[c_id];
    m.latitude = csv::parse_double(row[c_lat], where + " latitude");
    m.longitude = csv::parse_double(row[c_lon], where + " longitude");
    m.district = row[c_district];
    m.sensor_type = row[c_type];
    m.lane_type = row[c_lane];
    if (m.sensor_id.empty()) throw_data(where + ": empty sensor_id");
    if (!(m.latitude >= -90.0 && m.latitude <= 90.0)) throw_data(where + ": latitude out of range");
    if (!(m.longitude >= -180.0 && m.longitude <= 180.0)) {
      throw_data(where + ": longitude out of range");
    }
    meta.push_back(std::move(m));
  }
  if (meta.empty()) throw_data(path + ": empty graph");
  validate_meta(meta);
  return meta;
}

void write_sensor_csv(const std::string &path, const std::vector<SensorMeta> &meta) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "sensor_id,latitude,longitude,district,sensor_type,lane_type\n";
  for (const auto &m : meta) {
    out << m.sensor_id << ',' << csv::format_double(m.latitude) << ','
        << csv::format_double(m.longitude) << ',' << m.district << ',' << m.sensor_type
        << ',' << m.lane_type << '\n';
  }
}

void save_graph(const std::string &path, const SensorGraph &graph) {
  using nlohmann::json;
  json j;
  j["format"] = "pgdcrnn-graph";
  j["version"] = 1;
  j["n"] = graph.n_nodes();
  json sensors = json::array();
  for (const auto &m : graph.nodes) {
    sensors.push_back({{"id", m.sensor_id},
                       {"latitude", m.latitude},
                       {"longitude", m.longitude},
                       {"district", m.district},
                       {"sensor_type", m.sensor_type},
                       {"lane_type", m.lane_type}});
  }
  j["sensors"] = std::move(sensors);
  j["kernel"] = {{"sigma", graph.sigma},
                 {"sigma_mode", graph.kernel.sigma_mode == SigmaMode::kAuto ? "auto" : "fixed"},
                 {"threshold_on", to_string(graph.kernel.threshold_on)},
                 {"threshold", graph.kernel.threshold},
                 {"self_loops", graph.kernel.self_loops}};
  json edges = json::array();
  const auto triplets = graph.adjacency.triplets();
  for (std::size_t e = 0; e < triplets.size(); ++e) {
    json row = {triplets[e].row, triplets[e].col, triplets[e].value};
    if (!graph.edge_miles.empty()) row.push_back(graph.edge_miles[e]);
    edges.push_back(std::move(row));
  }
  j["edges"] = std::move(edges);
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

SensorGraph load_graph(const std::string &path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw_data("cannot open graph file '" + path + "'");
  json j;
  try {
    in >> j;
    if (j.at("format") != "pgdcrnn-graph") throw_data(path + ": not a graph file");
    std::vector<SensorMeta> meta;
    for (const auto &s : j.at("sensors")) {
      meta.push_back({s.at("id").get<std::string>(), s.at("latitude").get<double>(),
                      s.at("longitude").get<double>(), s.at("district").get<std::string>(),
                      s.at("sensor_type").get<std::string>(), s.at("lane_type").get<std::string>()});
    }
    const std::size_t n = j.at("n").get<std::size_t>();
    if (n != meta.size()) throw_data(path + ": node count mismatch");
    std::vector<Triplet> triplets;
    std::vector<double> miles;
    for (const auto &e : j.at("edges")) {
      triplets.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()});
      if (e.size() > 3) miles.push_back(e.at(3).get<double>());
    }
    SensorGraph g = graph_from_weights(std::move(meta), SparseMatrix::from_triplets(n, n, std::move(triplets)));
    if (miles.size() == g.adjacency.nnz()) g.edge_miles = std::move(miles);
    const auto &k = j.at("kernel");
    g.sigma = k.at("sigma").get<double>();
    g.kernel.sigma = g.sigma;
    g.kernel.sigma_mode = k.at("sigma_mode") == "auto" ? SigmaMode::kAuto : SigmaMode::kFixed;
    g.kernel.threshold_on = threshold_on_from_string(k.at("threshold_on").get<std::string>());
    g.kernel.threshold = k.at("threshold").get<double>();
    g.kernel.self_loops = k.at("self_loops").get<bool>();
    return g;
  } catch (const json::exception &e) {
    throw_data(path + ": malformed graph file: " + e.what());
  }
}

}  // namespace pgdcrnn
