#include <fstream>

#include "json.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/training.hpp"

namespace pgdcrnn {

namespace {

using nlohmann::json;

constexpr const char *kFormat = "pgdcrnn-checkpoint";
constexpr int kVersion = 1;

json tensor_json(const Tensor &t) {
  return {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from(const json &j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const std::string &path, const Checkpoint &c) {
  json params = json::array();
  for (const auto &p : c.params) {
    json e = tensor_json(p.value);
    e["name"] = p.name;
    params.push_back(std::move(e));
  }
  json nodes = json::array();
  for (std::size_t i = 0; i < c.node_ids.size(); ++i) {
    nodes.push_back({{"id", c.node_ids[i]},
                     {"global", i < c.global_index.size() ? c.global_index[i] : i},
                     {"halo", i < c.halo.size() && c.halo[i]}});
  }
  json edges = json::array();
  for (const auto &t : c.adjacency.triplets()) edges.push_back({t.row, t.col, t.value});
  const json j = {
      {"format", kFormat},
      {"version", kVersion},
      {"config",
       {{"input_dim", c.config.input_dim},
        {"output_dim", c.config.output_dim},
        {"look_back", c.config.look_back},
        {"horizon", c.config.horizon},
        {"layers", c.config.layers},
        {"units", c.config.units},
        {"diffusion_steps", c.config.diffusion_steps},
        {"filter", to_string(c.config.filter)},
        {"reverse", to_string(c.config.reverse)}}},
      {"params", params},
      {"scaler", {{"features", c.scaler.features}, {"mean", c.scaler.mean}, {"stddev", c.scaler.stddev}}},
      {"input_features", c.input_features},
      {"output_features", c.output_features},
      {"nodes", nodes},
      {"adjacency", {{"rows", c.adjacency.rows()}, {"cols", c.adjacency.cols()}, {"edges", edges}}},
      {"iterations", c.iterations},
      {"best_epoch", c.best_epoch},
      {"part", c.part}};
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << j.dump() << '\n';
  if (!out) throw_data("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open checkpoint '" + path + "'");
  Checkpoint c;
  try {
    const json j = json::parse(in);
    if (j.at("format") != kFormat) throw_data(path + ": not a checkpoint");
    if (j.at("version").get<int>() != kVersion) throw_data(path + ": unsupported checkpoint version");
    const json &cfg = j.at("config");
    c.config.input_dim = cfg.at("input_dim");
    c.config.output_dim = cfg.at("output_dim");
    c.config.look_back = cfg.at("look_back");
    c.config.horizon = cfg.at("horizon");
    c.config.layers = cfg.at("layers");
    c.config.units = cfg.at("units");
    c.config.diffusion_steps = cfg.at("diffusion_steps");
    c.config.filter = filter_type_from_string(cfg.at("filter").get<std::string>());
    c.config.reverse = reverse_transition_from_string(cfg.at("reverse").get<std::string>());
    c.config.validate();
    for (const auto &p : j.at("params")) c.params.add(p.at("name").get<std::string>(), tensor_from(p));
    const json &s = j.at("scaler");
    c.scaler.features = s.at("features").get<std::vector<std::string>>();
    c.scaler.mean = s.at("mean").get<std::vector<double>>();
    c.scaler.stddev = s.at("stddev").get<std::vector<double>>();
    c.input_features = j.at("input_features").get<std::vector<std::size_t>>();
    c.output_features = j.at("output_features").get<std::vector<std::size_t>>();
    for (const auto &n : j.at("nodes")) {
      c.node_ids.push_back(n.at("id").get<std::string>());
      c.global_index.push_back(n.at("global").get<std::size_t>());
      c.halo.push_back(n.at("halo").get<bool>());
    }
    const json &a = j.at("adjacency");
    std::vector<Triplet> trip;
    for (const auto &e : a.at("edges")) {
      trip.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()});
    }
    c.adjacency = SparseMatrix::from_triplets(a.at("rows"), a.at("cols"), std::move(trip));
    c.iterations = j.at("iterations");
    c.best_epoch = j.at("best_epoch");
    c.part = j.at("part");
  } catch (const json::exception &e) {
    throw_data(path + ": malformed checkpoint (" + e.what() + ")");
  }
  if (c.adjacency.rows() != c.node_ids.size() || c.input_features.size() != c.config.input_dim ||
      c.output_features.size() != c.config.output_dim) {
    throw_data(path + ": inconsistent checkpoint");
  }
  return c;
}

}  // namespace pgdcrnn
