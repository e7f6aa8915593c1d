#include "pgdcrnn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgdcrnn/analysis.hpp"
#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string &key, const std::string &v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw_config(key + ": not a number: '" + v + "'");
  return out;
}

std::size_t to_count(const std::string &key, const std::string &v) {
  unsigned long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw_config(key + ": not a nonnegative integer: '" + v + "'");
  }
  return static_cast<std::size_t>(out);
}

bool to_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw_config(key + ": not a boolean: '" + v + "'");
}

std::vector<std::size_t> to_counts(const std::string &key, const std::string &v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_count(key, trim(item)));
  return out;
}

std::string fmt(double v) { return csv::format_double(v); }

std::string join_counts(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using Setter = std::function<void(PipelineConfig &, const std::string &, const std::string &)>;
using Getter = std::function<std::string(const PipelineConfig &)>;

struct Field {
  const char *key;
  Setter set;
  Getter get;
};

#define PGD_COUNT(name, member)                                                          \
  Field {                                                                                \
    name, [](PipelineConfig &c, const std::string &k, const std::string &v) {            \
      c.member = to_count(k, v);                                                         \
    },                                                                                   \
        [](const PipelineConfig &c) { return std::to_string(c.member); }                 \
  }
#define PGD_REAL(name, member)                                                           \
  Field {                                                                                \
    name, [](PipelineConfig &c, const std::string &k, const std::string &v) {            \
      c.member = to_double(k, v);                                                        \
    },                                                                                   \
        [](const PipelineConfig &c) { return fmt(c.member); }                            \
  }
#define PGD_BOOL(name, member)                                                           \
  Field {                                                                                \
    name, [](PipelineConfig &c, const std::string &k, const std::string &v) {            \
      c.member = to_bool(k, v);                                                          \
    },                                                                                   \
        [](const PipelineConfig &c) { return std::string(c.member ? "true" : "false"); } \
  }
#define PGD_TEXT(name, member)                                                                \
  Field {                                                                                     \
    name, [](PipelineConfig &c, const std::string &, const std::string &v) { c.member = v; }, \
        [](const PipelineConfig &c) { return c.member; }                                      \
  }

const std::vector<Field> &fields() {
  static const std::vector<Field> f = {
      PGD_TEXT("paths.metadata", metadata),
      PGD_TEXT("paths.timeseries", timeseries),
      PGD_TEXT("paths.distances", distances),
      PGD_TEXT("paths.output_dir", output_dir),
      PGD_COUNT("graph.k_nn", k_nn),
      {"graph.threshold_on",
       [](PipelineConfig &c, const std::string &, const std::string &v) {
         c.kernel.threshold_on = threshold_on_from_string(v);
       },
       [](const PipelineConfig &c) { return std::string(to_string(c.kernel.threshold_on)); }},
      PGD_REAL("graph.threshold", kernel.threshold),
      {"graph.sigma_mode",
       [](PipelineConfig &c, const std::string &k, const std::string &v) {
         if (v != "auto" && v != "fixed") throw_config(k + " must be 'auto' or 'fixed'");
         c.kernel.sigma_mode = v == "auto" ? SigmaMode::kAuto : SigmaMode::kFixed;
       },
       [](const PipelineConfig &c) {
         return std::string(c.kernel.sigma_mode == SigmaMode::kAuto ? "auto" : "fixed");
       }},
      PGD_REAL("graph.sigma", kernel.sigma),
      PGD_BOOL("graph.self_loops", kernel.self_loops),
      PGD_COUNT("partition.k", partition.k),
      PGD_REAL("partition.imbalance", partition.imbalance),
      PGD_COUNT("partition.seed", partition.seed),
      PGD_COUNT("partition.coarsen_to", partition.coarsen_to),
      PGD_BOOL("partition.overlap", overlap),
      PGD_COUNT("partition.horizon_k", halo.horizon_k),
      PGD_REAL("partition.d_prime", halo.d_prime),
      {"data.impute",
       [](PipelineConfig &c, const std::string &, const std::string &v) {
         c.impute = impute_method_from_string(v);
       },
       [](const PipelineConfig &c) { return std::string(to_string(c.impute)); }},
      PGD_REAL("data.train_fraction", fractions.train),
      PGD_REAL("data.valid_fraction", fractions.valid),
      PGD_REAL("data.test_fraction", fractions.test),
      PGD_COUNT("model.layers", training.model.layers),
      PGD_COUNT("model.units", training.model.units),
      PGD_COUNT("model.diffusion_steps", training.model.diffusion_steps),
      PGD_COUNT("model.look_back", training.model.look_back),
      PGD_COUNT("model.horizon", training.model.horizon),
      {"model.filter",
       [](PipelineConfig &c, const std::string &, const std::string &v) {
         c.training.model.filter = filter_type_from_string(v);
       },
       [](const PipelineConfig &c) { return std::string(to_string(c.training.model.filter)); }},
      {"model.reverse",
       [](PipelineConfig &c, const std::string &, const std::string &v) {
         c.training.model.reverse = reverse_transition_from_string(v);
       },
       [](const PipelineConfig &c) { return std::string(to_string(c.training.model.reverse)); }},
      PGD_COUNT("training.batch_size", training.batch_size),
      PGD_COUNT("training.epochs", training.epochs),
      PGD_REAL("training.lr0", training.lr0),
      PGD_REAL("training.lr_decay", training.lr_decay),
      {"training.milestones",
       [](PipelineConfig &c, const std::string &k, const std::string &v) {
         c.training.milestones = to_counts(k, v);
       },
       [](const PipelineConfig &c) { return join_counts(c.training.milestones); }},
      PGD_REAL("training.max_grad_norm", training.max_grad_norm),
      PGD_COUNT("training.patience", training.patience),
      PGD_REAL("training.tau", training.tau),
      PGD_COUNT("training.seed", training.seed),
      {"training.mode",
       [](PipelineConfig &c, const std::string &, const std::string &v) {
         c.training.mode = output_mode_from_string(v);
       },
       [](const PipelineConfig &c) { return std::string(to_string(c.training.mode)); }},
      PGD_COUNT("training.train_stride", training.train_stride),
      PGD_COUNT("synth.nodes", synth.n_nodes),
      PGD_COUNT("synth.clusters", synth.clusters),
      PGD_COUNT("synth.days", synth.days),
      PGD_TEXT("synth.start", synth.start),
      PGD_COUNT("synth.seed", synth.seed),
      PGD_REAL("synth.speed_noise", synth.speed_noise),
      PGD_REAL("synth.flow_noise", synth.flow_noise),
      PGD_REAL("synth.missing_rate", synth.missing_rate),
      PGD_REAL("synth.spacing_miles", synth.spacing_miles),
      PGD_REAL("synth.cluster_gap_miles", synth.cluster_gap_miles),
      PGD_REAL("synth.lag_minutes_per_mile", synth.lag_minutes_per_mile),
      PGD_BOOL("synth.weekend_congestion", synth.weekend_congestion),
  };
  return f;
}

#undef PGD_COUNT
#undef PGD_REAL
#undef PGD_BOOL
#undef PGD_TEXT

std::string in_output(const PipelineConfig &c, const std::string &explicit_path, const char *name) {
  return explicit_path.empty() ? (fs::path(c.output_dir) / name).string() : explicit_path;
}

void require_file(const std::string &path, const char *what) {
  if (!fs::is_regular_file(path)) throw_config(std::string(what) + " not found: '" + path + "'");
}

void ensure_dir(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_data("cannot create directory '" + dir + "': " + ec.message());
}

std::string summary(const std::string &command, json fields) {
  json j = {{"command", command}, {"status", "ok"}};
  j.update(fields);
  return j.dump();
}

/// Table distances where present, great-circle distance elsewhere.
class TableWithFallback final : public DistanceProvider {
 public:
  TableWithFallback(TableDistance table, HaversineDistance fallback)
      : table_(std::move(table)), fallback_(std::move(fallback)) {}
  double distance(std::size_t i, std::size_t j) const override {
    try {
      return table_.distance(i, j);
    } catch (const Error &) {
      return fallback_.distance(i, j);
    }
  }

 private:
  TableDistance table_;
  HaversineDistance fallback_;
};

std::unique_ptr<DistanceProvider> make_provider(const PipelineConfig &c, const SensorGraph &g,
                                                bool strict) {
  if (c.distances.empty()) return std::make_unique<HaversineDistance>(g.nodes);
  require_file(c.distances, "distance file");
  TableDistance table = TableDistance::from_csv(c.distances, g.index);
  if (strict) return std::make_unique<TableDistance>(std::move(table));
  return std::make_unique<TableWithFallback>(std::move(table), HaversineDistance(g.nodes));
}

std::vector<PartitionData> prepare_all(const PipelineConfig &c,
                                       const TimeSeriesPanel &panel) {
  const std::vector<SubgraphBundle> bundles = load_bundles(c.bundles_dir());
  std::vector<PartitionData> parts;
  for (const auto &b : bundles) parts.push_back(prepare_partition(b, panel, c.fractions, c.training));
  return parts;
}

std::vector<Checkpoint> load_checkpoints(const PipelineConfig &c, std::size_t k) {
  std::vector<Checkpoint> out;
  for (std::size_t p = 0; p < k; ++p) {
    require_file(c.checkpoint_path(p), "checkpoint");
    out.push_back(load_checkpoint(c.checkpoint_path(p)));
  }
  return out;
}

struct NodeResult {
  std::string node_id;
  std::size_t global = 0;
  std::size_t part = 0;
  std::vector<double> mae;  // per output feature
};

struct EvalRun {
  std::vector<std::string> features;
  std::vector<NodeResult> nodes;  // ascending global index
  std::vector<Evaluation> per_part;
  std::vector<Checkpoint> checkpoints;
  std::vector<PartitionData> parts;
  std::vector<Tensor> predictions;
};

EvalRun run_evaluation(const PipelineConfig &c) {
  require_file(c.graph_path(), "graph file");
  const SensorGraph graph = load_graph(c.graph_path());
  const TimeSeriesPanel panel = load_imputed_panel(c, graph);
  EvalRun run;
  run.parts = prepare_all(c, panel);
  run.checkpoints = load_checkpoints(c, run.parts.size());
  for (std::size_t p = 0; p < run.parts.size(); ++p) {
    const Checkpoint &ck = run.checkpoints[p];
    if (ck.node_ids.size() != run.parts[p].graph.n_nodes() ||
        ck.config.output_dim != run.parts[p].output_features.size()) {
      throw_config("checkpoint " + c.checkpoint_path(p) + " does not match partition " +
                   std::to_string(p) + " and the configured mode");
    }
    run.predictions.push_back(forecast_all(ck, run.parts[p].test));
    run.per_part.push_back(evaluate_predictions(ck, run.parts[p].test, run.predictions.back()));
    const Evaluation &ev = run.per_part.back();
    if (run.features.empty()) {
      for (const auto &f : ev.features) run.features.push_back(f.feature);
    }
    for (std::size_t i = 0; i < ev.node_ids.size(); ++i) {
      NodeResult r{ev.node_ids[i], ev.global_index[i], p, {}};
      for (const auto &f : ev.features) r.mae.push_back(f.node_mae[i]);
      run.nodes.push_back(std::move(r));
    }
  }
  std::sort(run.nodes.begin(), run.nodes.end(),
            [](const NodeResult &a, const NodeResult &b) { return a.global < b.global; });
  return run;
}

}  // namespace

std::string PipelineConfig::metadata_path() const { return in_output(*this, metadata, "sensors.csv"); }
std::string PipelineConfig::timeseries_path() const {
  return in_output(*this, timeseries, "timeseries.csv");
}
std::string PipelineConfig::graph_path() const { return in_output(*this, "", "graph.json"); }
std::string PipelineConfig::assignment_path() const { return in_output(*this, "", "assignment.csv"); }
std::string PipelineConfig::bundles_dir() const { return in_output(*this, "", "bundles"); }
std::string PipelineConfig::checkpoint_path(std::size_t part) const {
  return (fs::path(output_dir) / "checkpoints" / ("part_" + std::to_string(part) + ".json")).string();
}

void PipelineConfig::validate() const {
  if (output_dir.empty()) throw_config("paths.output_dir must not be empty");
  if (k_nn < 1) throw_config("graph.k_nn must be >= 1");
  if (partition.k < 1) throw_config("partition.k must be >= 1");
  if (partition.imbalance < 0.0) throw_config("partition.imbalance must be >= 0");
  if (overlap && (halo.horizon_k < 1 || !(halo.d_prime > 0.0))) {
    throw_config("partition.horizon_k must be >= 1 and partition.d_prime > 0");
  }
  if (kernel.sigma_mode == SigmaMode::kFixed && !(kernel.sigma > 0.0)) {
    throw_config("graph.sigma must be > 0");
  }
  training.validate();
}

std::map<std::string, std::string> parse_ini(const std::string &text, const std::string &origin) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (s.front() == '[') {
      if (s.back() != ']') throw_config(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw_config(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw_config(where + ": empty key");
    out[section.empty() ? key : section + "." + key] = trim(s.substr(eq + 1));
  }
  return out;
}

void apply_setting(PipelineConfig &config, const std::string &key, const std::string &value) {
  for (const auto &f : fields()) {
    if (key == f.key) return f.set(config, key, value);
  }
  throw_config("unknown setting '" + key + "'");
}

PipelineConfig load_pipeline_config(const std::string &path, const std::vector<std::string> &overrides) {
  PipelineConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw_config("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto &[k, v] : parse_ini(buf.str(), path)) apply_setting(c, k, v);
  }
  for (const auto &o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw_config("--set expects key=value, got '" + o + "'");
    apply_setting(c, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  c.validate();
  return c;
}

std::vector<std::pair<std::string, std::string>> config_settings(const PipelineConfig &config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &f : fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

TimeSeriesPanel load_imputed_panel(const PipelineConfig &c, const SensorGraph &graph) {
  require_file(c.timeseries_path(), "time series file");
  const TimeSeriesPanel raw = read_timeseries_csv(c.timeseries_path(), graph.index.ids());
  const auto [train_end, valid_end] = split_points(raw.n_ticks(), c.fractions);
  (void)valid_end;
  if (train_end == 0) throw_data("training slice is empty");
  return impute(raw, c.impute, train_end);
}

int exit_code_for(const std::exception &e) {
  if (const auto *err = dynamic_cast<const Error *>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kConfig: return 2;
      case ErrorKind::kData: return 3;
      case ErrorKind::kNumerical: return 4;
    }
  }
  return 3;
}

std::string cmd_synth(const PipelineConfig &c) {
  ensure_dir(c.output_dir);
  const SyntheticData d = generate_synthetic(c.synth);
  write_sensor_csv(c.metadata_path(), d.meta);
  write_timeseries_csv(c.timeseries_path(), d.panel);
  std::ofstream truth((fs::path(c.output_dir) / "clusters.csv").string());
  truth << "sensor_id,cluster\n";
  for (std::size_t i = 0; i < d.meta.size(); ++i) truth << d.meta[i].sensor_id << ',' << d.cluster_of[i] << '\n';
  return summary("synth", {{"nodes", d.meta.size()},
                           {"ticks", d.panel.n_ticks()},
                           {"missing", d.panel.missing_count()},
                           {"metadata", c.metadata_path()},
                           {"timeseries", c.timeseries_path()}});
}

std::string cmd_build_graph(const PipelineConfig &c) {
  require_file(c.metadata_path(), "metadata file");
  ensure_dir(c.output_dir);
  const std::vector<SensorMeta> meta = canonical_order(read_sensor_csv(c.metadata_path()));
  validate_meta(meta);
  SensorGraph placeholder;
  placeholder.nodes = meta;
  std::vector<std::string> ids;
  for (const auto &m : meta) ids.push_back(m.sensor_id);
  placeholder.index = NodeIndex(ids);
  const auto provider = make_provider(c, placeholder, true);
  const SensorGraph g = build_adjacency(meta, knn_candidates(meta, c.k_nn), *provider, c.kernel);
  save_graph(c.graph_path(), g);
  return summary("build-graph", {{"nodes", g.n_nodes()},
                                 {"edges", g.n_edges()},
                                 {"sigma", g.sigma},
                                 {"graph", c.graph_path()}});
}

std::string cmd_partition(const PipelineConfig &c) {
  require_file(c.graph_path(), "graph file");
  const SensorGraph g = load_graph(c.graph_path());
  if (c.partition.k > g.n_nodes()) throw_config("k exceeds nodes");
  PartitionOptions opts = c.partition;
  opts.observer = nullptr;
  const PartitionAssignment a = partition_graph(g, opts);
  std::vector<std::vector<std::size_t>> halos;
  if (c.overlap) {
    const auto provider = make_provider(c, g, false);
    for (std::size_t p = 0; p < a.k; ++p) halos.push_back(add_overlap_nodes(g, a, p, c.halo, *provider));
  }
  const std::vector<SubgraphBundle> bundles = extract_subgraphs(g, a, halos);
  write_assignment_csv(c.assignment_path(), g, a);
  if (fs::exists(c.bundles_dir())) fs::remove_all(c.bundles_dir());
  save_bundles(c.bundles_dir(), bundles);
  std::vector<std::size_t> halo_counts;
  for (const auto &b : bundles) halo_counts.push_back(b.n_local() - b.n_owned());
  return summary("partition", {{"k", a.k},
                               {"edge_cut", edge_cut(g, a)},
                               {"part_sizes", a.part_sizes()},
                               {"halos", halo_counts},
                               {"assignment", c.assignment_path()},
                               {"bundles", c.bundles_dir()}});
}

std::string cmd_train(const PipelineConfig &c, std::size_t workers) {
  require_file(c.graph_path(), "graph file");
  if (!fs::is_directory(c.bundles_dir())) throw_config("bundle directory not found: '" + c.bundles_dir() + "'");
  const SensorGraph graph = load_graph(c.graph_path());
  const TimeSeriesPanel panel = load_imputed_panel(c, graph);
  const std::vector<PartitionData> parts = prepare_all(c, panel);
  const std::vector<PartitionOutcome> outcomes = train_all(parts, c.training, workers);
  ensure_dir((fs::path(c.output_dir) / "checkpoints").string());
  std::vector<TrainReport> reports;
  std::size_t failed = 0;
  std::string first_error;
  for (std::size_t p = 0; p < outcomes.size(); ++p) {
    reports.push_back(outcomes[p].report);
    if (outcomes[p].checkpoint) {
      save_checkpoint(c.checkpoint_path(p), *outcomes[p].checkpoint);
    } else {
      ++failed;
      if (first_error.empty()) first_error = "partition " + std::to_string(p) + ": " + outcomes[p].report.error;
    }
  }
  write_report_csv((fs::path(c.output_dir) / "train_report.csv").string(), reports);
  write_summary_json((fs::path(c.output_dir) / "train_summary.json").string(), outcomes);
  if (failed) {
    throw_numerical(std::to_string(failed) + " of " + std::to_string(outcomes.size()) +
                    " partitions failed; " + first_error);
  }
  json valid = json::array();
  for (const auto &r : reports) valid.push_back(r.best_valid);
  return summary("train", {{"partitions", outcomes.size()},
                           {"workers", workers},
                           {"best_valid", valid},
                           {"max_wall_seconds", max_wall_seconds(outcomes)}});
}

std::string cmd_evaluate(const PipelineConfig &c) {
  const EvalRun run = run_evaluation(c);
  const std::string path = (fs::path(c.output_dir) / "evaluation.csv").string();
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "sensor_id,part";
  for (const auto &f : run.features) out << ",mae_" << f;
  out << '\n';
  for (const auto &n : run.nodes) {
    out << n.node_id << ',' << n.part;
    for (double m : n.mae) out << ',' << fmt(m);
    out << '\n';
  }
  const std::string hpath = (fs::path(c.output_dir) / "evaluation_horizons.csv").string();
  std::ofstream hout(hpath);
  hout << "part,feature,minutes,mae\n";
  json mean = json::object(), median = json::object();
  for (std::size_t q = 0; q < run.features.size(); ++q) {
    std::vector<double> v;
    for (const auto &n : run.nodes) v.push_back(n.mae[q]);
    double s = 0.0;
    for (double x : v) s += x;
    mean[run.features[q]] = v.empty() ? 0.0 : s / static_cast<double>(v.size());
    median[run.features[q]] = v.empty() ? 0.0 : mae_distribution_stats(v).median;
  }
  for (std::size_t p = 0; p < run.per_part.size(); ++p) {
    for (const auto &f : run.per_part[p].features) {
      for (const auto &[minutes, mae] : f.horizon_mae) {
        hout << p << ',' << f.feature << ',' << minutes << ',' << fmt(mae) << '\n';
      }
    }
  }
  return summary("evaluate", {{"nodes", run.nodes.size()},
                              {"mean_mae", mean},
                              {"median_mae", median},
                              {"evaluation", path}});
}

std::string cmd_forecast(const PipelineConfig &c, const std::string &checkpoint_path,
                         const std::string &input_csv, const std::string &output_csv) {
  require_file(checkpoint_path, "checkpoint");
  require_file(input_csv, "input time series");
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const TimeSeriesPanel raw = read_timeseries_csv(input_csv);
  const std::size_t L = ck.config.look_back, N = ck.node_ids.size(), P = ck.config.input_dim;
  if (raw.n_ticks() < L) {
    throw_config("input holds " + std::to_string(raw.n_ticks()) + " ticks; the checkpoint needs " +
                 std::to_string(L));
  }
  std::vector<std::size_t> cols;
  for (const auto &id : ck.node_ids) cols.push_back(raw.node_index(id));
  TimeSeriesPanel recent = raw.select_nodes(cols).slice_ticks(raw.n_ticks() - L, raw.n_ticks());
  recent = impute(recent, c.impute);
  Tensor window({L, N, P});
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t p = 0; p < P; ++p) {
        window[(t * N + n) * P + p] =
            recent.at(t, n, recent.feature_index(ck.scaler.features.at(ck.input_features[p])));
      }
    }
  }
  const Tensor pred = forecast(ck, window);
  std::ofstream out(output_csv);
  if (!out) throw_data("cannot write '" + output_csv + "'");
  out << "timestamp,sensor_id";
  for (std::size_t q : ck.output_features) out << ',' << ck.scaler.features.at(q);
  out << '\n';
  const std::int64_t last = recent.timestamp(L - 1);
  for (std::size_t t = 0; t < ck.config.horizon; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      out << format_iso8601(last + static_cast<std::int64_t>(t + 1) * kTickSeconds) << ',' << ck.node_ids[n];
      for (std::size_t q = 0; q < ck.config.output_dim; ++q) {
        out << ',' << fmt(pred[(t * N + n) * ck.config.output_dim + q]);
      }
      out << '\n';
    }
  }
  return summary("forecast", {{"nodes", N}, {"steps", ck.config.horizon}, {"output", output_csv}});
}

std::string cmd_analyze(const PipelineConfig &c) {
  const EvalRun run = run_evaluation(c);
  require_file(c.metadata_path(), "metadata file");
  const SensorGraph graph = load_graph(c.graph_path());
  const TimeSeriesPanel panel = load_imputed_panel(c, graph);
  const std::string feature = run.features.front();
  const CovResult cov = coefficient_of_variation(panel, feature);
  std::vector<ErrorRecord> records;
  for (const auto &n : run.nodes) {
    const SensorMeta &m = graph.nodes.at(n.global);
    if (!cov.valid[n.global]) continue;
    records.push_back({n.node_id, n.mae[0], bin_mae(n.mae[0]), m.sensor_type, m.district,
                       m.lane_type, cov.cov[n.global]});
  }
  const fs::path dir = fs::path(c.output_dir) / "analysis";
  ensure_dir(dir.string());
  write_error_records_csv((dir / "error_records.csv").string(), records);

  std::vector<std::string> labels;
  std::vector<BoxStats> boxes;
  for (std::size_t q = 0; q < run.features.size(); ++q) {
    std::vector<double> v;
    for (const auto &n : run.nodes) v.push_back(n.mae[q]);
    labels.push_back(run.features[q]);
    boxes.push_back(mae_distribution_stats(v));
  }
  write_box_csv((dir / "mae_box.csv").string(), labels, boxes);

  json cart_json = json::object();
  std::set<int> classes;
  for (const auto &r : records) classes.insert(r.mae_class);
  if (records.size() >= 2) {
    const CartResult cart = train_cart(records_to_dataset(records), CartOptions{});
    json imp = json::object();
    for (std::size_t i = 0; i < cart.feature_names.size(); ++i) imp[cart.feature_names[i]] = cart.importances[i];
    cart_json = {{"classes", classes.size()},
                 {"train_accuracy", cart.train_accuracy},
                 {"test_accuracy", std::isnan(cart.test_accuracy) ? json(nullptr) : json(cart.test_accuracy)},
                 {"depth", cart.tree.depth()},
                 {"importances", imp}};
    std::ofstream((dir / "cart.json").string()) << cart_json.dump(2) << '\n';
  }

  std::size_t fd_rows = 0;
  bool has_flow = run.features.size() == 2;
  if (has_flow) {
    std::vector<FdRow> rows;
    for (std::size_t p = 0; p < run.parts.size(); ++p) {
      const auto r = emit_fundamental_diagram(run.checkpoints[p], run.parts[p].test, run.predictions[p]);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    write_fd_csv((dir / "fundamental_diagram.csv").string(), rows);
    fd_rows = rows.size();
  }
  const std::size_t cov_errors =
      static_cast<std::size_t>(std::count(cov.valid.begin(), cov.valid.end(), false));
  return summary("analyze", {{"records", records.size()},
                             {"cov_errors", cov_errors},
                             {"median_mae", boxes.front().median},
                             {"cart", cart_json},
                             {"fundamental_diagram_rows", fd_rows},
                             {"dir", dir.string()}});
}

}  // namespace pgdcrnn
