#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/training.hpp"
#include "support.hpp"

using namespace pgdcrnn;
using namespace testing_support;

namespace {

struct Tiny {
  SyntheticData data;
  SensorGraph graph;
  TimeSeriesPanel panel;
  PartitionAssignment assignment;
  std::vector<SubgraphBundle> bundles;
};

const Tiny &tiny() {
  static const Tiny t = [] {
    Tiny x;
    SyntheticScenario sc;
    sc.n_nodes = 8;
    sc.days = 3;
    x.data = generate_synthetic(sc);
    x.graph = build_adjacency(x.data.meta, knn_candidates(x.data.meta, 5), HaversineDistance(x.data.meta), {});
    x.panel = impute(x.data.panel, ImputeMethod::kTemporalMean);
    PartitionOptions po;
    po.k = 2;
    x.assignment = partition_graph(x.graph, po);
    const HaversineDistance hav(x.graph.nodes);
    std::vector<std::vector<std::size_t>> halos;
    for (std::size_t p = 0; p < 2; ++p) halos.push_back(add_overlap_nodes(x.graph, x.assignment, p, {30, 1.0}, hav));
    x.bundles = extract_subgraphs(x.graph, x.assignment, halos);
    return x;
  }();
  return t;
}

TrainingConfig tiny_config() {
  TrainingConfig c;
  c.epochs = 2;
  c.batch_size = 32;
  c.train_stride = 6;
  c.model.layers = 1;
  c.model.units = 4;
  c.model.look_back = 4;
  c.model.horizon = 3;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule and config validation") {
  TrainingConfig c;
  c.epochs = 10;
  CHECK(c.effective_milestones() == std::vector<std::size_t>{6, 8});
  CHECK(c.learning_rate(1) == 0.01);
  CHECK(c.learning_rate(6) == 0.01);
  CHECK(c.learning_rate(7) == doctest::Approx(0.001));
  CHECK(c.learning_rate(9) == doctest::Approx(0.0001));
  c.milestones = {2};
  CHECK(c.learning_rate(3) == doctest::Approx(0.001));
  c.mode = OutputMode::kMultioutput;
  CHECK(c.model_config().input_dim == 2);
  CHECK(c.model_config().output_dim == 2);
  CHECK(mode_features(OutputMode::kFlowOnly) == std::vector<std::string>{"flow"});
  CHECK(output_mode_from_string("multioutput") == OutputMode::kMultioutput);
  CHECK_THROWS_AS(output_mode_from_string("both"), Error);
  TrainingConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.lr0 = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("partition data marks halos and fits the scaler on training ticks") {
  const Tiny &t = tiny();
  const TrainingConfig c = tiny_config();
  const PartitionData d = prepare_partition(t.bundles[0], t.panel, {}, c);
  CHECK(d.graph.n_nodes() == t.bundles[0].n_local());
  CHECK(d.halo == t.bundles[0].halo);
  CHECK(d.scaler.features == std::vector<std::string>{"speed", "flow"});
  CHECK(d.input_features == std::vector<std::size_t>{0});
  const auto [train_end, valid_end] = split_points(t.panel.n_ticks(), {});
  CHECK(d.valid.size() == window_count(valid_end - train_end, 4, 3));
  CHECK(d.train.size() == window_count(train_end, 4, 3, 6));
  const PartitionData whole = prepare_whole(t.graph, t.panel, {}, c);
  CHECK(whole.graph.n_nodes() == 8);
  for (bool h : whole.halo) CHECK_FALSE(h);
}

TEST_CASE("training reduces the validation loss and is reproducible") {
  const Tiny &t = tiny();
  TrainingConfig c = tiny_config();
  c.epochs = 3;
  const PartitionData d = prepare_whole(t.graph, t.panel, {}, c);
  const TrainResult a = train_partition(d, c);
  CHECK(a.report.ok());
  CHECK(a.report.epochs.front().epoch == 0);
  CHECK(std::isnan(a.report.epochs.front().train_loss));
  CHECK(a.report.best_valid < a.report.initial_valid());
  CHECK(a.checkpoint.iterations == 3 * ((d.train.size() + 31) / 32));
  const TrainResult b = train_partition(d, c);
  CHECK(a.checkpoint == b.checkpoint);
  c.seed = 2;
  CHECK_FALSE(train_partition(d, c).checkpoint == a.checkpoint);
}

TEST_CASE("checkpoint round trip and standalone forecast") {
  TempDir dir("ckpt");
  const Tiny &t = tiny();
  TrainingConfig c = tiny_config();
  c.epochs = 1;
  c.mode = OutputMode::kMultioutput;
  const PartitionData d = prepare_partition(t.bundles[1], t.panel, {}, c);
  const Checkpoint ck = train_partition(d, c).checkpoint;
  save_checkpoint(dir.file("c.json"), ck);
  const Checkpoint back = load_checkpoint(dir.file("c.json"));
  CHECK(back == ck);

  const Tensor all = forecast_all(back, d.test);
  CHECK(all.shape() == Shape{d.test.size(), 3, d.graph.n_nodes(), 2});
  // Forecast from a raw window equals the batched path.
  const TimeSeriesPanel raw = inverse_transform(d.test.panel, d.scaler);
  Tensor window({4, d.graph.n_nodes(), 2});
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t n = 0; n < d.graph.n_nodes(); ++n) {
      for (std::size_t f = 0; f < 2; ++f) window[(s * d.graph.n_nodes() + n) * 2 + f] = raw.at(s, n, f);
    }
  }
  const Tensor one = forecast(back, window);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == doctest::Approx(all[i]).epsilon(1e-9));
  CHECK_THROWS_AS(forecast(back, Tensor({3, d.graph.n_nodes(), 2})), Error);

  std::ofstream(dir.file("bad.json")) << R"({"format": "something-else"})";
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.json")), Error);
  std::ofstream(dir.file("trunc.json")) << R"({"format": "pgdcrnn-checkpoint", "version": 1)";
  CHECK_THROWS_AS(load_checkpoint(dir.file("trunc.json")), Error);
}

TEST_CASE("evaluation excludes halos and matches a direct MAE") {
  const Tiny &t = tiny();
  TrainingConfig c = tiny_config();
  c.epochs = 1;
  const PartitionData d = prepare_partition(t.bundles[0], t.panel, {}, c);
  const Checkpoint ck = train_partition(d, c).checkpoint;
  const Tensor pred = forecast_all(ck, d.test);
  const Evaluation ev = evaluate_predictions(ck, d.test, pred);
  CHECK(ev.node_ids.size() == t.bundles[0].n_owned());
  const auto &fm = ev.features.at(0);
  CHECK(fm.feature == "speed");
  const std::size_t n_local = d.graph.n_nodes(), S = d.test.size(), T = 3;
  std::size_t owned = 0;
  double mean = 0.0;
  for (std::size_t n = 0; n < n_local; ++n) {
    if (d.halo[n]) continue;
    double err = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const Tensor target = d.test.sample_target(s);
      for (std::size_t h = 0; h < T; ++h) {
        const double truth = d.scaler.inverse(target[h * n_local + n], 0);
        err += std::abs(pred[(s * T + h) * n_local + n] - truth);
      }
    }
    err /= static_cast<double>(S * T);
    CHECK(fm.node_mae[owned] == doctest::Approx(err).epsilon(1e-10));
    mean += err;
    ++owned;
  }
  CHECK(fm.mean_mae == doctest::Approx(mean / static_cast<double>(owned)));
  const Evaluation persistence = evaluate_persistence(ck, d.test);
  CHECK(persistence.features.at(0).mean_mae > 0.0);
}

TEST_CASE("train_all isolates failures and writes reports") {
  TempDir dir("all");
  const Tiny &t = tiny();
  const TrainingConfig c = tiny_config();
  std::vector<PartitionData> parts;
  for (const auto &b : t.bundles) parts.push_back(prepare_partition(b, t.panel, {}, c));
  parts[1].valid.starts.clear();  // forces a data error in part 1 only
  const auto out = train_all(parts, c, 2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].checkpoint.has_value());
  CHECK_FALSE(out[1].checkpoint.has_value());
  CHECK_FALSE(out[1].report.ok());
  CHECK(max_wall_seconds(out) >= out[0].report.seconds);
  write_report_csv(dir.file("r.csv"), {out[0].report});
  write_summary_json(dir.file("s.json"), out);
  std::ifstream in(dir.file("s.json"));
  const auto j = nlohmann::json::parse(in);
  CHECK(j["partitions"].size() == 2);
  std::ifstream rc(dir.file("r.csv"));
  std::string header;
  std::getline(rc, header);
  CHECK(header.find("valid_loss") != std::string::npos);
}
