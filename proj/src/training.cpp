#include "pgdcrnn/training.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "pgdcrnn/csv.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/optim.hpp"
#include "pgdcrnn/tape.hpp"

namespace pgdcrnn {

const char *to_string(OutputMode m) {
  switch (m) {
    case OutputMode::kSpeedOnly: return "speed_only";
    case OutputMode::kFlowOnly: return "flow_only";
    case OutputMode::kMultioutput: return "multioutput";
  }
  return "?";
}

OutputMode output_mode_from_string(const std::string &s) {
  if (s == "speed_only") return OutputMode::kSpeedOnly;
  if (s == "flow_only") return OutputMode::kFlowOnly;
  if (s == "multioutput") return OutputMode::kMultioutput;
  throw_config("mode must be speed_only, flow_only or multioutput, got '" + s + "'");
}

std::vector<std::string> mode_features(OutputMode m) {
  switch (m) {
    case OutputMode::kSpeedOnly: return {"speed"};
    case OutputMode::kFlowOnly: return {"flow"};
    case OutputMode::kMultioutput: return {"speed", "flow"};
  }
  return {};
}

void TrainingConfig::validate() const {
  if (batch_size < 1 || epochs < 1 || train_stride < 1) {
    throw_config("batch_size, epochs and train_stride must be >= 1");
  }
  if (!(lr0 >= 0.0) || !(lr_decay > 0.0) || !(max_grad_norm > 0.0) || !(tau > 0.0)) {
    throw_config("lr0 must be >= 0; lr_decay, max_grad_norm and tau must be > 0");
  }
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] < 1 || (i > 0 && milestones[i] <= milestones[i - 1])) {
      throw_config("milestones must be positive and strictly increasing");
    }
  }
  model_config().validate();
}

Seq2SeqConfig TrainingConfig::model_config() const {
  Seq2SeqConfig c = model;
  c.input_dim = mode_features(mode).size();
  c.output_dim = c.input_dim;
  return c;
}

std::vector<std::size_t> TrainingConfig::effective_milestones() const {
  if (!milestones.empty()) return milestones;
  std::vector<std::size_t> out;
  for (double frac : {0.6, 0.8}) {
    const auto m = static_cast<std::size_t>(std::llround(frac * static_cast<double>(epochs)));
    if (m >= 1 && (out.empty() || m > out.back())) out.push_back(m);
  }
  return out;
}

double TrainingConfig::learning_rate(std::size_t epoch) const {
  double lr = lr0;
  for (std::size_t m : effective_milestones()) {
    if (epoch > m) lr *= lr_decay;
  }
  return lr;
}

namespace {

std::vector<std::size_t> feature_indices(const TimeSeriesPanel &panel, OutputMode mode) {
  std::vector<std::size_t> idx;
  for (const auto &name : mode_features(mode)) idx.push_back(panel.feature_index(name));
  return idx;
}

PartitionData prepare_from_panel(std::size_t part, SensorGraph graph,
                                 std::vector<std::size_t> global_index, std::vector<bool> halo,
                                 const TimeSeriesPanel &local, const SplitFractions &fractions,
                                 const TrainingConfig &config) {
  config.validate();
  if (local.missing_count() != 0) throw_data("panel must be imputed before training");
  const Seq2SeqConfig mc = config.model_config();
  const PanelSplit s = split(local, fractions, mc.look_back + mc.horizon);
  PartitionData d;
  d.part = part;
  d.graph = std::move(graph);
  d.global_index = std::move(global_index);
  d.halo = std::move(halo);
  d.scaler = fit_scaler(s.train);
  d.input_features = feature_indices(local, config.mode);
  d.output_features = d.input_features;
  d.train = make_windows(transform(s.train, d.scaler), mc.look_back, mc.horizon,
                         config.train_stride, d.input_features, d.output_features);
  d.valid = make_windows(transform(s.valid, d.scaler), mc.look_back, mc.horizon, 1,
                         d.input_features, d.output_features);
  d.test = make_windows(transform(s.test, d.scaler), mc.look_back, mc.horizon, 1,
                        d.input_features, d.output_features);
  return d;
}

}  // namespace

PartitionData prepare_partition(const SubgraphBundle &bundle, const TimeSeriesPanel &panel,
                                const SplitFractions &fractions, const TrainingConfig &config) {
  return prepare_from_panel(bundle.part, bundle.graph, bundle.local_to_global, bundle.halo,
                            slice_for_partition(panel, bundle), fractions, config);
}

PartitionData prepare_whole(const SensorGraph &graph, const TimeSeriesPanel &panel,
                            const SplitFractions &fractions, const TrainingConfig &config) {
  std::vector<std::size_t> cols, global(graph.nodes.size());
  for (const auto &m : graph.nodes) cols.push_back(panel.node_index(m.sensor_id));
  std::iota(global.begin(), global.end(), 0);
  return prepare_from_panel(0, graph, std::move(global), std::vector<bool>(graph.nodes.size(), false),
                            panel.select_nodes(cols), fractions, config);
}

namespace {

struct BatchResult {
  double loss = 0.0;
  std::vector<Tensor> grads;
  std::vector<Tensor> predictions;  // T frames [N*B x Q]
};

BatchResult run_batch(const DiffusionSupports &supports, const ParameterSet &params,
                      const Seq2SeqConfig &config, OutputMode mode, const WindowedDataset &w,
                      const std::vector<std::size_t> &batch, double eps, std::mt19937_64 &rng,
                      bool want_grads, bool want_loss) {
  Tape tape;
  const BoundParameters bound = bind_parameters(tape, params, config, want_grads);
  std::vector<Var> inputs, targets;
  for (std::size_t t = 0; t < config.look_back; ++t) {
    inputs.push_back(tape.constant(w.input_frame(batch, t)));
  }
  if (want_loss || eps > 0.0) {
    for (std::size_t t = 0; t < config.horizon; ++t) {
      targets.push_back(tape.constant(w.target_frame(batch, t)));
    }
  }
  const std::vector<Var> preds =
      forward(tape, supports, inputs, targets, bound, config, batch.size(), eps, rng);
  BatchResult r;
  if (want_loss) {
    const Var loss = mode == OutputMode::kMultioutput ? loss_multi(tape, preds, targets)
                                                       : loss_mae(tape, preds, targets);
    r.loss = tape.value(loss)[0];
    if (!std::isfinite(r.loss)) throw_numerical("numerical divergence: non-finite loss");
    if (want_grads) {
      tape.backward(loss);
      for (Var v : bound.vars) r.grads.push_back(tape.grad(v));
    }
  }
  if (!want_grads) {
    for (Var p : preds) r.predictions.push_back(tape.value(p));
  }
  return r;
}

std::vector<std::vector<std::size_t>> contiguous_batches(std::size_t n, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    std::vector<std::size_t> b;
    for (std::size_t j = i; j < std::min(n, i + batch_size); ++j) b.push_back(j);
    out.push_back(std::move(b));
  }
  return out;
}

double dataset_loss(const DiffusionSupports &supports, const ParameterSet &params,
                    const Seq2SeqConfig &config, OutputMode mode, const WindowedDataset &w,
                    std::size_t batch_size) {
  std::mt19937_64 unused(0);
  double total = 0.0;
  for (const auto &b : contiguous_batches(w.size(), batch_size)) {
    total += run_batch(supports, params, config, mode, w, b, 0.0, unused, false, true).loss *
             static_cast<double>(b.size());
  }
  return total / static_cast<double>(w.size());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainResult train_partition(const PartitionData &data, const TrainingConfig &config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Seq2SeqConfig mc = config.model_config();
  if (data.train.size() == 0 || data.valid.size() == 0) throw_data("no training or validation windows");
  const DiffusionSupports supports = build_supports(data.graph, mc.filter, mc.reverse);

  ParameterSet params = init_parameters(mc, config.seed);
  std::vector<Tensor> values = params.values();
  AdamState adam = AdamState::zeros_like(values);
  std::mt19937_64 shuffle_rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  std::mt19937_64 coin_rng(config.seed * 0xC2B2AE3D27D4EB4FULL + 2);

  TrainResult result;
  TrainReport &rep = result.report;
  rep.part = data.part;
  EpochRecord e0;
  e0.train_loss = std::numeric_limits<double>::quiet_NaN();
  e0.valid_loss = dataset_loss(supports, params, mc, config.mode, data.valid, config.batch_size);
  e0.lr = config.learning_rate(1);
  e0.epsilon = sampling_probability(0, config.tau);
  e0.seconds = seconds_since(t0);
  rep.epochs.push_back(e0);
  rep.best_valid = e0.valid_loss;
  ParameterSet best = params;
  std::size_t since_best = 0;
  std::uint64_t iteration = 0;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0, eps = 0.0;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(i),
                                     order.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(order.size(), i + config.batch_size)));
      eps = sampling_probability(iteration, config.tau);
      BatchResult br;
      try {
        br = run_batch(supports, params, mc, config.mode, data.train, batch, eps, coin_rng, true, true);
      } catch (const Error &err) {
        if (err.kind() != ErrorKind::kNumerical) throw;
        throw_numerical(std::string(err.what()) + " (epoch " + std::to_string(epoch) +
                        ", iteration " + std::to_string(iteration) + ")");
      }
      total += br.loss * static_cast<double>(batch.size());
      clip_by_global_norm(br.grads, config.max_grad_norm);
      adam_step(values, br.grads, adam, lr);
      params.set_values(values);
      ++iteration;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    rec.valid_loss = dataset_loss(supports, params, mc, config.mode, data.valid, config.batch_size);
    rec.lr = lr;
    rec.epsilon = eps;
    rec.seconds = seconds_since(t0);
    rep.epochs.push_back(rec);
    if (rec.valid_loss < rep.best_valid) {
      rep.best_valid = rec.valid_loss;
      rep.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  rep.seconds = seconds_since(t0);

  Checkpoint &ck = result.checkpoint;
  ck.config = mc;
  ck.params = std::move(best);
  ck.scaler = data.scaler;
  ck.input_features = data.input_features;
  ck.output_features = data.output_features;
  for (const auto &m : data.graph.nodes) ck.node_ids.push_back(m.sensor_id);
  ck.global_index = data.global_index;
  ck.halo = data.halo;
  ck.adjacency = data.graph.adjacency;
  ck.iterations = iteration;
  ck.best_epoch = rep.best_epoch;
  ck.part = data.part;
  return result;
}

std::vector<PartitionOutcome> train_all(const std::vector<PartitionData> &parts,
                                        const TrainingConfig &config, std::size_t workers) {
  std::vector<PartitionOutcome> out(parts.size());
  if (parts.empty()) return out;
  workers = std::clamp<std::size_t>(workers, 1, parts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&](bool single_threaded_kernels) {
    if (single_threaded_kernels) omp_set_num_threads(1);
    for (std::size_t i = next++; i < parts.size(); i = next++) {
      TrainingConfig c = config;
      c.seed = config.seed + parts[i].part;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        TrainResult r = train_partition(parts[i], c);
        out[i].checkpoint = std::move(r.checkpoint);
        out[i].report = std::move(r.report);
      } catch (const std::exception &e) {
        out[i].report = TrainReport{};
        out[i].report.part = parts[i].part;
        out[i].report.error = e.what();
        out[i].report.seconds = seconds_since(t0);
      }
    }
  };
  if (workers == 1) {
    work(false);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, true);
    for (auto &t : pool) t.join();
  }
  return out;
}

double max_wall_seconds(const std::vector<PartitionOutcome> &outcomes) {
  double m = 0.0;
  for (const auto &o : outcomes) m = std::max(m, o.report.seconds);
  return m;
}

namespace {

void check_windows(const Checkpoint &ckpt, const WindowedDataset &w) {
  if (w.n_nodes() != ckpt.node_ids.size() || w.look_back != ckpt.config.look_back ||
      w.horizon != ckpt.config.horizon || w.input_features.size() != ckpt.config.input_dim ||
      w.output_features.size() != ckpt.config.output_dim) {
    throw_config("windows do not match the checkpoint configuration");
  }
}

}  // namespace

Tensor predict_normalized(const Checkpoint &ckpt, const WindowedDataset &windows,
                          std::size_t first, std::size_t count, std::size_t batch_size) {
  check_windows(ckpt, windows);
  if (first + count > windows.size()) throw_config("window range out of bounds");
  const Seq2SeqConfig &mc = ckpt.config;
  const std::size_t N = windows.n_nodes(), T = mc.horizon, Q = mc.output_dim;
  const DiffusionSupports supports = build_supports(ckpt.adjacency, mc.filter, mc.reverse);
  Tensor out({count, T, N, Q});
  std::mt19937_64 unused(0);
  for (const auto &rel : contiguous_batches(count, std::max<std::size_t>(batch_size, 1))) {
    std::vector<std::size_t> batch;
    for (std::size_t r : rel) batch.push_back(first + r);
    const BatchResult br = run_batch(supports, ckpt.params, mc, OutputMode::kSpeedOnly, windows,
                                     batch, 0.0, unused, false, false);
    const std::size_t B = batch.size();
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor &f = br.predictions[t];
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t q = 0; q < Q; ++q) {
            out[((rel[b] * T + t) * N + n) * Q + q] = f[(n * B + b) * Q + q];
          }
        }
      }
    }
  }
  return out;
}

Tensor forecast(const Checkpoint &ckpt, const Tensor &window) {
  const Seq2SeqConfig &mc = ckpt.config;
  const std::size_t N = ckpt.node_ids.size();
  if (window.shape() != Shape{mc.look_back, N, mc.input_dim}) {
    throw_config("forecast window has shape " + shape_string(window.shape()) + ", expected " +
                 shape_string({mc.look_back, N, mc.input_dim}));
  }
  const Tensor z = transform(window, ckpt.scaler, ckpt.input_features);
  // A one-sample dataset whose panel holds the window and a blank horizon.
  std::vector<std::string> features = ckpt.scaler.features;
  TimeSeriesPanel panel(0, mc.look_back + mc.horizon, ckpt.node_ids, features);
  for (std::size_t t = 0; t < mc.look_back; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t p = 0; p < mc.input_dim; ++p) {
        panel.at(t, n, ckpt.input_features[p]) = z[(t * N + n) * mc.input_dim + p];
      }
    }
  }
  WindowedDataset w;
  w.panel = std::move(panel);
  w.look_back = mc.look_back;
  w.horizon = mc.horizon;
  w.starts = {0};
  w.input_features = ckpt.input_features;
  w.output_features = ckpt.output_features;
  const Tensor pred = predict_normalized(ckpt, w, 0, 1);
  return inverse_transform(pred, ckpt.scaler, ckpt.output_features)
      .reshaped({mc.horizon, N, mc.output_dim});
}

Tensor forecast_all(const Checkpoint &ckpt, const WindowedDataset &windows, std::size_t batch_size) {
  const Tensor z = predict_normalized(ckpt, windows, 0, windows.size(), batch_size);
  return inverse_transform(z, ckpt.scaler, ckpt.output_features);
}

Evaluation evaluate_predictions(const Checkpoint &ckpt, const WindowedDataset &windows,
                                const Tensor &predictions) {
  check_windows(ckpt, windows);
  const std::size_t S = windows.size(), T = ckpt.config.horizon, N = windows.n_nodes(),
                    Q = ckpt.config.output_dim;
  if (predictions.shape() != Shape{S, T, N, Q}) {
    throw_config("predictions have shape " + shape_string(predictions.shape()) + ", expected " +
                 shape_string({S, T, N, Q}));
  }
  Evaluation ev;
  std::vector<std::size_t> owned;
  for (std::size_t n = 0; n < N; ++n) {
    if (n < ckpt.halo.size() && ckpt.halo[n]) continue;
    owned.push_back(n);
    ev.node_ids.push_back(ckpt.node_ids[n]);
    ev.global_index.push_back(n < ckpt.global_index.size() ? ckpt.global_index[n] : n);
  }
  // abs_err[(t * N + n) * Q + q] summed over samples.
  std::vector<double> abs_err(T * N * Q, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const Tensor y = inverse_transform(windows.sample_target(s), ckpt.scaler, ckpt.output_features);
    for (std::size_t i = 0; i < T * N * Q; ++i) {
      abs_err[i] += std::abs(predictions[s * T * N * Q + i] - y[i]);
    }
  }
  for (std::size_t q = 0; q < Q; ++q) {
    FeatureMetrics fm;
    fm.feature = ckpt.scaler.features.at(ckpt.output_features[q]);
    for (std::size_t n : owned) {
      double sum = 0.0;
      for (std::size_t t = 0; t < T; ++t) sum += abs_err[(t * N + n) * Q + q];
      fm.node_mae.push_back(sum / static_cast<double>(S * T));
    }
    if (!owned.empty()) {
      fm.mean_mae = std::accumulate(fm.node_mae.begin(), fm.node_mae.end(), 0.0) /
                    static_cast<double>(owned.size());
    }
    for (std::size_t minutes : {15u, 30u, 60u}) {
      const std::size_t steps = minutes * 60 / static_cast<std::size_t>(kTickSeconds);
      if (steps > T || owned.empty()) continue;
      double sum = 0.0;
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t n : owned) sum += abs_err[(t * N + n) * Q + q];
      }
      fm.horizon_mae.emplace_back(minutes, sum / static_cast<double>(S * steps * owned.size()));
    }
    ev.features.push_back(std::move(fm));
  }
  return ev;
}

Evaluation evaluate(const Checkpoint &ckpt, const WindowedDataset &test_windows) {
  return evaluate_predictions(ckpt, test_windows, forecast_all(ckpt, test_windows));
}

Evaluation evaluate_persistence(const Checkpoint &ckpt, const WindowedDataset &w) {
  check_windows(ckpt, w);
  const std::size_t S = w.size(), T = ckpt.config.horizon, N = w.n_nodes(),
                    Q = ckpt.config.output_dim, L = ckpt.config.look_back;
  Tensor pred({S, T, N, Q});
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t q = 0; q < Q; ++q) {
      const std::size_t f = ckpt.output_features[q];
      for (std::size_t n = 0; n < N; ++n) {
        const double last = ckpt.scaler.inverse(w.panel.at(w.starts[s] + L - 1, n, f), f);
        for (std::size_t t = 0; t < T; ++t) pred[((s * T + t) * N + n) * Q + q] = last;
      }
    }
  }
  return evaluate_predictions(ckpt, w, pred);
}

void write_report_csv(const std::string &path, const std::vector<TrainReport> &reports) {
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << "partition,epoch,train_loss,valid_loss,lr,epsilon,seconds\n";
  for (const auto &r : reports) {
    for (const auto &e : r.epochs) {
      out << r.part << ',' << e.epoch << ','
          << (std::isfinite(e.train_loss) ? csv::format_double(e.train_loss) : "") << ','
          << csv::format_double(e.valid_loss) << ',' << csv::format_double(e.lr) << ','
          << csv::format_double(e.epsilon) << ',' << csv::format_double(e.seconds) << '\n';
    }
  }
}

void write_summary_json(const std::string &path, const std::vector<PartitionOutcome> &outcomes) {
  nlohmann::json parts = nlohmann::json::array();
  double total = 0.0;
  for (const auto &o : outcomes) {
    const TrainReport &r = o.report;
    total += r.seconds;
    parts.push_back({{"part", r.part},
                     {"ok", r.ok()},
                     {"error", r.error},
                     {"epochs", r.epochs.empty() ? 0 : r.epochs.size() - 1},
                     {"best_epoch", r.best_epoch},
                     {"initial_valid", r.initial_valid()},
                     {"best_valid", r.best_valid},
                     {"seconds", r.seconds}});
  }
  nlohmann::json j = {{"partitions", parts},
                      {"max_wall_seconds", max_wall_seconds(outcomes)},
                      {"total_seconds", total}};
  std::ofstream out(path);
  if (!out) throw_data("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace pgdcrnn
