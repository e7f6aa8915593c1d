#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgdcrnn/data.hpp"
#include "pgdcrnn/model.hpp"
#include "pgdcrnn/partition.hpp"
#include "pgdcrnn/sparse.hpp"

namespace pgdcrnn {

enum class OutputMode { kSpeedOnly, kFlowOnly, kMultioutput };
const char *to_string(OutputMode m);
OutputMode output_mode_from_string(const std::string &s);
/// Panel feature names used as inputs and outputs for a mode.
std::vector<std::string> mode_features(OutputMode m);

struct TrainingConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double lr0 = 0.01;
  double lr_decay = 0.1;
  /// Epochs after which the learning rate is multiplied by lr_decay. Empty
  /// means 60% and 80% of `epochs`.
  std::vector<std::size_t> milestones;
  double max_grad_norm = 5.0;
  std::size_t patience = 10;
  double tau = 40.0;
  std::uint64_t seed = 1;
  OutputMode mode = OutputMode::kSpeedOnly;
  /// Stride between training windows (validation and test use stride 1).
  std::size_t train_stride = 1;
  /// Layers, units, K, T', T, filter and reverse transition. input_dim and
  /// output_dim are overwritten from `mode`.
  Seq2SeqConfig model;

  void validate() const;
  Seq2SeqConfig model_config() const;
  std::vector<std::size_t> effective_milestones() const;
  double learning_rate(std::size_t epoch) const;  // epoch counts from 1
};

/// Everything needed to run inference standalone.
struct Checkpoint {
  Seq2SeqConfig config;
  ParameterSet params;
  FeatureScaler scaler;
  std::vector<std::size_t> input_features;   // indices into scaler.features
  std::vector<std::size_t> output_features;
  std::vector<std::string> node_ids;         // local order
  std::vector<std::size_t> global_index;
  std::vector<bool> halo;
  SparseMatrix adjacency;                    // local, directed
  std::uint64_t iterations = 0;
  std::size_t best_epoch = 0;
  std::size_t part = 0;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::string &path);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
  double epsilon = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::size_t part = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid = 0.0;
  double seconds = 0.0;
  std::string error;  // empty on success

  bool ok() const noexcept { return error.empty(); }
  double initial_valid() const { return epochs.empty() ? 0.0 : epochs.front().valid_loss; }
};

/// One partition's normalized windows plus what a checkpoint must carry.
struct PartitionData {
  std::size_t part = 0;
  SensorGraph graph;
  std::vector<std::size_t> global_index;
  std::vector<bool> halo;
  FeatureScaler scaler;
  std::vector<std::size_t> input_features;
  std::vector<std::size_t> output_features;
  WindowedDataset train, valid, test;
};

/// Slices `panel` (imputed, all nodes) to the bundle, splits it, fits the
/// scaler on the training slice and windows every slice.
PartitionData prepare_partition(const SubgraphBundle &bundle, const TimeSeriesPanel &panel,
                                const SplitFractions &fractions, const TrainingConfig &config);
/// The whole graph as a single part with no halos.
PartitionData prepare_whole(const SensorGraph &graph, const TimeSeriesPanel &panel,
                            const SplitFractions &fractions, const TrainingConfig &config);

struct TrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

/// Minibatch Adam training with scheduled sampling, clipping, LR decay and
/// early stopping on the validation loss; keeps the best-validation
/// parameters. Throws a numerical error on divergence.
TrainResult train_partition(const PartitionData &data, const TrainingConfig &config);

struct PartitionOutcome {
  std::optional<Checkpoint> checkpoint;
  TrainReport report;
};

/// Trains every partition independently on up to `workers` threads. Part p
/// uses seed config.seed + p. Failures are recorded per partition.
std::vector<PartitionOutcome> train_all(const std::vector<PartitionData> &parts,
                                        const TrainingConfig &config, std::size_t workers);

/// Longest per-partition wall time.
double max_wall_seconds(const std::vector<PartitionOutcome> &outcomes);

/// Normalized-space predictions for windows [first, first + count) of
/// `windows` (already normalized): [count x T x N x Q].
Tensor predict_normalized(const Checkpoint &ckpt, const WindowedDataset &windows,
                          std::size_t first, std::size_t count, std::size_t batch_size = 64);

/// Forecast from one window [T' x N x P] in original units; returns
/// [T x N x Q] in original units.
Tensor forecast(const Checkpoint &ckpt, const Tensor &window);

/// Every window of a normalized dataset, inverse-transformed:
/// [S x T x N x Q] in original units.
Tensor forecast_all(const Checkpoint &ckpt, const WindowedDataset &windows,
                    std::size_t batch_size = 64);

struct FeatureMetrics {
  std::string feature;
  std::vector<double> node_mae;  // per owned node
  double mean_mae = 0.0;         // mean over owned nodes
  /// (minutes, MAE over the first minutes/5 steps).
  std::vector<std::pair<std::size_t, double>> horizon_mae;
};

struct Evaluation {
  std::vector<std::string> node_ids;  // owned nodes, local order
  std::vector<std::size_t> global_index;
  std::vector<FeatureMetrics> features;
};

/// MAE in original units over owned (non-halo) nodes. `predictions` is
/// [S x T x N x Q] in original units; targets come from `windows`
/// (normalized) through the checkpoint scaler.
Evaluation evaluate_predictions(const Checkpoint &ckpt, const WindowedDataset &windows,
                                const Tensor &predictions);
Evaluation evaluate(const Checkpoint &ckpt, const WindowedDataset &test_windows);
/// Repeats the last observed frame over the horizon.
Evaluation evaluate_persistence(const Checkpoint &ckpt, const WindowedDataset &test_windows);

void write_report_csv(const std::string &path, const std::vector<TrainReport> &reports);
void write_summary_json(const std::string &path, const std::vector<PartitionOutcome> &outcomes);

}  // namespace pgdcrnn
