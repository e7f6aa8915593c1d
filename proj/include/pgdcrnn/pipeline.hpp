#pragma once

#include <map>
#include <string>
#include <vector>

#include "pgdcrnn/data.hpp"
#include "pgdcrnn/graph.hpp"
#include "pgdcrnn/partition.hpp"
#include "pgdcrnn/training.hpp"

namespace pgdcrnn {

struct PipelineConfig {
  // [paths]; empty paths default to files inside output_dir.
  std::string metadata;
  std::string timeseries;
  std::string distances;  // optional `from_id,to_id,miles`
  std::string output_dir = "out";

  // [graph]
  std::size_t k_nn = 30;
  KernelConfig kernel;

  // [partition]
  PartitionOptions partition;  // observer unused
  bool overlap = true;
  OverlapOptions halo;

  // [data]
  ImputeMethod impute = ImputeMethod::kTemporalMean;
  SplitFractions fractions;

  // [model] and [training]
  TrainingConfig training;

  // [synth]
  SyntheticScenario synth;

  std::string metadata_path() const;
  std::string timeseries_path() const;
  std::string graph_path() const;
  std::string assignment_path() const;
  std::string bundles_dir() const;
  std::string checkpoint_path(std::size_t part) const;

  void validate() const;
};

/// Flat `key = value` lines under `[section]` headers; '#' and ';' start
/// comments. Keys are addressed as `section.key`.
std::map<std::string, std::string> parse_ini(const std::string &text, const std::string &origin);

/// Applies one `section.key` setting; unknown keys are config errors.
void apply_setting(PipelineConfig &config, const std::string &key, const std::string &value);
PipelineConfig load_pipeline_config(const std::string &path,
                                    const std::vector<std::string> &overrides);
/// Every setting in `section.key = value` form, in a stable order.
std::vector<std::pair<std::string, std::string>> config_settings(const PipelineConfig &config);

/// Each command returns its one-line JSON summary.
std::string cmd_synth(const PipelineConfig &config);
std::string cmd_build_graph(const PipelineConfig &config);
std::string cmd_partition(const PipelineConfig &config);
std::string cmd_train(const PipelineConfig &config, std::size_t workers);
std::string cmd_evaluate(const PipelineConfig &config);
/// Forecast from the last look_back ticks of `input_csv` (long format) for
/// the checkpoint's nodes; writes `output_csv`.
std::string cmd_forecast(const PipelineConfig &config, const std::string &checkpoint_path,
                         const std::string &input_csv, const std::string &output_csv);
std::string cmd_analyze(const PipelineConfig &config);

/// Panel read in graph node order, imputed with the training-slice pool.
TimeSeriesPanel load_imputed_panel(const PipelineConfig &config, const SensorGraph &graph);

/// Process exit code for an exception: 2 config, 3 data, 4 numerical.
int exit_code_for(const std::exception &e);

}  // namespace pgdcrnn
