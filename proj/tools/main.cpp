#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgdcrnn/pipeline.hpp"

int main(int argc, char **argv) {
  CLI::App app{"Partitioned diffusion-convolutional recurrent traffic forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t workers = 1;
  std::string checkpoint, input, output = "forecast.csv";

  auto common = [&](CLI::App *cmd) {
    cmd->add_option("-c,--config", config_path, "Pipeline config file");
    cmd->add_option("-s,--set", overrides, "Override a setting: section.key=value");
  };
  CLI::App *synth = app.add_subcommand("synth", "Generate a synthetic sensor network and time series");
  CLI::App *build = app.add_subcommand("build-graph", "Build the thresholded Gaussian-kernel graph");
  CLI::App *part = app.add_subcommand("partition", "Partition the graph and write per-part bundles");
  CLI::App *train = app.add_subcommand("train", "Train one model per partition");
  CLI::App *eval = app.add_subcommand("evaluate", "Per-node test MAE (halo nodes excluded)");
  CLI::App *fc = app.add_subcommand("forecast", "Forecast from the most recent window");
  CLI::App *analyze = app.add_subcommand("analyze", "Error classes, CART factors, MAE box stats");
  CLI::App *show = app.add_subcommand("show-config", "Print every effective setting");
  for (CLI::App *cmd : {synth, build, part, train, eval, fc, analyze, show}) common(cmd);
  train->add_option("-w,--workers", workers, "Partitions trained concurrently")->check(CLI::PositiveNumber);
  fc->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  fc->add_option("--input", input, "Time series CSV holding at least look_back ticks")->required();
  fc->add_option("--output", output, "Forecast CSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const pgdcrnn::PipelineConfig config = pgdcrnn::load_pipeline_config(config_path, overrides);
    std::string line;
    if (name == "synth") line = pgdcrnn::cmd_synth(config);
    if (name == "build-graph") line = pgdcrnn::cmd_build_graph(config);
    if (name == "partition") line = pgdcrnn::cmd_partition(config);
    if (name == "train") line = pgdcrnn::cmd_train(config, workers);
    if (name == "evaluate") line = pgdcrnn::cmd_evaluate(config);
    if (name == "forecast") line = pgdcrnn::cmd_forecast(config, checkpoint, input, output);
    if (name == "analyze") line = pgdcrnn::cmd_analyze(config);
    if (name == "show-config") {
      for (const auto &[k, v] : pgdcrnn::config_settings(config)) std::cout << k << " = " << v << '\n';
      return 0;
    }
    std::cout << line << std::endl;
    return 0;
  } catch (const std::exception &e) {
    const int code = pgdcrnn::exit_code_for(e);
    std::cout << R"({"command":")" << name << R"(","status":"error","exit_code":)" << code << "}"
              << std::endl;
    std::cerr << "error: " << e.what() << std::endl;
    return code;
  }
}
