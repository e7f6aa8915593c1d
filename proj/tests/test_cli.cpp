#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "pgdcrnn/error.hpp"
#include "pgdcrnn/pipeline.hpp"
#include "support.hpp"

using namespace pgdcrnn;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string &args) {
  const std::string cmd = std::string(PGDCRNN_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE *pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

nlohmann::json last_json(const std::string &out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '{') last = line;
  }
  return nlohmann::json::parse(last);
}

}  // namespace

TEST_CASE("ini parsing and settings") {
  const auto kv = parse_ini("# comment\n[graph]\nk_nn = 5 ; trailing\n\n[training]\nmode=multioutput\n", "x");
  CHECK(kv.at("graph.k_nn") == "5");
  CHECK(kv.at("training.mode") == "multioutput");
  CHECK_THROWS_AS(parse_ini("[graph\nk = 1\n", "x"), Error);
  CHECK_THROWS_AS(parse_ini("[a]\nnot a setting\n", "x"), Error);

  PipelineConfig c;
  apply_setting(c, "partition.k", "4");
  apply_setting(c, "graph.threshold_on", "weight");
  apply_setting(c, "model.filter", "dual_random_walk");
  apply_setting(c, "training.milestones", "3,7");
  apply_setting(c, "partition.overlap", "false");
  CHECK(c.partition.k == 4);
  CHECK(c.kernel.threshold_on == ThresholdOn::kWeight);
  CHECK(c.training.model.filter == FilterType::kDualRandomWalk);
  CHECK(c.training.milestones == std::vector<std::size_t>{3, 7});
  CHECK_FALSE(c.overlap);
  CHECK_THROWS_AS(apply_setting(c, "graph.bogus", "1"), Error);
  CHECK_THROWS_AS(apply_setting(c, "partition.k", "-2"), Error);
  CHECK_THROWS_AS(apply_setting(c, "training.lr0", "fast"), Error);
  CHECK_THROWS_AS(apply_setting(c, "partition.overlap", "maybe"), Error);

  // Every listed setting can be applied back unchanged.
  PipelineConfig round;
  for (const auto &[k, v] : config_settings(c)) apply_setting(round, k, v);
  CHECK(config_settings(round) == config_settings(c));
}

TEST_CASE("exit codes by error kind") {
  CHECK(exit_code_for(Error(ErrorKind::kConfig, "x")) == 2);
  CHECK(exit_code_for(Error(ErrorKind::kData, "x")) == 3);
  CHECK(exit_code_for(Error(ErrorKind::kNumerical, "x")) == 4);
}

TEST_CASE("cli pipeline end to end") {
  TempDir dir("cli");
  const std::string out = dir.file("out");
  const std::string cfg = dir.file("run.ini");
  std::ofstream(cfg) << "[paths]\noutput_dir = " << out << "\n"
                     << "[synth]\nnodes = 8\ndays = 3\nmissing_rate = 0.02\n"
                     << "[graph]\nk_nn = 5\n"
                     << "[partition]\nk = 2\n"
                     << "[model]\nlayers = 1\nunits = 4\nlook_back = 4\nhorizon = 3\n"
                     << "[training]\nepochs = 1\nbatch_size = 32\ntrain_stride = 6\nmode = multioutput\n";
  const std::string c = "-c " + cfg;

  auto r = run_cli("synth " + c);
  CHECK(r.code == 0);
  CHECK(last_json(r.out)["nodes"] == 8);
  r = run_cli("build-graph " + c);
  CHECK(r.code == 0);
  CHECK(last_json(r.out)["edges"].get<int>() > 0);
  r = run_cli("partition " + c);
  CHECK(r.code == 0);
  CHECK(last_json(r.out)["k"] == 2);
  CHECK(fs::exists(out + "/bundles/part_1/nodes.csv"));
  r = run_cli("train " + c + " -w 2");
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/checkpoints/part_0.json"));
  CHECK(fs::exists(out + "/train_report.csv"));
  r = run_cli("evaluate " + c);
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/evaluation.csv"));
  r = run_cli("analyze " + c);
  CHECK(r.code == 0);
  CHECK(fs::exists(out + "/analysis/cart.json"));
  CHECK(fs::exists(out + "/analysis/fundamental_diagram.csv"));
  r = run_cli("forecast " + c + " --checkpoint " + out + "/checkpoints/part_0.json --input " + out +
              "/timeseries.csv --output " + dir.file("fc.csv"));
  CHECK(r.code == 0);
  CHECK(fs::exists(dir.file("fc.csv")));
  r = run_cli("show-config " + c + " -s partition.k=3");
  CHECK(r.code == 0);
  CHECK(r.out.find("partition.k = 3") != std::string::npos);

  // Error classes map to exit codes.
  r = run_cli("train " + c + " -s training.lr0=-1");
  CHECK(r.code == 2);
  CHECK(last_json(r.out)["status"] == "error");
  r = run_cli("build-graph -s paths.output_dir=" + dir.file("nowhere"));
  CHECK(r.code == 2);
  std::ofstream(dir.file("bad.csv")) << "timestamp,sensor_id,speed,flow\nnot-a-time,S000,1,2\n";
  r = run_cli("forecast " + c + " --checkpoint " + out + "/checkpoints/part_0.json --input " +
              dir.file("bad.csv"));
  CHECK(r.code == 3);
  r = run_cli("frobnicate");
  CHECK(r.code == 2);
  // A weekend without noise has constant speed: the scaler is degenerate.
  const std::string flat = c + " -s paths.output_dir=" + dir.file("flat") +
                           " -s synth.start=2018-01-06T00:00:00 -s synth.days=2 -s synth.speed_noise=0";
  REQUIRE(run_cli("synth " + flat).code == 0);
  REQUIRE(run_cli("build-graph " + flat).code == 0);
  REQUIRE(run_cli("partition " + flat).code == 0);
  r = run_cli("train " + flat);
  CHECK(r.code == 4);
}
