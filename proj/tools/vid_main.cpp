// Command-line driver for the virtual-id pipeline.
//
//   vid <stage> --out DIR [--config FILE] [--seed N] [--threads N] [--strict]
//   vid dump-config [--config FILE]
//
// Stage errors print one JSON line to stderr and map to stable exit codes.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vid/common.hpp"
#include "vid/config.hpp"
#include "vid/pipeline.hpp"

namespace {

const std::vector<std::string> kStages = {
    "synth",          "ingest",        "graph",         "embed",
    "cluster",        "map",           "mine",          "train-category",
    "train-feature",  "eval-category", "eval-retrieval", "e2e",
    "dump-config"};

void print_error(const std::string& stage, vid::ErrorCode code,
                 const std::string& message) {
  nlohmann::ordered_json j;
  j["stage"] = stage;
  j["code"] = vid::error_code_name(code);
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual-id pipeline: co-click graphs, virtual-id clustering, "
               "sample mining, encoder training, and retrieval evaluation"};
  std::string stage;
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int threads = -1;
  bool strict = false;

  app.add_option("stage", stage, "pipeline stage to run")
      ->required()
      ->check(CLI::IsMember(kStages));
  app.add_option("--config", config_path, "pipeline config file (key = value lines)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output root directory");
  app.add_option("--seed", seed, "override run.seed")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads (0 = hardware default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--strict", strict, "abort on the first malformed input line");

  CLI11_PARSE(app, argc, argv);

  try {
    vid::PipelineConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        vid::fail(vid::ErrorCode::kMissingInput, "cannot open " + config_path);
      }
      vid::parse_config(in, cfg);
    }
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (threads >= 0) cfg.threads = threads;

    if (stage == "dump-config") {
      vid::dump_config(std::cout, cfg);
      return 0;
    }
    if (out_dir.empty()) {
      vid::fail(vid::ErrorCode::kInvalidArgs, "--out is required for stage " + stage);
    }
    vid::run_stage(stage, cfg, std::filesystem::path(out_dir), strict, cfg.threads);
    return 0;
  } catch (const vid::Error& e) {
    print_error(stage, e.code(), e.what());
    return vid::error_exit_code(e.code());
  } catch (const std::exception& e) {
    print_error(stage, vid::ErrorCode::kIoError, e.what());
    return vid::error_exit_code(vid::ErrorCode::kIoError);
  }
}
