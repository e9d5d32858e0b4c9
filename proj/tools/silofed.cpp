// Copyright 2026 The SiloFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "silofed/errors.hpp"
#include "silofed/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kPartialFailure = 3;

std::int64_t seed_offset_from_env() {
  const char* raw = std::getenv("SILOFED_SEED_OFFSET");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    return std::stoll(raw);
  } catch (const std::exception&) {
    throw silofed::FormatError("SILOFED_SEED_OFFSET must be an integer, got '" +
                               std::string(raw) + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SiloFed: federated learning simulator under silo-specific sample-level DP"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int workers = 0;
  bool report_intermediate = false;
  CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment config");
  run_cmd->add_option("config", config_path, "experiment JSON file")->required();
  run_cmd->add_option("--out", out_dir, "output directory for CSV files");
  run_cmd->add_option("--workers", workers, "worker threads (0 = hardware)");
  run_cmd->add_flag("--report-intermediate", report_intermediate,
                    "record intermediate rounds, not just the final one");

  std::string csv_path;
  bool minimize = false;
  CLI::App* summarize_cmd = app.add_subcommand("summarize", "print per-method best results");
  summarize_cmd->add_option("csv", csv_path, "results CSV produced by run")->required();
  summarize_cmd->add_flag("--minimize", minimize,
                          "pick lowest test metric (regression) instead of highest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      silofed::experiment::ExperimentConfig config =
          silofed::experiment::parse_config(config_path);
      if (report_intermediate) config.report_intermediate = true;
      const auto outcome = silofed::experiment::run_sweep(config, out_dir, workers,
                                                          seed_offset_from_env(), std::cerr);
      std::cout << "wrote " << outcome.csv_path << "\n";
      if (outcome.failures > 0) {
        std::cerr << outcome.failures << " sweep point(s) failed\n";
        return kPartialFailure;
      }
      return kOk;
    }
    silofed::experiment::emit_summary(csv_path, std::cout, !minimize);
    return kOk;
  } catch (const silofed::FormatError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const silofed::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartialFailure;
  }
}
