// Copyright 2026 The SBC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbc/errors.hpp"
#include "sbc/harness.hpp"

namespace {

int run_command(const std::string& config, const std::optional<std::uint64_t>& seed,
                const std::string& out, const std::string& grid) {
  sbc::ExperimentSpec spec = sbc::load_experiment(config);
  if (seed) spec.seed = *seed;
  if (!out.empty()) spec.output_dir = out;
  if (!grid.empty()) sbc::apply_grid_flag(spec, grid);
  const auto result = sbc::run_experiment(spec, std::cout);
  std::cout << "wrote " << (spec.output_dir / "grid_summary.csv").string() << '\n';
  return result.ok ? 0 : 1;
}

int table1_command(const std::string& config) {
  nlohmann::json j = nlohmann::json::object();
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw sbc::ConfigError("cannot open config file " + config);
    try {
      j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw sbc::ConfigError("config " + config + ": " + e.what());
    }
  }
  sbc::print_table1(sbc::table1_report(sbc::parse_table1(j)), std::cout);
  return 0;
}

int diagonals_command(const std::string& summary) {
  const auto report = sbc::diagonal_report(sbc::read_grid_summary(summary));
  sbc::print_diagonal_report(report, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse binary compression for distributed SGD"};
  app.require_subcommand(1);

  std::string config, out, grid, summary, table_config;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "run a grid of (n, p) training cells");
  run->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the master seed");
  run->add_option("--out", out, "override the output directory");
  run->add_option("--grid", grid, "cells as NxP list, e.g. 1x1,10x0.01");

  auto* report = app.add_subcommand("report", "offline reports");
  report->require_subcommand(1);
  auto* table1 = report->add_subcommand("table1", "bits per parameter and compression rate");
  table1->add_option("--config", table_config, "JSON with a 'table1' row list");
  auto* diagonals = report->add_subcommand("diagonals", "error grouped by total sparsity");
  diagonals->add_option("--summary", summary, "grid_summary.csv")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config, seed, out, grid);
    if (*table1) return table1_command(table_config);
    if (*diagonals) return diagonals_command(summary);
  } catch (const sbc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
