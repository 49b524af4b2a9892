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
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sbc/dsgd.hpp"

namespace sbc {

struct DataConfig {
  DatasetSpec synthetic;
  std::optional<std::filesystem::path> idx_images;
  std::optional<std::filesystem::path> idx_labels;
  double validation_fraction = 0.2;
};

// One (n, p) point of the temporal x gradient sparsity plane.
struct GridCell {
  std::size_t n = 1;
  double p = 1.0;
};

struct ExperimentSpec {
  DataConfig data;
  ModelSpec model;  // input/output dims are filled from the data
  std::optional<std::size_t> model_outputs;
  OptimizerConfig optimizer;
  RoundConfig rounds;  // local_iterations and rounds are set per cell
  CompressionStrategy compression;
  // N = n * T, held fixed across cells.
  std::uint64_t total_local_iterations = 1000;
  std::vector<std::size_t> grid_n;
  std::vector<double> grid_p;
  std::vector<GridCell> cells;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;
  std::size_t parallel_cells = 1;
  bool parallel_clients = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Field names and meanings are documented in README.md.
ExperimentSpec parse_experiment(const nlohmann::json& config);
ExperimentSpec load_experiment(const std::filesystem::path& path);

// "NxP" pairs separated by commas, e.g. "1x1,10x0.01". Sets cells and the
// matching axes.
void apply_grid_flag(ExperimentSpec& spec, const std::string& flag);
std::vector<GridCell> parse_grid_flag(const std::string& flag);

std::string cell_file_name(const GridCell& cell);

// Per-cell run configuration with the iteration budget applied.
RunConfig cell_run_config(const ExperimentSpec& spec, const Dataset& train,
                          const GridCell& cell);

// Build (train, validation) from the data section.
std::pair<Dataset, Dataset> build_datasets(const DataConfig& data);

// Final validation error of a run: 1 - accuracy, or loss for regression.
std::optional<double> final_error(const MetricsLog& log);

nlohmann::json to_json(const RoundRecord& record);
nlohmann::json to_json(const RunSummary& summary);
void write_metrics(const std::filesystem::path& path, const MetricsLog& log,
                   const GridCell& cell);

struct GridSummary {
  std::vector<double> temporal;  // 1/n per row
  std::vector<double> gradient;  // p per column
  // error[row][col]; nullopt for cells that were not run.
  std::vector<std::vector<std::optional<double>>> error;
};

void write_grid_summary(const std::filesystem::path& path,
                        const GridSummary& summary);
GridSummary read_grid_summary(const std::filesystem::path& path);

struct ExperimentResult {
  GridSummary summary;
  std::vector<std::pair<GridCell, MetricsLog>> runs;
  bool ok = true;
};

// Runs every cell, writes one NDJSON metrics file per cell and
// grid_summary.csv into spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream& log);

struct SparsityGroup {
  double total_sparsity = 0.0;
  std::size_t cells = 0;
  double mean = 0.0;
  double spread = 0.0;  // max - min
};

struct DiagonalReport {
  std::vector<SparsityGroup> groups;  // by decreasing total sparsity
  // Mean spread over groups with at least two cells.
  double mean_within_spread = 0.0;
  // max - min over group means.
  double across_range = 0.0;
  // Mean within-group spread when grouping by a single axis.
  double temporal_axis_spread = 0.0;
  double gradient_axis_spread = 0.0;

  bool total_sparsity_predicts() const {
    return mean_within_spread < across_range;
  }
};

DiagonalReport diagonal_report(const GridSummary& summary);
void print_diagonal_report(const DiagonalReport& report, std::ostream& out);

struct Table1Row {
  std::string name;
  double temporal_sparsity = 1.0;
  double gradient_sparsity = 1.0;
  double value_bits = 32.0;
  // nullopt = Golomb expected bits at this gradient sparsity
  std::optional<double> position_bits = 0.0;
};

struct Table1Result {
  Table1Row row;
  double position_bits = 0.0;
  double bits_per_parameter = 0.0;  // per local iteration, amortized
  double compression_rate = 0.0;
};

std::vector<Table1Row> default_table1_rows();
std::vector<Table1Row> parse_table1(const nlohmann::json& config);
std::vector<Table1Result> table1_report(const std::vector<Table1Row>& rows);
void print_table1(const std::vector<Table1Result>& results, std::ostream& out);

}  // namespace sbc
