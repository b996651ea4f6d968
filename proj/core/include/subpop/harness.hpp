/*
 * Copyright 2026 The subpop-lab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SUBPOP_HARNESS_HPP_
#define SUBPOP_HARNESS_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subpop/algorithms.hpp"
#include "subpop/shiftgen.hpp"

namespace subpop::harness {

// A dataset enters the grid either as a generator spec or as a CSV
// directory produced earlier.
struct DatasetSpec {
  std::string name;
  std::optional<gen::GenSpec> generator;
  std::optional<std::string> csv_dir;
};

struct ExperimentPlan {
  std::vector<DatasetSpec> datasets;
  std::vector<algo::AlgorithmId> algorithms;
  std::vector<select::AvailabilityRegime> regimes;
  int num_seeds = 3;
  int num_trials = 16;
  select::Strategy selection = select::Strategy::kMaxWorstGroupAcc;
  std::uint64_t plan_seed = 0;
  train::TrainConfig base_config;
  int hidden_width = 32;
  std::string out_dir;
};

ExperimentPlan plan_from_json_string(const std::string& text);
ExperimentPlan plan_from_json_file(const std::string& path);

// One completed (or failed) training run. seed_index 0 marks the
// hyperparameter-search phase; 1..num_seeds are the winner's fresh-seed
// reruns (is_final). Paths are relative to out_dir so records stay
// location-independent.
struct RunRecord {
  std::string dataset;
  std::string algorithm;
  std::string regime;
  int trial = 0;
  int seed_index = 0;
  bool is_final = false;
  std::uint64_t run_seed = 0;
  std::map<std::string, double> hyperparams;
  std::string run_log_path;
  int selected_checkpoint = -1;
  double validation_score = 0.0;
  metrics::MetricsReport test_report;
  std::string dominant_shift;
  double wall_time_sec = 0.0;
  std::string status;  // "ok" | "failed"
  std::string diagnostic;
};

std::string to_json_string(const RunRecord& record);
RunRecord record_from_json_string(const std::string& text);
// Field-wise equality ignoring wall time (the one nondeterministic field).
bool records_equivalent(const RunRecord& a, const RunRecord& b);

struct PlanResult {
  std::vector<RunRecord> records;
  int executed = 0;  // runs actually trained in this invocation
  int cached = 0;    // runs loaded from a previous invocation
  int failed = 0;
};

// Executes the full grid: per (dataset, algorithm, regime) a random search
// of num_trials runs, winner selection with the plan's strategy, then
// num_seeds fresh-seed reruns of the winner. Runs persist under
// out_dir/records and out_dir/logs keyed by coordinate hash, so a rerun of
// a completed plan trains nothing. A failed run is recorded, surfaced in
// `failed`, and never aborts the plan. `workers` bounds combo-level
// parallelism.
PlanResult run_plan(const ExperimentPlan& plan, int workers = 1);

// ---------------------------------------------------------------------------
// Reports. All are pure functions of the record set.
// ---------------------------------------------------------------------------

struct ImprovementRow {
  std::string shift;
  std::string algorithm;
  double delta_wga = 0.0;  // mean WGA(algorithm) - mean WGA(ERM), in points
  int num_datasets = 0;
};

// Mean test-WGA improvement over the ERM baseline per (dominant shift,
// algorithm), averaged over final-phase records. Throws when a dataset has
// no ERM baseline.
std::vector<ImprovementRow> report_improvement_over_erm(const std::vector<RunRecord>& records);
void write_improvement_csv(const std::vector<ImprovementRow>& rows, const std::string& path);

// The representation/classifier stage grid of schemes
// {uniform, balanced sampling, re-weighting}^2.
enum class StageScheme { kUniform, kBalanced, kReweight };
const char* to_string(StageScheme scheme);

struct GridRecord {
  std::string dataset;
  std::string shift;
  StageScheme representation = StageScheme::kUniform;
  StageScheme classifier = StageScheme::kUniform;
  int seed_index = 0;
  double test_wga = 0.0;
};

// Runs the 3x3 grid on one dataset: stage 1 trains the whole network under
// the representation scheme, stage 2 retrains the head under the classifier
// scheme. Schemes act at group level (class level if train attributes are
// unknown, via degeneration upstream).
std::vector<GridRecord> run_stage_grid(const DataBundle& data, const std::string& dataset_name,
                                       const std::string& shift_label,
                                       const train::Architecture& arch,
                                       const train::TrainConfig& base_config, int num_seeds,
                                       std::uint64_t seed);

// Mean test WGA per (representation, classifier) cell, one 3x3 table per
// shift label.
std::map<std::string, std::vector<std::vector<double>>> report_rep_vs_classifier(
    const std::vector<GridRecord>& records);
void write_grid_csv(const std::map<std::string, std::vector<std::vector<double>>>& tables,
                    const std::string& path);

struct CorrelationRow {
  std::string dataset;
  std::string metric;
  bool defined = false;  // false when the metric is constant across runs
  double pearson_r = 0.0;
  double slope = 0.0;
  int num_points = 0;
};

// Per dataset, correlation of each metric with test WGA across every ok run
// (all trials and seeds). Scatter CSVs land next to the summary.
std::vector<CorrelationRow> report_metric_correlations(const std::vector<RunRecord>& records,
                                                       const std::string& scatter_dir);
void write_correlation_csv(const std::vector<CorrelationRow>& rows, const std::string& path);

// Loads every record under out_dir/records.
std::vector<RunRecord> load_records(const std::string& out_dir);

// Prepares the DataBundle for a dataset spec (generates or loads CSVs).
DataBundle realize_dataset(const DatasetSpec& spec);

}  // namespace subpop::harness

#endif  // SUBPOP_HARNESS_HPP_
