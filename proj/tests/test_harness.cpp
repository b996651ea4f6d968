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

#include "subpop/harness.hpp"

#include <filesystem>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace subpop::harness {
namespace {

namespace fs = std::filesystem;

gen::GenSpec tiny_sc_spec() {
  gen::GenSpec spec;
  spec.shift_type = quantify::ShiftType::kSC;
  spec.rho = 0.9;
  spec.noise_sigma = 0.4;
  spec.n_train = 400;
  spec.n_val = 120;
  spec.n_test = 200;
  spec.seed = 5;
  return spec;
}

ExperimentPlan tiny_plan(const std::string& out_dir) {
  ExperimentPlan plan;
  DatasetSpec dataset;
  dataset.name = "sc_tiny";
  dataset.generator = tiny_sc_spec();
  plan.datasets.push_back(dataset);
  plan.algorithms = {algo::AlgorithmId::kErm};
  plan.regimes = {select::AvailabilityRegime{false, false}};
  plan.num_seeds = 1;
  plan.num_trials = 1;
  plan.selection = select::Strategy::kMaxWorstClassAcc;
  plan.plan_seed = 3;
  plan.base_config.num_steps = 60;
  plan.base_config.eval_every = 20;
  plan.hidden_width = 8;
  plan.out_dir = out_dir;
  return plan;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_((fs::temp_directory_path() / name).string()) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

RunRecord make_record(const std::string& dataset, const std::string& algorithm,
                      const std::string& shift, double wga, bool is_final = true) {
  RunRecord r;
  r.dataset = dataset;
  r.algorithm = algorithm;
  r.regime = "FF";
  r.is_final = is_final;
  r.status = "ok";
  r.dominant_shift = shift;
  r.test_report.worst_acc = wga;
  return r;
}

TEST(RunPlanTest, SingleTrialSingleSeedProducesExactlyOneRecord) {
  set_warning_output(false);
  TempDir dir("subpop_plan_single");
  const PlanResult result = run_plan(tiny_plan(dir.path()), 1);
  // A one-trial plan has nothing to search over: only the final run exists.
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.executed, 1);
  EXPECT_EQ(result.cached, 0);
  EXPECT_EQ(result.failed, 0);
  EXPECT_TRUE(result.records[0].is_final);
  EXPECT_EQ(result.records[0].status, "ok");
  EXPECT_EQ(result.records[0].dominant_shift, "SC");
}

TEST(RunPlanTest, MultiTrialPlanKeepsSearchAndFinalPhases) {
  set_warning_output(false);
  TempDir dir("subpop_plan_multi");
  ExperimentPlan plan = tiny_plan(dir.path());
  plan.num_trials = 3;
  plan.num_seeds = 2;
  const PlanResult result = run_plan(plan, 1);
  ASSERT_EQ(result.records.size(), 5u);  // 3 trials + 2 fresh-seed reruns
  int finals = 0;
  for (const auto& r : result.records) finals += r.is_final ? 1 : 0;
  EXPECT_EQ(finals, 2);
}

TEST(RunPlanTest, DefaultProtocolIsSixteenTrialsThreeSeeds) {
  const ExperimentPlan defaults;
  EXPECT_EQ(defaults.num_trials, 16);
  EXPECT_EQ(defaults.num_seeds, 3);
}

TEST(RunPlanTest, RerunDoesZeroWork) {
  set_warning_output(false);
  TempDir dir("subpop_plan_rerun");
  const ExperimentPlan plan = tiny_plan(dir.path());
  const PlanResult first = run_plan(plan, 1);
  const PlanResult second = run_plan(plan, 1);
  EXPECT_GT(first.executed, 0);
  EXPECT_EQ(second.executed, 0);
  EXPECT_EQ(second.cached, first.executed + first.cached);
  ASSERT_EQ(first.records.size(), second.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    EXPECT_TRUE(records_equivalent(first.records[i], second.records[i]));
  }
}

TEST(RunPlanTest, IdenticalPlansInDifferentDirsAgree) {
  set_warning_output(false);
  TempDir dir_a("subpop_plan_a");
  TempDir dir_b("subpop_plan_b");
  ExperimentPlan plan_a = tiny_plan(dir_a.path());
  ExperimentPlan plan_b = tiny_plan(dir_b.path());
  const PlanResult a = run_plan(plan_a, 1);
  const PlanResult b = run_plan(plan_b, 2);  // worker count must not matter
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_TRUE(records_equivalent(a.records[i], b.records[i]));
  }
}

TEST(RunPlanTest, RecordsPersistAndReload) {
  set_warning_output(false);
  TempDir dir("subpop_plan_reload");
  const PlanResult result = run_plan(tiny_plan(dir.path()), 1);
  const std::vector<RunRecord> loaded = load_records(dir.path());
  EXPECT_EQ(loaded.size(), result.records.size());
}

TEST(ImprovementReportTest, ErmRowIsZeroAndDeltasAreExact) {
  std::vector<RunRecord> records;
  records.push_back(make_record("d1", "ERM", "SC", 0.50));
  records.push_back(make_record("d1", "ERM", "SC", 0.54));
  records.push_back(make_record("d1", "GroupDRO", "SC", 0.70));
  records.push_back(make_record("d1", "GroupDRO", "SC", 0.74));
  records.push_back(make_record("d2", "ERM", "CI", 0.40));
  records.push_back(make_record("d2", "GroupDRO", "CI", 0.45));

  const auto rows = report_improvement_over_erm(records);
  double sc_erm = -1.0, sc_dro = -1.0, ci_dro = -1.0;
  for (const auto& row : rows) {
    if (row.shift == "SC" && row.algorithm == "ERM") sc_erm = row.delta_wga;
    if (row.shift == "SC" && row.algorithm == "GroupDRO") sc_dro = row.delta_wga;
    if (row.shift == "CI" && row.algorithm == "GroupDRO") ci_dro = row.delta_wga;
  }
  EXPECT_DOUBLE_EQ(sc_erm, 0.0);
  EXPECT_NEAR(sc_dro, 0.20, 1e-12);
  EXPECT_NEAR(ci_dro, 0.05, 1e-12);
}

TEST(ImprovementReportTest, MissingErmBaselineThrows) {
  std::vector<RunRecord> records;
  records.push_back(make_record("d1", "GroupDRO", "SC", 0.7));
  EXPECT_THROW(report_improvement_over_erm(records), std::invalid_argument);
}

TEST(ImprovementReportTest, FailedAndTrialRecordsAreExcluded) {
  std::vector<RunRecord> records;
  records.push_back(make_record("d1", "ERM", "SC", 0.5));
  RunRecord failed = make_record("d1", "GroupDRO", "SC", 0.9);
  failed.status = "failed";
  records.push_back(failed);
  RunRecord trial_only = make_record("d1", "GroupDRO", "SC", 0.8);
  trial_only.is_final = false;
  records.push_back(trial_only);
  records.push_back(make_record("d1", "GroupDRO", "SC", 0.6));

  const auto rows = report_improvement_over_erm(records);
  for (const auto& row : rows) {
    if (row.algorithm == "GroupDRO") {
      EXPECT_NEAR(row.delta_wga, 0.1, 1e-12);
    }
  }
}

TEST(GridReportTest, CellsAverageAcrossSeedsAndDatasets) {
  std::vector<GridRecord> records;
  for (int seed = 0; seed < 2; ++seed) {
    GridRecord r;
    r.dataset = "d1";
    r.shift = "SC";
    r.representation = StageScheme::kUniform;
    r.classifier = StageScheme::kBalanced;
    r.seed_index = seed;
    r.test_wga = 0.6 + 0.1 * seed;
    records.push_back(r);
  }
  // Fill the rest of the 3x3 with a constant.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == 0 && j == 1) continue;
      GridRecord r;
      r.dataset = "d1";
      r.shift = "SC";
      r.representation = static_cast<StageScheme>(i);
      r.classifier = static_cast<StageScheme>(j);
      r.test_wga = 0.5;
      records.push_back(r);
    }
  }
  const auto tables = report_rep_vs_classifier(records);
  ASSERT_TRUE(tables.count("SC"));
  EXPECT_NEAR(tables.at("SC")[0][1], 0.65, 1e-12);
  EXPECT_NEAR(tables.at("SC")[2][2], 0.5, 1e-12);
}

TEST(CorrelationReportTest, ConstantMetricIsUndefined) {
  std::vector<RunRecord> records;
  for (int i = 0; i < 10; ++i) {
    RunRecord r = make_record("d1", "ERM", "SC", 0.1 * i);
    r.test_report.adjusted_acc = 0.5;  // constant
    r.test_report.worst_precision = 0.9 - 0.05 * i;
    records.push_back(r);
  }
  const auto rows = report_metric_correlations(records, "");
  for (const auto& row : rows) {
    if (row.metric == "adjusted_acc") {
      EXPECT_FALSE(row.defined);
    }
    if (row.metric == "worst_precision") {
      EXPECT_TRUE(row.defined);
      EXPECT_NEAR(row.pearson_r, -1.0, 1e-9);
    }
  }
}

TEST(CorrelationReportTest, PerfectlyLinearPointsGiveUnitCorrelation) {
  std::vector<RunRecord> records;
  for (int i = 0; i < 12; ++i) {
    RunRecord r = make_record("d1", "ERM", "SC", 0.05 * i);
    r.test_report.adjusted_acc = 0.2 + 0.5 * (0.05 * i);
    records.push_back(r);
  }
  const auto rows = report_metric_correlations(records, "");
  for (const auto& row : rows) {
    if (row.metric == "adjusted_acc") {
      EXPECT_TRUE(row.defined);
      EXPECT_NEAR(row.pearson_r, 1.0, 1e-9);
      EXPECT_NEAR(row.slope, 0.5, 1e-9);
    }
  }
}

TEST(CorrelationReportTest, MixedCloudMatchesPearsonOracle) {
  Rng rng(9);
  std::vector<RunRecord> records;
  std::vector<double> wga, adj;
  for (int i = 0; i < 50; ++i) {
    const double w = rng.uniform(0.1, 0.9);
    const double a = 0.3 * w + rng.uniform(-0.1, 0.1);
    RunRecord r = make_record("d1", "ERM", "SC", w);
    r.test_report.adjusted_acc = a;
    records.push_back(r);
    wga.push_back(w);
    adj.push_back(a);
  }
  const auto rows = report_metric_correlations(records, "");
  for (const auto& row : rows) {
    if (row.metric == "adjusted_acc") {
      EXPECT_NEAR(row.pearson_r, oracles::pearson_r(wga, adj), 1e-12);
    }
  }
}

TEST(PlanJsonTest, ParsesFullPlan) {
  const std::string text = R"({
    "plan_seed": 11,
    "num_trials": 4,
    "num_seeds": 2,
    "selection": "max_worst_class_acc",
    "hidden_width": 16,
    "base_config": {"num_steps": 100, "batch_size": 32, "learning_rate": 0.02},
    "datasets": [{"name": "sc", "gen": {"shift_type": "SC", "num_classes": 2,
                  "num_attributes": 2, "rho": 0.9, "n_train": 500, "n_val": 100,
                  "n_test": 200, "seed": 1}}],
    "algorithms": ["ERM", "GroupDRO"],
    "regimes": ["TT", "FF"]
  })";
  const ExperimentPlan plan = plan_from_json_string(text);
  EXPECT_EQ(plan.plan_seed, 11u);
  EXPECT_EQ(plan.num_trials, 4);
  EXPECT_EQ(plan.num_seeds, 2);
  EXPECT_EQ(plan.selection, select::Strategy::kMaxWorstClassAcc);
  EXPECT_EQ(plan.hidden_width, 16);
  EXPECT_EQ(plan.base_config.num_steps, 100);
  EXPECT_EQ(plan.base_config.batch_size, 32);
  ASSERT_EQ(plan.datasets.size(), 1u);
  EXPECT_TRUE(plan.datasets[0].generator.has_value());
  ASSERT_EQ(plan.algorithms.size(), 2u);
  EXPECT_EQ(plan.algorithms[1], algo::AlgorithmId::kGroupDro);
  ASSERT_EQ(plan.regimes.size(), 2u);
  EXPECT_FALSE(plan.regimes[1].val_attrs_known);
}

TEST(RecordJsonTest, RoundTrips) {
  RunRecord r = make_record("d", "ERM", "SC", 0.5);
  r.trial = 3;
  r.seed_index = 2;
  r.run_seed = 123456789ULL;
  r.hyperparams = {{"learning_rate", 0.01}, {"batch_size", 64.0}};
  r.run_log_path = "logs/abc.jsonl";
  r.selected_checkpoint = 7;
  r.validation_score = 0.42;
  r.wall_time_sec = 1.5;
  const RunRecord back = record_from_json_string(to_json_string(r));
  EXPECT_TRUE(records_equivalent(r, back));
}

}  // namespace
}  // namespace subpop::harness
