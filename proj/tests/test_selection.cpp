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

#include "subpop/selection.hpp"

#include "gtest/gtest.h"

namespace subpop::select {
namespace {

// A checkpoint row whose val/test reports carry chosen scalar values.
CheckpointRow row(int id, double val_worst_class, double val_avg, double test_wga) {
  CheckpointRow r;
  r.checkpoint_id = id;
  r.step = (id + 1) * 10;
  r.val.worst_class_acc = val_worst_class;
  r.val.worst_acc = val_worst_class;
  r.val.avg_acc = val_avg;
  r.val.balanced_acc = val_avg;
  r.test.worst_acc = test_wga;
  r.test.worst_group_acc = test_wga;
  return r;
}

TEST(RegimeTest, RejectsTrainKnownValUnknown) {
  EXPECT_THROW(validate(AvailabilityRegime{true, false}), std::invalid_argument);
  EXPECT_NO_THROW(validate(AvailabilityRegime{true, true}));
  EXPECT_NO_THROW(validate(AvailabilityRegime{false, true}));
  EXPECT_NO_THROW(validate(AvailabilityRegime{false, false}));
}

TEST(RegimeTest, StringRoundTrip) {
  for (const char* name : {"TT", "FT", "FF"}) {
    EXPECT_EQ(to_string(regime_from_string(name)), name);
  }
  EXPECT_THROW(regime_from_string("TF"), std::invalid_argument);
}

TEST(StrategyTest, RosterNamesRoundTrip) {
  EXPECT_EQ(all_strategies().size(), 16u);
  for (Strategy s : all_strategies()) {
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  }
  EXPECT_THROW(strategy_from_string("bogus"), std::invalid_argument);
}

TEST(SelectCheckpointTest, MonotoneMetricPicksLast) {
  RunLog log;
  for (int i = 0; i < 5; ++i) log.push_back(row(i, 0.1 * i, 0.5, 0.1 * i));
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxWorstClassAcc, {false, false}), 4);
}

TEST(SelectCheckpointTest, SingleCheckpointIsChosen) {
  RunLog log = {row(0, 0.4, 0.6, 0.3)};
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxOverallAcc, {false, false}), 0);
}

TEST(SelectCheckpointTest, ConstructedPeakIsFound) {
  RunLog log;
  const double worst_class[] = {0.2, 0.5, 0.9, 0.4, 0.1};
  for (int i = 0; i < 5; ++i) log.push_back(row(i, worst_class[i], 0.5, 0.0));
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxWorstClassAcc, {false, false}), 2);
}

TEST(SelectCheckpointTest, TiesResolveToEarliest) {
  RunLog log;
  for (int i = 0; i < 4; ++i) log.push_back(row(i, 0.7, 0.5, 0.0));
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxWorstClassAcc, {false, false}), 0);
}

TEST(SelectCheckpointTest, MinimizingStrategiesFlipDirection) {
  RunLog log;
  for (int i = 0; i < 3; ++i) {
    CheckpointRow r = row(i, 0.5, 0.5, 0.0);
    r.val.overall_bce = 1.0 - 0.2 * i;
    log.push_back(r);
  }
  EXPECT_EQ(select_checkpoint(log, Strategy::kMinBce, {false, false}), 2);
}

TEST(SelectCheckpointTest, WorstGroupDegeneratesToWorstClass) {
  CheckpointRow a = row(0, 0.3, 0.5, 0.0);
  a.val.worst_group_acc = 0.9;  // would win under the group criterion
  CheckpointRow b = row(1, 0.8, 0.5, 0.0);
  b.val.worst_group_acc = 0.1;
  const RunLog log = {a, b};
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxWorstGroupAcc, {false, true}), 0);
  EXPECT_EQ(select_checkpoint(log, Strategy::kMaxWorstGroupAcc, {false, false}), 1);
}

TEST(SelectTrialTest, LiftsCheckpointSelection) {
  std::vector<RunLog> trials(3);
  trials[0] = {row(0, 0.3, 0.5, 0.2), row(1, 0.5, 0.5, 0.4)};
  trials[1] = {row(0, 0.7, 0.5, 0.6)};
  trials[2] = {row(0, 0.6, 0.5, 0.9)};
  const TrialChoice choice = select_trial(trials, Strategy::kMaxWorstClassAcc, {false, false});
  EXPECT_EQ(choice.trial, 1);
  EXPECT_EQ(choice.checkpoint, 0);
  EXPECT_DOUBLE_EQ(choice.score, 0.7);
}

TEST(SelectTrialTest, SkipsEmptyTrials) {
  std::vector<RunLog> trials(3);
  trials[1] = {row(0, 0.4, 0.5, 0.3)};
  const TrialChoice choice = select_trial(trials, Strategy::kMaxWorstClassAcc, {false, false});
  EXPECT_EQ(choice.trial, 1);
}

TEST(OutcomeTest, OracleGapIsNonPositive) {
  std::vector<RunLog> trials(2);
  trials[0] = {row(0, 0.9, 0.5, 0.2)};   // great val score, poor test WGA
  trials[1] = {row(0, 0.1, 0.5, 0.8)};   // the oracle's pick
  const SelectionOutcome outcome =
      select_outcome(trials, Strategy::kMaxWorstClassAcc, {false, false});
  EXPECT_EQ(outcome.trial, 0);
  EXPECT_NEAR(outcome.gap_to_oracle, 0.2 - 0.8, 1e-12);
  EXPECT_LE(outcome.gap_to_oracle, 0.0);

  const SelectionOutcome oracle_outcome =
      select_outcome(trials, Strategy::kOracleTestWga, {false, false});
  EXPECT_DOUBLE_EQ(oracle_outcome.gap_to_oracle, 0.0);
}

TEST(OutcomeTest, StrategyMatchingOracleHasZeroGap) {
  std::vector<RunLog> trials(2);
  trials[0] = {row(0, 0.2, 0.5, 0.2)};
  trials[1] = {row(0, 0.8, 0.5, 0.8)};  // val tracks test exactly
  const SelectionOutcome outcome =
      select_outcome(trials, Strategy::kMaxWorstClassAcc, {false, false});
  EXPECT_DOUBLE_EQ(outcome.gap_to_oracle, 0.0);
}

TEST(OracleGapTableTest, OracleRowIsZeroAndRandomStrategyIsNegative) {
  Rng rng(5);
  std::vector<std::vector<RunLog>> runs;
  for (int run = 0; run < 40; ++run) {
    std::vector<RunLog> trials(4);
    for (auto& log : trials) {
      for (int c = 0; c < 5; ++c) {
        // Validation ECE is pure noise; worst-class tracks test WGA.
        const double wga = rng.uniform(0.2, 0.9);
        CheckpointRow r = row(c, wga, 0.5, wga);
        r.val.ece = rng.uniform01();
        log.push_back(r);
      }
    }
    runs.push_back(std::move(trials));
  }
  const std::vector<Strategy> strategies = {Strategy::kOracleTestWga, Strategy::kMaxWorstClassAcc,
                                            Strategy::kMinEce};
  const std::vector<GapStats> table = oracle_gap_table(runs, strategies, {false, false});
  EXPECT_DOUBLE_EQ(table[0].mean, 0.0);
  EXPECT_DOUBLE_EQ(table[1].mean, 0.0);  // val tracks test exactly here
  EXPECT_LT(table[2].mean, 0.0);         // noise-driven selection loses
  EXPECT_EQ(table[2].n, 40);
}

TEST(StrategyScoreTest, BinaryOnlyMetricsThrowWhenAbsent) {
  CheckpointRow r = row(0, 0.5, 0.5, 0.5);
  EXPECT_THROW(strategy_score(Strategy::kMaxAuroc, r, {false, false}), std::invalid_argument);
  r.val.auroc = 0.7;
  EXPECT_DOUBLE_EQ(strategy_score(Strategy::kMaxAuroc, r, {false, false}), 0.7);
}

}  // namespace
}  // namespace subpop::select
