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

#ifndef SUBPOP_SELECTION_HPP_
#define SUBPOP_SELECTION_HPP_

#include <string>
#include <vector>

#include "subpop/metrics.hpp"

namespace subpop::select {

// Which splits carry attribute annotations. The three studied settings are
// (T,T), (F,T), (F,F); (T,F) is rejected as not studied.
struct AvailabilityRegime {
  bool train_attrs_known = true;
  bool val_attrs_known = true;
};

void validate(const AvailabilityRegime& regime);
// "TT", "FT", "FF".
AvailabilityRegime regime_from_string(const std::string& name);
std::string to_string(const AvailabilityRegime& regime);

enum class Strategy {
  kOracleTestWga,
  kMaxWorstGroupAcc,
  kMaxWorstClassAcc,
  kMaxBalancedAcc,
  kMinClassAccDiff,
  kMaxWorstClassF1,
  kMaxMacroF1,
  kMinPerClassRecallStd,
  kMaxWeightedPrecision,
  kMaxAuroc,
  kMaxAuprc,
  kMinBce,
  kMaxPerClassPrecision,
  kMaxOverallAcc,
  kMinBrier,
  kMinEce,
};

const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);
std::vector<Strategy> all_strategies();
bool maximizes(Strategy strategy);

// One evaluated checkpoint of one run.
struct CheckpointRow {
  int checkpoint_id = 0;
  int step = 0;
  int stage = 1;
  metrics::MetricsReport val;
  metrics::MetricsReport test;
};
using RunLog = std::vector<CheckpointRow>;

// The scalar a strategy compares. Validation metrics drive every strategy
// except the oracle, which peeks at test worst-group accuracy. Worst-group
// selection degenerates to worst-class when validation attributes are
// unknown. Binary-only metrics raise when the log has no value for them.
double strategy_score(Strategy strategy, const CheckpointRow& row,
                      const AvailabilityRegime& regime);

// Argmax/argmin over checkpoints; ties resolve to the earliest checkpoint.
int select_checkpoint(const RunLog& log, Strategy strategy, const AvailabilityRegime& regime);

struct TrialChoice {
  int trial = 0;
  int checkpoint = 0;
  double score = 0.0;
};

// Lifts checkpoint selection across trials: each trial contributes its own
// selected checkpoint, then trials compare on the same score.
TrialChoice select_trial(const std::vector<RunLog>& trials, Strategy strategy,
                         const AvailabilityRegime& regime);

struct SelectionOutcome {
  int trial = 0;
  int checkpoint = 0;
  double validation_score = 0.0;
  metrics::MetricsReport test_report;
  double gap_to_oracle = 0.0;  // <= 0 by construction
};

SelectionOutcome select_outcome(const std::vector<RunLog>& trials, Strategy strategy,
                                const AvailabilityRegime& regime);

std::string to_json_string(const SelectionOutcome& outcome);

struct GapStats {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

// Per strategy: mean +/- sd over runs of test-WGA(strategy) - test-WGA(oracle),
// where each run is a set of trial logs.
std::vector<GapStats> oracle_gap_table(const std::vector<std::vector<RunLog>>& runs,
                                       const std::vector<Strategy>& strategies,
                                       const AvailabilityRegime& regime);

// Reads a JSONL run log written by train::write_run_log.
RunLog load_run_log(const std::string& path);

}  // namespace subpop::select

#endif  // SUBPOP_SELECTION_HPP_
