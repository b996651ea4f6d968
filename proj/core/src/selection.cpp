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

#include <fstream>

#include "json.hpp"

namespace subpop::select {

void validate(const AvailabilityRegime& regime) {
  if (regime.train_attrs_known && !regime.val_attrs_known) {
    throw std::invalid_argument(
        "AvailabilityRegime: train-known/val-unknown is not a studied setting");
  }
}

AvailabilityRegime regime_from_string(const std::string& name) {
  AvailabilityRegime regime;
  if (name == "TT") {
    regime = {true, true};
  } else if (name == "FT") {
    regime = {false, true};
  } else if (name == "FF") {
    regime = {false, false};
  } else {
    throw std::invalid_argument("unknown regime (expected TT, FT or FF): " + name);
  }
  return regime;
}

std::string to_string(const AvailabilityRegime& regime) {
  std::string out;
  out += regime.train_attrs_known ? 'T' : 'F';
  out += regime.val_attrs_known ? 'T' : 'F';
  return out;
}

namespace {

struct StrategyInfo {
  Strategy strategy;
  const char* name;
  bool maximize;
};

constexpr StrategyInfo kStrategies[] = {
    {Strategy::kOracleTestWga, "oracle_test_wga", true},
    {Strategy::kMaxWorstGroupAcc, "max_worst_group_acc", true},
    {Strategy::kMaxWorstClassAcc, "max_worst_class_acc", true},
    {Strategy::kMaxBalancedAcc, "max_balanced_acc", true},
    {Strategy::kMinClassAccDiff, "min_class_acc_diff", false},
    {Strategy::kMaxWorstClassF1, "max_worst_class_f1", true},
    {Strategy::kMaxMacroF1, "max_macro_f1", true},
    {Strategy::kMinPerClassRecallStd, "min_per_class_recall_std", false},
    {Strategy::kMaxWeightedPrecision, "max_weighted_precision", true},
    {Strategy::kMaxAuroc, "max_auroc", true},
    {Strategy::kMaxAuprc, "max_auprc", true},
    {Strategy::kMinBce, "min_bce", false},
    {Strategy::kMaxPerClassPrecision, "max_per_class_precision", true},
    {Strategy::kMaxOverallAcc, "max_overall_acc", true},
    {Strategy::kMinBrier, "min_brier", false},
    {Strategy::kMinEce, "min_ece", false},
};

const StrategyInfo& info(Strategy strategy) {
  for (const StrategyInfo& s : kStrategies) {
    if (s.strategy == strategy) return s;
  }
  throw std::invalid_argument("unknown strategy enum value");
}

double require(const std::optional<double>& value, const char* what) {
  if (!value.has_value()) {
    throw std::invalid_argument(std::string("strategy_score: ") + what +
                                " is undefined for this run (binary-only metric)");
  }
  return *value;
}

}  // namespace

const char* to_string(Strategy strategy) { return info(strategy).name; }

bool maximizes(Strategy strategy) { return info(strategy).maximize; }

Strategy strategy_from_string(const std::string& name) {
  for (const StrategyInfo& s : kStrategies) {
    if (name == s.name) return s.strategy;
  }
  throw std::invalid_argument("unknown selection strategy: " + name);
}

std::vector<Strategy> all_strategies() {
  std::vector<Strategy> out;
  for (const StrategyInfo& s : kStrategies) out.push_back(s.strategy);
  return out;
}

double strategy_score(Strategy strategy, const CheckpointRow& row,
                      const AvailabilityRegime& regime) {
  validate(regime);
  switch (strategy) {
    case Strategy::kOracleTestWga:
      return row.test.worst_acc;
    case Strategy::kMaxWorstGroupAcc:
      // Degenerates to worst-class accuracy when validation attributes are
      // unknown; the val report was already computed under that regime, so
      // its worst_acc field is exactly the degenerate criterion.
      return regime.val_attrs_known && row.val.worst_group_acc.has_value()
                 ? *row.val.worst_group_acc
                 : row.val.worst_class_acc;
    case Strategy::kMaxWorstClassAcc:
      return row.val.worst_class_acc;
    case Strategy::kMaxBalancedAcc:
      return row.val.balanced_acc;
    case Strategy::kMinClassAccDiff:
      return row.val.class_acc_diff;
    case Strategy::kMaxWorstClassF1:
      return row.val.worst_f1;
    case Strategy::kMaxMacroF1:
      return row.val.avg_f1;
    case Strategy::kMinPerClassRecallStd:
      return row.val.per_class_recall_std;
    case Strategy::kMaxWeightedPrecision:
      return row.val.weighted_precision;
    case Strategy::kMaxAuroc:
      return require(row.val.auroc, "auroc");
    case Strategy::kMaxAuprc:
      return require(row.val.auprc, "auprc");
    case Strategy::kMinBce:
      return row.val.overall_bce;
    case Strategy::kMaxPerClassPrecision:
      // Interpreted as the minimum per-class precision.
      return row.val.worst_precision;
    case Strategy::kMaxOverallAcc:
      return row.val.avg_acc;
    case Strategy::kMinBrier:
      return require(row.val.brier, "brier");
    case Strategy::kMinEce:
      return row.val.ece;
  }
  throw std::invalid_argument("unknown strategy enum value");
}

int select_checkpoint(const RunLog& log, Strategy strategy, const AvailabilityRegime& regime) {
  if (log.empty()) throw std::invalid_argument("select_checkpoint: empty run log");
  const bool maximize = maximizes(strategy);
  int best = 0;
  double best_score = strategy_score(strategy, log[0], regime);
  for (int i = 1; i < static_cast<int>(log.size()); ++i) {
    const double score = strategy_score(strategy, log[static_cast<std::size_t>(i)], regime);
    // Strict comparison: ties keep the earliest checkpoint.
    if (maximize ? score > best_score : score < best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

TrialChoice select_trial(const std::vector<RunLog>& trials, Strategy strategy,
                         const AvailabilityRegime& regime) {
  if (trials.empty()) throw std::invalid_argument("select_trial: no trials");
  const bool maximize = maximizes(strategy);
  TrialChoice best;
  bool have_best = false;
  for (int t = 0; t < static_cast<int>(trials.size()); ++t) {
    const RunLog& log = trials[static_cast<std::size_t>(t)];
    if (log.empty()) continue;  // failed trials contribute no checkpoints
    const int ckpt = select_checkpoint(log, strategy, regime);
    const double score = strategy_score(strategy, log[static_cast<std::size_t>(ckpt)], regime);
    if (!have_best || (maximize ? score > best.score : score < best.score)) {
      best = TrialChoice{t, ckpt, score};
      have_best = true;
    }
  }
  if (!have_best) throw std::invalid_argument("select_trial: every trial log is empty");
  return best;
}

SelectionOutcome select_outcome(const std::vector<RunLog>& trials, Strategy strategy,
                                const AvailabilityRegime& regime) {
  const TrialChoice chosen = select_trial(trials, strategy, regime);
  const TrialChoice oracle = select_trial(trials, Strategy::kOracleTestWga, regime);
  const CheckpointRow& chosen_row =
      trials[static_cast<std::size_t>(chosen.trial)][static_cast<std::size_t>(chosen.checkpoint)];
  const CheckpointRow& oracle_row =
      trials[static_cast<std::size_t>(oracle.trial)][static_cast<std::size_t>(oracle.checkpoint)];
  SelectionOutcome outcome;
  outcome.trial = chosen.trial;
  outcome.checkpoint = chosen.checkpoint;
  outcome.validation_score = chosen.score;
  outcome.test_report = chosen_row.test;
  outcome.gap_to_oracle = chosen_row.test.worst_acc - oracle_row.test.worst_acc;
  return outcome;
}

std::string to_json_string(const SelectionOutcome& outcome) {
  nlohmann::json j;
  j["trial"] = outcome.trial;
  j["checkpoint"] = outcome.checkpoint;
  j["validation_score"] = outcome.validation_score;
  j["gap_to_oracle"] = outcome.gap_to_oracle;
  j["test"] = nlohmann::json::parse(metrics::to_json_string(outcome.test_report));
  return j.dump(2);
}

std::vector<GapStats> oracle_gap_table(const std::vector<std::vector<RunLog>>& runs,
                                       const std::vector<Strategy>& strategies,
                                       const AvailabilityRegime& regime) {
  std::vector<GapStats> out;
  out.reserve(strategies.size());
  for (Strategy strategy : strategies) {
    std::vector<double> gaps;
    gaps.reserve(runs.size());
    for (const std::vector<RunLog>& trials : runs) {
      gaps.push_back(select_outcome(trials, strategy, regime).gap_to_oracle);
    }
    const MeanSd stats = mean_sd(gaps);
    out.push_back(GapStats{stats.mean, stats.sd, stats.n});
  }
  return out;
}

RunLog load_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_log: cannot open " + path);
  RunLog log;
  std::string line;
  int id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    CheckpointRow row;
    row.checkpoint_id = id++;
    row.step = j.at("step").get<int>();
    row.stage = j.at("stage").get<int>();
    row.val = metrics::report_from_json_string(j.at("val").dump());
    row.test = metrics::report_from_json_string(j.at("test").dump());
    log.push_back(std::move(row));
  }
  return log;
}

}  // namespace subpop::select
