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

#ifndef SUBPOP_METRICS_HPP_
#define SUBPOP_METRICS_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "subpop/core.hpp"

namespace subpop::metrics {

// Every metric computed for one (model, split) pair. Binary-only metrics
// (auroc/auprc/brier) are absent for multiclass data; worst_group_acc is
// absent when the split's attributes are treated as unknown, in which case
// worst_acc degenerates to the worst-class accuracy.
struct MetricsReport {
  double avg_acc = 0.0;
  double worst_acc = 0.0;
  std::optional<double> worst_group_acc;
  double worst_class_acc = 0.0;
  double adjusted_acc = 0.0;   // unweighted mean of per-group accuracies
  double balanced_acc = 0.0;   // unweighted mean of per-class recalls
  double avg_precision = 0.0;
  double worst_precision = 0.0;
  double weighted_precision = 0.0;  // support-weighted average
  double avg_f1 = 0.0;              // macro F1
  double worst_f1 = 0.0;
  double class_acc_diff = 0.0;      // max - min per-class recall
  double per_class_recall_std = 0.0;
  double overall_bce = 0.0;  // mean negative log-likelihood, natural log
  double ece = 0.0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  std::optional<double> brier;
  // NaN marks a group absent from the split.
  std::vector<double> per_group_acc;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_precision;
  std::vector<double> per_class_f1;
  int num_empty_groups_skipped = 0;
};

// Minimum over nonempty groups of within-group accuracy; empty groups are
// skipped with a warning (AG test splits evaluate groups unseen in train).
double worst_group_accuracy(std::span<const int> predicted, std::span<const int> labels,
                            std::span<const int> attributes, int num_classes, int num_attributes);

// Unweighted mean of per-group accuracies (what a group-balanced split
// would score).
double adjusted_accuracy(std::span<const int> predicted, std::span<const int> labels,
                         std::span<const int> attributes, int num_classes, int num_attributes);

// Unweighted mean of per-class recalls.
double balanced_accuracy(std::span<const int> predicted, std::span<const int> labels,
                         int num_classes);

struct PrecisionF1 {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double avg_precision = 0.0;
  double worst_precision = 0.0;
  double weighted_precision = 0.0;
  double avg_f1 = 0.0;
  double worst_f1 = 0.0;
};

// Per-class precision/recall/F1 from the confusion matrix. A class that
// appears in the labels but is never predicted gets precision 0 with a
// warning; a class absent from both labels and predictions is skipped.
PrecisionF1 precision_f1_suite(std::span<const int> predicted, std::span<const int> labels,
                               int num_classes);

// Expected calibration error over equal-width max-probability bins.
double ece(std::span<const Prediction> predictions, std::span<const int> labels, int bins = 10);

// Rank-statistic AUROC with midrank tie handling (equals the pairwise
// comparison count with half credit for ties). Labels are 0/1; nullopt when
// only one class is present.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);

// Precision-recall step integration; nullopt when only one class is present.
std::optional<double> auprc(std::span<const double> scores, std::span<const int> labels);

// Mean squared error of the positive-class probability (binary).
std::optional<double> brier(std::span<const double> positive_probs, std::span<const int> labels);

// Mean negative log-likelihood of the true class, natural log.
double overall_bce(std::span<const Prediction> predictions, std::span<const int> labels);

// Computes the full report. `attrs_known` controls whether group-level
// metrics use the split's attributes or degenerate to classes.
MetricsReport evaluate(std::span<const Prediction> predictions, const Dataset& data,
                       bool attrs_known, int ece_bins = 10);

std::string to_json_string(const MetricsReport& report);
MetricsReport report_from_json_string(const std::string& text);

}  // namespace subpop::metrics

#endif  // SUBPOP_METRICS_HPP_
