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

#include "subpop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace subpop::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct GroupAccs {
  std::vector<double> acc;  // NaN for empty groups
  int skipped = 0;
};

GroupAccs per_group_accuracy(std::span<const int> predicted, std::span<const int> labels,
                             std::span<const int> attributes, int num_classes,
                             int num_attributes) {
  const int num_groups = num_classes * num_attributes;
  std::vector<std::int64_t> correct(num_groups, 0);
  std::vector<std::int64_t> total(num_groups, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int g = attributes[i] * num_classes + labels[i];
    ++total[g];
    if (predicted[i] == labels[i]) ++correct[g];
  }
  GroupAccs out;
  out.acc.assign(num_groups, kNaN);
  for (int g = 0; g < num_groups; ++g) {
    if (total[g] == 0) {
      ++out.skipped;
    } else {
      out.acc[g] = static_cast<double>(correct[g]) / total[g];
    }
  }
  return out;
}

std::vector<double> per_class_recall_vec(std::span<const int> predicted,
                                         std::span<const int> labels, int num_classes,
                                         int* skipped) {
  std::vector<std::int64_t> correct(num_classes, 0);
  std::vector<std::int64_t> total(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++total[labels[i]];
    if (predicted[i] == labels[i]) ++correct[labels[i]];
  }
  std::vector<double> recall(num_classes, kNaN);
  for (int c = 0; c < num_classes; ++c) {
    if (total[c] == 0) {
      if (skipped != nullptr) ++*skipped;
    } else {
      recall[c] = static_cast<double>(correct[c]) / total[c];
    }
  }
  return recall;
}

double nan_min(std::span<const double> values) {
  double out = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double v : values) {
    if (std::isnan(v)) continue;
    out = std::min(out, v);
    any = true;
  }
  if (!any) throw std::invalid_argument("metrics: no nonempty strata to reduce over");
  return out;
}

double nan_mean(std::span<const double> values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("metrics: no nonempty strata to reduce over");
  return sum / n;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("metrics: size mismatch in ") + what);
  if (a == 0) throw std::invalid_argument(std::string("metrics: empty input in ") + what);
}

nlohmann::json optional_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> optional_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json vec_to_json(const std::vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) {
    if (std::isnan(x)) {
      arr.push_back(nullptr);
    } else {
      arr.push_back(x);
    }
  }
  return arr;
}

std::vector<double> vec_from_json(const nlohmann::json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) out.push_back(x.is_null() ? kNaN : x.get<double>());
  return out;
}

}  // namespace

double worst_group_accuracy(std::span<const int> predicted, std::span<const int> labels,
                            std::span<const int> attributes, int num_classes,
                            int num_attributes) {
  check_sizes(predicted.size(), labels.size(), "worst_group_accuracy");
  check_sizes(labels.size(), attributes.size(), "worst_group_accuracy");
  const GroupAccs groups =
      per_group_accuracy(predicted, labels, attributes, num_classes, num_attributes);
  if (groups.skipped > 0) {
    warn("worst_group_accuracy: skipped " + std::to_string(groups.skipped) + " empty group(s)");
  }
  return nan_min(groups.acc);
}

double adjusted_accuracy(std::span<const int> predicted, std::span<const int> labels,
                         std::span<const int> attributes, int num_classes, int num_attributes) {
  check_sizes(predicted.size(), labels.size(), "adjusted_accuracy");
  const GroupAccs groups =
      per_group_accuracy(predicted, labels, attributes, num_classes, num_attributes);
  return nan_mean(groups.acc);
}

double balanced_accuracy(std::span<const int> predicted, std::span<const int> labels,
                         int num_classes) {
  check_sizes(predicted.size(), labels.size(), "balanced_accuracy");
  int skipped = 0;
  const std::vector<double> recall = per_class_recall_vec(predicted, labels, num_classes, &skipped);
  if (skipped > 0) warn("balanced_accuracy: skipped " + std::to_string(skipped) + " empty class(es)");
  return nan_mean(recall);
}

PrecisionF1 precision_f1_suite(std::span<const int> predicted, std::span<const int> labels,
                               int num_classes) {
  check_sizes(predicted.size(), labels.size(), "precision_f1_suite");
  std::vector<std::int64_t> tp(num_classes, 0), fp(num_classes, 0), support(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++support[labels[i]];
    if (predicted[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[predicted[i]];
    }
  }

  PrecisionF1 out;
  out.precision.assign(num_classes, kNaN);
  out.recall.assign(num_classes, kNaN);
  out.f1.assign(num_classes, kNaN);
  double weighted_sum = 0.0;
  std::int64_t weighted_support = 0;
  for (int c = 0; c < num_classes; ++c) {
    const std::int64_t predicted_count = tp[c] + fp[c];
    if (support[c] == 0 && predicted_count == 0) continue;  // class never seen, skip
    if (predicted_count == 0) {
      warn("precision_f1_suite: class " + std::to_string(c) + " never predicted, precision set to 0");
      out.precision[c] = 0.0;
    } else {
      out.precision[c] = static_cast<double>(tp[c]) / predicted_count;
    }
    out.recall[c] = support[c] > 0 ? static_cast<double>(tp[c]) / support[c] : 0.0;
    const double pr = out.precision[c] + out.recall[c];
    out.f1[c] = pr > 0.0 ? 2.0 * out.precision[c] * out.recall[c] / pr : 0.0;
    weighted_sum += out.precision[c] * support[c];
    weighted_support += support[c];
  }
  out.avg_precision = nan_mean(out.precision);
  out.worst_precision = nan_min(out.precision);
  out.weighted_precision = weighted_support > 0 ? weighted_sum / weighted_support : 0.0;
  out.avg_f1 = nan_mean(out.f1);
  out.worst_f1 = nan_min(out.f1);
  return out;
}

double ece(std::span<const Prediction> predictions, std::span<const int> labels, int bins) {
  check_sizes(predictions.size(), labels.size(), "ece");
  if (bins < 1) throw std::invalid_argument("ece: need at least one bin");
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::int64_t> correct(bins, 0), count(bins, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& p = predictions[i];
    const double conf = p.probs[p.predicted];
    int b = static_cast<int>(conf * bins);
    b = std::clamp(b, 0, bins - 1);  // conf == 1 lands in the last bin
    conf_sum[b] += conf;
    ++count[b];
    if (p.predicted == labels[i]) ++correct[b];
  }
  const double n = static_cast<double>(predictions.size());
  double out = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double acc = static_cast<double>(correct[b]) / count[b];
    const double conf = conf_sum[b] / count[b];
    out += (count[b] / n) * std::abs(acc - conf);
  }
  return out;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auroc");
  std::int64_t num_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auroc: labels must be 0/1");
    num_pos += y;
  }
  const std::int64_t num_neg = static_cast<std::int64_t>(labels.size()) - num_pos;
  if (num_pos == 0 || num_neg == 0) {
    warn("auroc: undefined with single-class labels");
    return std::nullopt;
  }

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; AUROC = (R+ - n+(n+ + 1)/2) / (n+ n-).
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  return (rank_sum_pos - static_cast<double>(num_pos) * (num_pos + 1) / 2.0) /
         (static_cast<double>(num_pos) * num_neg);
}

std::optional<double> auprc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auprc");
  std::int64_t num_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auprc: labels must be 0/1");
    num_pos += y;
  }
  if (num_pos == 0 || num_pos == static_cast<std::int64_t>(labels.size())) {
    warn("auprc: undefined with single-class labels");
    return std::nullopt;
  }

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

  // Step integration over descending thresholds, tie groups processed whole.
  double area = 0.0;
  std::int64_t tp = 0, predicted_pos = 0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      ++predicted_pos;
      tp += labels[order[k]];
    }
    const double recall = static_cast<double>(tp) / num_pos;
    const double precision = static_cast<double>(tp) / predicted_pos;
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return area;
}

std::optional<double> brier(std::span<const double> positive_probs, std::span<const int> labels) {
  check_sizes(positive_probs.size(), labels.size(), "brier");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double diff = positive_probs[i] - static_cast<double>(labels[i]);
    sum += diff * diff;
  }
  return sum / static_cast<double>(labels.size());
}

double overall_bce(std::span<const Prediction> predictions, std::span<const int> labels) {
  check_sizes(predictions.size(), labels.size(), "overall_bce");
  // Probabilities of exactly zero would give an infinite loss; clip at a
  // floor so the metric stays comparable across runs.
  constexpr double kFloor = 1e-12;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum -= std::log(std::max(predictions[i].probs[labels[i]], kFloor));
  }
  return sum / static_cast<double>(labels.size());
}

MetricsReport evaluate(std::span<const Prediction> predictions, const Dataset& data,
                       bool attrs_known, int ece_bins) {
  check_sizes(predictions.size(), static_cast<std::size_t>(data.size()), "evaluate");
  const int n = data.size();
  const int num_classes = data.num_classes();
  // Unknown attributes degenerate groups to classes: one attribute level so
  // the group axis collapses onto the label axis with no structural holes.
  const int num_attributes = attrs_known ? data.num_attributes() : 1;

  std::vector<int> predicted(n), labels(n), attributes(n);
  for (int i = 0; i < n; ++i) {
    predicted[i] = predictions[i].predicted;
    labels[i] = data.example(i).label;
    attributes[i] = attrs_known ? data.example(i).attribute : 0;
    if (static_cast<int>(predictions[i].probs.size()) != num_classes) {
      throw std::invalid_argument("evaluate: prediction width does not match num_classes");
    }
  }

  MetricsReport report;
  std::int64_t num_correct = 0;
  for (int i = 0; i < n; ++i) num_correct += predicted[i] == labels[i] ? 1 : 0;
  report.avg_acc = static_cast<double>(num_correct) / n;

  const GroupAccs groups =
      per_group_accuracy(predicted, labels, attributes, num_classes, num_attributes);
  if (groups.skipped > 0) {
    warn("evaluate: skipped " + std::to_string(groups.skipped) + " empty group(s)");
  }
  report.per_group_acc = groups.acc;
  report.num_empty_groups_skipped = groups.skipped;
  report.adjusted_acc = nan_mean(groups.acc);

  const PrecisionF1 pf = precision_f1_suite(predicted, labels, num_classes);
  report.per_class_recall = pf.recall;
  report.per_class_precision = pf.precision;
  report.per_class_f1 = pf.f1;
  report.avg_precision = pf.avg_precision;
  report.worst_precision = pf.worst_precision;
  report.weighted_precision = pf.weighted_precision;
  report.avg_f1 = pf.avg_f1;
  report.worst_f1 = pf.worst_f1;

  report.balanced_acc = nan_mean(pf.recall);
  report.worst_class_acc = nan_min(pf.recall);
  if (attrs_known) {
    report.worst_group_acc = nan_min(groups.acc);
    report.worst_acc = *report.worst_group_acc;
  } else {
    report.worst_acc = report.worst_class_acc;
  }

  double recall_max = -1.0, recall_min = 2.0;
  std::vector<double> defined_recalls;
  for (double r : pf.recall) {
    if (std::isnan(r)) continue;
    recall_max = std::max(recall_max, r);
    recall_min = std::min(recall_min, r);
    defined_recalls.push_back(r);
  }
  report.class_acc_diff = recall_max - recall_min;
  if (defined_recalls.size() > 1) {
    // Population standard deviation over per-class recalls.
    const double m = nan_mean(defined_recalls);
    double ss = 0.0;
    for (double r : defined_recalls) ss += (r - m) * (r - m);
    report.per_class_recall_std = std::sqrt(ss / defined_recalls.size());
  }

  report.overall_bce = overall_bce(predictions, labels);
  report.ece = ece(predictions, labels, ece_bins);

  if (num_classes == 2) {
    std::vector<double> pos_scores(n);
    for (int i = 0; i < n; ++i) pos_scores[i] = predictions[i].probs[1];
    report.auroc = auroc(pos_scores, labels);
    report.auprc = auprc(pos_scores, labels);
    report.brier = brier(pos_scores, labels);
  }
  return report;
}

std::string to_json_string(const MetricsReport& r) {
  nlohmann::json j;
  j["avg_acc"] = r.avg_acc;
  j["worst_acc"] = r.worst_acc;
  j["worst_group_acc"] = optional_to_json(r.worst_group_acc);
  j["worst_class_acc"] = r.worst_class_acc;
  j["adjusted_acc"] = r.adjusted_acc;
  j["balanced_acc"] = r.balanced_acc;
  j["avg_precision"] = r.avg_precision;
  j["worst_precision"] = r.worst_precision;
  j["weighted_precision"] = r.weighted_precision;
  j["avg_f1"] = r.avg_f1;
  j["worst_f1"] = r.worst_f1;
  j["class_acc_diff"] = r.class_acc_diff;
  j["per_class_recall_std"] = r.per_class_recall_std;
  j["overall_bce"] = r.overall_bce;
  j["ece"] = r.ece;
  j["auroc"] = optional_to_json(r.auroc);
  j["auprc"] = optional_to_json(r.auprc);
  j["brier"] = optional_to_json(r.brier);
  j["per_group_acc"] = vec_to_json(r.per_group_acc);
  j["per_class_recall"] = vec_to_json(r.per_class_recall);
  j["per_class_precision"] = vec_to_json(r.per_class_precision);
  j["per_class_f1"] = vec_to_json(r.per_class_f1);
  j["num_empty_groups_skipped"] = r.num_empty_groups_skipped;
  return j.dump();
}

MetricsReport report_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MetricsReport r;
  r.avg_acc = j.at("avg_acc").get<double>();
  r.worst_acc = j.at("worst_acc").get<double>();
  r.worst_group_acc = optional_from_json(j.at("worst_group_acc"));
  r.worst_class_acc = j.at("worst_class_acc").get<double>();
  r.adjusted_acc = j.at("adjusted_acc").get<double>();
  r.balanced_acc = j.at("balanced_acc").get<double>();
  r.avg_precision = j.at("avg_precision").get<double>();
  r.worst_precision = j.at("worst_precision").get<double>();
  r.weighted_precision = j.at("weighted_precision").get<double>();
  r.avg_f1 = j.at("avg_f1").get<double>();
  r.worst_f1 = j.at("worst_f1").get<double>();
  r.class_acc_diff = j.at("class_acc_diff").get<double>();
  r.per_class_recall_std = j.at("per_class_recall_std").get<double>();
  r.overall_bce = j.at("overall_bce").get<double>();
  r.ece = j.at("ece").get<double>();
  r.auroc = optional_from_json(j.at("auroc"));
  r.auprc = optional_from_json(j.at("auprc"));
  r.brier = optional_from_json(j.at("brier"));
  r.per_group_acc = vec_from_json(j.at("per_group_acc"));
  r.per_class_recall = vec_from_json(j.at("per_class_recall"));
  r.per_class_precision = vec_from_json(j.at("per_class_precision"));
  r.per_class_f1 = vec_from_json(j.at("per_class_f1"));
  r.num_empty_groups_skipped = j.at("num_empty_groups_skipped").get<int>();
  return r;
}

}  // namespace subpop::metrics
