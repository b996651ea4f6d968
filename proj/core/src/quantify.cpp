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

#include "subpop/quantify.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace subpop::quantify {

namespace {

double entropy_bits(std::span<const std::int64_t> counts, std::int64_t total) {
  double h = 0.0;
  for (std::int64_t c : counts) {
    if (c <= 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

ContingencyTable::ContingencyTable(int num_attributes, int num_classes)
    : num_attributes_(num_attributes),
      num_classes_(num_classes),
      counts_(static_cast<std::size_t>(num_attributes) * num_classes, 0) {
  if (num_attributes <= 0 || num_classes <= 0) {
    throw std::invalid_argument("ContingencyTable: dimensions must be positive");
  }
}

ContingencyTable ContingencyTable::from_dataset(const Dataset& data) {
  ContingencyTable table(data.num_attributes(), data.num_classes());
  for (const Example& e : data.examples()) ++table.at(e.attribute, e.label);
  return table;
}

std::int64_t& ContingencyTable::at(int attribute, int label) {
  return counts_[static_cast<std::size_t>(attribute) * num_classes_ + label];
}

std::int64_t ContingencyTable::at(int attribute, int label) const {
  return counts_[static_cast<std::size_t>(attribute) * num_classes_ + label];
}

std::int64_t ContingencyTable::total() const {
  std::int64_t n = 0;
  for (std::int64_t c : counts_) {
    if (c < 0) throw std::invalid_argument("ContingencyTable: negative count");
    n += c;
  }
  return n;
}

std::vector<std::int64_t> ContingencyTable::row_sums() const {
  std::vector<std::int64_t> sums(num_attributes_, 0);
  for (int a = 0; a < num_attributes_; ++a) {
    for (int y = 0; y < num_classes_; ++y) sums[a] += at(a, y);
  }
  return sums;
}

std::vector<std::int64_t> ContingencyTable::col_sums() const {
  std::vector<std::int64_t> sums(num_classes_, 0);
  for (int a = 0; a < num_attributes_; ++a) {
    for (int y = 0; y < num_classes_; ++y) sums[y] += at(a, y);
  }
  return sums;
}

double mutual_information(const ContingencyTable& table) {
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("mutual_information: empty table");
  const std::vector<std::int64_t> rows = table.row_sums();
  const std::vector<std::int64_t> cols = table.col_sums();
  double mi = 0.0;
  for (int a = 0; a < table.num_attributes(); ++a) {
    for (int y = 0; y < table.num_classes(); ++y) {
      const std::int64_t c = table.at(a, y);
      if (c <= 0) continue;
      const double p_ay = static_cast<double>(c) / n;
      const double p_a = static_cast<double>(rows[a]) / n;
      const double p_y = static_cast<double>(cols[y]) / n;
      mi += p_ay * std::log2(p_ay / (p_a * p_y));
    }
  }
  // Tiny negative values can appear from rounding on independent tables.
  return std::max(mi, 0.0);
}

double normalized_mi(const ContingencyTable& table) {
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("normalized_mi: empty table");
  const double h_a = entropy_bits(table.row_sums(), n);
  const double h_y = entropy_bits(table.col_sums(), n);
  if (h_a + h_y <= 0.0) {
    warn("normalized_mi: both marginal entropies vanish; returning 0");
    return 0.0;
  }
  const double nmi = 2.0 * mutual_information(table) / (h_a + h_y);
  return std::clamp(nmi, 0.0, 1.0);
}

double chi_squared(const ContingencyTable& table) {
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("chi_squared: empty table");
  const std::vector<std::int64_t> rows = table.row_sums();
  const std::vector<std::int64_t> cols = table.col_sums();
  double chi2 = 0.0;
  bool skipped = false;
  for (int a = 0; a < table.num_attributes(); ++a) {
    for (int y = 0; y < table.num_classes(); ++y) {
      const double expected = static_cast<double>(rows[a]) * cols[y] / n;
      if (expected <= 0.0) {
        skipped = true;
        continue;
      }
      const double diff = static_cast<double>(table.at(a, y)) - expected;
      chi2 += diff * diff / expected;
    }
  }
  if (skipped) warn("chi_squared: cells with zero expected count excluded");
  return chi2;
}

double cramers_v(const ContingencyTable& table) {
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("cramers_v: empty table");
  const int k = std::min(table.num_attributes(), table.num_classes());
  if (k <= 1) {
    warn("cramers_v: min(A, C) = 1, association undefined; returning 0");
    return 0.0;
  }
  const double v = std::sqrt(chi_squared(table) / (static_cast<double>(n) * (k - 1)));
  return std::clamp(v, 0.0, 1.0);
}

double tschuprows_t(const ContingencyTable& table) {
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("tschuprows_t: empty table");
  const int a = table.num_attributes();
  const int c = table.num_classes();
  if (a <= 1 || c <= 1) {
    warn("tschuprows_t: degenerate table dimensions; returning 0");
    return 0.0;
  }
  const double denom = static_cast<double>(n) * std::sqrt(static_cast<double>(a - 1) * (c - 1));
  const double t = std::sqrt(chi_squared(table) / denom);
  return std::clamp(t, 0.0, 1.0);
}

EntropyStats entropy_stats(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("entropy_stats: empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("entropy_stats: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("entropy_stats: probabilities must sum to 1 within 1e-9");
  }

  EntropyStats out;
  int support = 0;
  double pmax = 0.0;
  double pmin = 1.0;
  for (double p : probs) {
    pmax = std::max(pmax, p);
    pmin = std::min(pmin, p);
    if (p > 0.0) {
      ++support;
      out.entropy -= p * std::log2(p);
    }
  }
  out.pmax_minus_pmin = pmax - pmin;
  if (support <= 1) {
    warn("entropy_stats: single-category support, normalized entropy set to 0");
    out.normalized_entropy = 0.0;
  } else {
    out.normalized_entropy = out.entropy / std::log2(static_cast<double>(support));
  }
  return out;
}

bool attribute_generalization_indicator(const Dataset& train, const Dataset& test) {
  if (train.num_classes() != test.num_classes() ||
      train.num_attributes() != test.num_attributes()) {
    throw std::invalid_argument("attribute_generalization_indicator: incompatible (A, C)");
  }
  const std::vector<std::int64_t> train_counts = train.group_counts_linear();
  const std::vector<std::int64_t> test_counts = test.group_counts_linear();
  for (std::size_t g = 0; g < train_counts.size(); ++g) {
    if (train_counts[g] == 0 && test_counts[g] > 0) return true;
  }
  return false;
}

const char* to_string(ShiftType type) {
  switch (type) {
    case ShiftType::kSC: return "SC";
    case ShiftType::kAI: return "AI";
    case ShiftType::kCI: return "CI";
    case ShiftType::kAG: return "AG";
    case ShiftType::kComposite: return "composite";
  }
  return "?";
}

ShiftType shift_type_from_string(const std::string& name) {
  if (name == "SC") return ShiftType::kSC;
  if (name == "AI") return ShiftType::kAI;
  if (name == "CI") return ShiftType::kCI;
  if (name == "AG") return ShiftType::kAG;
  if (name == "composite") return ShiftType::kComposite;
  throw std::invalid_argument("unknown shift type: " + name);
}

ShiftFingerprint fingerprint(const Dataset& train, const Dataset* test) {
  const ContingencyTable table = ContingencyTable::from_dataset(train);
  const std::int64_t n = table.total();
  if (n <= 0) throw std::invalid_argument("fingerprint: empty train split");

  ShiftFingerprint fp;
  fp.mi = mutual_information(table);
  fp.nmi = normalized_mi(table);
  fp.cramers_v = cramers_v(table);
  fp.tschuprows_t = tschuprows_t(table);

  auto to_probs = [n](const std::vector<std::int64_t>& counts) {
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / n;
    return p;
  };
  const EntropyStats y_stats = entropy_stats(to_probs(table.col_sums()));
  const EntropyStats a_stats = entropy_stats(to_probs(table.row_sums()));
  fp.entropy_y = y_stats.entropy;
  fp.norm_entropy_y = y_stats.normalized_entropy;
  fp.pmax_minus_pmin_y = y_stats.pmax_minus_pmin;
  fp.entropy_a = a_stats.entropy;
  fp.norm_entropy_a = a_stats.normalized_entropy;
  fp.pmax_minus_pmin_a = a_stats.pmax_minus_pmin;

  fp.attribute_generalization = (test != nullptr) && attribute_generalization_indicator(train, *test);
  return fp;
}

ShiftType dominant_shift(const ShiftFingerprint& fp, DominantShiftThresholds thresholds) {
  if (fp.attribute_generalization) return ShiftType::kAG;
  if (fp.nmi >= thresholds.nmi_sc) return ShiftType::kSC;
  const double attribute_imbalance = 1.0 - fp.norm_entropy_a;
  const double class_imbalance = 1.0 - fp.norm_entropy_y;
  // Tie order SC > CI > AI: an exact AI/CI tie resolves to CI.
  return attribute_imbalance > class_imbalance ? ShiftType::kAI : ShiftType::kCI;
}

std::string to_json_string(const ShiftFingerprint& fp, ShiftType dominant) {
  nlohmann::json j;
  j["mi"] = fp.mi;
  j["nmi"] = fp.nmi;
  j["cramers_v"] = fp.cramers_v;
  j["tschuprows_t"] = fp.tschuprows_t;
  j["entropy_y"] = fp.entropy_y;
  j["norm_entropy_y"] = fp.norm_entropy_y;
  j["entropy_a"] = fp.entropy_a;
  j["norm_entropy_a"] = fp.norm_entropy_a;
  j["pmax_minus_pmin_y"] = fp.pmax_minus_pmin_y;
  j["pmax_minus_pmin_a"] = fp.pmax_minus_pmin_a;
  j["attribute_generalization"] = fp.attribute_generalization;
  j["dominant_shift"] = to_string(dominant);
  return j.dump(2);
}

}  // namespace subpop::quantify
