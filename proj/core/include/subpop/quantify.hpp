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

#ifndef SUBPOP_QUANTIFY_HPP_
#define SUBPOP_QUANTIFY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "subpop/core.hpp"

namespace subpop::quantify {

// Joint empirical counts of (attribute, class). Rows are attributes,
// columns are classes.
class ContingencyTable {
 public:
  ContingencyTable(int num_attributes, int num_classes);
  static ContingencyTable from_dataset(const Dataset& data);

  std::int64_t& at(int attribute, int label);
  std::int64_t at(int attribute, int label) const;
  int num_attributes() const { return num_attributes_; }
  int num_classes() const { return num_classes_; }

  std::int64_t total() const;
  std::vector<std::int64_t> row_sums() const;  // per attribute
  std::vector<std::int64_t> col_sums() const;  // per class

 private:
  int num_attributes_;
  int num_classes_;
  std::vector<std::int64_t> counts_;
};

// All logarithms are base 2: normalized quantities are base-independent and
// bits make the worked examples exact. The 0*log(0) convention is 0.

// I(A;Y) = sum p(a,y) * log2( p(a,y) / (p(a) p(y)) ). Requires total > 0.
double mutual_information(const ContingencyTable& table);

// 2*I / (H(A) + H(Y)); a table with both marginal entropies zero (single
// nonzero row and column) is degenerate and maps to 0 with a warning.
double normalized_mi(const ContingencyTable& table);

// Pearson chi-squared; cells whose expected count is zero are excluded
// (with a warning, since that only happens for empty rows/columns).
double chi_squared(const ContingencyTable& table);

// V = sqrt(chi2 / (N * (min(A,C) - 1))); 0 with a warning when min(A,C)=1.
double cramers_v(const ContingencyTable& table);

// T = sqrt(chi2 / (N * sqrt((A-1)(C-1)))); 0 with a warning when A=1 or C=1.
double tschuprows_t(const ContingencyTable& table);

struct EntropyStats {
  double entropy = 0.0;             // bits
  double normalized_entropy = 0.0;  // H / log2(support size)
  double pmax_minus_pmin = 0.0;     // over all declared categories, zeros count
};

// `probs` must sum to 1 within 1e-9. A single-category support yields
// normalized entropy 0 with a warning (the log 1 denominator vanishes).
EntropyStats entropy_stats(std::span<const double> probs);

// True iff some group has zero train count but positive test count.
bool attribute_generalization_indicator(const Dataset& train, const Dataset& test);

enum class ShiftType { kSC, kAI, kCI, kAG, kComposite };
const char* to_string(ShiftType type);
ShiftType shift_type_from_string(const std::string& name);

struct ShiftFingerprint {
  double mi = 0.0;
  double nmi = 0.0;
  double cramers_v = 0.0;
  double tschuprows_t = 0.0;
  double entropy_y = 0.0;
  double norm_entropy_y = 0.0;
  double entropy_a = 0.0;
  double norm_entropy_a = 0.0;
  double pmax_minus_pmin_y = 0.0;
  double pmax_minus_pmin_a = 0.0;
  bool attribute_generalization = false;
};

// Computes every statistic on the train split; the AG indicator needs the
// test split and is false when `test` is null.
ShiftFingerprint fingerprint(const Dataset& train, const Dataset* test);

struct DominantShiftThresholds {
  double nmi_sc = 0.10;
};

// Buckets a fingerprint into its most dominant basic shift. AG dominates;
// then SC when nmi >= threshold; otherwise the larger of the attribute and
// class imbalances (1 - normalized entropy) picks AI vs CI, ties going to CI.
// Never returns kComposite.
ShiftType dominant_shift(const ShiftFingerprint& fp, DominantShiftThresholds thresholds = {});

std::string to_json_string(const ShiftFingerprint& fp, ShiftType dominant);

}  // namespace subpop::quantify

#endif  // SUBPOP_QUANTIFY_HPP_
