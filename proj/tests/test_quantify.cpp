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

#include <cmath>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace subpop::quantify {
namespace {

ContingencyTable table_from(const std::vector<std::vector<std::int64_t>>& counts) {
  ContingencyTable t(static_cast<int>(counts.size()), static_cast<int>(counts[0].size()));
  for (int a = 0; a < t.num_attributes(); ++a) {
    for (int y = 0; y < t.num_classes(); ++y) t.at(a, y) = counts[a][y];
  }
  return t;
}

TEST(MutualInformationTest, PerfectCorrelationOfUniformBinaries) {
  EXPECT_DOUBLE_EQ(mutual_information(table_from({{50, 0}, {0, 50}})), 1.0);
}

TEST(MutualInformationTest, IndependenceIsZero) {
  EXPECT_DOUBLE_EQ(mutual_information(table_from({{25, 25}, {25, 25}})), 0.0);
}

TEST(MutualInformationTest, MatchesDirectSummation) {
  const std::vector<std::vector<std::int64_t>> counts = {{45, 5}, {5, 45}};
  EXPECT_NEAR(mutual_information(table_from(counts)), oracles::mi_bits(counts), 1e-12);
}

TEST(NormalizedMiTest, BoundaryCases) {
  EXPECT_DOUBLE_EQ(normalized_mi(table_from({{50, 0}, {0, 50}})), 1.0);
  EXPECT_DOUBLE_EQ(normalized_mi(table_from({{25, 25}, {25, 25}})), 0.0);
}

TEST(NormalizedMiTest, MatchesDirectFormula) {
  const std::vector<std::vector<std::int64_t>> counts = {{45, 5}, {5, 45}};
  EXPECT_NEAR(normalized_mi(table_from(counts)), oracles::nmi(counts), 1e-12);
}

TEST(NormalizedMiTest, DegenerateTableWarnsAndReturnsZero) {
  set_warning_output(false);
  const std::uint64_t before = warning_count();
  EXPECT_DOUBLE_EQ(normalized_mi(table_from({{10, 0}, {0, 0}})), 0.0);
  EXPECT_GT(warning_count(), before);
}

TEST(AssociationTest, PerfectCorrelationGivesOne) {
  EXPECT_NEAR(cramers_v(table_from({{30, 0}, {0, 30}})), 1.0, 1e-12);
  EXPECT_NEAR(tschuprows_t(table_from({{30, 0}, {0, 30}})), 1.0, 1e-12);
}

TEST(AssociationTest, IndependenceGivesZero) {
  EXPECT_NEAR(cramers_v(table_from({{20, 20}, {20, 20}})), 0.0, 1e-12);
  EXPECT_NEAR(tschuprows_t(table_from({{20, 20}, {20, 20}})), 0.0, 1e-12);
}

TEST(AssociationTest, MatchesChiSquaredOracle) {
  const std::vector<std::vector<std::int64_t>> counts = {{40, 10}, {20, 30}};
  EXPECT_NEAR(chi_squared(table_from(counts)), oracles::chi2(counts), 1e-10);
  EXPECT_NEAR(cramers_v(table_from(counts)), oracles::cramers_v(counts), 1e-12);
  EXPECT_NEAR(tschuprows_t(table_from(counts)), oracles::tschuprows_t(counts), 1e-12);
}

TEST(AssociationTest, SingleRowWarnsAndReturnsZero) {
  set_warning_output(false);
  const std::uint64_t before = warning_count();
  EXPECT_DOUBLE_EQ(cramers_v(table_from({{10, 20}})), 0.0);
  EXPECT_DOUBLE_EQ(tschuprows_t(table_from({{10, 20}})), 0.0);
  EXPECT_GT(warning_count(), before);
}

TEST(EntropyStatsTest, UniformOverFour) {
  const EntropyStats stats = entropy_stats(std::vector<double>{0.25, 0.25, 0.25, 0.25});
  EXPECT_DOUBLE_EQ(stats.entropy, 2.0);
  EXPECT_DOUBLE_EQ(stats.normalized_entropy, 1.0);
  EXPECT_DOUBLE_EQ(stats.pmax_minus_pmin, 0.0);
}

TEST(EntropyStatsTest, DegenerateDistributionWarns) {
  set_warning_output(false);
  const std::uint64_t before = warning_count();
  const EntropyStats stats = entropy_stats(std::vector<double>{1.0, 0.0});
  EXPECT_DOUBLE_EQ(stats.entropy, 0.0);
  EXPECT_DOUBLE_EQ(stats.normalized_entropy, 0.0);
  EXPECT_DOUBLE_EQ(stats.pmax_minus_pmin, 1.0);
  EXPECT_GT(warning_count(), before);
}

TEST(EntropyStatsTest, SkewedBinaryMatchesFormula) {
  const EntropyStats stats = entropy_stats(std::vector<double>{0.9, 0.1});
  const double expected = -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1));
  EXPECT_NEAR(stats.entropy, expected, 1e-12);
  EXPECT_NEAR(stats.normalized_entropy, expected, 1e-12);  // support 2, log2(2) = 1
  EXPECT_NEAR(stats.pmax_minus_pmin, 0.8, 1e-12);
}

TEST(EntropyStatsTest, ZeroProbabilityCategoriesCountForPmaxPmin) {
  const EntropyStats stats = entropy_stats(std::vector<double>{0.5, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(stats.pmax_minus_pmin, 0.5);
  EXPECT_DOUBLE_EQ(stats.normalized_entropy, 1.0);  // support-size normalization
}

Dataset dataset_from_group_counts(const std::vector<std::vector<int>>& counts, Split split) {
  std::vector<Example> examples;
  const int num_classes = static_cast<int>(counts[0].size());
  for (int a = 0; a < static_cast<int>(counts.size()); ++a) {
    for (int y = 0; y < num_classes; ++y) {
      for (int i = 0; i < counts[a][y]; ++i) {
        Example e;
        e.features = {0.0};
        e.label = y;
        e.attribute = a;
        examples.push_back(std::move(e));
      }
    }
  }
  return Dataset(std::move(examples), num_classes, static_cast<int>(counts.size()), split);
}

TEST(AgIndicatorTest, IdenticalSupportsAreFalse) {
  const Dataset train = dataset_from_group_counts({{5, 5}, {5, 5}}, Split::kTrain);
  const Dataset test = dataset_from_group_counts({{2, 2}, {2, 2}}, Split::kTest);
  EXPECT_FALSE(attribute_generalization_indicator(train, test));
}

TEST(AgIndicatorTest, HeldOutGroupFires) {
  const Dataset train = dataset_from_group_counts({{5, 5}, {0, 5}}, Split::kTrain);
  const Dataset test = dataset_from_group_counts({{2, 2}, {2, 2}}, Split::kTest);
  EXPECT_TRUE(attribute_generalization_indicator(train, test));
}

TEST(AgIndicatorTest, GroupMissingFromBothIsFalse) {
  const Dataset train = dataset_from_group_counts({{5, 5}, {0, 5}}, Split::kTrain);
  const Dataset test = dataset_from_group_counts({{2, 2}, {0, 2}}, Split::kTest);
  EXPECT_FALSE(attribute_generalization_indicator(train, test));
}

TEST(DominantShiftTest, AgDominates) {
  ShiftFingerprint fp;
  fp.attribute_generalization = true;
  fp.nmi = 0.9;
  EXPECT_EQ(dominant_shift(fp), ShiftType::kAG);
}

TEST(DominantShiftTest, HighNmiIsSc) {
  ShiftFingerprint fp;
  fp.nmi = 0.25;
  fp.norm_entropy_a = 0.5;
  fp.norm_entropy_y = 0.9;
  EXPECT_EQ(dominant_shift(fp), ShiftType::kSC);
}

TEST(DominantShiftTest, ImbalancePicksAiOrCi) {
  ShiftFingerprint fp;
  fp.nmi = 0.01;
  fp.norm_entropy_a = 0.6;  // attribute imbalance 0.4
  fp.norm_entropy_y = 0.9;  // class imbalance 0.1
  EXPECT_EQ(dominant_shift(fp), ShiftType::kAI);
  fp.norm_entropy_a = 0.95;
  fp.norm_entropy_y = 0.2;
  EXPECT_EQ(dominant_shift(fp), ShiftType::kCI);
}

TEST(DominantShiftTest, UniformEverythingTiesToCi) {
  ShiftFingerprint fp;
  fp.nmi = 0.0;
  fp.norm_entropy_a = 1.0;
  fp.norm_entropy_y = 1.0;
  EXPECT_EQ(dominant_shift(fp), ShiftType::kCI);
}

TEST(PropertyTest, StatisticsInvariantUnderIndexPermutation) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 2 + rng.uniform_int(3);
    const int cols = 2 + rng.uniform_int(3);
    std::vector<std::vector<std::int64_t>> counts(rows, std::vector<std::int64_t>(cols));
    for (auto& row : counts) {
      for (auto& c : row) c = 1 + rng.uniform_int(50);
    }
    // Swap two rows and two columns.
    std::vector<std::vector<std::int64_t>> permuted = counts;
    std::swap(permuted[0], permuted[rows - 1]);
    for (auto& row : permuted) std::swap(row[0], row[cols - 1]);

    const ContingencyTable t1 = table_from(counts);
    const ContingencyTable t2 = table_from(permuted);
    EXPECT_NEAR(mutual_information(t1), mutual_information(t2), 1e-12);
    EXPECT_NEAR(normalized_mi(t1), normalized_mi(t2), 1e-12);
    EXPECT_NEAR(cramers_v(t1), cramers_v(t2), 1e-12);
    EXPECT_NEAR(tschuprows_t(t1), tschuprows_t(t2), 1e-12);
  }
}

TEST(PropertyTest, CramersVEqualsTschuprowsTOnSquareTables) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + rng.uniform_int(3);
    std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k));
    for (auto& row : counts) {
      for (auto& c : row) c = 1 + rng.uniform_int(40);
    }
    const ContingencyTable t = table_from(counts);
    EXPECT_NEAR(cramers_v(t), tschuprows_t(t), 1e-12);
  }
}

TEST(PropertyTest, BoundsAndMiCap) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 2 + rng.uniform_int(4);
    const int cols = 2 + rng.uniform_int(4);
    std::vector<std::vector<std::int64_t>> counts(rows, std::vector<std::int64_t>(cols));
    for (auto& row : counts) {
      for (auto& c : row) c = rng.uniform_int(30);
    }
    counts[0][0] += 1;  // nonempty table
    const ContingencyTable t = table_from(counts);
    const double mi = mutual_information(t);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, std::min(oracles::marginal_entropy_rows(counts),
                           oracles::marginal_entropy_cols(counts)) +
                      1e-9);
    set_warning_output(false);
    EXPECT_GE(normalized_mi(t), 0.0);
    EXPECT_LE(normalized_mi(t), 1.0);
    EXPECT_GE(cramers_v(t), 0.0);
    EXPECT_LE(cramers_v(t), 1.0);
    EXPECT_GE(tschuprows_t(t), 0.0);
    EXPECT_LE(tschuprows_t(t), 1.0);
  }
}

TEST(FingerprintTest, ComputesAllFields) {
  const Dataset train = dataset_from_group_counts({{45, 5}, {5, 45}}, Split::kTrain);
  const Dataset test = dataset_from_group_counts({{10, 10}, {10, 10}}, Split::kTest);
  const ShiftFingerprint fp = fingerprint(train, &test);
  const std::vector<std::vector<std::int64_t>> counts = {{45, 5}, {5, 45}};
  EXPECT_NEAR(fp.mi, oracles::mi_bits(counts), 1e-12);
  EXPECT_NEAR(fp.nmi, oracles::nmi(counts), 1e-12);
  EXPECT_NEAR(fp.norm_entropy_y, 1.0, 1e-12);
  EXPECT_NEAR(fp.norm_entropy_a, 1.0, 1e-12);
  EXPECT_FALSE(fp.attribute_generalization);
  EXPECT_EQ(dominant_shift(fp), ShiftType::kSC);
}

}  // namespace
}  // namespace subpop::quantify
