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

#include "subpop/shiftgen.hpp"

#include <cmath>
#include <filesystem>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "subpop/quantify.hpp"

namespace subpop::gen {
namespace {

using quantify::ShiftType;

GenSpec sc_spec(double rho, int n_train = 4000, std::uint64_t seed = 0) {
  GenSpec spec;
  spec.shift_type = ShiftType::kSC;
  spec.rho = rho;
  spec.n_train = n_train;
  spec.n_val = 1000;
  spec.n_test = 2000;
  spec.seed = seed;
  return spec;
}

TEST(GenerateScTest, EmpiricalCorrelationNearRho) {
  const DataBundle data = generate(sc_spec(0.95));
  std::int64_t aligned = 0;
  for (const Example& e : data.train.examples()) {
    if (e.attribute == e.label % data.train.num_attributes()) ++aligned;
  }
  const double p = static_cast<double>(aligned) / data.train.size();
  EXPECT_GE(p, 0.93);
  EXPECT_LE(p, 0.97);
}

TEST(GenerateScTest, TestSplitIsGroupBalanced) {
  const DataBundle data = generate(sc_spec(0.95));
  const auto counts = data.test.group_counts_linear();
  for (std::int64_t c : counts) EXPECT_EQ(c, 2000 / 4);
}

TEST(GenerateCiTest, TrainSkewedTestBalanced) {
  GenSpec spec;
  spec.shift_type = ShiftType::kCI;
  spec.class_skew = {0.9, 0.1};
  spec.n_train = 10000;
  spec.seed = 3;
  const DataBundle data = generate(spec);

  const auto train_counts = data.train.class_counts();
  const double ratio = static_cast<double>(train_counts[0]) / train_counts[1];
  EXPECT_NEAR(ratio, 9.0, 1.5);

  const auto test_counts = data.test.class_counts();
  EXPECT_EQ(test_counts[0], test_counts[1]);
}

TEST(GenerateAgTest, HeldOutGroupAbsentFromTrainPresentInTest) {
  GenSpec spec;
  spec.shift_type = ShiftType::kAG;
  spec.num_attributes = 3;
  spec.held_out_groups = {GroupId{1, 0}};
  spec.seed = 11;
  const DataBundle data = generate(spec);

  const int gid = linearize(GroupId{1, 0}, spec.num_classes);
  EXPECT_EQ(data.train.group_counts_linear()[gid], 0);
  EXPECT_GT(data.test.group_counts_linear()[gid], 0);
  EXPECT_TRUE(quantify::attribute_generalization_indicator(data.train, data.test));
}

TEST(GenerateTest, RejectsAntiCorrelatedRho) {
  EXPECT_THROW(generate(sc_spec(0.3)), std::invalid_argument);  // 1/A = 0.5
}

TEST(GenerateTest, RejectsHeldOutGroupsCoveringAClass) {
  GenSpec spec;
  spec.shift_type = ShiftType::kAG;
  spec.num_attributes = 2;
  spec.held_out_groups = {GroupId{0, 0}, GroupId{1, 0}};
  EXPECT_THROW(generate(spec), std::invalid_argument);
}

TEST(GenerateTest, SameSeedGivesByteIdenticalData) {
  const DataBundle a = generate(sc_spec(0.9, 1000, 42));
  const DataBundle b = generate(sc_spec(0.9, 1000, 42));
  ASSERT_EQ(a.train.size(), b.train.size());
  for (int i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.example(i).label, b.train.example(i).label);
    EXPECT_EQ(a.train.example(i).attribute, b.train.example(i).attribute);
    EXPECT_EQ(a.train.example(i).features, b.train.example(i).features);
  }
  for (int i = 0; i < a.test.size(); ++i) {
    EXPECT_EQ(a.test.example(i).features, b.test.example(i).features);
  }
}

TEST(GenerateTest, DifferentSeedsDiffer) {
  const DataBundle a = generate(sc_spec(0.9, 1000, 1));
  const DataBundle b = generate(sc_spec(0.9, 1000, 2));
  EXPECT_NE(a.train.example(0).features, b.train.example(0).features);
}

// Quantification fingerprints of generated data match the intended shift.
TEST(GenerateQuantifyTest, ScNmiIncreasesWithRho) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double prev = -1.0;
    for (double rho : {0.5, 0.7, 0.9, 0.99}) {
      const DataBundle data = generate(sc_spec(rho, 6000, seed));
      const double nmi = quantify::fingerprint(data.train, &data.test).nmi;
      EXPECT_GT(nmi, prev) << "rho " << rho << " seed " << seed;
      prev = nmi;
    }
  }
}

TEST(GenerateQuantifyTest, ScAtUniformRhoHasNearZeroNmi) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DataBundle data = generate(sc_spec(0.5, 6000, seed));
    EXPECT_LT(quantify::fingerprint(data.train, &data.test).nmi, 0.01) << "seed " << seed;
  }
}

TEST(GenerateQuantifyTest, AiSkewsAttributesOnly) {
  GenSpec spec;
  spec.shift_type = ShiftType::kAI;
  spec.attribute_skew = {0.9, 0.1};
  spec.n_train = 8000;
  spec.seed = 5;
  const DataBundle data = generate(spec);
  const quantify::ShiftFingerprint fp = quantify::fingerprint(data.train, &data.test);
  EXPECT_LT(fp.norm_entropy_a, 0.75);
  EXPECT_GT(fp.norm_entropy_y, 0.99);
  EXPECT_EQ(quantify::dominant_shift(fp), ShiftType::kAI);
}

TEST(GenerateQuantifyTest, CiIsSymmetricInAttributes) {
  GenSpec spec;
  spec.shift_type = ShiftType::kCI;
  spec.class_skew = {0.85, 0.15};
  spec.n_train = 8000;
  spec.seed = 6;
  const DataBundle data = generate(spec);
  const quantify::ShiftFingerprint fp = quantify::fingerprint(data.train, &data.test);
  EXPECT_LT(fp.nmi, 0.01);
  EXPECT_GT(fp.norm_entropy_a, 0.99);
  EXPECT_LT(fp.norm_entropy_y, 0.75);
  EXPECT_EQ(quantify::dominant_shift(fp), ShiftType::kCI);
}

TEST(GenerateQuantifyTest, AgIndicatorFiresExactlyForHeldOutGroups) {
  GenSpec spec;
  spec.shift_type = ShiftType::kAG;
  spec.num_attributes = 3;
  spec.held_out_groups = {GroupId{2, 1}};
  spec.seed = 8;
  const DataBundle data = generate(spec);
  const auto train_counts = data.train.group_counts_linear();
  const auto test_counts = data.test.group_counts_linear();
  for (int g = 0; g < data.train.num_groups(); ++g) {
    const bool held_out = g == linearize(GroupId{2, 1}, spec.num_classes);
    EXPECT_EQ(train_counts[g] == 0 && test_counts[g] > 0, held_out) << "group " << g;
  }
}

TEST(GenerateQuantifyTest, LabelEntropyConvergesToSkewEntropy) {
  GenSpec spec;
  spec.shift_type = ShiftType::kCI;
  spec.class_skew = {0.7, 0.3};
  spec.n_train = 100000;
  spec.seed = 9;
  const DataBundle data = generate(spec);
  const quantify::EntropyStats empirical = quantify::entropy_stats([&] {
    const auto counts = data.train.class_counts();
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      p[i] = static_cast<double>(counts[i]) / data.train.size();
    }
    return p;
  }());
  const double expected = oracles::entropy_bits({0.7, 0.3});
  EXPECT_NEAR(empirical.normalized_entropy, expected, 0.02);  // support 2: norm = plain entropy
}

TEST(BayesErrorTest, VanishesAsNoiseGoesToZero) {
  GenSpec spec = sc_spec(0.9);
  spec.noise_sigma = 1e-9;
  for (double err : bayes_optimal_error(spec, 2000)) EXPECT_EQ(err, 0.0);
}

TEST(BayesErrorTest, MatchesGaussianCdfInOneDimension) {
  GenSpec spec = sc_spec(0.9);
  spec.core_dim = 1;  // class means at -1 and +1
  spec.noise_sigma = 1.0;
  const std::vector<double> errs = bayes_optimal_error(spec, 400000);
  // Decision boundary at 0: error = P(N(1,1) < 0) = Phi(-1).
  const double expected = oracles::phi(-1.0);
  for (double err : errs) EXPECT_NEAR(err, expected, 0.005);
}

TEST(BayesErrorTest, SymmetricSpecGivesIdenticalGroupErrors) {
  GenSpec spec = sc_spec(0.9);
  spec.noise_sigma = 0.8;
  const std::vector<double> errs = bayes_optimal_error(spec, 50000);
  // Core features ignore the attribute, so groups differing only in the
  // attribute have exactly equal error; across classes the Monte Carlo
  // estimates agree within sampling noise for this symmetric layout.
  for (int a = 0; a < spec.num_attributes; ++a) {
    for (int y = 0; y < spec.num_classes; ++y) {
      EXPECT_DOUBLE_EQ(errs[linearize(GroupId{a, y}, spec.num_classes)],
                       errs[linearize(GroupId{0, y}, spec.num_classes)]);
    }
  }
  EXPECT_NEAR(errs[0], errs[1], 0.01);
}

TEST(CompositeTest, TestSplitKeepsClassSkewBalancesAttributes) {
  GenSpec spec;
  spec.shift_type = ShiftType::kComposite;
  spec.rho = 0.9;
  spec.class_skew = {0.75, 0.25};
  spec.n_test = 2000;
  spec.seed = 10;
  const DataBundle data = generate(spec);
  const auto counts = data.test.group_counts_linear();
  EXPECT_EQ(counts[linearize(GroupId{0, 0}, 2)], 750);
  EXPECT_EQ(counts[linearize(GroupId{1, 0}, 2)], 750);
  EXPECT_EQ(counts[linearize(GroupId{0, 1}, 2)], 250);
  EXPECT_EQ(counts[linearize(GroupId{1, 1}, 2)], 250);
}

TEST(DatasetDirTest, WriteAndLoadRoundTrip) {
  namespace fs = std::filesystem;
  const GenSpec spec = sc_spec(0.9, 500, 13);
  const DataBundle data = generate(spec);
  const std::string dir = (fs::temp_directory_path() / "subpop_gen_dir_test").string();
  write_dataset_dir(spec, data, dir);

  const DataBundle back = load_dataset_dir(dir);
  EXPECT_EQ(back.train.size(), data.train.size());
  EXPECT_EQ(back.val.size(), data.val.size());
  EXPECT_EQ(back.test.size(), data.test.size());
  EXPECT_EQ(back.train.num_classes(), data.train.num_classes());
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(back.train.example(i).label, data.train.example(i).label);
    EXPECT_NEAR(back.train.example(i).features[0], data.train.example(i).features[0], 1e-15);
  }
  fs::remove_all(dir);
}

TEST(SpecJsonTest, RoundTrips) {
  GenSpec spec;
  spec.shift_type = ShiftType::kComposite;
  spec.rho = 0.925;
  spec.class_skew = {0.6, 0.4};
  spec.held_out_groups = {GroupId{1, 1}};
  spec.seed = 99;
  const GenSpec back = spec_from_json_string(to_json_string(spec));
  EXPECT_EQ(back.shift_type, spec.shift_type);
  EXPECT_DOUBLE_EQ(back.rho, spec.rho);
  EXPECT_EQ(back.class_skew, spec.class_skew);
  ASSERT_EQ(back.held_out_groups.size(), 1u);
  EXPECT_EQ(back.held_out_groups[0], spec.held_out_groups[0]);
  EXPECT_EQ(back.seed, spec.seed);
}

}  // namespace
}  // namespace subpop::gen
