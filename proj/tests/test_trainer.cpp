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

#include "subpop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "subpop/algorithms.hpp"
#include "subpop/shiftgen.hpp"

namespace subpop::train {
namespace {

const LossFn kErmLoss = [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
  return algo::erm_loss(t, v, b);
};

// Two well-separated 2-D blobs.
Dataset blobs(int n, std::uint64_t seed, Split split = Split::kTrain) {
  Rng rng(seed);
  std::vector<Example> examples;
  for (int i = 0; i < n; ++i) {
    Example e;
    e.label = i % 2;
    e.attribute = 0;
    const double cx = e.label == 0 ? -2.0 : 2.0;
    e.features = {cx + rng.normal(0.0, 0.4), rng.normal(0.0, 0.4)};
    examples.push_back(std::move(e));
  }
  return Dataset(std::move(examples), 2, 1, split);
}

TEST(ModelTest, InitIsSeedDeterministic) {
  const Architecture arch{4, 8, 3};
  const Model a = Model::init(arch, 7);
  const Model b = Model::init(arch, 7);
  const Model c = Model::init(arch, 8);
  EXPECT_TRUE(a.params_equal(b));
  EXPECT_FALSE(a.params_equal(c));
}

TEST(ModelTest, InitBoundsFollowFanIn) {
  const Architecture arch{16, 8, 2};
  const Model m = Model::init(arch, 3);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double w : m.w1.v) {
    EXPECT_GE(w, -bound);
    EXPECT_LE(w, bound);
  }
}

TEST(ModelTest, LinearFeaturizerIsIdentity) {
  const Architecture arch{3, 0, 2};
  const Model m = Model::init(arch, 5);
  EXPECT_EQ(m.feature_dim(), 3);
  Mat x(2, 3, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  EXPECT_EQ(features_of(m, x).v, x.v);
}

TEST(TrainTest, SeparableBlobsReachHighAccuracy) {
  const Dataset data = blobs(400, 1);
  const Dataset val = blobs(100, 2, Split::kVal);
  Model model = Model::init(Architecture{2, 8, 2}, 3);
  TrainConfig config;
  config.num_steps = 500;
  config.learning_rate = 0.05;
  config.batch_size = 64;
  config.seed = 4;
  EvalContext eval;
  eval.val = &val;
  const auto checkpoints = train(model, data, eval, config, kErmLoss);
  ASSERT_FALSE(checkpoints.empty());

  const std::vector<Prediction> preds = predict(model, data);
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) correct += preds[i].predicted == data.example(i).label;
  EXPECT_GE(static_cast<double>(correct) / data.size(), 0.99);
}

TEST(TrainTest, ZeroLearningRateLeavesParamsUntouched) {
  const Dataset data = blobs(100, 1);
  Model model = Model::init(Architecture{2, 4, 2}, 3);
  const Model before = model;
  TrainConfig config;
  config.num_steps = 25;
  config.learning_rate = 0.0;
  config.seed = 9;
  train(model, data, {}, config, kErmLoss);
  EXPECT_TRUE(model.params_equal(before));
}

TEST(TrainTest, SameSeedGivesIdenticalCheckpoints) {
  const Dataset data = blobs(200, 1);
  const Dataset val = blobs(60, 2, Split::kVal);
  TrainConfig config;
  config.num_steps = 60;
  config.learning_rate = 0.05;
  config.seed = 17;
  EvalContext eval;
  eval.val = &val;

  Model m1 = Model::init(Architecture{2, 4, 2}, 5);
  Model m2 = Model::init(Architecture{2, 4, 2}, 5);
  const auto c1 = train(m1, data, eval, config, kErmLoss);
  const auto c2 = train(m2, data, eval, config, kErmLoss);
  ASSERT_EQ(c1.size(), c2.size());
  for (std::size_t i = 0; i < c1.size(); ++i) {
    EXPECT_EQ(c1[i].step, c2[i].step);
    EXPECT_TRUE(c1[i].model.params_equal(c2[i].model));
    EXPECT_DOUBLE_EQ(c1[i].val_report.avg_acc, c2[i].val_report.avg_acc);
  }
}

TEST(TrainTest, NonFiniteLossAborts) {
  const Dataset data = blobs(100, 1);
  Model model = Model::init(Architecture{2, 4, 2}, 3);
  TrainConfig config;
  config.num_steps = 100;
  config.learning_rate = 1e6;  // guaranteed blowup
  config.seed = 2;
  EXPECT_THROW(train(model, data, {}, config, kErmLoss), NumericError);
}

TEST(TrainTest, CheckpointCadence) {
  const Dataset data = blobs(100, 1);
  const Dataset val = blobs(40, 2, Split::kVal);
  Model model = Model::init(Architecture{2, 0, 2}, 3);
  TrainConfig config;
  config.num_steps = 100;
  config.eval_every = 25;
  config.learning_rate = 0.01;
  EvalContext eval;
  eval.val = &val;
  const auto checkpoints = train(model, data, eval, config, kErmLoss);
  ASSERT_EQ(checkpoints.size(), 4u);
  EXPECT_EQ(checkpoints[0].step, 25);
  EXPECT_EQ(checkpoints[3].step, 100);
}

TEST(SampleBatchTest, GroupBalancedFrequencies) {
  std::vector<Example> examples;
  // Heavily skewed group sizes.
  const int sizes[] = {700, 100, 150, 50};
  int g = 0;
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y, ++g) {
      for (int i = 0; i < sizes[g]; ++i) {
        Example e;
        e.features = {0.0};
        e.label = y;
        e.attribute = a;
        examples.push_back(std::move(e));
      }
    }
  }
  const Dataset data(std::move(examples), 2, 2, Split::kTrain);
  const StratumIndex strata(data);
  Rng rng(12);
  std::vector<int> counts(4, 0);
  const int draws = 100000;
  const auto indices = sample_indices(data, strata, Sampling::kGroupBalanced, draws, rng);
  for (int idx : indices) {
    const Example& e = data.example(idx);
    ++counts[linearize(GroupId{e.attribute, e.label}, 2)];
  }
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / draws, 0.25, 0.01);
}

TEST(SampleBatchTest, UniformFollowsSkew) {
  std::vector<Example> examples;
  for (int i = 0; i < 1000; ++i) {
    Example e;
    e.features = {0.0};
    e.label = i < 900 ? 0 : 1;
    e.attribute = 0;
    examples.push_back(std::move(e));
  }
  const Dataset data(std::move(examples), 2, 1, Split::kTrain);
  Rng rng(3);
  const Batch batch = sample_batch(data, Sampling::kUniform, 100000, rng);
  const double freq0 =
      static_cast<double>(std::count(batch.labels.begin(), batch.labels.end(), 0)) / 100000.0;
  EXPECT_NEAR(freq0, 0.9, 0.01);
}

TEST(SampleBatchTest, SingleExampleDataset) {
  std::vector<Example> examples(1);
  examples[0].features = {1.0};
  examples[0].label = 0;
  const Dataset data(std::move(examples), 2, 1, Split::kTrain);
  Rng rng(5);
  set_warning_output(false);
  const Batch batch = sample_batch(data, Sampling::kUniform, 1, rng);
  EXPECT_EQ(batch.labels[0], 0);
  EXPECT_DOUBLE_EQ(batch.x(0, 0), 1.0);
}

TEST(SampleBatchTest, ClassBalancedThrowsOnEmptyClass) {
  std::vector<Example> examples(3);
  for (auto& e : examples) {
    e.features = {0.0};
    e.label = 0;
  }
  const Dataset data(std::move(examples), 2, 1, Split::kTrain);
  const StratumIndex strata(data);
  Rng rng(5);
  EXPECT_THROW(sample_indices(data, strata, Sampling::kClassBalanced, 4, rng),
               std::invalid_argument);
}

TEST(SampleBatchTest, GroupBalancedWithSingleAttributeMatchesClassBalanced) {
  const Dataset data = blobs(300, 6);  // A = 1
  const StratumIndex strata(data);
  Rng rng_group(99);
  Rng rng_class(99);
  const auto group_draw = sample_indices(data, strata, Sampling::kGroupBalanced, 256, rng_group);
  const auto class_draw = sample_indices(data, strata, Sampling::kClassBalanced, 256, rng_class);
  EXPECT_EQ(group_draw, class_draw);
}

TEST(WeightingTest, UnitWeightsReproduceErmBitwise) {
  // kCustom with all example weights at 1 must equal kNone exactly.
  const Dataset data = blobs(200, 7);
  TrainConfig config;
  config.num_steps = 40;
  config.learning_rate = 0.05;
  config.seed = 21;

  Model a = Model::init(Architecture{2, 4, 2}, 11);
  Model b = Model::init(Architecture{2, 4, 2}, 11);
  TrainConfig custom = config;
  custom.weighting = Weighting::kCustom;
  train(a, data, {}, config, kErmLoss);
  train(b, data, {}, custom, kErmLoss);
  EXPECT_TRUE(a.params_equal(b));
}

TEST(WeightingTest, InverseWeightsNormalizeToMeanOne) {
  std::vector<Example> examples;
  for (int i = 0; i < 100; ++i) {
    Example e;
    e.features = {0.0};
    e.label = i < 90 ? 0 : 1;
    e.attribute = 0;
    examples.push_back(std::move(e));
  }
  const Dataset data(std::move(examples), 2, 1, Split::kTrain);
  const std::vector<double> weights = weights_for(data, Weighting::kClassInverse);
  double mean = 0.0;
  for (double w : weights) mean += w;
  EXPECT_NEAR(mean / weights.size(), 1.0, 1e-12);
  // Raw ratio 1:9 between majority and minority example weights.
  EXPECT_NEAR(weights[99] / weights[0], 9.0, 1e-9);
}

TEST(TwoStageTest, HeadOnlyFreezesFeaturizerBitwise) {
  const Dataset data = blobs(200, 3);
  Model model = Model::init(Architecture{2, 8, 2}, 13);
  TrainConfig stage1;
  stage1.num_steps = 50;
  stage1.learning_rate = 0.05;
  stage1.seed = 31;
  TrainConfig stage2 = stage1;
  stage2.seed = 32;

  train(model, data, {}, stage1, kErmLoss);
  const Mat w1_before = model.w1;
  const Mat b1_before = model.b1;
  const Mat head_before = model.head_w;

  TrainConfig cfg2 = stage2;
  cfg2.freeze_featurizer = true;
  train(model, data, {}, cfg2, kErmLoss);
  EXPECT_EQ(model.w1.v, w1_before.v);
  EXPECT_EQ(model.b1.v, b1_before.v);
  EXPECT_NE(model.head_w.v, head_before.v);
}

TEST(TwoStageTest, ZeroStepStageTwoIsIdentity) {
  const Dataset data = blobs(150, 3);
  const Dataset val = blobs(50, 4, Split::kVal);
  EvalContext eval;
  eval.val = &val;

  Model one_stage = Model::init(Architecture{2, 4, 2}, 19);
  TrainConfig stage1;
  stage1.num_steps = 30;
  stage1.learning_rate = 0.05;
  stage1.seed = 41;
  const auto base = train(one_stage, data, eval, stage1, kErmLoss);

  Model two_stage_model = Model::init(Architecture{2, 4, 2}, 19);
  TrainConfig stage2 = stage1;
  stage2.num_steps = 0;
  const auto combined = two_stage_train(two_stage_model, data, eval, stage1, stage2,
                                        Stage2Target::kHeadOnly, kErmLoss, kErmLoss);
  EXPECT_TRUE(one_stage.params_equal(two_stage_model));
  EXPECT_EQ(base.size(), combined.size());
}

TEST(TwoStageTest, StagesAreTaggedAndStepsContinue) {
  const Dataset data = blobs(150, 3);
  Model model = Model::init(Architecture{2, 4, 2}, 23);
  TrainConfig stage1;
  stage1.num_steps = 20;
  stage1.eval_every = 10;
  stage1.learning_rate = 0.02;
  stage1.seed = 51;
  TrainConfig stage2 = stage1;
  stage2.num_steps = 10;
  stage2.eval_every = 5;

  const auto checkpoints = two_stage_train(model, data, {}, stage1, stage2,
                                           Stage2Target::kFull, kErmLoss, kErmLoss);
  ASSERT_EQ(checkpoints.size(), 4u);
  EXPECT_EQ(checkpoints[0].stage, 1);
  EXPECT_EQ(checkpoints[1].stage, 1);
  EXPECT_EQ(checkpoints[2].stage, 2);
  EXPECT_EQ(checkpoints[3].stage, 2);
  EXPECT_EQ(checkpoints[2].step, 25);
  EXPECT_EQ(checkpoints[3].step, 30);
  // Strictly increasing step indices across the concatenation.
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    EXPECT_GT(checkpoints[i].step, checkpoints[i - 1].step);
  }
}

TEST(RunLogTest, WritesOneRowPerCheckpoint) {
  namespace fs = std::filesystem;
  const Dataset data = blobs(100, 3);
  const Dataset val = blobs(40, 4, Split::kVal);
  const Dataset test = blobs(40, 5, Split::kTest);
  Model model = Model::init(Architecture{2, 4, 2}, 29);
  TrainConfig config;
  config.num_steps = 30;
  config.eval_every = 10;
  config.learning_rate = 0.02;
  EvalContext eval;
  eval.val = &val;
  eval.test = &test;
  const auto checkpoints = train(model, data, eval, config, kErmLoss);

  const std::string path = (fs::temp_directory_path() / "subpop_runlog_test.jsonl").string();
  write_run_log(checkpoints, path);
  std::ifstream in(path);
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  EXPECT_EQ(rows, static_cast<int>(checkpoints.size()));
  fs::remove(path);
}

}  // namespace
}  // namespace subpop::train
