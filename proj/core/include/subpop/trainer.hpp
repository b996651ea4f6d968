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

#ifndef SUBPOP_TRAINER_HPP_
#define SUBPOP_TRAINER_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subpop/autodiff.hpp"
#include "subpop/core.hpp"
#include "subpop/metrics.hpp"

namespace subpop::train {

// Featurizer + linear head. hidden_width == 0 means the featurizer is the
// identity (a plain linear classifier); otherwise one hidden ReLU layer of
// that width feeds the head.
struct Architecture {
  int input_dim = 0;
  int hidden_width = 32;
  int num_classes = 2;
};

struct Model {
  Architecture arch;
  Mat w1;      // input_dim x hidden_width (empty when identity featurizer)
  Mat b1;      // 1 x hidden_width
  Mat head_w;  // feature_dim x num_classes
  Mat head_b;  // 1 x num_classes

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, fully seed-determined.
  static Model init(const Architecture& arch, std::uint64_t seed);

  int feature_dim() const { return arch.hidden_width > 0 ? arch.hidden_width : arch.input_dim; }
  bool params_equal(const Model& other) const;  // bitwise
};

// Graph handles for one forward pass. `features` is the featurizer output
// (what CORAL/MMD penalize); `logits` feeds the losses.
struct ModelVars {
  ad::VarId w1 = -1;
  ad::VarId b1 = -1;
  ad::VarId head_w = -1;
  ad::VarId head_b = -1;
  ad::VarId features = -1;
  ad::VarId logits = -1;
};

// Builds the forward graph; frozen parts are inserted as constants and
// receive no gradient (and hence no update).
ModelVars forward(ad::Tape& tape, const Model& model, const Mat& x,
                  bool freeze_featurizer = false, bool freeze_head = false);

// Plain inference path (no tape): row-wise softmax probabilities.
Mat predict_probs(const Model& model, const Mat& x);
std::vector<Prediction> predict(const Model& model, const Dataset& data);
Mat features_of(const Model& model, const Mat& x);

enum class Sampling { kUniform, kClassBalanced, kGroupBalanced };
enum class Weighting { kNone, kClassInverse, kGroupInverse, kSqrtClassInverse, kCustom };

const char* to_string(Sampling s);
Sampling sampling_from_string(const std::string& name);
const char* to_string(Weighting w);
Weighting weighting_from_string(const std::string& name);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 128;
  int num_steps = 500;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::kUniform;
  Weighting weighting = Weighting::kNone;
  // Checkpoint cadence; 0 means max(1, num_steps / 20).
  int eval_every = 0;
  // Frozen parameters receive zero updates (stage-2 head retraining).
  bool freeze_featurizer = false;
};

// A minibatch materialized for the tape. When `labels_mixed` is nonempty the
// batch went through mixup-style interpolation: features are already mixed
// and the loss combines labels (weight lam) with labels_mixed (1 - lam).
struct Batch {
  std::vector<int> indices;
  Mat x;
  std::vector<int> labels;
  std::vector<int> attributes;
  std::vector<double> weights;
  int num_classes = 0;
  int num_attributes = 0;
  std::vector<int> labels_mixed;
  double lam = 1.0;
};

// Per-stratum example index lists for balanced sampling.
class StratumIndex {
 public:
  explicit StratumIndex(const Dataset& data);
  const std::vector<std::vector<int>>& by_class() const { return by_class_; }
  const std::vector<std::vector<int>>& by_group() const { return by_group_; }

 private:
  std::vector<std::vector<int>> by_class_;
  std::vector<std::vector<int>> by_group_;
};

// Draws batch indices. Balanced schemes pick a stratum uniformly, then an
// example uniformly inside it; they throw on an empty stratum.
std::vector<int> sample_indices(const Dataset& data, const StratumIndex& strata, Sampling sampling,
                                int batch_size, Rng& rng);
Batch make_batch(const Dataset& data, const std::vector<int>& indices);
Batch sample_batch(const Dataset& data, Sampling sampling, int batch_size, Rng& rng);

struct Checkpoint {
  int step = 0;
  int stage = 1;
  Model model;
  metrics::MetricsReport val_report;
  metrics::MetricsReport test_report;
};

// Builds the step loss on the tape. `step` is the global step index
// (annealing schedules key off it).
using LossFn = std::function<ad::VarId(ad::Tape&, const ModelVars&, const Batch&, int step)>;

// Optional per-step extensions.
struct TrainHooks {
  // Transforms the sampled batch before the forward pass (mixup, LISA).
  std::function<Batch(const Batch&, Rng&)> batch_hook;
  // Called with every recorded checkpoint (JSONL streaming).
  std::function<void(const Checkpoint&)> checkpoint_sink;
};

struct EvalContext {
  const Dataset* val = nullptr;
  const Dataset* test = nullptr;
  bool val_attrs_known = true;
};

// SGD with momentum: v <- momentum * v + g; theta <- theta - lr * v.
// Records a checkpoint every eval_every steps and at the final step.
// Deterministic given config.seed. A non-finite loss aborts with
// NumericError carrying the step in its message.
std::vector<Checkpoint> train(Model& model, const Dataset& train_data, const EvalContext& eval,
                              const TrainConfig& config, const LossFn& loss_fn,
                              const TrainHooks& hooks = {}, int stage_tag = 1,
                              int step_offset = 0);

enum class Stage2Target { kHeadOnly, kFull };

// Stage 1 trains everything; stage 2 re-initializes optimizer state and,
// for kHeadOnly, freezes the featurizer. Checkpoints concatenate with stage
// tags 1 and 2 and a continuing step count.
std::vector<Checkpoint> two_stage_train(Model& model, const Dataset& train_data,
                                        const EvalContext& eval, const TrainConfig& stage1,
                                        const TrainConfig& stage2, Stage2Target stage2_target,
                                        const LossFn& stage1_loss, const LossFn& stage2_loss,
                                        const TrainHooks& hooks = {});

// Mean-1-normalized per-example weights for a weighting scheme (kCustom and
// kNone leave the dataset's own weights in place).
std::vector<double> weights_for(const Dataset& data, Weighting weighting);

// One JSONL row per checkpoint: step, stage, validation and test metrics.
void write_run_log(const std::vector<Checkpoint>& checkpoints, const std::string& path);

}  // namespace subpop::train

#endif  // SUBPOP_TRAINER_HPP_
