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
#include <fstream>

#include "json.hpp"

namespace subpop::train {

namespace {

void fill_uniform(Mat* m, double bound, Rng& rng) {
  for (double& x : m->v) x = rng.uniform(-bound, bound);
}

}  // namespace

Model Model::init(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim < 1) throw std::invalid_argument("Model::init: input_dim must be positive");
  if (arch.num_classes < 2) throw std::invalid_argument("Model::init: need at least two classes");
  if (arch.hidden_width < 0) throw std::invalid_argument("Model::init: hidden_width must be >= 0");

  Model model;
  model.arch = arch;
  Rng rng = Rng::forked(seed, "init");
  if (arch.hidden_width > 0) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));
    model.w1 = Mat(arch.input_dim, arch.hidden_width);
    model.b1 = Mat(1, arch.hidden_width);
    fill_uniform(&model.w1, bound, rng);
    fill_uniform(&model.b1, bound, rng);
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(model.feature_dim()));
  model.head_w = Mat(model.feature_dim(), arch.num_classes);
  model.head_b = Mat(1, arch.num_classes);
  fill_uniform(&model.head_w, head_bound, rng);
  fill_uniform(&model.head_b, head_bound, rng);
  return model;
}

bool Model::params_equal(const Model& other) const {
  return w1.v == other.w1.v && b1.v == other.b1.v && head_w.v == other.head_w.v &&
         head_b.v == other.head_b.v;
}

ModelVars forward(ad::Tape& tape, const Model& model, const Mat& x, bool freeze_featurizer,
                  bool freeze_head) {
  if (x.cols != model.arch.input_dim) {
    throw std::invalid_argument("forward: input width does not match the architecture");
  }
  ModelVars vars;
  const ad::VarId input = tape.constant(x);
  if (model.arch.hidden_width > 0) {
    vars.w1 = freeze_featurizer ? tape.constant(model.w1) : tape.leaf(model.w1);
    vars.b1 = freeze_featurizer ? tape.constant(model.b1) : tape.leaf(model.b1);
    vars.features = tape.relu(tape.add(tape.matmul(input, vars.w1), vars.b1));
  } else {
    vars.features = input;
  }
  vars.head_w = freeze_head ? tape.constant(model.head_w) : tape.leaf(model.head_w);
  vars.head_b = freeze_head ? tape.constant(model.head_b) : tape.leaf(model.head_b);
  vars.logits = tape.add(tape.matmul(vars.features, vars.head_w), vars.head_b);
  return vars;
}

Mat features_of(const Model& model, const Mat& x) {
  if (model.arch.hidden_width == 0) return x;
  Mat feat(x.rows, model.arch.hidden_width);
  for (int r = 0; r < x.rows; ++r) {
    for (int h = 0; h < model.arch.hidden_width; ++h) {
      double z = model.b1(0, h);
      for (int c = 0; c < x.cols; ++c) z += x(r, c) * model.w1(c, h);
      feat(r, h) = std::max(z, 0.0);
    }
  }
  return feat;
}

Mat predict_probs(const Model& model, const Mat& x) {
  const Mat feat = features_of(model, x);
  Mat probs(x.rows, model.arch.num_classes);
  for (int r = 0; r < x.rows; ++r) {
    double max_z = -std::numeric_limits<double>::infinity();
    std::vector<double> z(static_cast<std::size_t>(model.arch.num_classes));
    for (int c = 0; c < model.arch.num_classes; ++c) {
      double acc = model.head_b(0, c);
      for (int f = 0; f < feat.cols; ++f) acc += feat(r, f) * model.head_w(f, c);
      z[c] = acc;
      max_z = std::max(max_z, acc);
    }
    double total = 0.0;
    for (int c = 0; c < model.arch.num_classes; ++c) {
      z[c] = std::exp(z[c] - max_z);
      total += z[c];
    }
    for (int c = 0; c < model.arch.num_classes; ++c) probs(r, c) = z[c] / total;
  }
  if (!probs.all_finite()) throw NumericError("predict_probs: non-finite probabilities");
  return probs;
}

std::vector<Prediction> predict(const Model& model, const Dataset& data) {
  Mat x(data.size(), data.feature_dim());
  for (int i = 0; i < data.size(); ++i) {
    const Example& e = data.example(i);
    for (int j = 0; j < x.cols; ++j) x(i, j) = e.features[j];
  }
  const Mat probs = predict_probs(model, x);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(probs.cols));
    for (int c = 0; c < probs.cols; ++c) row[c] = probs(i, c);
    out.push_back(make_prediction(std::move(row)));
  }
  return out;
}

const char* to_string(Sampling s) {
  switch (s) {
    case Sampling::kUniform: return "uniform";
    case Sampling::kClassBalanced: return "class_balanced";
    case Sampling::kGroupBalanced: return "group_balanced";
  }
  return "?";
}

Sampling sampling_from_string(const std::string& name) {
  if (name == "uniform") return Sampling::kUniform;
  if (name == "class_balanced") return Sampling::kClassBalanced;
  if (name == "group_balanced") return Sampling::kGroupBalanced;
  throw std::invalid_argument("unknown sampling scheme: " + name);
}

const char* to_string(Weighting w) {
  switch (w) {
    case Weighting::kNone: return "none";
    case Weighting::kClassInverse: return "class_inverse";
    case Weighting::kGroupInverse: return "group_inverse";
    case Weighting::kSqrtClassInverse: return "sqrt_class_inverse";
    case Weighting::kCustom: return "custom";
  }
  return "?";
}

Weighting weighting_from_string(const std::string& name) {
  if (name == "none") return Weighting::kNone;
  if (name == "class_inverse") return Weighting::kClassInverse;
  if (name == "group_inverse") return Weighting::kGroupInverse;
  if (name == "sqrt_class_inverse") return Weighting::kSqrtClassInverse;
  if (name == "custom") return Weighting::kCustom;
  throw std::invalid_argument("unknown weighting scheme: " + name);
}

StratumIndex::StratumIndex(const Dataset& data) {
  by_class_.resize(static_cast<std::size_t>(data.num_classes()));
  by_group_.resize(static_cast<std::size_t>(data.num_groups()));
  for (int i = 0; i < data.size(); ++i) {
    const Example& e = data.example(i);
    by_class_[static_cast<std::size_t>(e.label)].push_back(i);
    by_group_[static_cast<std::size_t>(linearize(GroupId{e.attribute, e.label}, data.num_classes()))]
        .push_back(i);
  }
}

std::vector<int> sample_indices(const Dataset& data, const StratumIndex& strata, Sampling sampling,
                                int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("sample_indices: batch_size must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("sample_indices: empty dataset");
  std::vector<int> out(static_cast<std::size_t>(batch_size));

  if (sampling == Sampling::kUniform) {
    for (int i = 0; i < batch_size; ++i) out[i] = rng.uniform_int(data.size());
    return out;
  }

  const std::vector<std::vector<int>>* strata_lists =
      sampling == Sampling::kClassBalanced ? &strata.by_class() : &strata.by_group();
  std::vector<const std::vector<int>*> nonempty;
  for (const auto& list : *strata_lists) {
    if (!list.empty()) nonempty.push_back(&list);
  }
  if (sampling == Sampling::kClassBalanced &&
      static_cast<int>(nonempty.size()) != data.num_classes()) {
    // A classifier cannot balance over a class with no examples.
    throw std::invalid_argument("sample_indices: empty class stratum under class-balanced sampling");
  }
  if (nonempty.empty()) throw std::invalid_argument("sample_indices: no nonempty strata");
  // Empty groups are legal (attribute-generalization train splits); balance
  // over the groups that exist.
  for (int i = 0; i < batch_size; ++i) {
    const auto& stratum = *nonempty[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(nonempty.size())))];
    out[i] = stratum[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(stratum.size())))];
  }
  return out;
}

Batch make_batch(const Dataset& data, const std::vector<int>& indices) {
  Batch batch;
  batch.indices = indices;
  batch.num_classes = data.num_classes();
  batch.num_attributes = data.num_attributes();
  const int n = static_cast<int>(indices.size());
  batch.x = Mat(n, data.feature_dim());
  batch.labels.resize(static_cast<std::size_t>(n));
  batch.attributes.resize(static_cast<std::size_t>(n));
  batch.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Example& e = data.example(indices[static_cast<std::size_t>(i)]);
    for (int j = 0; j < batch.x.cols; ++j) batch.x(i, j) = e.features[j];
    batch.labels[i] = e.label;
    batch.attributes[i] = e.attribute;
    batch.weights[i] = e.weight;
  }
  return batch;
}

Batch sample_batch(const Dataset& data, Sampling sampling, int batch_size, Rng& rng) {
  const StratumIndex strata(data);
  return make_batch(data, sample_indices(data, strata, sampling, batch_size, rng));
}

std::vector<double> weights_for(const Dataset& data, Weighting weighting) {
  const int n = data.size();
  std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
  if (weighting == Weighting::kNone || weighting == Weighting::kCustom) {
    for (int i = 0; i < n; ++i) weights[i] = data.example(i).weight;
    return weights;
  }

  std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
  if (weighting == Weighting::kGroupInverse) {
    const std::vector<std::int64_t> counts = data.group_counts_linear();
    for (int i = 0; i < n; ++i) {
      const Example& e = data.example(i);
      raw[i] = 1.0 / counts[linearize(GroupId{e.attribute, e.label}, data.num_classes())];
    }
  } else {
    const std::vector<std::int64_t> counts = data.class_counts();
    for (int i = 0; i < n; ++i) {
      const double c = static_cast<double>(counts[data.example(i).label]);
      raw[i] = weighting == Weighting::kSqrtClassInverse ? 1.0 / std::sqrt(c) : 1.0 / c;
    }
  }
  double mean = 0.0;
  for (double w : raw) mean += w;
  mean /= n;
  for (int i = 0; i < n; ++i) weights[i] = raw[i] / mean;
  return weights;
}

namespace {

struct OptimizerState {
  Mat v_w1, v_b1, v_head_w, v_head_b;

  explicit OptimizerState(const Model& model)
      : v_w1(model.w1.rows, model.w1.cols),
        v_b1(model.b1.rows, model.b1.cols),
        v_head_w(model.head_w.rows, model.head_w.cols),
        v_head_b(model.head_b.rows, model.head_b.cols) {}
};

void apply_sgd(Mat* param, Mat* velocity, const Mat& grad, double lr, double momentum) {
  for (int i = 0; i < param->size(); ++i) {
    velocity->v[i] = momentum * velocity->v[i] + grad.v[i];
    param->v[i] -= lr * velocity->v[i];
  }
}

metrics::MetricsReport maybe_evaluate(const Model& model, const Dataset* data, bool attrs_known) {
  if (data == nullptr) return {};
  return metrics::evaluate(predict(model, *data), *data, attrs_known);
}

}  // namespace

std::vector<Checkpoint> train(Model& model, const Dataset& train_data, const EvalContext& eval,
                              const TrainConfig& config, const LossFn& loss_fn,
                              const TrainHooks& hooks, int stage_tag, int step_offset) {
  if (!(config.learning_rate >= 0.0)) {
    throw std::invalid_argument("train: learning_rate must be nonnegative");
  }
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (config.num_steps < 0) throw std::invalid_argument("train: num_steps must be >= 0");

  const int eval_every =
      config.eval_every > 0 ? config.eval_every : std::max(1, config.num_steps / 20);
  const StratumIndex strata(train_data);
  const std::vector<double> weights = weights_for(train_data, config.weighting);
  Rng batch_rng = Rng::forked(config.seed, "batches");
  Rng hook_rng = Rng::forked(config.seed, "hook");
  OptimizerState opt(model);

  std::vector<Checkpoint> checkpoints;
  for (int s = 1; s <= config.num_steps; ++s) {
    const std::vector<int> indices =
        sample_indices(train_data, strata, config.sampling, config.batch_size, batch_rng);
    Batch batch = make_batch(train_data, indices);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      batch.weights[i] = weights[static_cast<std::size_t>(indices[i])];
    }
    if (hooks.batch_hook) batch = hooks.batch_hook(batch, hook_rng);

    try {
      ad::Tape tape;
      const ModelVars vars = forward(tape, model, batch.x, config.freeze_featurizer, false);
      const ad::VarId loss = loss_fn(tape, vars, batch, step_offset + s);
      tape.backward(loss);

      if (!config.freeze_featurizer && model.arch.hidden_width > 0) {
        apply_sgd(&model.w1, &opt.v_w1, tape.grad(vars.w1), config.learning_rate, config.momentum);
        apply_sgd(&model.b1, &opt.v_b1, tape.grad(vars.b1), config.learning_rate, config.momentum);
      }
      apply_sgd(&model.head_w, &opt.v_head_w, tape.grad(vars.head_w), config.learning_rate,
                config.momentum);
      apply_sgd(&model.head_b, &opt.v_head_b, tape.grad(vars.head_b), config.learning_rate,
                config.momentum);

      if (s % eval_every == 0 || s == config.num_steps) {
        Checkpoint ckpt;
        ckpt.step = step_offset + s;
        ckpt.stage = stage_tag;
        ckpt.model = model;
        ckpt.val_report = maybe_evaluate(model, eval.val, eval.val_attrs_known);
        ckpt.test_report = maybe_evaluate(model, eval.test, /*attrs_known=*/true);
        if (hooks.checkpoint_sink) hooks.checkpoint_sink(ckpt);
        checkpoints.push_back(std::move(ckpt));
      }
    } catch (const NumericError& e) {
      throw NumericError("train: aborted at step " + std::to_string(step_offset + s) + ": " +
                         e.what());
    }
  }
  return checkpoints;
}

std::vector<Checkpoint> two_stage_train(Model& model, const Dataset& train_data,
                                        const EvalContext& eval, const TrainConfig& stage1,
                                        const TrainConfig& stage2, Stage2Target stage2_target,
                                        const LossFn& stage1_loss, const LossFn& stage2_loss,
                                        const TrainHooks& hooks) {
  std::vector<Checkpoint> checkpoints =
      train(model, train_data, eval, stage1, stage1_loss, hooks, /*stage_tag=*/1);
  TrainConfig cfg2 = stage2;
  cfg2.freeze_featurizer = stage2_target == Stage2Target::kHeadOnly;
  // Optimizer state re-initializes inside train(); only the step counter
  // carries over, via the offset.
  std::vector<Checkpoint> stage2_checkpoints = train(model, train_data, eval, cfg2, stage2_loss,
                                                     hooks, /*stage_tag=*/2, stage1.num_steps);
  checkpoints.insert(checkpoints.end(), std::make_move_iterator(stage2_checkpoints.begin()),
                     std::make_move_iterator(stage2_checkpoints.end()));
  return checkpoints;
}

void write_run_log(const std::vector<Checkpoint>& checkpoints, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_run_log: cannot open " + path);
  for (const Checkpoint& c : checkpoints) {
    nlohmann::json row;
    row["step"] = c.step;
    row["stage"] = c.stage;
    row["val"] = nlohmann::json::parse(metrics::to_json_string(c.val_report));
    row["test"] = nlohmann::json::parse(metrics::to_json_string(c.test_report));
    out << row.dump() << "\n";
  }
}

}  // namespace subpop::train
