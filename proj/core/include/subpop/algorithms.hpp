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

#ifndef SUBPOP_ALGORITHMS_HPP_
#define SUBPOP_ALGORITHMS_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "subpop/selection.hpp"
#include "subpop/trainer.hpp"

namespace subpop::algo {

enum class AlgorithmId {
  kErm,
  kMixup,
  kGroupDro,
  kCvarDro,
  kJtt,
  kLff,
  kLisa,
  kDfr,
  kIrm,
  kCoral,
  kMmd,
  kReSample,
  kReWeight,
  kSqrtReWeight,
  kFocal,
  kCbLoss,
  kLdam,
  kBSoftmax,
  kCrt,
  kReWeightCrt,
};

const char* to_string(AlgorithmId id);
AlgorithmId algorithm_from_string(const std::string& name);
std::vector<AlgorithmId> all_algorithms();

// GroupDRO, LISA, IRM, CORAL, MMD and DFR need group annotations; in the
// unknown-train-attribute regime they run only when class degeneration is
// explicitly enabled.
bool requires_train_attributes(AlgorithmId id);

struct AlgorithmSpec {
  AlgorithmId id = AlgorithmId::kErm;
  // Includes the general track ("learning_rate", "batch_size") and the
  // algorithm-specific names listed in hyperparam_names().
  std::map<std::string, double> hyperparams;
};

std::vector<std::string> hyperparam_names(AlgorithmId id);
std::map<std::string, double> default_hyperparams(AlgorithmId id);
// One draw from the random-search distribution of every hyperparameter.
std::map<std::string, double> sample_hyperparams(AlgorithmId id, Rng& rng);

// ---------------------------------------------------------------------------
// Loss builders. All operate on the tape; weighted reductions honor the
// batch's example weights. Exposed individually so every formula can be
// checked against its oracle.
// ---------------------------------------------------------------------------

// Weighted mean softmax cross-entropy. Handles mixed batches: the loss is
// lam * CE(labels) + (1 - lam) * CE(labels_mixed).
ad::VarId erm_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch);

// Mean of the top ceil(alpha * n) per-example losses.
ad::VarId cvar_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch,
                    double alpha);

// Mean of (1 - p_y)^gamma * (-log p_y), weighted.
ad::VarId focal_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch,
                     double gamma);

// Margin loss: CE over scale * (logits - margin on the true class), margin
// max_m * n_y^(-1/4) / max_j n_j^(-1/4).
ad::VarId ldam_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch,
                    const std::vector<std::int64_t>& class_counts, double max_m, double scale);

// CE over logits + log(n_j / N).
ad::VarId balanced_softmax_loss(ad::Tape& tape, const train::ModelVars& vars,
                                const train::Batch& batch,
                                const std::vector<std::int64_t>& class_counts);

// Generalized cross-entropy (1 - p_y^q) / q, the biased-model loss of LfF.
ad::VarId gce_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch,
                   double q);

struct GroupDroState {
  std::vector<double> q;  // on the simplex over linearized groups

  static GroupDroState uniform(int num_groups);
};

// The exponentiated-gradient step on its own: q_g <- q_g * exp(eta * L_g)
// for every (group, loss) pair, then renormalization over all groups;
// groups without a loss entry keep their unexponentiated mass.
void groupdro_update(GroupDroState* state,
                     const std::vector<std::pair<int, double>>& group_losses, double eta);

// Full loss: per-group mean CE over the groups present in the batch,
// reweighted by q after applying groupdro_update on the current values.
ad::VarId groupdro_loss(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch,
                        GroupDroState* state, double eta);

// IRMv1 penalty with environments = groups present in the batch: for each
// environment the squared derivative of its mean CE with respect to a scalar
// multiplier on the logits, evaluated at 1, summed over environments.
ad::VarId irm_penalty(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch);

// Mean over group pairs of |mu_i - mu_j|^2 + |Cov_i - Cov_j|^2_F on the
// featurizer output; 0 when fewer than two groups are present.
ad::VarId coral_penalty(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch);

// Mean pairwise squared MMD on the featurizer output, Gaussian kernel ladder
// {0.5, 1, 2, 4} x median pairwise squared distance of the batch features.
ad::VarId mmd_penalty(ad::Tape& tape, const train::ModelVars& vars, const train::Batch& batch);

// ---------------------------------------------------------------------------
// Weighting rules and batch transforms.
// ---------------------------------------------------------------------------

// 1/n or 1/sqrt(n) per stratum (class or group), normalized to mean 1 over
// the examples.
std::vector<double> inverse_count_weights(const Dataset& data, bool by_group, bool sqrt_counts);

// Class-balanced weights 1 / effective_number, effective number
// (1 - beta^n) / (1 - beta), normalized to mean 1.
std::vector<double> cb_loss_weights(const Dataset& data, double beta);

// Mixup: lam ~ Beta(alpha, alpha) per batch, features interpolated against a
// random permutation, labels kept as the (labels, labels_mixed, lam) triple.
train::Batch mixup_batch(const train::Batch& batch, double alpha, Rng& rng);

struct LisaStats {
  int fallbacks = 0;
};

// LISA: with probability p_select intra-label mixing (same label, different
// attribute; features only), otherwise intra-attribute mixing (same
// attribute, different label; features and labels). Examples with no
// eligible partner pass through unmixed and count as fallbacks.
train::Batch lisa_batch(const train::Batch& batch, double alpha, double p_select, Rng& rng,
                        LisaStats* stats);

// ---------------------------------------------------------------------------
// Multi-stage procedures.
// ---------------------------------------------------------------------------

// Freezes the featurizer and refits the linear head on balanced subsamples
// of `reweighting_data` (group-balanced when `group_balanced`, else
// class-balanced) with L2 penalty `regularization`, averaging the head over
// `num_subsamples` draws. The featurizer is untouched bitwise.
train::Model dfr_retrain(const train::Model& model, const Dataset& reweighting_data,
                         double regularization, bool group_balanced, std::uint64_t seed,
                         int num_subsamples = 3);

struct RunOutput {
  std::vector<train::Checkpoint> checkpoints;
  train::Model model;
  int mix_fallbacks = 0;
  std::string note;
};

// Trains one algorithm end to end: applies the availability regime (class
// degeneration of train attributes when unknown; throws for algorithms that
// need attributes unless `allow_degeneration`), installs the loss /
// sampling / weighting / schedule, and returns the deployable model's
// checkpoint stream with validation and test metrics attached.
RunOutput run_algorithm(const AlgorithmSpec& spec, const DataBundle& data,
                        const train::Architecture& arch,
                        const select::AvailabilityRegime& regime,
                        const train::TrainConfig& base_config, std::uint64_t seed,
                        bool allow_degeneration = false);

// Fraction of the step budget CRT/ReWeightCRT spend on representation
// learning before the head-only stage.
inline constexpr double kCrtStage1Fraction = 0.7;

}  // namespace subpop::algo

#endif  // SUBPOP_ALGORITHMS_HPP_
