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

#include "subpop/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace subpop::algo {

namespace {

using train::Batch;
using train::Model;
using train::ModelVars;
using train::TrainConfig;

struct AlgorithmInfo {
  AlgorithmId id;
  const char* name;
  bool needs_train_attributes;
};

constexpr AlgorithmInfo kAlgorithms[] = {
    {AlgorithmId::kErm, "ERM", false},
    {AlgorithmId::kMixup, "Mixup", false},
    {AlgorithmId::kGroupDro, "GroupDRO", true},
    {AlgorithmId::kCvarDro, "CVaRDRO", false},
    {AlgorithmId::kJtt, "JTT", false},
    {AlgorithmId::kLff, "LfF", false},
    {AlgorithmId::kLisa, "LISA", true},
    {AlgorithmId::kDfr, "DFR", true},
    {AlgorithmId::kIrm, "IRM", true},
    {AlgorithmId::kCoral, "CORAL", true},
    {AlgorithmId::kMmd, "MMD", true},
    {AlgorithmId::kReSample, "ReSample", false},
    {AlgorithmId::kReWeight, "ReWeight", false},
    {AlgorithmId::kSqrtReWeight, "SqrtReWeight", false},
    {AlgorithmId::kFocal, "Focal", false},
    {AlgorithmId::kCbLoss, "CBLoss", false},
    {AlgorithmId::kLdam, "LDAM", false},
    {AlgorithmId::kBSoftmax, "BSoftmax", false},
    {AlgorithmId::kCrt, "CRT", false},
    {AlgorithmId::kReWeightCrt, "ReWeightCRT", false},
};

const AlgorithmInfo& info(AlgorithmId id) {
  for (const AlgorithmInfo& a : kAlgorithms) {
    if (a.id == id) return a;
  }
  throw std::invalid_argument("unknown algorithm enum value");
}

double log_uniform(Rng& rng, double lo_exp, double hi_exp) {
  return std::pow(10.0, rng.uniform(lo_exp, hi_exp));
}

// Weighted mean of a per-example column: sum(x * w) / sum(w).
ad::VarId weighted_mean(ad::Tape& tape, ad::VarId per_example, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("weighted_mean: weights sum to zero");
  Mat w_col(static_cast<int>(weights.size()), 1);
  for (std::size_t i = 0; i < weights.size(); ++i) w_col(static_cast<int>(i), 0) = weights[i];
  return tape.scale(tape.sum(tape.mul(per_example, tape.constant(std::move(w_col)))), 1.0 / total);
}

// Per-example negative log-likelihood; applies the mixup combination when
// the batch carries mixed labels.
ad::VarId per_example_nll(ad::Tape& tape, const ModelVars& vars, const Batch& batch) {
  const ad::VarId lp = tape.log_softmax(vars.logits);
  const ad::VarId nll = tape.scale(tape.gather_rows(lp, batch.labels), -1.0);
  if (batch.labels_mixed.empty()) return nll;
  const ad::VarId nll_mixed = tape.scale(tape.gather_rows(lp, batch.labels_mixed), -1.0);
  return tape.add(tape.scale(nll, batch.lam), tape.scale(nll_mixed, 1.0 - batch.lam));
}

// Group index lists over the batch, keyed by linearized group id.
std::vector<std::pair<int, std::vector<int>>> batch_groups(const Batch& batch) {
  std::vector<std::vector<int>> lists(
      static_cast<std::size_t>(batch.num_classes * batch.num_attributes));
  for (std::size_t i = 0; i < batch.labels.size(); ++i) {
    const int g = batch.attributes[i] * batch.num_classes + batch.labels[i];
    lists[static_cast<std::size_t>(g)].push_back(static_cast<int>(i));
  }
  std::vector<std::pair<int, std::vector<int>>> present;
  for (std::size_t g = 0; g < lists.size(); ++g) {
    if (!lists[g].empty()) present.emplace_back(static_cast<int>(g), std::move(lists[g]));
  }
  return present;
}

ad::VarId sum_scalars(ad::Tape& tape, const std::vector<ad::VarId>& terms) {
  ad::VarId acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return acc;
}

void require_positive_counts(const std::vector<std::int64_t>& counts, const char* who) {
  for (std::int64_t c : counts) {
    if (c < 1) throw std::invalid_argument(std::string(who) + ": every class count must be >= 1");
  }
}

}  // namespace

const char* to_string(AlgorithmId id) { return info(id).name; }

bool requires_train_attributes(AlgorithmId id) { return info(id).needs_train_attributes; }

AlgorithmId algorithm_from_string(const std::string& name) {
  for (const AlgorithmInfo& a : kAlgorithms) {
    if (name == a.name) return a.id;
  }
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::vector<AlgorithmId> all_algorithms() {
  std::vector<AlgorithmId> out;
  for (const AlgorithmInfo& a : kAlgorithms) out.push_back(a.id);
  return out;
}

std::vector<std::string> hyperparam_names(AlgorithmId id) {
  std::vector<std::string> names = {"learning_rate", "batch_size"};
  switch (id) {
    case AlgorithmId::kGroupDro: names.push_back("eta"); break;
    case AlgorithmId::kMixup: names.push_back("alpha"); break;
    case AlgorithmId::kCvarDro: names.push_back("alpha"); break;
    case AlgorithmId::kJtt:
      names.push_back("first_stage_fraction");
      names.push_back("lambda");
      break;
    case AlgorithmId::kLisa:
      names.push_back("alpha");
      names.push_back("p_select");
      break;
    case AlgorithmId::kLff: names.push_back("q"); break;
    case AlgorithmId::kDfr: names.push_back("regularization"); break;
    case AlgorithmId::kCoral:
    case AlgorithmId::kMmd: names.push_back("gamma"); break;
    case AlgorithmId::kFocal: names.push_back("gamma"); break;
    case AlgorithmId::kCbLoss: names.push_back("beta"); break;
    case AlgorithmId::kLdam:
      names.push_back("max_m");
      names.push_back("scale");
      break;
    case AlgorithmId::kIrm:
      names.push_back("lambda");
      names.push_back("anneal_iters");
      break;
    default: break;
  }
  return names;
}

std::map<std::string, double> default_hyperparams(AlgorithmId id) {
  // Desk-scale MLP track: lr default 1e-3; the batch default sits at the top
  // of the sampled support.
  std::map<std::string, double> m = {{"learning_rate", 0.001}, {"batch_size", 128}};
  switch (id) {
    case AlgorithmId::kGroupDro: m["eta"] = 0.01; break;
    case AlgorithmId::kMixup: m["alpha"] = 0.2; break;
    case AlgorithmId::kCvarDro: m["alpha"] = 0.1; break;
    case AlgorithmId::kJtt:
      m["first_stage_fraction"] = 0.5;
      m["lambda"] = 10.0;
      break;
    case AlgorithmId::kLisa:
      m["alpha"] = 2.0;
      m["p_select"] = 0.5;
      break;
    case AlgorithmId::kLff: m["q"] = 0.7; break;
    case AlgorithmId::kDfr: m["regularization"] = 0.1; break;
    case AlgorithmId::kCoral:
    case AlgorithmId::kMmd: m["gamma"] = 1.0; break;
    case AlgorithmId::kFocal: m["gamma"] = 1.0; break;
    case AlgorithmId::kCbLoss: m["beta"] = 0.9999; break;
    case AlgorithmId::kLdam:
      m["max_m"] = 0.5;
      m["scale"] = 30.0;
      break;
    case AlgorithmId::kIrm:
      m["lambda"] = 100.0;
      m["anneal_iters"] = 500.0;
      break;
    default: break;
  }
  return m;
}

std::map<std::string, double> sample_hyperparams(AlgorithmId id, Rng& rng) {
  std::map<std::string, double> m;
  m["learning_rate"] = log_uniform(rng, -4.0, -2.0);
  m["batch_size"] = std::round(std::pow(2.0, rng.uniform(6.0, 7.0)));
  switch (id) {
    case AlgorithmId::kGroupDro: m["eta"] = log_uniform(rng, -3.0, -1.0); break;
    case AlgorithmId::kMixup: m["alpha"] = log_uniform(rng, 0.0, 4.0); break;
    case AlgorithmId::kCvarDro: m["alpha"] = log_uniform(rng, -2.0, 0.0); break;
    case AlgorithmId::kJtt:
      m["first_stage_fraction"] = rng.uniform(0.2, 0.8);
      m["lambda"] = log_uniform(rng, 0.0, 2.5);
      break;
    case AlgorithmId::kLisa:
      m["alpha"] = log_uniform(rng, -1.0, 1.0);
      m["p_select"] = rng.uniform(0.0, 1.0);
      break;
    case AlgorithmId::kLff: m["q"] = rng.uniform(0.05, 0.95); break;
    case AlgorithmId::kDfr: m["regularization"] = log_uniform(rng, -2.0, 0.5); break;
    case AlgorithmId::kCoral:
    case AlgorithmId::kMmd: m["gamma"] = log_uniform(rng, -1.0, 1.0); break;
    case AlgorithmId::kFocal: m["gamma"] = 0.5 * log_uniform(rng, 0.0, 1.0); break;
    case AlgorithmId::kCbLoss: m["beta"] = 1.0 - log_uniform(rng, -5.0, -2.0); break;
    case AlgorithmId::kLdam:
      m["max_m"] = log_uniform(rng, -1.0, -0.1);
      m["scale"] = rng.uniform_int(2) == 0 ? 10.0 : 30.0;
      break;
    case AlgorithmId::kIrm:
      m["lambda"] = log_uniform(rng, -1.0, 5.0);
      m["anneal_iters"] = log_uniform(rng, 0.0, 4.0);
      break;
    default: break;
  }
  return m;
}

ad::VarId erm_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch) {
  return weighted_mean(tape, per_example_nll(tape, vars, batch), batch.weights);
}

ad::VarId cvar_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("cvar_loss: alpha must be in (0, 1]");
  const ad::VarId nll = per_example_nll(tape, vars, batch);
  const Mat& values = tape.value(nll);
  const int n = values.rows;
  const int k = static_cast<int>(std::ceil(alpha * n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Highest loss first; index order breaks ties deterministically.
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a, 0) > values(b, 0); });
  order.resize(static_cast<std::size_t>(k));
  return tape.mean(tape.select_rows(nll, order));
}

ad::VarId focal_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
  const ad::VarId lp = tape.log_softmax(vars.logits);
  const ad::VarId lp_true = tape.gather_rows(lp, batch.labels);
  const ad::VarId nll = tape.scale(lp_true, -1.0);
  const int n = static_cast<int>(batch.labels.size());
  // max(1 - p, floor) via relu keeps the gamma < 1 backward pass finite when
  // the softmax saturates.
  constexpr double kFloor = 1e-12;
  const ad::VarId one_minus_p = tape.sub(tape.constant(Mat::full(n, 1, 1.0)), tape.exp(lp_true));
  const ad::VarId floored = tape.add(tape.relu(tape.sub(one_minus_p, tape.constant(Mat::full(n, 1, kFloor)))),
                                     tape.constant(Mat::full(n, 1, kFloor)));
  const ad::VarId factor = tape.pow_const(floored, gamma);
  return weighted_mean(tape, tape.mul(factor, nll), batch.weights);
}

ad::VarId ldam_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch,
                    const std::vector<std::int64_t>& class_counts, double max_m, double scale) {
  if (static_cast<int>(class_counts.size()) != batch.num_classes) {
    throw std::invalid_argument("ldam_loss: one count per class required");
  }
  require_positive_counts(class_counts, "ldam_loss");
  double max_inv_quartic = 0.0;
  std::vector<double> margins(class_counts.size());
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    margins[c] = std::pow(static_cast<double>(class_counts[c]), -0.25);
    max_inv_quartic = std::max(max_inv_quartic, margins[c]);
  }
  for (double& m : margins) m = max_m * m / max_inv_quartic;

  const int n = static_cast<int>(batch.labels.size());
  Mat margin_mat(n, batch.num_classes);
  for (int i = 0; i < n; ++i) margin_mat(i, batch.labels[static_cast<std::size_t>(i)]) = margins[batch.labels[static_cast<std::size_t>(i)]];
  const ad::VarId adjusted = tape.scale(tape.sub(vars.logits, tape.constant(std::move(margin_mat))), scale);
  const ad::VarId nll = tape.scale(tape.gather_rows(tape.log_softmax(adjusted), batch.labels), -1.0);
  return weighted_mean(tape, nll, batch.weights);
}

ad::VarId balanced_softmax_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch,
                                const std::vector<std::int64_t>& class_counts) {
  if (static_cast<int>(class_counts.size()) != batch.num_classes) {
    throw std::invalid_argument("balanced_softmax_loss: one count per class required");
  }
  require_positive_counts(class_counts, "balanced_softmax_loss");
  std::int64_t total = 0;
  for (std::int64_t c : class_counts) total += c;
  Mat log_prior(1, batch.num_classes);
  for (int c = 0; c < batch.num_classes; ++c) {
    log_prior(0, c) = std::log(static_cast<double>(class_counts[static_cast<std::size_t>(c)]) / total);
  }
  const ad::VarId adjusted = tape.add(vars.logits, tape.constant(std::move(log_prior)));
  const ad::VarId nll = tape.scale(tape.gather_rows(tape.log_softmax(adjusted), batch.labels), -1.0);
  return weighted_mean(tape, nll, batch.weights);
}

ad::VarId gce_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch, double q) {
  if (!(q > 0.0) || q >= 1.0) throw std::invalid_argument("gce_loss: q must be in (0, 1)");
  const ad::VarId lp_true = tape.gather_rows(tape.log_softmax(vars.logits), batch.labels);
  const ad::VarId p_true = tape.exp(lp_true);
  const int n = static_cast<int>(batch.labels.size());
  const ad::VarId gce = tape.scale(
      tape.sub(tape.constant(Mat::full(n, 1, 1.0)), tape.pow_const(p_true, q)), 1.0 / q);
  return tape.mean(gce);
}

GroupDroState GroupDroState::uniform(int num_groups) {
  if (num_groups < 1) throw std::invalid_argument("GroupDroState: need at least one group");
  GroupDroState state;
  state.q.assign(static_cast<std::size_t>(num_groups), 1.0 / num_groups);
  return state;
}

void groupdro_update(GroupDroState* state,
                     const std::vector<std::pair<int, double>>& group_losses, double eta) {
  if (state == nullptr) throw std::invalid_argument("groupdro_update: null state");
  for (const auto& [gid, loss] : group_losses) {
    if (gid < 0 || gid >= static_cast<int>(state->q.size())) {
      throw std::invalid_argument("groupdro_update: group index out of range");
    }
    state->q[static_cast<std::size_t>(gid)] *= std::exp(eta * loss);
  }
  double total = 0.0;
  for (double q : state->q) total += q;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("groupdro_update: weights left the simplex");
  }
  for (double& q : state->q) q /= total;
}

ad::VarId groupdro_loss(ad::Tape& tape, const ModelVars& vars, const Batch& batch,
                        GroupDroState* state, double eta) {
  if (state == nullptr) throw std::invalid_argument("groupdro_loss: null state");
  if (static_cast<int>(state->q.size()) != batch.num_classes * batch.num_attributes) {
    throw std::invalid_argument("groupdro_loss: q size does not match the group count");
  }
  if (batch.labels.empty()) throw std::invalid_argument("groupdro_loss: empty batch");

  const ad::VarId nll = per_example_nll(tape, vars, batch);
  const auto groups = batch_groups(batch);
  std::vector<ad::VarId> group_losses;
  std::vector<std::pair<int, double>> loss_values;
  group_losses.reserve(groups.size());
  loss_values.reserve(groups.size());
  for (const auto& [gid, indices] : groups) {
    const ad::VarId loss = tape.mean(tape.select_rows(nll, indices));
    group_losses.push_back(loss);
    loss_values.emplace_back(gid, tape.value(loss)(0, 0));
  }
  groupdro_update(state, loss_values, eta);

  std::vector<ad::VarId> terms;
  terms.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    terms.push_back(tape.scale(group_losses[i], state->q[static_cast<std::size_t>(groups[i].first)]));
  }
  return sum_scalars(tape, terms);
}

ad::VarId irm_penalty(ad::Tape& tape, const ModelVars& vars, const Batch& batch) {
  const auto groups = batch_groups(batch);
  std::vector<ad::VarId> terms;
  terms.reserve(groups.size());
  for (const auto& [gid, indices] : groups) {
    const ad::VarId logits_e = tape.select_rows(vars.logits, indices);
    std::vector<int> labels_e;
    labels_e.reserve(indices.size());
    for (int i : indices) labels_e.push_back(batch.labels[static_cast<std::size_t>(i)]);
    // d/dw mean CE(w * logits) at w = 1 in closed form:
    // mean_i( sum_j softmax(z_i)_j z_ij - z_{i, y_i} ).
    const ad::VarId probs = tape.exp(tape.log_softmax(logits_e));
    const ad::VarId expected_logit = tape.row_sum(tape.mul(probs, logits_e));
    const ad::VarId true_logit = tape.gather_rows(logits_e, labels_e);
    terms.push_back(tape.square(tape.mean(tape.sub(expected_logit, true_logit))));
  }
  return sum_scalars(tape, terms);
}

ad::VarId coral_penalty(ad::Tape& tape, const ModelVars& vars, const Batch& batch) {
  const auto groups = batch_groups(batch);
  if (groups.size() < 2) return tape.constant(Mat::scalar(0.0));
  std::vector<ad::VarId> means, covs;
  means.reserve(groups.size());
  covs.reserve(groups.size());
  for (const auto& [gid, indices] : groups) {
    const ad::VarId feat = tape.select_rows(vars.features, indices);
    means.push_back(tape.col_mean(feat));
    covs.push_back(tape.covariance(feat));
  }
  std::vector<ad::VarId> terms;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const ad::VarId mean_term = tape.sum(tape.square(tape.sub(means[i], means[j])));
      const ad::VarId cov_term = tape.sum(tape.square(tape.sub(covs[i], covs[j])));
      terms.push_back(tape.add(mean_term, cov_term));
    }
  }
  return tape.scale(sum_scalars(tape, terms), 1.0 / terms.size());
}

ad::VarId mmd_penalty(ad::Tape& tape, const ModelVars& vars, const Batch& batch) {
  const auto groups = batch_groups(batch);
  if (groups.size() < 2) return tape.constant(Mat::scalar(0.0));

  // Median heuristic on the whole batch's features, treated as a constant.
  const Mat& feats = tape.value(vars.features);
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(feats.rows) * (feats.rows - 1) / 2);
  for (int i = 0; i < feats.rows; ++i) {
    for (int j = i + 1; j < feats.rows; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < feats.cols; ++c) {
        const double diff = feats(i, c) - feats(j, c);
        d2 += diff * diff;
      }
      dists.push_back(d2);
    }
  }
  double median = 1.0;
  if (!dists.empty()) {
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    median = std::max(dists[dists.size() / 2], 1e-12);
  }
  const std::vector<double> bandwidths = {0.5 * median, median, 2.0 * median, 4.0 * median};

  std::vector<ad::VarId> terms;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      terms.push_back(tape.mmd2(tape.select_rows(vars.features, groups[i].second),
                                tape.select_rows(vars.features, groups[j].second), bandwidths));
    }
  }
  return tape.scale(sum_scalars(tape, terms), 1.0 / terms.size());
}

std::vector<double> inverse_count_weights(const Dataset& data, bool by_group, bool sqrt_counts) {
  if (data.size() == 0) throw std::invalid_argument("inverse_count_weights: empty dataset");
  const int n = data.size();
  std::vector<double> raw(static_cast<std::size_t>(n));
  if (by_group) {
    const std::vector<std::int64_t> counts = data.group_counts_linear();
    for (int i = 0; i < n; ++i) {
      const Example& e = data.example(i);
      const double c = static_cast<double>(counts[linearize(GroupId{e.attribute, e.label}, data.num_classes())]);
      raw[i] = sqrt_counts ? 1.0 / std::sqrt(c) : 1.0 / c;
    }
  } else {
    const std::vector<std::int64_t> counts = data.class_counts();
    for (int i = 0; i < n; ++i) {
      const double c = static_cast<double>(counts[data.example(i).label]);
      raw[i] = sqrt_counts ? 1.0 / std::sqrt(c) : 1.0 / c;
    }
  }
  double mean = 0.0;
  for (double w : raw) mean += w;
  mean /= n;
  for (double& w : raw) w /= mean;
  return raw;
}

std::vector<double> cb_loss_weights(const Dataset& data, double beta) {
  if (!(beta > 0.0) || beta >= 1.0) throw std::invalid_argument("cb_loss_weights: beta must be in (0, 1)");
  if (data.size() == 0) throw std::invalid_argument("cb_loss_weights: empty dataset");
  const std::vector<std::int64_t> counts = data.class_counts();
  std::vector<double> class_weight(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    const double effective = (1.0 - std::pow(beta, static_cast<double>(counts[c]))) / (1.0 - beta);
    class_weight[c] = 1.0 / effective;
  }
  const int n = data.size();
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) raw[i] = class_weight[data.example(i).label];
  double mean = 0.0;
  for (double w : raw) mean += w;
  mean /= n;
  for (double& w : raw) w /= mean;
  return raw;
}

train::Batch mixup_batch(const Batch& batch, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mixup_batch: alpha must be positive");
  const int n = static_cast<int>(batch.labels.size());
  const double lam = rng.beta(alpha, alpha);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

  Batch mixed = batch;
  mixed.lam = lam;
  mixed.labels_mixed.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j = perm[static_cast<std::size_t>(i)];
    mixed.labels_mixed[static_cast<std::size_t>(i)] = batch.labels[static_cast<std::size_t>(j)];
    for (int c = 0; c < batch.x.cols; ++c) {
      mixed.x(i, c) = lam * batch.x(i, c) + (1.0 - lam) * batch.x(j, c);
    }
  }
  return mixed;
}

train::Batch lisa_batch(const Batch& batch, double alpha, double p_select, Rng& rng,
                        LisaStats* stats) {
  if (!(alpha > 0.0)) throw std::invalid_argument("lisa_batch: alpha must be positive");
  if (p_select < 0.0 || p_select > 1.0) throw std::invalid_argument("lisa_batch: p_select must be in [0, 1]");
  const int n = static_cast<int>(batch.labels.size());
  const double lam = rng.beta(alpha, alpha);
  const bool intra_label = rng.uniform01() < p_select;

  Batch mixed = batch;
  mixed.lam = lam;
  mixed.labels_mixed = batch.labels;  // intra-label keeps the label

  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    candidates.clear();
    for (int j = 0; j < n; ++j) {
      const bool eligible =
          intra_label ? (batch.labels[static_cast<std::size_t>(j)] == batch.labels[static_cast<std::size_t>(i)] &&
                         batch.attributes[static_cast<std::size_t>(j)] != batch.attributes[static_cast<std::size_t>(i)])
                      : (batch.attributes[static_cast<std::size_t>(j)] == batch.attributes[static_cast<std::size_t>(i)] &&
                         batch.labels[static_cast<std::size_t>(j)] != batch.labels[static_cast<std::size_t>(i)]);
      if (eligible) candidates.push_back(j);
    }
    if (candidates.empty()) {
      if (stats != nullptr) ++stats->fallbacks;
      continue;  // unmixed passthrough: features kept, mixed label = own label
    }
    const int j = candidates[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(candidates.size())))];
    for (int c = 0; c < batch.x.cols; ++c) {
      mixed.x(i, c) = lam * batch.x(i, c) + (1.0 - lam) * batch.x(j, c);
    }
    if (!intra_label) mixed.labels_mixed[static_cast<std::size_t>(i)] = batch.labels[static_cast<std::size_t>(j)];
  }
  return mixed;
}

namespace {

// Full-batch gradient descent fit of a fresh linear head on fixed features,
// CE + regularization * |W|^2.
Model fit_linear_head(const Mat& features, const std::vector<int>& labels, int num_classes,
                      double regularization, std::uint64_t seed) {
  train::Architecture arch;
  arch.input_dim = features.cols;
  arch.hidden_width = 0;
  arch.num_classes = num_classes;
  Model head = Model::init(arch, seed);

  // Stability: the L2 term adds curvature 2*reg, so shrink the step with it.
  const double lr = 0.5 / (1.0 + 2.0 * regularization);
  const double momentum = 0.9;
  const int steps = 800;
  Mat v_w(head.head_w.rows, head.head_w.cols);
  Mat v_b(head.head_b.rows, head.head_b.cols);
  const std::vector<double> unit_weights(labels.size(), 1.0);

  for (int s = 0; s < steps; ++s) {
    ad::Tape tape;
    const ModelVars vars = train::forward(tape, head, features);
    Batch batch;
    batch.labels = labels;
    batch.weights = unit_weights;
    batch.num_classes = num_classes;
    batch.num_attributes = 1;
    batch.x = features;
    ad::VarId loss = weighted_mean(tape, per_example_nll(tape, vars, batch), batch.weights);
    if (regularization > 0.0) {
      loss = tape.add(loss, tape.scale(tape.sum(tape.square(vars.head_w)), regularization));
    }
    tape.backward(loss);
    const Mat& gw = tape.grad(vars.head_w);
    const Mat& gb = tape.grad(vars.head_b);
    for (int i = 0; i < head.head_w.size(); ++i) {
      v_w.v[i] = momentum * v_w.v[i] + gw.v[i];
      head.head_w.v[i] -= lr * v_w.v[i];
    }
    for (int i = 0; i < head.head_b.size(); ++i) {
      v_b.v[i] = momentum * v_b.v[i] + gb.v[i];
      head.head_b.v[i] -= lr * v_b.v[i];
    }
  }
  return head;
}

}  // namespace

Model dfr_retrain(const Model& model, const Dataset& reweighting_data, double regularization,
                  bool group_balanced, std::uint64_t seed, int num_subsamples) {
  if (regularization < 0.0) throw std::invalid_argument("dfr_retrain: regularization must be >= 0");
  if (num_subsamples < 1) throw std::invalid_argument("dfr_retrain: need at least one subsample");
  if (reweighting_data.size() == 0) throw std::invalid_argument("dfr_retrain: empty reweighting data");

  // Stratum membership: groups when annotations are available, else classes.
  std::vector<std::vector<int>> strata(
      static_cast<std::size_t>(group_balanced ? reweighting_data.num_groups()
                                              : reweighting_data.num_classes()));
  for (int i = 0; i < reweighting_data.size(); ++i) {
    const Example& e = reweighting_data.example(i);
    const int s = group_balanced ? linearize(GroupId{e.attribute, e.label}, reweighting_data.num_classes())
                                 : e.label;
    strata[static_cast<std::size_t>(s)].push_back(i);
  }
  std::size_t min_count = reweighting_data.size() == 0 ? 0 : SIZE_MAX;
  for (const auto& stratum : strata) {
    if (stratum.empty()) {
      throw std::invalid_argument(
          group_balanced ? "dfr_retrain: a group is empty in the held-out data"
                         : "dfr_retrain: a class is empty in the held-out data");
    }
    min_count = std::min(min_count, stratum.size());
  }

  Mat all_x(reweighting_data.size(), reweighting_data.feature_dim());
  for (int i = 0; i < reweighting_data.size(); ++i) {
    const Example& e = reweighting_data.example(i);
    for (int j = 0; j < all_x.cols; ++j) all_x(i, j) = e.features[j];
  }
  const Mat all_features = train::features_of(model, all_x);

  Mat head_w_sum(model.head_w.rows, model.head_w.cols);
  Mat head_b_sum(model.head_b.rows, model.head_b.cols);
  for (int s = 0; s < num_subsamples; ++s) {
    Rng rng = Rng::forked(seed, "dfr_subsample_" + std::to_string(s));
    std::vector<int> chosen;
    for (auto stratum : strata) {
      // Partial Fisher-Yates: the first min_count entries are a uniform
      // without-replacement draw.
      for (std::size_t i = 0; i < min_count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(stratum.size() - i)));
        std::swap(stratum[i], stratum[j]);
        chosen.push_back(stratum[i]);
      }
    }
    Mat sub_features(static_cast<int>(chosen.size()), all_features.cols);
    std::vector<int> sub_labels(chosen.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      for (int c = 0; c < all_features.cols; ++c) {
        sub_features(static_cast<int>(i), c) = all_features(chosen[i], c);
      }
      sub_labels[i] = reweighting_data.example(chosen[i]).label;
    }
    const Model head = fit_linear_head(sub_features, sub_labels, reweighting_data.num_classes(),
                                       regularization, stable_hash_combine(seed, "dfr_head_" + std::to_string(s)));
    for (int i = 0; i < head_w_sum.size(); ++i) head_w_sum.v[i] += head.head_w.v[i];
    for (int i = 0; i < head_b_sum.size(); ++i) head_b_sum.v[i] += head.head_b.v[i];
  }

  Model out = model;
  for (int i = 0; i < head_w_sum.size(); ++i) out.head_w.v[i] = head_w_sum.v[i] / num_subsamples;
  for (int i = 0; i < head_b_sum.size(); ++i) out.head_b.v[i] = head_b_sum.v[i] / num_subsamples;
  return out;
}

namespace {

Dataset with_weights(const Dataset& data, const std::vector<double>& weights) {
  std::vector<Example> examples = data.examples();
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].weight = weights[i];
  return Dataset(std::move(examples), data.num_classes(), data.num_attributes(), data.split());
}

double get_hp(const std::map<std::string, double>& merged, const std::string& name) {
  const auto it = merged.find(name);
  if (it == merged.end()) throw std::invalid_argument("missing hyperparameter: " + name);
  return it->second;
}

// LfF: twin biased/debiased models trained side by side; the debiased model
// is the deployable one and carries the checkpoints.
RunOutput run_lff(const DataBundle& data, const Dataset& train_run, const train::Architecture& arch,
                  const select::AvailabilityRegime& regime, const TrainConfig& config, double q,
                  std::uint64_t seed) {
  Model biased = Model::init(arch, stable_hash_combine(seed, "lff_biased"));
  Model debiased = Model::init(arch, stable_hash_combine(seed, "model"));
  const train::StratumIndex strata(train_run);
  Rng batch_rng = Rng::forked(config.seed, "batches");
  const int eval_every = config.eval_every > 0 ? config.eval_every : std::max(1, config.num_steps / 20);

  Mat vb_w1(biased.w1.rows, biased.w1.cols), vb_b1(biased.b1.rows, biased.b1.cols);
  Mat vb_hw(biased.head_w.rows, biased.head_w.cols), vb_hb(biased.head_b.rows, biased.head_b.cols);
  Mat vd_w1(debiased.w1.rows, debiased.w1.cols), vd_b1(debiased.b1.rows, debiased.b1.cols);
  Mat vd_hw(debiased.head_w.rows, debiased.head_w.cols), vd_hb(debiased.head_b.rows, debiased.head_b.cols);

  auto sgd = [&](Mat* p, Mat* v, const Mat& g) {
    for (int i = 0; i < p->size(); ++i) {
      v->v[i] = config.momentum * v->v[i] + g.v[i];
      p->v[i] -= config.learning_rate * v->v[i];
    }
  };

  RunOutput out;
  for (int s = 1; s <= config.num_steps; ++s) {
    const std::vector<int> indices =
        train::sample_indices(train_run, strata, config.sampling, config.batch_size, batch_rng);
    const Batch batch = train::make_batch(train_run, indices);

    // Biased model: generalized cross-entropy.
    ad::Tape tape_b;
    const ModelVars vars_b = train::forward(tape_b, biased, batch.x);
    const ad::VarId nll_b = per_example_nll(tape_b, vars_b, batch);
    const ad::VarId loss_b = gce_loss(tape_b, vars_b, batch, q);
    tape_b.backward(loss_b);

    // Debiased model: CE re-weighted by relative difficulty
    // w = CE_biased / (CE_biased + CE_debiased) on current values.
    ad::Tape tape_d;
    const ModelVars vars_d = train::forward(tape_d, debiased, batch.x);
    const ad::VarId nll_d = per_example_nll(tape_d, vars_d, batch);
    const Mat& ce_b = tape_b.value(nll_b);
    const Mat& ce_d = tape_d.value(nll_d);
    std::vector<double> w(static_cast<std::size_t>(ce_b.rows));
    for (int i = 0; i < ce_b.rows; ++i) {
      const double denom = ce_b(i, 0) + ce_d(i, 0);
      w[static_cast<std::size_t>(i)] = denom > 0.0 ? ce_b(i, 0) / denom : 0.5;
    }
    Mat w_col(ce_b.rows, 1);
    for (int i = 0; i < ce_b.rows; ++i) w_col(i, 0) = w[static_cast<std::size_t>(i)];
    const ad::VarId loss_d = tape_d.mean(tape_d.mul(nll_d, tape_d.constant(std::move(w_col))));
    tape_d.backward(loss_d);

    if (arch.hidden_width > 0) {
      sgd(&biased.w1, &vb_w1, tape_b.grad(vars_b.w1));
      sgd(&biased.b1, &vb_b1, tape_b.grad(vars_b.b1));
      sgd(&debiased.w1, &vd_w1, tape_d.grad(vars_d.w1));
      sgd(&debiased.b1, &vd_b1, tape_d.grad(vars_d.b1));
    }
    sgd(&biased.head_w, &vb_hw, tape_b.grad(vars_b.head_w));
    sgd(&biased.head_b, &vb_hb, tape_b.grad(vars_b.head_b));
    sgd(&debiased.head_w, &vd_hw, tape_d.grad(vars_d.head_w));
    sgd(&debiased.head_b, &vd_hb, tape_d.grad(vars_d.head_b));

    if (s % eval_every == 0 || s == config.num_steps) {
      train::Checkpoint ckpt;
      ckpt.step = s;
      ckpt.stage = 1;
      ckpt.model = debiased;
      ckpt.val_report = metrics::evaluate(train::predict(debiased, data.val), data.val,
                                          regime.val_attrs_known);
      ckpt.test_report = metrics::evaluate(train::predict(debiased, data.test), data.test, true);
      out.checkpoints.push_back(std::move(ckpt));
    }
  }
  out.model = debiased;
  return out;
}

}  // namespace

RunOutput run_algorithm(const AlgorithmSpec& spec, const DataBundle& data,
                        const train::Architecture& arch, const select::AvailabilityRegime& regime,
                        const TrainConfig& base_config, std::uint64_t seed,
                        bool allow_degeneration) {
  select::validate(regime);
  if (!regime.train_attrs_known && requires_train_attributes(spec.id) && !allow_degeneration) {
    throw std::invalid_argument(std::string(to_string(spec.id)) +
                                " requires train attributes; enable class degeneration to run it "
                                "in the unknown-attribute regime");
  }

  // The run owns a private copy of the train split (weights are mutable
  // per-run state); unknown attributes degenerate to classes here.
  Dataset train_run = regime.train_attrs_known ? data.train : degenerate_groups_to_classes(data.train);

  std::map<std::string, double> hp = default_hyperparams(spec.id);
  for (const auto& [k, v] : spec.hyperparams) hp[k] = v;

  TrainConfig config = base_config;
  config.seed = seed;
  config.learning_rate = get_hp(hp, "learning_rate");
  config.batch_size = static_cast<int>(std::lround(get_hp(hp, "batch_size")));

  train::EvalContext eval;
  eval.val = &data.val;
  eval.test = &data.test;
  eval.val_attrs_known = regime.val_attrs_known;

  RunOutput out;
  const std::uint64_t model_seed = stable_hash_combine(seed, "model");

  switch (spec.id) {
    case AlgorithmId::kErm: {
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kMixup: {
      const double alpha = get_hp(hp, "alpha");
      Model model = Model::init(arch, model_seed);
      train::TrainHooks hooks;
      hooks.batch_hook = [alpha](const Batch& b, Rng& rng) { return mixup_batch(b, alpha, rng); };
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     },
                                     hooks);
      out.model = model;
      break;
    }
    case AlgorithmId::kGroupDro: {
      const double eta = get_hp(hp, "eta");
      auto state = std::make_shared<GroupDroState>(GroupDroState::uniform(train_run.num_groups()));
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [state, eta](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return groupdro_loss(t, v, b, state.get(), eta);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kCvarDro: {
      const double alpha = get_hp(hp, "alpha");
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [alpha](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return cvar_loss(t, v, b, alpha);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kJtt: {
      const double frac = get_hp(hp, "first_stage_fraction");
      const double lambda = get_hp(hp, "lambda");
      if (!(frac > 0.0) || frac >= 1.0) throw std::invalid_argument("JTT: fraction must be in (0, 1)");
      if (lambda < 1.0) throw std::invalid_argument("JTT: lambda must be >= 1");
      const int steps1 = std::clamp(static_cast<int>(std::lround(frac * config.num_steps)), 1,
                                    std::max(1, config.num_steps - 1));
      const int steps2 = std::max(1, config.num_steps - steps1);

      // Identification model: plain ERM, no checkpoints kept.
      TrainConfig cfg1 = config;
      cfg1.num_steps = steps1;
      cfg1.eval_every = steps1;
      Model identifier = Model::init(arch, stable_hash_combine(seed, "jtt_stage1"));
      train::EvalContext no_eval;
      train::train(identifier, train_run, no_eval, cfg1,
                   [](ad::Tape& t, const ModelVars& v, const Batch& b, int) { return erm_loss(t, v, b); });

      const std::vector<Prediction> preds = train::predict(identifier, train_run);
      std::vector<double> weights(static_cast<std::size_t>(train_run.size()), 1.0);
      int errors = 0;
      for (int i = 0; i < train_run.size(); ++i) {
        if (preds[static_cast<std::size_t>(i)].predicted != train_run.example(i).label) {
          weights[static_cast<std::size_t>(i)] = lambda;
          ++errors;
        }
      }
      if (errors == 0) {
        warn("JTT: stage-1 error set is empty; stage 2 degenerates to ERM");
        out.note = "jtt_empty_error_set";
      }
      const Dataset upweighted = with_weights(train_run, weights);

      TrainConfig cfg2 = config;
      cfg2.num_steps = steps2;
      cfg2.weighting = train::Weighting::kCustom;
      cfg2.eval_every = config.eval_every > 0 ? config.eval_every : std::max(1, config.num_steps / 20);
      Model model = Model::init(arch, stable_hash_combine(seed, "jtt_stage2"));
      out.checkpoints = train::train(model, upweighted, eval, cfg2,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     },
                                     {}, /*stage_tag=*/2, /*step_offset=*/steps1);
      out.model = model;
      break;
    }
    case AlgorithmId::kLff: {
      out = run_lff(data, train_run, arch, regime, config, get_hp(hp, "q"), seed);
      break;
    }
    case AlgorithmId::kLisa: {
      const double alpha = get_hp(hp, "alpha");
      const double p_select = get_hp(hp, "p_select");
      auto stats = std::make_shared<LisaStats>();
      Model model = Model::init(arch, model_seed);
      train::TrainHooks hooks;
      hooks.batch_hook = [alpha, p_select, stats](const Batch& b, Rng& rng) {
        return lisa_batch(b, alpha, p_select, rng, stats.get());
      };
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     },
                                     hooks);
      out.model = model;
      out.mix_fallbacks = stats->fallbacks;
      break;
    }
    case AlgorithmId::kDfr: {
      const double reg = get_hp(hp, "regularization");
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     });
      // Head refit on the held-out split: group-balanced when validation
      // attributes exist, class-balanced otherwise.
      const Dataset& held_out = data.val;
      Model refit = dfr_retrain(model, held_out, reg, regime.val_attrs_known,
                                stable_hash_combine(seed, "dfr"));
      train::Checkpoint final_ckpt;
      final_ckpt.step = config.num_steps + 1;
      final_ckpt.stage = 2;
      final_ckpt.model = refit;
      final_ckpt.val_report =
          metrics::evaluate(train::predict(refit, data.val), data.val, regime.val_attrs_known);
      final_ckpt.test_report = metrics::evaluate(train::predict(refit, data.test), data.test, true);
      out.checkpoints.push_back(std::move(final_ckpt));
      out.model = refit;
      break;
    }
    case AlgorithmId::kIrm: {
      const double lambda = get_hp(hp, "lambda");
      const int anneal_iters = static_cast<int>(std::lround(get_hp(hp, "anneal_iters")));
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(
          model, train_run, eval, config,
          [lambda, anneal_iters](ad::Tape& t, const ModelVars& v, const Batch& b, int step) {
            const double weight = step >= anneal_iters ? lambda : 1.0;
            return t.add(erm_loss(t, v, b), t.scale(irm_penalty(t, v, b), weight));
          });
      out.model = model;
      break;
    }
    case AlgorithmId::kCoral:
    case AlgorithmId::kMmd: {
      const double gamma = get_hp(hp, "gamma");
      const bool coral = spec.id == AlgorithmId::kCoral;
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(
          model, train_run, eval, config,
          [gamma, coral](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
            const ad::VarId penalty = coral ? coral_penalty(t, v, b) : mmd_penalty(t, v, b);
            return t.add(erm_loss(t, v, b), t.scale(penalty, gamma));
          });
      out.model = model;
      break;
    }
    case AlgorithmId::kReSample: {
      config.sampling = train::Sampling::kGroupBalanced;  // classes after degeneration
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kReWeight:
    case AlgorithmId::kSqrtReWeight: {
      const bool sqrt_counts = spec.id == AlgorithmId::kSqrtReWeight;
      const Dataset weighted = with_weights(
          train_run, inverse_count_weights(train_run, /*by_group=*/true, sqrt_counts));
      config.weighting = train::Weighting::kCustom;
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, weighted, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kFocal: {
      const double gamma = get_hp(hp, "gamma");
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [gamma](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return focal_loss(t, v, b, gamma);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kCbLoss: {
      const double beta = get_hp(hp, "beta");
      const Dataset weighted = with_weights(train_run, cb_loss_weights(train_run, beta));
      config.weighting = train::Weighting::kCustom;
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, weighted, eval, config,
                                     [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return erm_loss(t, v, b);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kLdam: {
      const double max_m = get_hp(hp, "max_m");
      const double scale = get_hp(hp, "scale");
      const std::vector<std::int64_t> counts = train_run.class_counts();
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(
          model, train_run, eval, config,
          [counts, max_m, scale](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
            return ldam_loss(t, v, b, counts, max_m, scale);
          });
      out.model = model;
      break;
    }
    case AlgorithmId::kBSoftmax: {
      const std::vector<std::int64_t> counts = train_run.class_counts();
      Model model = Model::init(arch, model_seed);
      out.checkpoints = train::train(model, train_run, eval, config,
                                     [counts](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
                                       return balanced_softmax_loss(t, v, b, counts);
                                     });
      out.model = model;
      break;
    }
    case AlgorithmId::kCrt:
    case AlgorithmId::kReWeightCrt: {
      const int steps1 = std::clamp(static_cast<int>(std::lround(kCrtStage1Fraction * config.num_steps)),
                                    1, std::max(1, config.num_steps - 1));
      const int steps2 = std::max(1, config.num_steps - steps1);
      const int cadence = config.eval_every > 0 ? config.eval_every : std::max(1, config.num_steps / 20);
      TrainConfig cfg1 = config;
      cfg1.num_steps = steps1;
      cfg1.eval_every = cadence;
      TrainConfig cfg2 = config;
      cfg2.num_steps = steps2;
      cfg2.eval_every = cadence;
      if (spec.id == AlgorithmId::kCrt) {
        cfg2.sampling = train::Sampling::kGroupBalanced;  // classes after degeneration
      } else {
        cfg2.weighting = train::Weighting::kGroupInverse;
      }
      Model model = Model::init(arch, model_seed);
      const train::LossFn erm = [](ad::Tape& t, const ModelVars& v, const Batch& b, int) {
        return erm_loss(t, v, b);
      };
      out.checkpoints = train::two_stage_train(model, train_run, eval, cfg1, cfg2,
                                               train::Stage2Target::kHeadOnly, erm, erm);
      out.model = model;
      break;
    }
  }
  return out;
}

}  // namespace subpop::algo
