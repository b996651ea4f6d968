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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "json.hpp"

namespace subpop::gen {

namespace {

int aligned_attribute(int label, int num_attributes) { return label % num_attributes; }

std::vector<double> uniform_probs(int n) {
  return std::vector<double>(static_cast<std::size_t>(n), 1.0 / n);
}

void check_probability_vector(const std::vector<double>& p, int expected_size, const char* name) {
  if (static_cast<int>(p.size()) != expected_size) {
    throw std::invalid_argument(std::string("GenSpec: ") + name + " must have one entry per category");
  }
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw std::invalid_argument(std::string("GenSpec: ") + name + " has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string("GenSpec: ") + name + " must sum to 1");
  }
}

void validate(const GenSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("GenSpec: need at least two classes");
  if (spec.num_attributes < 1) throw std::invalid_argument("GenSpec: need at least one attribute");
  if (spec.core_dim < 1 || spec.spurious_dim < 1) {
    throw std::invalid_argument("GenSpec: core_dim and spurious_dim must be positive");
  }
  if (!(spec.noise_sigma >= 0.0)) throw std::invalid_argument("GenSpec: noise_sigma must be >= 0");
  if (spec.n_train < 1) throw std::invalid_argument("GenSpec: n_train must be positive");
  const int num_groups = spec.num_classes * spec.num_attributes;
  if (spec.n_val < num_groups || spec.n_test < num_groups) {
    throw std::invalid_argument("GenSpec: n_val and n_test must be at least A*C");
  }
  if (spec.shift_type == ShiftType::kSC || spec.shift_type == ShiftType::kComposite) {
    if (spec.rho < 1.0 / spec.num_attributes - 1e-12 || spec.rho > 1.0 + 1e-12) {
      throw std::invalid_argument("GenSpec: rho must lie in [1/A, 1]");
    }
  }
  if (!spec.attribute_skew.empty()) {
    check_probability_vector(spec.attribute_skew, spec.num_attributes, "attribute_skew");
  }
  if (!spec.class_skew.empty()) {
    check_probability_vector(spec.class_skew, spec.num_classes, "class_skew");
  }
  for (const GroupId& g : spec.held_out_groups) {
    if (g.attribute < 0 || g.attribute >= spec.num_attributes || g.label < 0 ||
        g.label >= spec.num_classes) {
      throw std::invalid_argument("GenSpec: held-out group out of range");
    }
  }
  // A class with every attribute held out would have no train support.
  for (int y = 0; y < spec.num_classes; ++y) {
    int held = 0;
    for (const GroupId& g : spec.held_out_groups) {
      if (g.label == y) ++held;
    }
    if (held >= spec.num_attributes) {
      throw std::invalid_argument("GenSpec: held_out_groups cover an entire class");
    }
  }
}

std::vector<double> place_means(int index, int count, int dim) {
  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  if (dim == 1) {
    mean[0] = count == 1 ? 0.0 : 2.0 * index / (count - 1) - 1.0;
  } else {
    const double angle = 2.0 * std::numbers::pi * index / count;
    mean[0] = std::cos(angle);
    mean[1] = std::sin(angle);
  }
  return mean;
}

bool is_held_out(const GenSpec& spec, int attribute, int label) {
  for (const GroupId& g : spec.held_out_groups) {
    if (g.attribute == attribute && g.label == label) return true;
  }
  return false;
}

// Conditional p(a | y) for the train/val law of each shift type.
std::vector<double> train_attribute_conditional(const GenSpec& spec, int label) {
  const int a_count = spec.num_attributes;
  std::vector<double> p(static_cast<std::size_t>(a_count), 0.0);
  switch (spec.shift_type) {
    case ShiftType::kSC: {
      const int star = aligned_attribute(label, a_count);
      if (a_count == 1) {
        p[0] = 1.0;
        break;
      }
      for (int a = 0; a < a_count; ++a) p[a] = (1.0 - spec.rho) / (a_count - 1);
      p[star] = spec.rho;
      break;
    }
    case ShiftType::kAI: {
      p = spec.attribute_skew.empty() ? uniform_probs(a_count) : spec.attribute_skew;
      break;
    }
    case ShiftType::kCI: {
      p = uniform_probs(a_count);
      break;
    }
    case ShiftType::kAG: {
      int allowed = 0;
      for (int a = 0; a < a_count; ++a) {
        if (!is_held_out(spec, a, label)) ++allowed;
      }
      for (int a = 0; a < a_count; ++a) {
        if (!is_held_out(spec, a, label)) p[a] = 1.0 / allowed;
      }
      break;
    }
    case ShiftType::kComposite: {
      const std::vector<double> skew =
          spec.attribute_skew.empty() ? uniform_probs(a_count) : spec.attribute_skew;
      const int star = aligned_attribute(label, a_count);
      const bool star_allowed = !is_held_out(spec, star, label);
      double rest_mass = 0.0;
      for (int a = 0; a < a_count; ++a) {
        if (a != star && !is_held_out(spec, a, label)) rest_mass += skew[a];
      }
      if (star_allowed && (a_count == 1 || rest_mass <= 0.0)) {
        p[star] = 1.0;
        break;
      }
      for (int a = 0; a < a_count; ++a) {
        if (a == star || is_held_out(spec, a, label)) continue;
        p[a] = (star_allowed ? 1.0 - spec.rho : 1.0) * skew[a] / rest_mass;
      }
      if (star_allowed) p[star] = spec.rho;
      break;
    }
  }
  return p;
}

std::vector<double> train_class_marginal(const GenSpec& spec) {
  if (spec.shift_type == ShiftType::kCI || spec.shift_type == ShiftType::kComposite) {
    if (!spec.class_skew.empty()) return spec.class_skew;
  }
  return uniform_probs(spec.num_classes);
}

Example draw_example(const GenSpec& spec, const GenerativeModel& model, int label, int attribute,
                     Rng& rng) {
  Example e;
  e.label = label;
  e.attribute = attribute;
  e.features.reserve(static_cast<std::size_t>(spec.core_dim + spec.spurious_dim));
  for (int j = 0; j < spec.core_dim; ++j) {
    e.features.push_back(model.class_means[label][j] + rng.normal(0.0, model.noise_sigma));
  }
  for (int j = 0; j < spec.spurious_dim; ++j) {
    e.features.push_back(model.attribute_means[attribute][j] + rng.normal(0.0, model.noise_sigma));
  }
  return e;
}

std::vector<Example> draw_iid_split(const GenSpec& spec, const GenerativeModel& model, int n,
                                    Rng& rng) {
  const std::vector<double> class_marginal = train_class_marginal(spec);
  // Conditionals are label-indexed and reused across draws.
  std::vector<std::vector<double>> conditionals;
  conditionals.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int y = 0; y < spec.num_classes; ++y) {
    conditionals.push_back(train_attribute_conditional(spec, y));
  }
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = rng.categorical(class_marginal);
    const int a = rng.categorical(conditionals[y]);
    out.push_back(draw_example(spec, model, y, a, rng));
  }
  return out;
}

// Largest-remainder quota allocation of n into the given nonnegative shares.
std::vector<int> quota_allocate(int n, const std::vector<double>& shares) {
  const int k = static_cast<int>(shares.size());
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, int>> remainders;
  remainders.reserve(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = n * shares[i];
    counts[i] = static_cast<int>(exact);
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < n - assigned; ++i) ++counts[remainders[static_cast<std::size_t>(i)].second];
  return counts;
}

std::vector<Example> draw_test_split(const GenSpec& spec, const GenerativeModel& model, Rng& rng) {
  const int num_groups = spec.num_classes * spec.num_attributes;
  std::vector<double> shares(static_cast<std::size_t>(num_groups), 0.0);
  if (spec.shift_type == ShiftType::kComposite) {
    // Classes keep the train skew; attributes balance out within class.
    const std::vector<double> class_marginal = train_class_marginal(spec);
    for (int a = 0; a < spec.num_attributes; ++a) {
      for (int y = 0; y < spec.num_classes; ++y) {
        shares[linearize(GroupId{a, y}, spec.num_classes)] =
            class_marginal[y] / spec.num_attributes;
      }
    }
  } else {
    // Group-balanced, held-out groups included for AG.
    shares.assign(static_cast<std::size_t>(num_groups), 1.0 / num_groups);
  }
  const std::vector<int> quotas = quota_allocate(spec.n_test, shares);

  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(spec.n_test));
  for (int g = 0; g < num_groups; ++g) {
    const GroupId group = unlinearize(g, spec.num_classes);
    for (int i = 0; i < quotas[g]; ++i) {
      out.push_back(draw_example(spec, model, group.label, group.attribute, rng));
    }
  }
  // Deterministic Fisher-Yates so the block layout does not leak downstream.
  for (int i = static_cast<int>(out.size()) - 1; i > 0; --i) {
    std::swap(out[static_cast<std::size_t>(i)], out[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  }
  return out;
}

}  // namespace

GenerativeModel GenerativeModel::from_spec(const GenSpec& spec) {
  GenerativeModel model;
  model.noise_sigma = spec.noise_sigma;
  model.class_means.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int y = 0; y < spec.num_classes; ++y) {
    model.class_means.push_back(place_means(y, spec.num_classes, spec.core_dim));
  }
  model.attribute_means.reserve(static_cast<std::size_t>(spec.num_attributes));
  for (int a = 0; a < spec.num_attributes; ++a) {
    model.attribute_means.push_back(place_means(a, spec.num_attributes, spec.spurious_dim));
  }
  return model;
}

DataBundle generate(const GenSpec& spec) { return generate(spec, GenerativeModel::from_spec(spec)); }

namespace {

void check_pairwise_distinct(const std::vector<std::vector<double>>& means, const char* what) {
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (std::size_t j = i + 1; j < means.size(); ++j) {
      if (means[i] == means[j]) {
        throw std::invalid_argument(std::string("generate: ") + what +
                                    " means must be pairwise distinct");
      }
    }
  }
}

}  // namespace

DataBundle generate(const GenSpec& spec, const GenerativeModel& model) {
  validate(spec);
  if (static_cast<int>(model.class_means.size()) != spec.num_classes ||
      static_cast<int>(model.attribute_means.size()) != spec.num_attributes) {
    throw std::invalid_argument("generate: model shape does not match spec");
  }
  check_pairwise_distinct(model.class_means, "class");
  check_pairwise_distinct(model.attribute_means, "attribute");

  Rng train_rng = Rng::forked(spec.seed, "train");
  Rng val_rng = Rng::forked(spec.seed, "val");
  Rng test_rng = Rng::forked(spec.seed, "test");

  std::vector<Example> train_examples = draw_iid_split(spec, model, spec.n_train, train_rng);
  std::vector<Example> val_examples = draw_iid_split(spec, model, spec.n_val, val_rng);
  std::vector<Example> test_examples = draw_test_split(spec, model, test_rng);

  return DataBundle{
      Dataset(std::move(train_examples), spec.num_classes, spec.num_attributes, Split::kTrain),
      Dataset(std::move(val_examples), spec.num_classes, spec.num_attributes, Split::kVal),
      Dataset(std::move(test_examples), spec.num_classes, spec.num_attributes, Split::kTest)};
}

std::vector<double> bayes_optimal_error(const GenSpec& spec, int samples) {
  return bayes_optimal_error(spec, GenerativeModel::from_spec(spec), samples);
}

std::vector<double> bayes_optimal_error(const GenSpec& spec, const GenerativeModel& model,
                                        int samples) {
  validate(spec);
  if (samples < 1) throw std::invalid_argument("bayes_optimal_error: samples must be positive");
  Rng rng = Rng::forked(spec.seed, "bayes");
  std::vector<double> class_error(static_cast<std::size_t>(spec.num_classes), 0.0);
  std::vector<double> x(static_cast<std::size_t>(spec.core_dim), 0.0);
  for (int y = 0; y < spec.num_classes; ++y) {
    std::int64_t wrong = 0;
    for (int s = 0; s < samples; ++s) {
      for (int j = 0; j < spec.core_dim; ++j) {
        x[j] = model.class_means[y][j] + rng.normal(0.0, model.noise_sigma);
      }
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int c = 0; c < spec.num_classes; ++c) {
        double d2 = 0.0;
        for (int j = 0; j < spec.core_dim; ++j) {
          const double diff = x[j] - model.class_means[c][j];
          d2 += diff * diff;
        }
        if (d2 < best_d2) {  // strict < keeps the smaller index on ties
          best_d2 = d2;
          best = c;
        }
      }
      if (best != y) ++wrong;
    }
    class_error[y] = static_cast<double>(wrong) / samples;
  }

  std::vector<double> out(static_cast<std::size_t>(spec.num_classes * spec.num_attributes), 0.0);
  for (int a = 0; a < spec.num_attributes; ++a) {
    for (int y = 0; y < spec.num_classes; ++y) {
      out[linearize(GroupId{a, y}, spec.num_classes)] = class_error[y];
    }
  }
  return out;
}

std::string to_json_string(const GenSpec& spec) {
  nlohmann::json j;
  j["shift_type"] = quantify::to_string(spec.shift_type);
  j["num_classes"] = spec.num_classes;
  j["num_attributes"] = spec.num_attributes;
  j["core_dim"] = spec.core_dim;
  j["spurious_dim"] = spec.spurious_dim;
  j["rho"] = spec.rho;
  j["attribute_skew"] = spec.attribute_skew;
  j["class_skew"] = spec.class_skew;
  nlohmann::json held = nlohmann::json::array();
  for (const GroupId& g : spec.held_out_groups) held.push_back({g.attribute, g.label});
  j["held_out_groups"] = held;
  j["noise_sigma"] = spec.noise_sigma;
  j["n_train"] = spec.n_train;
  j["n_val"] = spec.n_val;
  j["n_test"] = spec.n_test;
  j["seed"] = spec.seed;
  return j.dump(2);
}

GenSpec spec_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GenSpec spec;
  spec.shift_type = quantify::shift_type_from_string(j.at("shift_type").get<std::string>());
  spec.num_classes = j.at("num_classes").get<int>();
  spec.num_attributes = j.at("num_attributes").get<int>();
  if (j.contains("core_dim")) spec.core_dim = j["core_dim"].get<int>();
  if (j.contains("spurious_dim")) spec.spurious_dim = j["spurious_dim"].get<int>();
  if (j.contains("rho")) spec.rho = j["rho"].get<double>();
  if (j.contains("attribute_skew")) spec.attribute_skew = j["attribute_skew"].get<std::vector<double>>();
  if (j.contains("class_skew")) spec.class_skew = j["class_skew"].get<std::vector<double>>();
  if (j.contains("held_out_groups")) {
    for (const auto& pair : j["held_out_groups"]) {
      spec.held_out_groups.push_back(GroupId{pair.at(0).get<int>(), pair.at(1).get<int>()});
    }
  }
  if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
  if (j.contains("n_train")) spec.n_train = j["n_train"].get<int>();
  if (j.contains("n_val")) spec.n_val = j["n_val"].get<int>();
  if (j.contains("n_test")) spec.n_test = j["n_test"].get<int>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

void write_dataset_dir(const GenSpec& spec, const DataBundle& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_csv(data.train, (fs::path(dir) / "train.csv").string());
  write_csv(data.val, (fs::path(dir) / "val.csv").string());
  write_csv(data.test, (fs::path(dir) / "test.csv").string());
  std::ofstream meta((fs::path(dir) / "meta.json").string());
  if (!meta) throw std::runtime_error("write_dataset_dir: cannot write meta.json");
  meta << to_json_string(spec) << "\n";
}

}  // namespace subpop::gen
