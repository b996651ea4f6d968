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

#include "subpop/core.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace subpop {

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split name: " + name);
}

int linearize(GroupId group, int num_classes) {
  return group.attribute * num_classes + group.label;
}

GroupId unlinearize(int group_index, int num_classes) {
  return GroupId{group_index / num_classes, group_index % num_classes};
}

Dataset::Dataset(std::vector<Example> examples, int num_classes, int num_attributes, Split split)
    : examples_(std::move(examples)),
      num_classes_(num_classes),
      num_attributes_(num_attributes),
      split_(split) {
  if (num_classes_ <= 0 || num_attributes_ <= 0) {
    throw std::invalid_argument("Dataset: num_classes and num_attributes must be positive");
  }
  if (!examples_.empty()) feature_dim_ = static_cast<int>(examples_.front().features.size());
  for (const Example& e : examples_) {
    if (e.label < 0 || e.label >= num_classes_) {
      throw std::invalid_argument("Dataset: label out of range");
    }
    if (e.attribute < 0 || e.attribute >= num_attributes_) {
      throw std::invalid_argument("Dataset: attribute out of range");
    }
    if (static_cast<int>(e.features.size()) != feature_dim_) {
      throw std::invalid_argument("Dataset: inconsistent feature dimension");
    }
    for (double x : e.features) {
      if (!std::isfinite(x)) throw NumericError("Dataset: non-finite feature value");
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw std::invalid_argument("Dataset: weight must be a nonnegative finite value");
    }
  }
}

std::vector<std::int64_t> Dataset::class_counts() const {
  std::vector<std::int64_t> counts(num_classes_, 0);
  for (const Example& e : examples_) ++counts[e.label];
  return counts;
}

std::vector<std::int64_t> Dataset::attribute_counts() const {
  std::vector<std::int64_t> counts(num_attributes_, 0);
  for (const Example& e : examples_) ++counts[e.attribute];
  return counts;
}

std::vector<std::int64_t> Dataset::group_counts_linear() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_groups()), 0);
  for (const Example& e : examples_) {
    ++counts[linearize(GroupId{e.attribute, e.label}, num_classes_)];
  }
  return counts;
}

std::map<GroupId, std::int64_t> group_counts(const Dataset& data) {
  std::map<GroupId, std::int64_t> counts;
  for (int a = 0; a < data.num_attributes(); ++a) {
    for (int y = 0; y < data.num_classes(); ++y) counts[GroupId{a, y}] = 0;
  }
  for (const Example& e : data.examples()) ++counts[GroupId{e.attribute, e.label}];
  return counts;
}

Dataset degenerate_groups_to_classes(const Dataset& data) {
  std::vector<Example> examples = data.examples();
  for (Example& e : examples) e.attribute = e.label;
  return Dataset(std::move(examples), data.num_classes(), data.num_classes(), data.split());
}

Prediction make_prediction(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("make_prediction: empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12 || !std::isfinite(p)) {
      throw std::invalid_argument("make_prediction: probability outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("make_prediction: probabilities must sum to 1 within 1e-9");
  }
  Prediction out;
  out.probs = std::move(probs);
  out.predicted = 0;
  for (int c = 1; c < static_cast<int>(out.probs.size()); ++c) {
    // Strict > keeps the smaller index on ties.
    if (out.probs[c] > out.probs[out.predicted]) out.predicted = c;
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  const int d = data.feature_dim();
  for (int j = 0; j < d; ++j) out << "x" << j << ",";
  out << "y,a,split\n";
  out.precision(17);
  for (const Example& e : data.examples()) {
    for (int j = 0; j < d; ++j) out << e.features[j] << ",";
    out << e.label << "," << e.attribute << "," << to_string(data.split()) << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

std::map<Split, Dataset> load_csv(const std::string& path, std::optional<int> num_classes,
                                  std::optional<int> num_attributes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  int y_col = -1, a_col = -1, split_col = -1;
  std::vector<int> feature_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "y") {
      y_col = i;
    } else if (header[i] == "a") {
      a_col = i;
    } else if (header[i] == "split") {
      split_col = i;
    } else if (!header[i].empty() && header[i][0] == 'x') {
      feature_cols.push_back(i);
    } else {
      throw std::runtime_error("load_csv: unexpected column '" + header[i] + "' in " + path);
    }
  }
  if (y_col < 0 || split_col < 0) throw std::runtime_error("load_csv: missing y or split column");

  std::map<Split, std::vector<Example>> by_split;
  int max_label = -1;
  int max_attribute = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("load_csv: row width mismatch in " + path);
    }
    Example e;
    e.features.reserve(feature_cols.size());
    for (int col : feature_cols) e.features.push_back(std::stod(fields[col]));
    e.label = std::stoi(fields[y_col]);
    // No attribute column means the file carries no attribute annotations:
    // apply the class degeneration a := y.
    e.attribute = (a_col >= 0 && !fields[a_col].empty()) ? std::stoi(fields[a_col]) : e.label;
    if (e.label < 0 || e.attribute < 0) throw std::runtime_error("load_csv: negative label/attribute");
    max_label = std::max(max_label, e.label);
    max_attribute = std::max(max_attribute, e.attribute);
    by_split[split_from_string(fields[split_col])].push_back(std::move(e));
  }

  const int inferred_classes = num_classes.value_or(max_label + 1);
  const int inferred_attributes = num_attributes.value_or(std::max(max_attribute + 1, a_col >= 0 ? 1 : inferred_classes));
  std::map<Split, Dataset> out;
  for (auto& [split, examples] : by_split) {
    out.emplace(split, Dataset(std::move(examples), inferred_classes, inferred_attributes, split));
  }
  return out;
}

DataBundle load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::optional<int> num_classes;
  std::optional<int> num_attributes;
  const fs::path meta_path = fs::path(dir) / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream meta_in(meta_path);
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    if (meta.contains("num_classes")) num_classes = meta["num_classes"].get<int>();
    if (meta.contains("num_attributes")) num_attributes = meta["num_attributes"].get<int>();
  }

  auto load_one = [&](const char* name, Split split) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) throw std::runtime_error("load_dataset_dir: missing " + p.string());
    auto loaded = load_csv(p.string(), num_classes, num_attributes);
    auto it = loaded.find(split);
    if (it == loaded.end() || loaded.size() != 1) {
      throw std::runtime_error(std::string("load_dataset_dir: ") + name + " must contain exactly its own split");
    }
    return std::move(it->second);
  };

  if (!num_classes.has_value()) {
    // Without metadata, infer shared C/A from the union of all three files.
    int max_c = 0, max_a = 0;
    for (const char* name : {"train.csv", "val.csv", "test.csv"}) {
      auto loaded = load_csv((fs::path(dir) / name).string());
      for (const auto& [split, ds] : loaded) {
        max_c = std::max(max_c, ds.num_classes());
        max_a = std::max(max_a, ds.num_attributes());
      }
    }
    num_classes = max_c;
    num_attributes = max_a;
  }

  return DataBundle{load_one("train.csv", Split::kTrain), load_one("val.csv", Split::kVal),
                    load_one("test.csv", Split::kTest)};
}

}  // namespace subpop
