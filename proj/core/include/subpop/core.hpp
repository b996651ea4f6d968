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

#ifndef SUBPOP_CORE_HPP_
#define SUBPOP_CORE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subpop/common.hpp"

namespace subpop {

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split split);
Split split_from_string(const std::string& name);

// One labeled, attributed example. `weight` defaults to 1 and is the hook
// re-weighting algorithms use; runs own a private copy of their dataset so
// weight mutation never leaks across runs.
struct Example {
  std::vector<double> features;
  int label = 0;
  int attribute = 0;
  double weight = 1.0;
};

// A subpopulation index: the (attribute, label) pair.
struct GroupId {
  int attribute = 0;
  int label = 0;

  friend bool operator==(const GroupId&, const GroupId&) = default;
  friend auto operator<=>(const GroupId&, const GroupId&) = default;
};

// Linearization g = attribute * num_classes + label, bijective on
// {0 .. num_attributes * num_classes - 1}.
int linearize(GroupId group, int num_classes);
GroupId unlinearize(int group_index, int num_classes);

// An immutable collection of examples with declared class/attribute counts.
// Construction validates every example: label < C, attribute < A, feature
// dimension consistent, all values finite, weight >= 0. Groups may be empty
// (a group absent from train can legally appear in test).
class Dataset {
 public:
  Dataset(std::vector<Example> examples, int num_classes, int num_attributes, Split split);

  const std::vector<Example>& examples() const { return examples_; }
  const Example& example(int i) const { return examples_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(examples_.size()); }
  int num_classes() const { return num_classes_; }
  int num_attributes() const { return num_attributes_; }
  int num_groups() const { return num_classes_ * num_attributes_; }
  Split split() const { return split_; }
  // Feature dimension; 0 for an empty dataset.
  int feature_dim() const { return feature_dim_; }

  std::vector<std::int64_t> class_counts() const;
  std::vector<std::int64_t> attribute_counts() const;
  // Indexed by linearize(group, num_classes()).
  std::vector<std::int64_t> group_counts_linear() const;

 private:
  std::vector<Example> examples_;
  int num_classes_ = 0;
  int num_attributes_ = 0;
  int feature_dim_ = 0;
  Split split_ = Split::kTrain;
};

// Counts per declared group, including zero entries.
std::map<GroupId, std::int64_t> group_counts(const Dataset& data);

// Sets every example's attribute to its label so group-based machinery acts
// per class; the result has num_attributes == num_classes. Idempotent.
Dataset degenerate_groups_to_classes(const Dataset& data);

// Probability vector over classes plus the argmax decision. Ties break
// toward the smaller class index so downstream metrics are deterministic.
struct Prediction {
  std::vector<double> probs;
  int predicted = 0;
};

// Validates the probability vector (entries in [0,1], sum within 1e-9 of 1)
// and applies the tie-break rule.
Prediction make_prediction(std::vector<double> probs);

// The train/val/test triple every experiment consumes.
struct DataBundle {
  Dataset train;
  Dataset val;
  Dataset test;
};

// CSV format: header `x0,...,x{d-1},y,a,split`; y and a nonnegative integers;
// split in {train,val,test}. A file without the `a` column is an
// unknown-attribute file: the loader assigns a := y (the class degeneration).
void write_csv(const Dataset& data, const std::string& path);

// Loads one CSV, which may contain several splits; class/attribute counts
// are inferred from the data unless overridden (AG test sets need overrides
// since train alone under-counts attributes).
std::map<Split, Dataset> load_csv(const std::string& path,
                                  std::optional<int> num_classes = std::nullopt,
                                  std::optional<int> num_attributes = std::nullopt);

// Loads train.csv/val.csv/test.csv from a directory; when meta.json is
// present its num_classes/num_attributes take precedence.
DataBundle load_dataset_dir(const std::string& dir);

}  // namespace subpop

#endif  // SUBPOP_CORE_HPP_
