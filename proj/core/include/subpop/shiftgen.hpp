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

#ifndef SUBPOP_SHIFTGEN_HPP_
#define SUBPOP_SHIFTGEN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "subpop/core.hpp"
#include "subpop/quantify.hpp"

namespace subpop::gen {

using quantify::ShiftType;

// Recipe for one synthetic dataset. Features are [core block ; spurious
// block]: the core block depends only on the class, the spurious block only
// on the attribute, so ground-truth shift type and severity are known and
// the Bayes error on core features is computable.
//
// Sampling laws per shift type (train; val always follows train):
//   SC:  y uniform; a = a*(y) = y mod A with prob rho, else uniform others.
//   AI:  y uniform; a ~ attribute_skew, independent of y.
//   CI:  y ~ class_skew; a uniform.
//   AG:  y uniform; a | y uniform over attributes with (a, y) not held out.
//   composite: y ~ class_skew; a | y = a*(y) with prob rho, else
//     attribute_skew over the remaining attributes (renormalized); held-out
//     groups removed from the train support.
// Test: group-balanced by exact quota for SC/AI/CI; for AG, quota over all
// groups including held-out ones; for composite, classes keep class_skew
// and attributes are balanced within class (the Waterbirds-style test).
struct GenSpec {
  ShiftType shift_type = ShiftType::kSC;
  int num_classes = 2;
  int num_attributes = 2;
  int core_dim = 2;
  int spurious_dim = 2;
  // p_train(a = a*(y) | y) for SC/composite; in [1/A, 1].
  double rho = 0.9;
  std::vector<double> attribute_skew;  // AI/composite; empty means uniform
  std::vector<double> class_skew;      // CI/composite; empty means uniform
  std::vector<GroupId> held_out_groups;
  double noise_sigma = 1.0;
  int n_train = 4000;
  int n_val = 1000;
  int n_test = 2000;
  std::uint64_t seed = 0;
};

std::string to_json_string(const GenSpec& spec);
GenSpec spec_from_json_string(const std::string& text);

// Class means live on the core block, attribute means on the spurious
// block. Placement: dimension 1 spreads indices evenly over [-1, 1];
// dimension >= 2 places them on the unit circle in the first two
// coordinates. Means are pairwise distinct in both cases.
struct GenerativeModel {
  std::vector<std::vector<double>> class_means;      // C x core_dim
  std::vector<std::vector<double>> attribute_means;  // A x spurious_dim
  double noise_sigma = 1.0;

  static GenerativeModel from_spec(const GenSpec& spec);
};

// Draws the three splits. Deterministic: the same spec (including seed)
// produces byte-identical datasets.
DataBundle generate(const GenSpec& spec);
DataBundle generate(const GenSpec& spec, const GenerativeModel& model);

// Per-group test error of the Bayes rule that sees only core features
// (nearest class mean under isotropic Gaussian noise, uniform prior).
// Monte Carlo with `samples` draws per class; the error depends only on the
// class, so entries within a class coincide exactly. Indexed by linearized
// group id.
std::vector<double> bayes_optimal_error(const GenSpec& spec, int samples = 200000);
std::vector<double> bayes_optimal_error(const GenSpec& spec, const GenerativeModel& model,
                                        int samples = 200000);

// Writes train.csv/val.csv/test.csv plus meta.json (the spec echoed back).
void write_dataset_dir(const GenSpec& spec, const DataBundle& data, const std::string& dir);

}  // namespace subpop::gen

#endif  // SUBPOP_SHIFTGEN_HPP_
