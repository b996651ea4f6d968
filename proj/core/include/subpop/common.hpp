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

#ifndef SUBPOP_COMMON_HPP_
#define SUBPOP_COMMON_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace subpop {

// Thrown when an operation produces or encounters a non-finite value.
// Numerical blowups (e.g. a diverging loss) must fail loudly rather than
// propagate NaNs into results.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counts and optionally prints non-fatal warnings (degenerate statistics,
// skipped empty groups, ...). Tests assert on the counter delta.
void warn(const std::string& message);
std::uint64_t warning_count();
void set_warning_output(bool enabled);

// 64-bit FNV-1a. Used wherever a seed or a file name must be derived from
// plan coordinates; std::hash is implementation-defined and unsuitable.
std::uint64_t stable_hash(std::string_view text);
std::uint64_t stable_hash_combine(std::uint64_t seed, std::string_view text);

// Deterministic random stream. All sampling goes through explicit inverse /
// rejection constructions on top of mt19937_64 so that identical seeds give
// identical draws on every platform; std::*_distribution is not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi);

  // Uniform integer on [0, n). Rejection-sampled, no modulo bias.
  int uniform_int(int n);

  // Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal();
  double normal(double mean, double stddev);

  // Index draw from an explicit probability vector (CDF inversion).
  int categorical(std::span<const double> probs);

  // Gamma(shape, 1) via Marsaglia-Tsang; Beta via two gammas.
  double gamma(double shape);
  double beta(double a, double b);

  // Derives an independent substream seed from a label.
  std::uint64_t fork_seed(std::string_view label) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t root_seed_ = 0;

 public:
  static Rng forked(std::uint64_t seed, std::string_view label);
};

// Dense row-major matrix of doubles. Deliberately minimal: shapes at desk
// scale are tiny (d <= ~64, batch <= ~512) and plain loops are fast enough.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data);

  static Mat zeros(int r, int c) { return Mat(r, c); }
  static Mat full(int r, int c, double value);
  static Mat row_vector(std::vector<double> data);
  static Mat scalar(double value);

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  int size() const { return rows * cols; }
  bool same_shape(const Mat& other) const { return rows == other.rows && cols == other.cols; }
  bool all_finite() const;
};

bool nearly_equal(double a, double b, double tol);

// Sample mean and (n-1)-denominator standard deviation.
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};
MeanSd mean_sd(std::span<const double> values);

// Pearson correlation; returns false (r unset) when either side is constant.
bool pearson(std::span<const double> x, std::span<const double> y, double* r, double* slope);

}  // namespace subpop

#endif  // SUBPOP_COMMON_HPP_
