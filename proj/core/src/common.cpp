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

#include "subpop/common.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>

namespace subpop {

namespace {
std::atomic<std::uint64_t> g_warning_count{0};
std::atomic<bool> g_warning_output{true};
}  // namespace

void warn(const std::string& message) {
  g_warning_count.fetch_add(1, std::memory_order_relaxed);
  if (g_warning_output.load(std::memory_order_relaxed)) {
    std::cerr << "[subpop warning] " << message << "\n";
  }
}

std::uint64_t warning_count() { return g_warning_count.load(std::memory_order_relaxed); }

void set_warning_output(bool enabled) { g_warning_output.store(enabled, std::memory_order_relaxed); }

std::uint64_t stable_hash(std::string_view text) {
  return stable_hash_combine(14695981039346656037ULL, text);
}

std::uint64_t stable_hash_combine(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // Mix in a terminator so that combine("ab","c") != combine("a","bc").
  h ^= 0xff;
  h *= 1099511628211ULL;
  return h;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<int>(x % un);
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

int Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("Rng::categorical: empty probability vector");
  const double u = uniform01();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0) throw std::invalid_argument("Rng::categorical: negative probability");
    if (probs[i] > 0.0) last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  if (last_positive < 0) throw std::invalid_argument("Rng::categorical: all-zero probability vector");
  return last_positive;  // u landed in the rounding slack past the last bin
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost shape above 1 and correct with U^(1/shape).
    const double g = gamma(shape + 1.0);
    const double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    return g * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double vcube = t * t * t;
    const double u = uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * vcube;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - vcube + std::log(vcube))) return d * vcube;
  }
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::uint64_t Rng::fork_seed(std::string_view label) const {
  // The fork depends only on the label and the root seed, not on how many
  // draws were consumed, so substreams are stable against refactors.
  return stable_hash_combine(root_seed_ ^ 0x9e3779b97f4a7c15ULL, label);
}

Rng Rng::forked(std::uint64_t seed, std::string_view label) {
  Rng base(seed);
  base.root_seed_ = seed;
  return Rng(base.fork_seed(label));
}

Mat::Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
  if (static_cast<std::size_t>(r) * c != v.size()) {
    throw std::invalid_argument("Mat: data length does not match shape");
  }
}

Mat Mat::full(int r, int c, double value) {
  Mat m(r, c);
  for (double& x : m.v) x = value;
  return m;
}

Mat Mat::row_vector(std::vector<double> data) {
  const int c = static_cast<int>(data.size());
  return Mat(1, c, std::move(data));
}

Mat Mat::scalar(double value) { return Mat(1, 1, {value}); }

bool Mat::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  out.n = static_cast<int>(values.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double x : values) sum += x;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : values) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / (out.n - 1));
  }
  return out;
}

bool pearson(std::span<const double> x, std::span<const double> y, double* r, double* slope) {
  if (x.size() != y.size() || x.size() < 2) return false;
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return false;
  if (r != nullptr) *r = sxy / std::sqrt(sxx * syy);
  if (slope != nullptr) *slope = sxy / sxx;
  return true;
}

}  // namespace subpop
