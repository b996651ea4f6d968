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

#ifndef SUBPOP_AUTODIFF_HPP_
#define SUBPOP_AUTODIFF_HPP_

#include <functional>
#include <vector>

#include "subpop/common.hpp"

namespace subpop::ad {

// Handle into a Tape; valid only for the tape that produced it.
using VarId = int;

// Reverse-mode tape over dense matrices. Forward values are computed
// eagerly as ops are recorded; backward() replays the recorded ops in
// reverse. Every op validates shapes and rejects non-finite outputs with a
// NumericError (a diverging loss must abort the run, not poison it).
//
// A tape is single-threaded. The usual pattern is one fresh tape per
// training step: insert parameters as leaves, build the loss, call
// backward(), read the leaf gradients back out.
class Tape {
 public:
  // Inserts a value that never receives a gradient.
  VarId constant(Mat value);
  // Inserts a differentiable leaf.
  VarId leaf(Mat value);

  VarId matmul(VarId a, VarId b);
  // Elementwise add; rhs may also be a 1 x cols row vector (bias broadcast).
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  // Elementwise (Hadamard) product.
  VarId mul(VarId a, VarId b);
  VarId scale(VarId a, double factor);
  VarId relu(VarId a);
  VarId square(VarId a);
  VarId sqrt(VarId a);
  VarId exp(VarId a);
  VarId log(VarId a);
  // Elementwise a^p for a constant exponent.
  VarId pow_const(VarId a, double exponent);

  // Full reductions to a 1x1 scalar.
  VarId sum(VarId a);
  VarId mean(VarId a);
  // n x c -> n x 1 (sum over columns).
  VarId row_sum(VarId a);
  // n x c -> 1 x c (mean over rows).
  VarId col_mean(VarId a);

  // Row-wise log-softmax with max shift.
  VarId log_softmax(VarId a);
  // Picks a[i, index[i]] into an n x 1 column (the true-class lookup).
  VarId gather_rows(VarId a, const std::vector<int>& column_index);
  // Row subset: keeps rows[i] in order (group splits, top-k selections).
  VarId select_rows(VarId a, const std::vector<int>& rows);

  // (1/n) * centered second moment of an n x d matrix -> d x d.
  VarId covariance(VarId a);

  // Biased squared maximum mean discrepancy between two samples (rows are
  // points), with Gaussian kernels exp(-dist2 / (2 * b)) averaged over the
  // given bandwidths. Differentiable through both inputs; bandwidths are
  // treated as constants.
  VarId mmd2(VarId a, VarId b, const std::vector<double>& bandwidths);

  const Mat& value(VarId id) const;
  // Valid after backward(); zero matrix for leaves that got no signal.
  const Mat& grad(VarId id) const;

  // Accumulates gradients of a scalar node into every reachable leaf.
  // Errors: non-scalar loss, or a second call on the same tape.
  void backward(VarId loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kConstant, kLeaf, kMatmul, kAdd, kAddRowBroadcast, kSub, kMul, kScale,
    kRelu, kSquare, kSqrt, kExp, kLog, kPowConst, kSum, kMean, kRowSum,
    kColMean, kLogSoftmax, kGatherRows, kSelectRows, kCovariance, kMmd2,
  };

  struct Node {
    Op op;
    VarId lhs = -1;
    VarId rhs = -1;
    double scalar = 0.0;
    std::vector<int> index;
    std::vector<double> bandwidths;
    Mat value;
    Mat grad;
    bool needs_grad = false;
  };

  VarId push(Node node);
  const Node& node(VarId id) const;
  void check_id(VarId id) const;
  void backward_node(const Node& n);
  void accumulate(VarId id, const Mat& delta);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Max relative error between the analytic gradient of `loss_of(params)` and
// central finite differences, over every entry of every parameter. The
// callable must rebuild the computation from plain matrices each call.
// Shared by tests and the acceptance suite.
double gradient_check(const std::vector<Mat>& params,
                      const std::function<double(const std::vector<Mat>&)>& loss_value,
                      const std::function<std::vector<Mat>(const std::vector<Mat>&)>& analytic_grads,
                      double step = 1e-4);

}  // namespace subpop::ad

#endif  // SUBPOP_AUTODIFF_HPP_
