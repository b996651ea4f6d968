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

#include "subpop/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace subpop::ad {

namespace {

void matmul_into(const Mat& a, const Mat& b, bool transpose_a, bool transpose_b, Mat* out,
                 bool accumulate) {
  const int ar = transpose_a ? a.cols : a.rows;
  const int ac = transpose_a ? a.rows : a.cols;
  const int br = transpose_b ? b.cols : b.rows;
  const int bc = transpose_b ? b.rows : b.cols;
  if (ac != br) throw std::invalid_argument("matmul: inner dimensions do not match");
  if (!accumulate) *out = Mat(ar, bc);
  for (int i = 0; i < ar; ++i) {
    for (int k = 0; k < ac; ++k) {
      const double aik = transpose_a ? a(k, i) : a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < bc; ++j) {
        const double bkj = transpose_b ? b(j, k) : b(k, j);
        (*out)(i, j) += aik * bkj;
      }
    }
  }
}

double squared_distance_rows(const Mat& a, int i, const Mat& b, int j) {
  double d2 = 0.0;
  for (int k = 0; k < a.cols; ++k) {
    const double diff = a(i, k) - b(j, k);
    d2 += diff * diff;
  }
  return d2;
}

}  // namespace

VarId Tape::push(Node node) {
  if (node.op != Op::kConstant && !node.value.all_finite()) {
    throw NumericError("autodiff: op produced a non-finite value");
  }
  nodes_.push_back(std::move(node));
  return static_cast<VarId>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(VarId id) const {
  check_id(id);
  return nodes_[static_cast<std::size_t>(id)];
}

void Tape::check_id(VarId id) const {
  if (id < 0 || id >= static_cast<VarId>(nodes_.size())) {
    throw std::invalid_argument("autodiff: invalid VarId");
  }
}

VarId Tape::constant(Mat value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  n.needs_grad = false;
  return push(std::move(n));
}

VarId Tape::leaf(Mat value) {
  if (!value.all_finite()) throw NumericError("autodiff: non-finite leaf value");
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

VarId Tape::matmul(VarId a, VarId b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  Node n;
  n.op = Op::kMatmul;
  n.lhs = a;
  n.rhs = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  matmul_into(na.value, nb.value, false, false, &n.value, false);
  return push(std::move(n));
}

VarId Tape::add(VarId a, VarId b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  Node n;
  n.lhs = a;
  n.rhs = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  if (na.value.same_shape(nb.value)) {
    n.op = Op::kAdd;
    n.value = na.value;
    for (int i = 0; i < n.value.size(); ++i) n.value.v[i] += nb.value.v[i];
  } else if (nb.value.rows == 1 && nb.value.cols == na.value.cols) {
    n.op = Op::kAddRowBroadcast;
    n.value = na.value;
    for (int r = 0; r < n.value.rows; ++r) {
      for (int c = 0; c < n.value.cols; ++c) n.value(r, c) += nb.value(0, c);
    }
  } else {
    throw std::invalid_argument("add: shapes must match or rhs must be a 1 x cols row vector");
  }
  return push(std::move(n));
}

VarId Tape::sub(VarId a, VarId b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!na.value.same_shape(nb.value)) throw std::invalid_argument("sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.lhs = a;
  n.rhs = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  for (int i = 0; i < n.value.size(); ++i) n.value.v[i] -= nb.value.v[i];
  return push(std::move(n));
}

VarId Tape::mul(VarId a, VarId b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!na.value.same_shape(nb.value)) throw std::invalid_argument("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.lhs = a;
  n.rhs = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = na.value;
  for (int i = 0; i < n.value.size(); ++i) n.value.v[i] *= nb.value.v[i];
  return push(std::move(n));
}

VarId Tape::scale(VarId a, double factor) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kScale;
  n.lhs = a;
  n.scalar = factor;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x *= factor;
  return push(std::move(n));
}

VarId Tape::relu(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kRelu;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::max(x, 0.0);
  return push(std::move(n));
}

VarId Tape::square(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSquare;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x *= x;
  return push(std::move(n));
}

VarId Tape::sqrt(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSqrt;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::sqrt(x);
  return push(std::move(n));
}

VarId Tape::exp(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kExp;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::exp(x);
  return push(std::move(n));
}

VarId Tape::log(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kLog;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::log(x);
  return push(std::move(n));
}

VarId Tape::pow_const(VarId a, double exponent) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kPowConst;
  n.lhs = a;
  n.scalar = exponent;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (double& x : n.value.v) x = std::pow(x, exponent);
  return push(std::move(n));
}

VarId Tape::sum(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSum;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.value.v) s += x;
  n.value = Mat::scalar(s);
  return push(std::move(n));
}

VarId Tape::mean(VarId a) {
  const Node& na = node(a);
  if (na.value.size() == 0) throw std::invalid_argument("mean: empty input");
  Node n;
  n.op = Op::kMean;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  double s = 0.0;
  for (double x : na.value.v) s += x;
  n.value = Mat::scalar(s / na.value.size());
  return push(std::move(n));
}

VarId Tape::row_sum(VarId a) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kRowSum;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = Mat(na.value.rows, 1);
  for (int r = 0; r < na.value.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < na.value.cols; ++c) s += na.value(r, c);
    n.value(r, 0) = s;
  }
  return push(std::move(n));
}

VarId Tape::col_mean(VarId a) {
  const Node& na = node(a);
  if (na.value.rows == 0) throw std::invalid_argument("col_mean: empty input");
  Node n;
  n.op = Op::kColMean;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = Mat(1, na.value.cols);
  for (int c = 0; c < na.value.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < na.value.rows; ++r) s += na.value(r, c);
    n.value(0, c) = s / na.value.rows;
  }
  return push(std::move(n));
}

VarId Tape::log_softmax(VarId a) {
  const Node& na = node(a);
  if (na.value.cols < 1) throw std::invalid_argument("log_softmax: need at least one column");
  Node n;
  n.op = Op::kLogSoftmax;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  n.value = na.value;
  for (int r = 0; r < n.value.rows; ++r) {
    double max_z = n.value(r, 0);
    for (int c = 1; c < n.value.cols; ++c) max_z = std::max(max_z, n.value(r, c));
    double lse = 0.0;
    for (int c = 0; c < n.value.cols; ++c) lse += std::exp(n.value(r, c) - max_z);
    lse = max_z + std::log(lse);
    for (int c = 0; c < n.value.cols; ++c) n.value(r, c) -= lse;
  }
  return push(std::move(n));
}

VarId Tape::gather_rows(VarId a, const std::vector<int>& column_index) {
  const Node& na = node(a);
  if (static_cast<int>(column_index.size()) != na.value.rows) {
    throw std::invalid_argument("gather_rows: one index per row required");
  }
  Node n;
  n.op = Op::kGatherRows;
  n.lhs = a;
  n.index = column_index;
  n.needs_grad = na.needs_grad;
  n.value = Mat(na.value.rows, 1);
  for (int r = 0; r < na.value.rows; ++r) {
    const int c = column_index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= na.value.cols) throw std::invalid_argument("gather_rows: index out of range");
    n.value(r, 0) = na.value(r, c);
  }
  return push(std::move(n));
}

VarId Tape::select_rows(VarId a, const std::vector<int>& rows) {
  const Node& na = node(a);
  Node n;
  n.op = Op::kSelectRows;
  n.lhs = a;
  n.index = rows;
  n.needs_grad = na.needs_grad;
  n.value = Mat(static_cast<int>(rows.size()), na.value.cols);
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    const int src = rows[static_cast<std::size_t>(r)];
    if (src < 0 || src >= na.value.rows) throw std::invalid_argument("select_rows: row out of range");
    for (int c = 0; c < na.value.cols; ++c) n.value(r, c) = na.value(src, c);
  }
  return push(std::move(n));
}

VarId Tape::covariance(VarId a) {
  const Node& na = node(a);
  const int rows = na.value.rows;
  const int d = na.value.cols;
  if (rows < 1) throw std::invalid_argument("covariance: empty input");
  Node n;
  n.op = Op::kCovariance;
  n.lhs = a;
  n.needs_grad = na.needs_grad;
  std::vector<double> mean_vec(static_cast<std::size_t>(d), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < d; ++c) mean_vec[c] += na.value(r, c);
  }
  for (double& m : mean_vec) m /= rows;
  n.value = Mat(d, d);
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < d; ++i) {
      const double di = na.value(r, i) - mean_vec[i];
      for (int j = 0; j < d; ++j) {
        n.value(i, j) += di * (na.value(r, j) - mean_vec[j]);
      }
    }
  }
  for (double& x : n.value.v) x /= rows;
  return push(std::move(n));
}

VarId Tape::mmd2(VarId a, VarId b, const std::vector<double>& bandwidths) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.value.rows == 0 || nb.value.rows == 0) throw std::invalid_argument("mmd2: empty sample");
  if (na.value.cols != nb.value.cols) throw std::invalid_argument("mmd2: feature dimensions differ");
  if (bandwidths.empty()) throw std::invalid_argument("mmd2: need at least one bandwidth");
  for (double bw : bandwidths) {
    if (!(bw > 0.0)) throw std::invalid_argument("mmd2: bandwidths must be positive");
  }
  Node n;
  n.op = Op::kMmd2;
  n.lhs = a;
  n.rhs = b;
  n.bandwidths = bandwidths;
  n.needs_grad = na.needs_grad || nb.needs_grad;

  const Mat& x = na.value;
  const Mat& y = nb.value;
  const int nx = x.rows;
  const int ny = y.rows;
  double total = 0.0;
  for (double bw : bandwidths) {
    const double inv = 1.0 / (2.0 * bw);
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) kxx += std::exp(-squared_distance_rows(x, i, x, j) * inv);
    }
    for (int i = 0; i < ny; ++i) {
      for (int j = 0; j < ny; ++j) kyy += std::exp(-squared_distance_rows(y, i, y, j) * inv);
    }
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) kxy += std::exp(-squared_distance_rows(x, i, y, j) * inv);
    }
    total += kxx / (static_cast<double>(nx) * nx) + kyy / (static_cast<double>(ny) * ny) -
             2.0 * kxy / (static_cast<double>(nx) * ny);
  }
  n.value = Mat::scalar(total / bandwidths.size());
  return push(std::move(n));
}

const Mat& Tape::value(VarId id) const { return node(id).value; }

const Mat& Tape::grad(VarId id) const {
  const Node& n = node(id);
  if (!backward_done_) throw std::logic_error("autodiff: grad requested before backward()");
  return n.grad;
}

void Tape::accumulate(VarId id, const Mat& delta) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Mat(n.value.rows, n.value.cols);
  for (int i = 0; i < delta.size(); ++i) n.grad.v[i] += delta.v[i];
}

void Tape::backward(VarId loss) {
  const Node& loss_node = node(loss);
  if (loss_node.value.rows != 1 || loss_node.value.cols != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  }
  if (backward_done_) throw std::logic_error("backward: called twice on the same tape");
  backward_done_ = true;

  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad = Mat(n.value.rows, n.value.cols);
  }
  if (!loss_node.needs_grad) return;  // loss does not depend on any leaf
  nodes_[static_cast<std::size_t>(loss)].grad(0, 0) = 1.0;

  for (VarId id = static_cast<VarId>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.op == Op::kLeaf || n.op == Op::kConstant) continue;
    backward_node(n);
  }
}

void Tape::backward_node(const Node& n) {
  const Mat& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
    case Op::kLeaf:
      return;
    case Op::kMatmul: {
      const Node& a = node(n.lhs);
      const Node& b = node(n.rhs);
      if (a.needs_grad) {
        Mat& ga = nodes_[static_cast<std::size_t>(n.lhs)].grad;
        matmul_into(g, b.value, false, true, &ga, true);
      }
      if (b.needs_grad) {
        Mat& gb = nodes_[static_cast<std::size_t>(n.rhs)].grad;
        matmul_into(a.value, g, true, false, &gb, true);
      }
      return;
    }
    case Op::kAdd: {
      accumulate(n.lhs, g);
      accumulate(n.rhs, g);
      return;
    }
    case Op::kAddRowBroadcast: {
      accumulate(n.lhs, g);
      const Node& b = node(n.rhs);
      if (b.needs_grad) {
        Mat col(1, g.cols);
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < g.cols; ++c) col(0, c) += g(r, c);
        }
        accumulate(n.rhs, col);
      }
      return;
    }
    case Op::kSub: {
      accumulate(n.lhs, g);
      const Node& b = node(n.rhs);
      if (b.needs_grad) {
        Mat neg = g;
        for (double& x : neg.v) x = -x;
        accumulate(n.rhs, neg);
      }
      return;
    }
    case Op::kMul: {
      const Node& a = node(n.lhs);
      const Node& b = node(n.rhs);
      if (a.needs_grad) {
        Mat da = g;
        for (int i = 0; i < da.size(); ++i) da.v[i] *= b.value.v[i];
        accumulate(n.lhs, da);
      }
      if (b.needs_grad) {
        Mat db = g;
        for (int i = 0; i < db.size(); ++i) db.v[i] *= a.value.v[i];
        accumulate(n.rhs, db);
      }
      return;
    }
    case Op::kScale: {
      Mat da = g;
      for (double& x : da.v) x *= n.scalar;
      accumulate(n.lhs, da);
      return;
    }
    case Op::kRelu: {
      const Node& a = node(n.lhs);
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) {
        if (a.value.v[i] <= 0.0) da.v[i] = 0.0;
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kSquare: {
      const Node& a = node(n.lhs);
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) da.v[i] *= 2.0 * a.value.v[i];
      accumulate(n.lhs, da);
      return;
    }
    case Op::kSqrt: {
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) da.v[i] *= 0.5 / n.value.v[i];
      accumulate(n.lhs, da);
      return;
    }
    case Op::kExp: {
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) da.v[i] *= n.value.v[i];
      accumulate(n.lhs, da);
      return;
    }
    case Op::kLog: {
      const Node& a = node(n.lhs);
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) da.v[i] /= a.value.v[i];
      accumulate(n.lhs, da);
      return;
    }
    case Op::kPowConst: {
      const Node& a = node(n.lhs);
      Mat da = g;
      for (int i = 0; i < da.size(); ++i) {
        da.v[i] *= n.scalar * std::pow(a.value.v[i], n.scalar - 1.0);
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kSum: {
      const Node& a = node(n.lhs);
      Mat da = Mat::full(a.value.rows, a.value.cols, g(0, 0));
      accumulate(n.lhs, da);
      return;
    }
    case Op::kMean: {
      const Node& a = node(n.lhs);
      Mat da = Mat::full(a.value.rows, a.value.cols, g(0, 0) / a.value.size());
      accumulate(n.lhs, da);
      return;
    }
    case Op::kRowSum: {
      const Node& a = node(n.lhs);
      Mat da(a.value.rows, a.value.cols);
      for (int r = 0; r < da.rows; ++r) {
        for (int c = 0; c < da.cols; ++c) da(r, c) = g(r, 0);
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kColMean: {
      const Node& a = node(n.lhs);
      Mat da(a.value.rows, a.value.cols);
      for (int r = 0; r < da.rows; ++r) {
        for (int c = 0; c < da.cols; ++c) da(r, c) = g(0, c) / a.value.rows;
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kLogSoftmax: {
      // d/dz of (z - lse(z)) applied to upstream g: g - softmax(z) * rowsum(g).
      Mat da(n.value.rows, n.value.cols);
      for (int r = 0; r < n.value.rows; ++r) {
        double row_total = 0.0;
        for (int c = 0; c < n.value.cols; ++c) row_total += g(r, c);
        for (int c = 0; c < n.value.cols; ++c) {
          da(r, c) = g(r, c) - std::exp(n.value(r, c)) * row_total;
        }
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kGatherRows: {
      const Node& a = node(n.lhs);
      Mat da(a.value.rows, a.value.cols);
      for (int r = 0; r < a.value.rows; ++r) da(r, n.index[static_cast<std::size_t>(r)]) = g(r, 0);
      accumulate(n.lhs, da);
      return;
    }
    case Op::kSelectRows: {
      const Node& a = node(n.lhs);
      Mat da(a.value.rows, a.value.cols);
      for (int r = 0; r < static_cast<int>(n.index.size()); ++r) {
        const int src = n.index[static_cast<std::size_t>(r)];
        for (int c = 0; c < a.value.cols; ++c) da(src, c) += g(r, c);
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kCovariance: {
      // d tr(G' Cov) / dX = (1/n) Xc (G + G'), Xc the centered input.
      const Node& a = node(n.lhs);
      const int rows = a.value.rows;
      const int d = a.value.cols;
      std::vector<double> mean_vec(static_cast<std::size_t>(d), 0.0);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d; ++c) mean_vec[c] += a.value(r, c);
      }
      for (double& m : mean_vec) m /= rows;
      Mat gsym(d, d);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) gsym(i, j) = g(i, j) + g(j, i);
      }
      Mat da(rows, d);
      for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int i = 0; i < d; ++i) s += (a.value(r, i) - mean_vec[i]) * gsym(i, j);
          da(r, j) = s / rows;
        }
      }
      accumulate(n.lhs, da);
      return;
    }
    case Op::kMmd2: {
      const Node& a = node(n.lhs);
      const Node& b = node(n.rhs);
      const Mat& x = a.value;
      const Mat& y = b.value;
      const int nx = x.rows;
      const int ny = y.rows;
      const int d = x.cols;
      const double upstream = g(0, 0) / n.bandwidths.size();
      Mat dx(nx, d);
      Mat dy(ny, d);
      for (double bw : n.bandwidths) {
        const double inv = 1.0 / (2.0 * bw);
        // d/du exp(-|u-v|^2 / (2bw)) = k * (v - u) / bw.
        for (int i = 0; i < nx; ++i) {
          for (int j = 0; j < nx; ++j) {
            const double k = std::exp(-squared_distance_rows(x, i, x, j) * inv);
            const double coef = upstream * 2.0 * k / (bw * nx * nx);
            for (int c = 0; c < d; ++c) dx(i, c) += coef * (x(j, c) - x(i, c));
          }
        }
        for (int i = 0; i < ny; ++i) {
          for (int j = 0; j < ny; ++j) {
            const double k = std::exp(-squared_distance_rows(y, i, y, j) * inv);
            const double coef = upstream * 2.0 * k / (bw * ny * ny);
            for (int c = 0; c < d; ++c) dy(i, c) += coef * (y(j, c) - y(i, c));
          }
        }
        for (int i = 0; i < nx; ++i) {
          for (int j = 0; j < ny; ++j) {
            const double k = std::exp(-squared_distance_rows(x, i, y, j) * inv);
            const double coef = upstream * 2.0 * k / (bw * nx * ny);
            for (int c = 0; c < d; ++c) {
              dx(i, c) -= coef * (y(j, c) - x(i, c));
              dy(j, c) -= coef * (x(i, c) - y(j, c));
            }
          }
        }
      }
      if (a.needs_grad) accumulate(n.lhs, dx);
      if (b.needs_grad) accumulate(n.rhs, dy);
      return;
    }
  }
}

double gradient_check(const std::vector<Mat>& params,
                      const std::function<double(const std::vector<Mat>&)>& loss_value,
                      const std::function<std::vector<Mat>(const std::vector<Mat>&)>& analytic_grads,
                      double step) {
  const std::vector<Mat> grads = analytic_grads(params);
  if (grads.size() != params.size()) {
    throw std::invalid_argument("gradient_check: one gradient per parameter expected");
  }
  double worst = 0.0;
  std::vector<Mat> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (int i = 0; i < params[p].size(); ++i) {
      const double original = probe[p].v[i];
      probe[p].v[i] = original + step;
      const double up = loss_value(probe);
      probe[p].v[i] = original - step;
      const double down = loss_value(probe);
      probe[p].v[i] = original;
      const double fd = (up - down) / (2.0 * step);
      const double analytic = grads[p].v[i];
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-3});
      const double rel = std::abs(fd - analytic) <= 1e-7 ? 0.0 : std::abs(fd - analytic) / denom;
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace subpop::ad
