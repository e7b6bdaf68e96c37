// Copyright 2026 The lewisim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Dense double-precision tensors with reverse-mode automatic differentiation.
// Tensors are immutable values; a Tape records one training step's worth of
// operations and is discarded after backward(). Matrix products are evaluated
// through Eigen maps, every backward rule is written out here.

#ifndef LEWISIM_TENSOR_HPP_
#define LEWISIM_TENSOR_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lewisim {

// Shape and forward-pass finiteness checks stay on in debug builds and can be
// forced with -DLEWISIM_CHECK_FINITE=1.
#ifndef LEWISIM_CHECK_FINITE
#ifdef NDEBUG
#define LEWISIM_CHECK_FINITE 0
#else
#define LEWISIM_CHECK_FINITE 1
#endif
#endif

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

class Tape;

/// Value-semantic dense tensor. A tensor either lives on a tape (node_ >= 0)
/// or is a plain constant; constants never receive gradients.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(std::move(data))) {
    if (static_cast<int64_t>(data_->size()) != shape_numel(shape_)) {
      throw ShapeError("tensor data size " + std::to_string(data_->size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[i]; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  bool defined() const { return data_ != nullptr; }

  const std::vector<double>& data() const { return *data_; }

  /// In-place access for optimizer updates. Never call this on a tensor that
  /// is still reachable from a live tape's forward values.
  std::vector<double>& mutable_data() { return *data_; }

  double item() const {
    if (size() != 1) {
      throw ShapeError("item() requires a one-element tensor, got " +
                       shape_str(shape_));
    }
    return (*data_)[0];
  }

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  const std::shared_ptr<std::vector<double>>& buffer() const { return data_; }

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<std::vector<double>> data, Tape* tape,
         int node)
      : shape_(std::move(shape)), data_(std::move(data)), tape_(tape),
        node_(node) {}

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

enum class OpKind {
  kParam,
  kMatMul,
  kTranspose,
  kAdd,
  kAddBias,
  kSub,
  kMul,
  kMulBias,
  kScale,
  kSigmoid,
  kTanh,
  kRelu,
  kExp,
  kSoftmax,
  kLogSoftmax,
  kEntropy,
  kReduceSum,
  kReduceMean,
  kConcat,
  kGatherRows,
  kSelectLast,
  kReshape,
};

/// Records operations in topological order and replays their local backward
/// rules. One tape per training step; backward() may be called repeatedly and
/// accumulates parameter gradients until reset_grads().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `param` (a constant tensor) as a trainable leaf on this tape
  /// and returns the taped handle. Repeated calls with the same underlying
  /// buffer return the same node, so gradients from all uses accumulate.
  Tensor use(const Tensor& param) {
    if (param.tape_ == this) return param;
    if (param.tape_ != nullptr) {
      throw ValueError("tensor already belongs to a different tape");
    }
    auto it = param_nodes_.find(param.buffer().get());
    if (it != param_nodes_.end()) {
      const Node& n = nodes_[it->second];
      return Tensor(n.shape, n.values, this, it->second);
    }
    Node n;
    n.op = OpKind::kParam;
    n.shape = param.shape();
    n.values = param.buffer();
    n.is_param = true;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_[param.buffer().get()] = id;
    return Tensor(param.shape(), param.buffer(), this, id);
  }

  /// Accumulates d(loss)/d(node) into the persistent parameter gradients.
  void backward(const Tensor& loss) {
    if (loss.tape_ != this || loss.node_ < 0) {
      throw ValueError("backward: loss does not live on this tape");
    }
    if (loss.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(loss.shape()));
    }
    std::vector<std::vector<double>> grads(loss.node_ + 1);
    grads[loss.node_].assign(1, 1.0);
    for (int i = loss.node_; i >= 0; --i) {
      if (grads[i].empty()) continue;
      backprop_node(i, grads[i], grads);
    }
    for (const auto& entry : param_nodes_) {
      const int id = entry.second;
      if (id > loss.node_ || grads[id].empty()) continue;
      auto& acc = param_grads_[id];
      if (acc.empty()) {
        acc = std::move(grads[id]);
      } else {
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += grads[id][k];
      }
    }
  }

  void reset_grads() { param_grads_.clear(); }

  /// Gradient for a registered parameter; zeros if the parameter was never
  /// touched by any recorded operation or backward() has not yet run.
  Tensor grad(const Tensor& param) const {
    auto it = param_nodes_.find(param.buffer().get());
    if (it == param_nodes_.end()) return Tensor::zeros(param.shape());
    auto g = param_grads_.find(it->second);
    if (g == param_grads_.end() || g->second.empty()) {
      return Tensor::zeros(param.shape());
    }
    return Tensor(param.shape(), g->second);
  }

  size_t num_nodes() const { return nodes_.size(); }

  /// Appends an operation node; used by the free tensor functions.
  Tensor record(OpKind op, const std::vector<const Tensor*>& inputs,
                Shape out_shape, std::vector<double> out_values,
                std::vector<int> ints, double x, int axis,
                std::shared_ptr<std::vector<double>> saved) {
    Node n;
    n.op = op;
    n.shape = out_shape;
    n.values = std::make_shared<std::vector<double>>(std::move(out_values));
    for (const Tensor* t : inputs) {
      n.in_ids.push_back(t->on_tape() ? t->node() : -1);
      n.in_vals.push_back(t->buffer());
      n.in_shapes.push_back(t->shape());
    }
    n.ints = std::move(ints);
    n.x = x;
    n.axis = axis;
    n.saved = std::move(saved);
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    return Tensor(std::move(out_shape), nodes_.back().values, this, id);
  }

 private:
  struct Node {
    OpKind op;
    Shape shape;
    std::shared_ptr<std::vector<double>> values;
    // Inputs: node id (-1 for constants) plus value/shape snapshots.
    std::vector<int> in_ids;
    std::vector<std::shared_ptr<std::vector<double>>> in_vals;
    std::vector<Shape> in_shapes;
    // Op payload.
    std::vector<int> ints;  // indices for gather/select, split sizes, ...
    double x = 0.0;         // scale factor
    int axis = -1;          // reduction / concat axis (-1 = all)
    std::shared_ptr<std::vector<double>> saved;  // e.g. log-probabilities
    bool is_param = false;
  };

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
  using CMap = Eigen::Map<const RowMat>;
  using MMap = Eigen::Map<RowMat>;

  static void ensure(std::vector<double>& g, int64_t n) {
    if (g.empty()) g.assign(n, 0.0);
  }

  void add_input_grad(const Node& n, int slot, std::vector<double>&& g,
                      std::vector<std::vector<double>>& grads) {
    int id = n.in_ids[slot];
    if (id < 0) return;
    auto& dst = grads[id];
    if (dst.empty()) {
      dst = std::move(g);
    } else {
      for (size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
    }
  }

  void backprop_node(int i, const std::vector<double>& g,
                     std::vector<std::vector<double>>& grads) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case OpKind::kParam:
        break;
      case OpKind::kMatMul: {
        const Shape& sa = n.in_shapes[0];
        const Shape& sb = n.in_shapes[1];
        const int m = sa[0], k = sa[1], c = sb[1];
        CMap A(n.in_vals[0]->data(), m, k);
        CMap B(n.in_vals[1]->data(), k, c);
        CMap G(g.data(), m, c);
        if (n.in_ids[0] >= 0) {
          std::vector<double> ga(static_cast<size_t>(m) * k);
          MMap(ga.data(), m, k).noalias() = G * B.transpose();
          add_input_grad(n, 0, std::move(ga), grads);
        }
        if (n.in_ids[1] >= 0) {
          std::vector<double> gb(static_cast<size_t>(k) * c);
          MMap(gb.data(), k, c).noalias() = A.transpose() * G;
          add_input_grad(n, 1, std::move(gb), grads);
        }
        break;
      }
      case OpKind::kTranspose: {
        const int r = n.shape[0], c = n.shape[1];
        std::vector<double> ga(g.size());
        for (int i2 = 0; i2 < r; ++i2)
          for (int j = 0; j < c; ++j)
            ga[static_cast<size_t>(j) * r + i2] = g[static_cast<size_t>(i2) * c + j];
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kAdd: {
        if (n.in_ids[0] >= 0) add_input_grad(n, 0, std::vector<double>(g), grads);
        if (n.in_ids[1] >= 0) add_input_grad(n, 1, std::vector<double>(g), grads);
        break;
      }
      case OpKind::kAddBias: {
        if (n.in_ids[0] >= 0) add_input_grad(n, 0, std::vector<double>(g), grads);
        if (n.in_ids[1] >= 0) {
          const int cols = n.in_shapes[1][0];
          const int rows = static_cast<int>(g.size()) / cols;
          std::vector<double> gb(cols, 0.0);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              gb[c] += g[static_cast<size_t>(r) * cols + c];
          add_input_grad(n, 1, std::move(gb), grads);
        }
        break;
      }
      case OpKind::kSub: {
        if (n.in_ids[0] >= 0) add_input_grad(n, 0, std::vector<double>(g), grads);
        if (n.in_ids[1] >= 0) {
          std::vector<double> gb(g.size());
          for (size_t k = 0; k < g.size(); ++k) gb[k] = -g[k];
          add_input_grad(n, 1, std::move(gb), grads);
        }
        break;
      }
      case OpKind::kMul: {
        if (n.in_ids[0] >= 0) {
          std::vector<double> ga(g.size());
          const auto& b = *n.in_vals[1];
          for (size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * b[k];
          add_input_grad(n, 0, std::move(ga), grads);
        }
        if (n.in_ids[1] >= 0) {
          std::vector<double> gb(g.size());
          const auto& a = *n.in_vals[0];
          for (size_t k = 0; k < g.size(); ++k) gb[k] = g[k] * a[k];
          add_input_grad(n, 1, std::move(gb), grads);
        }
        break;
      }
      case OpKind::kMulBias: {
        const int cols = n.in_shapes[1][0];
        const int rows = static_cast<int>(g.size()) / cols;
        if (n.in_ids[0] >= 0) {
          std::vector<double> ga(g.size());
          const auto& b = *n.in_vals[1];
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              ga[static_cast<size_t>(r) * cols + c] =
                  g[static_cast<size_t>(r) * cols + c] * b[c];
          add_input_grad(n, 0, std::move(ga), grads);
        }
        if (n.in_ids[1] >= 0) {
          const auto& a = *n.in_vals[0];
          std::vector<double> gb(cols, 0.0);
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
              gb[c] += g[static_cast<size_t>(r) * cols + c] *
                       a[static_cast<size_t>(r) * cols + c];
          add_input_grad(n, 1, std::move(gb), grads);
        }
        break;
      }
      case OpKind::kScale: {
        std::vector<double> ga(g.size());
        for (size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * n.x;
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kSigmoid: {
        const auto& y = *n.values;
        std::vector<double> ga(g.size());
        for (size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * y[k] * (1.0 - y[k]);
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kTanh: {
        const auto& y = *n.values;
        std::vector<double> ga(g.size());
        for (size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * (1.0 - y[k] * y[k]);
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kRelu: {
        const auto& y = *n.values;
        std::vector<double> ga(g.size());
        for (size_t k = 0; k < g.size(); ++k) ga[k] = y[k] > 0.0 ? g[k] : 0.0;
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kExp: {
        const auto& y = *n.values;
        std::vector<double> ga(g.size());
        for (size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * y[k];
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kSoftmax: {
        // dx = p * (g - <g, p>) per row.
        const auto& p = *n.values;
        const int cols = n.shape.back();
        const int rows = static_cast<int>(p.size()) / cols;
        std::vector<double> ga(g.size());
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          double dot = 0.0;
          for (int c = 0; c < cols; ++c) dot += g[off + c] * p[off + c];
          for (int c = 0; c < cols; ++c)
            ga[off + c] = p[off + c] * (g[off + c] - dot);
        }
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kLogSoftmax: {
        // dx = g - p * sum(g) per row, with p = exp(output).
        const auto& lp = *n.values;
        const int cols = n.shape.back();
        const int rows = static_cast<int>(lp.size()) / cols;
        std::vector<double> ga(g.size());
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          double gsum = 0.0;
          for (int c = 0; c < cols; ++c) gsum += g[off + c];
          for (int c = 0; c < cols; ++c)
            ga[off + c] = g[off + c] - std::exp(lp[off + c]) * gsum;
        }
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kEntropy: {
        // dH/dx_j = -p_j (log p_j + H) per row.
        const auto& lp = *n.saved;
        const auto& h = *n.values;
        const int cols = n.in_shapes[0].back();
        const int rows = static_cast<int>(h.size());
        std::vector<double> ga(lp.size());
        for (int r = 0; r < rows; ++r) {
          const size_t off = static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            const double p = std::exp(lp[off + c]);
            ga[off + c] = -g[r] * p * (lp[off + c] + h[r]);
          }
        }
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kReduceSum:
      case OpKind::kReduceMean: {
        const Shape& sin = n.in_shapes[0];
        const int64_t in_n = shape_numel(sin);
        std::vector<double> ga(in_n);
        if (n.axis < 0) {
          const double w = n.op == OpKind::kReduceMean
                               ? g[0] / static_cast<double>(in_n)
                               : g[0];
          std::fill(ga.begin(), ga.end(), w);
        } else {
          const int rows = sin[0], cols = sin[1];
          if (n.axis == 0) {
            const double scale = n.op == OpKind::kReduceMean ? 1.0 / rows : 1.0;
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < cols; ++c)
                ga[static_cast<size_t>(r) * cols + c] = g[c] * scale;
          } else {
            const double scale = n.op == OpKind::kReduceMean ? 1.0 / cols : 1.0;
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < cols; ++c)
                ga[static_cast<size_t>(r) * cols + c] = g[r] * scale;
          }
        }
        add_input_grad(n, 0, std::move(ga), grads);
        break;
      }
      case OpKind::kConcat: {
        const int axis = n.axis;
        if (axis == 0 || n.shape.size() == 1) {
          size_t off = 0;
          for (size_t s = 0; s < n.in_ids.size(); ++s) {
            const int64_t len = shape_numel(n.in_shapes[s]);
            if (n.in_ids[s] >= 0) {
              std::vector<double> gp(g.begin() + off, g.begin() + off + len);
              add_input_grad(n, static_cast<int>(s), std::move(gp), grads);
            }
            off += len;
          }
        } else {
          const int rows = n.shape[0], cols = n.shape[1];
          int col0 = 0;
          for (size_t s = 0; s < n.in_ids.size(); ++s) {
            const int w = n.in_shapes[s][1];
            if (n.in_ids[s] >= 0) {
              std::vector<double> gp(static_cast<size_t>(rows) * w);
              for (int r = 0; r < rows; ++r)
                for (int c = 0; c < w; ++c)
                  gp[static_cast<size_t>(r) * w + c] =
                      g[static_cast<size_t>(r) * cols + col0 + c];
              add_input_grad(n, static_cast<int>(s), std::move(gp), grads);
            }
            col0 += w;
          }
        }
        break;
      }
      case OpKind::kGatherRows: {
        if (n.in_ids[0] >= 0) {
          const int cols = n.in_shapes[0][1];
          std::vector<double> ga(shape_numel(n.in_shapes[0]), 0.0);
          for (size_t k = 0; k < n.ints.size(); ++k) {
            const size_t src = k * cols;
            const size_t dst = static_cast<size_t>(n.ints[k]) * cols;
            for (int c = 0; c < cols; ++c) ga[dst + c] += g[src + c];
          }
          add_input_grad(n, 0, std::move(ga), grads);
        }
        break;
      }
      case OpKind::kSelectLast: {
        if (n.in_ids[0] >= 0) {
          const int cols = n.in_shapes[0].back();
          std::vector<double> ga(shape_numel(n.in_shapes[0]), 0.0);
          for (size_t r = 0; r < n.ints.size(); ++r)
            ga[r * cols + n.ints[r]] += g[r];
          add_input_grad(n, 0, std::move(ga), grads);
        }
        break;
      }
      case OpKind::kReshape: {
        add_input_grad(n, 0, std::vector<double>(g), grads);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> param_nodes_;
  std::unordered_map<int, std::vector<double>> param_grads_;
};

namespace detail {

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->on_tape()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw ValueError("operands belong to different tapes");
    }
  }
  return tape;
}

inline void check_finite(const std::vector<double>& v, const char* op) {
#if LEWISIM_CHECK_FINITE
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
#else
  (void)v;
  (void)op;
#endif
}

}  // namespace detail

inline Tensor record_op(Tape* tape, OpKind op,
                        const std::vector<const Tensor*>& inputs,
                        Shape out_shape, std::vector<double> out_values,
                        std::vector<int> ints = {}, double x = 0.0,
                        int axis = -1,
                        std::shared_ptr<std::vector<double>> saved = nullptr) {
  if (tape == nullptr) {
    return Tensor(std::move(out_shape), std::move(out_values));
  }
  return tape->record(op, inputs, std::move(out_shape), std::move(out_values),
                      std::move(ints), x, axis, std::move(saved));
}

/// Value-identical tensor that blocks all gradient flow (stop-gradient).
inline Tensor detach(const Tensor& x) {
  return Tensor(x.shape(), std::vector<double>(x.data()));
}

/// Binds `p` to the given tape, or returns it untouched for pure evaluation.
inline Tensor use(Tape* tape, const Tensor& p) {
  return tape ? tape->use(p) : p;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), c = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * c);
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMat>(out.data(), m, c).noalias() =
      Eigen::Map<const RowMat>(a.data().data(), m, k) *
      Eigen::Map<const RowMat>(b.data().data(), k, c);
  detail::check_finite(out, "matmul");
  return record_op(detail::common_tape({&a, &b}), OpKind::kMatMul, {&a, &b},
                   Shape{m, c}, std::move(out));
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError("transpose: expected rank-2 tensor, got " +
                     shape_str(a.shape()));
  }
  const int r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(j) * r + i] = a.data()[static_cast<size_t>(i) * c + j];
  return record_op(detail::common_tape({&a}), OpKind::kTranspose, {&a},
                   Shape{c, r}, std::move(out));
}

namespace detail {

inline bool bias_broadcastable(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    for (int64_t k = 0; k < a.size(); ++k) out[k] = a.data()[k] + b.data()[k];
    detail::check_finite(out, "add");
    return record_op(detail::common_tape({&a, &b}), OpKind::kAdd, {&a, &b},
                     a.shape(), std::move(out));
  }
  if (detail::bias_broadcastable(a, b)) {
    const int rows = a.dim(0), cols = a.dim(1);
    std::vector<double> out(a.size());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        out[static_cast<size_t>(r) * cols + c] =
            a.data()[static_cast<size_t>(r) * cols + c] + b.data()[c];
    detail::check_finite(out, "add");
    return record_op(detail::common_tape({&a, &b}), OpKind::kAddBias, {&a, &b},
                     a.shape(), std::move(out));
  }
  throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("sub: incompatible shapes " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  for (int64_t k = 0; k < a.size(); ++k) out[k] = a.data()[k] - b.data()[k];
  detail::check_finite(out, "sub");
  return record_op(detail::common_tape({&a, &b}), OpKind::kSub, {&a, &b},
                   a.shape(), std::move(out));
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    for (int64_t k = 0; k < a.size(); ++k) out[k] = a.data()[k] * b.data()[k];
    detail::check_finite(out, "mul");
    return record_op(detail::common_tape({&a, &b}), OpKind::kMul, {&a, &b},
                     a.shape(), std::move(out));
  }
  if (detail::bias_broadcastable(a, b)) {
    const int rows = a.dim(0), cols = a.dim(1);
    std::vector<double> out(a.size());
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        out[static_cast<size_t>(r) * cols + c] =
            a.data()[static_cast<size_t>(r) * cols + c] * b.data()[c];
    detail::check_finite(out, "mul");
    return record_op(detail::common_tape({&a, &b}), OpKind::kMulBias, {&a, &b},
                     a.shape(), std::move(out));
  }
  throw ShapeError("mul: incompatible shapes " + shape_str(a.shape()) +
                   " vs " + shape_str(b.shape()));
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (int64_t k = 0; k < a.size(); ++k) out[k] = a.data()[k] * c;
  detail::check_finite(out, "scale");
  return record_op(detail::common_tape({&a}), OpKind::kScale, {&a}, a.shape(),
                   std::move(out), {}, c);
}

enum class Activation { kSigmoid, kTanh, kRelu };

inline Tensor activation(Activation kind, const Tensor& a) {
  std::vector<double> out(a.size());
  OpKind op;
  switch (kind) {
    case Activation::kSigmoid:
      op = OpKind::kSigmoid;
      for (int64_t k = 0; k < a.size(); ++k)
        out[k] = 1.0 / (1.0 + std::exp(-a.data()[k]));
      break;
    case Activation::kTanh:
      op = OpKind::kTanh;
      for (int64_t k = 0; k < a.size(); ++k) out[k] = std::tanh(a.data()[k]);
      break;
    case Activation::kRelu:
      op = OpKind::kRelu;
      for (int64_t k = 0; k < a.size(); ++k)
        out[k] = a.data()[k] > 0.0 ? a.data()[k] : 0.0;
      break;
  }
  return record_op(detail::common_tape({&a}), op, {&a}, a.shape(),
                   std::move(out));
}

inline Tensor sigmoid(const Tensor& a) { return activation(Activation::kSigmoid, a); }
inline Tensor tanh(const Tensor& a) { return activation(Activation::kTanh, a); }
inline Tensor relu(const Tensor& a) { return activation(Activation::kRelu, a); }

inline Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  for (int64_t k = 0; k < a.size(); ++k) out[k] = std::exp(a.data()[k]);
  detail::check_finite(out, "exp");
  return record_op(detail::common_tape({&a}), OpKind::kExp, {&a}, a.shape(),
                   std::move(out));
}

namespace detail {

inline void rows_of_last_axis(const Tensor& a, int* rows, int* cols) {
  if (a.rank() == 0) throw ShapeError("expected at least rank 1");
  *cols = a.dim(a.rank() - 1);
  *rows = static_cast<int>(a.size() / *cols);
}

// Writes log-softmax of each row into `out` (max-subtraction for stability).
inline void log_softmax_rows(const std::vector<double>& v, int rows, int cols,
                             std::vector<double>& out) {
  out.resize(v.size());
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * cols;
    double mx = v[off];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, v[off + c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) sum += std::exp(v[off + c] - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < cols; ++c) out[off + c] = v[off + c] - lse;
  }
}

}  // namespace detail

/// Softmax over the last axis.
inline Tensor softmax(const Tensor& a) {
  int rows, cols;
  detail::rows_of_last_axis(a, &rows, &cols);
  std::vector<double> out(a.size());
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * cols;
    double mx = a.data()[off];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, a.data()[off + c]);
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      out[off + c] = std::exp(a.data()[off + c] - mx);
      sum += out[off + c];
    }
    for (int c = 0; c < cols; ++c) out[off + c] /= sum;
  }
  return record_op(detail::common_tape({&a}), OpKind::kSoftmax, {&a},
                   a.shape(), std::move(out));
}

inline Tensor log_softmax(const Tensor& a) {
  int rows, cols;
  detail::rows_of_last_axis(a, &rows, &cols);
  std::vector<double> out;
  detail::log_softmax_rows(a.data(), rows, cols, out);
  return record_op(detail::common_tape({&a}), OpKind::kLogSoftmax, {&a},
                   a.shape(), std::move(out));
}

/// Entropy (nats) of the categorical distribution softmax(logits), reducing
/// the last axis: [n] -> scalar, [B,n] -> [B].
inline Tensor entropy_categorical(const Tensor& logits) {
  int rows, cols;
  detail::rows_of_last_axis(logits, &rows, &cols);
  auto lp = std::make_shared<std::vector<double>>();
  detail::log_softmax_rows(logits.data(), rows, cols, *lp);
  std::vector<double> out(rows);
  for (int r = 0; r < rows; ++r) {
    const size_t off = static_cast<size_t>(r) * cols;
    double h = 0.0;
    for (int c = 0; c < cols; ++c) h -= std::exp((*lp)[off + c]) * (*lp)[off + c];
    out[r] = h;
  }
  Shape out_shape(logits.shape().begin(), logits.shape().end() - 1);
  return record_op(detail::common_tape({&logits}), OpKind::kEntropy, {&logits},
                   std::move(out_shape), std::move(out), {}, 0.0, -1,
                   std::move(lp));
}

enum class Reduce { kSum, kMean };

/// Reduction over all elements (axis = -1, scalar result) or over one axis of
/// a rank-2 tensor.
inline Tensor reduce(Reduce kind, const Tensor& a, int axis = -1) {
  const OpKind op =
      kind == Reduce::kSum ? OpKind::kReduceSum : OpKind::kReduceMean;
  if (axis < 0) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    if (kind == Reduce::kMean) acc /= static_cast<double>(a.size());
    return record_op(detail::common_tape({&a}), op, {&a}, Shape{}, {acc}, {},
                     0.0, -1);
  }
  if (a.rank() != 2 || axis > 1) {
    throw ShapeError("reduce: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(a.shape()));
  }
  const int rows = a.dim(0), cols = a.dim(1);
  if (axis == 0) {
    std::vector<double> out(cols, 0.0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        out[c] += a.data()[static_cast<size_t>(r) * cols + c];
    if (kind == Reduce::kMean)
      for (double& v : out) v /= rows;
    return record_op(detail::common_tape({&a}), op, {&a}, Shape{cols},
                     std::move(out), {}, 0.0, 0);
  }
  std::vector<double> out(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c)
      out[r] += a.data()[static_cast<size_t>(r) * cols + c];
    if (kind == Reduce::kMean) out[r] /= cols;
  }
  return record_op(detail::common_tape({&a}), op, {&a}, Shape{rows},
                   std::move(out), {}, 0.0, 1);
}

inline Tensor reduce_sum(const Tensor& a, int axis = -1) {
  return reduce(Reduce::kSum, a, axis);
}
inline Tensor reduce_mean(const Tensor& a, int axis = -1) {
  return reduce(Reduce::kMean, a, axis);
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat: no parts");
  const int rank = parts[0].rank();
  if (rank < 1 || rank > 2 || axis < 0 || axis >= rank) {
    throw ShapeError("concat: unsupported rank/axis");
  }
  for (const Tensor& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: mixed ranks");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && p.dim(d) != parts[0].dim(d)) {
        throw ShapeError("concat: shapes disagree off-axis: " +
                         shape_str(parts[0].shape()) + " vs " +
                         shape_str(p.shape()));
      }
    }
  }
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const Tensor& p : parts) out_shape[axis] += p.dim(axis);
  std::vector<double> out(shape_numel(out_shape));

  if (rank == 1 || axis == 0) {
    size_t off = 0;
    for (const Tensor& p : parts) {
      std::copy(p.data().begin(), p.data().end(), out.begin() + off);
      off += p.size();
    }
  } else {
    const int rows = out_shape[0], cols = out_shape[1];
    int col0 = 0;
    for (const Tensor& p : parts) {
      const int w = p.dim(1);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < w; ++c)
          out[static_cast<size_t>(r) * cols + col0 + c] =
              p.data()[static_cast<size_t>(r) * w + c];
      col0 += w;
    }
  }
  Tape* tape = nullptr;
  std::vector<const Tensor*> ptrs;
  for (const Tensor& p : parts) {
    ptrs.push_back(&p);
    if (p.on_tape()) {
      if (tape && tape != p.tape())
        throw ValueError("concat: operands on different tapes");
      tape = p.tape();
    }
  }
  return record_op(tape, OpKind::kConcat, ptrs, std::move(out_shape),
                   std::move(out), {}, 0.0, axis);
}

inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: table must be rank 2, got " +
                     shape_str(table.shape()));
  }
  const int rows = table.dim(0), cols = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= rows) {
      throw ValueError("gather_rows: index " + std::to_string(id) +
                       " out of range [0," + std::to_string(rows) + ")");
    }
  }
  std::vector<double> out(ids.size() * static_cast<size_t>(cols));
  for (size_t k = 0; k < ids.size(); ++k) {
    const size_t src = static_cast<size_t>(ids[k]) * cols;
    std::copy(table.data().begin() + src, table.data().begin() + src + cols,
              out.begin() + k * cols);
  }
  return record_op(detail::common_tape({&table}), OpKind::kGatherRows,
                   {&table}, Shape{static_cast<int>(ids.size()), cols},
                   std::move(out), ids);
}

/// Per-row element selection: x[B,n] with ids[B] -> [B]; x[n] with one id ->
/// scalar.
inline Tensor select_last(const Tensor& x, const std::vector<int>& ids) {
  int rows, cols;
  detail::rows_of_last_axis(x, &rows, &cols);
  if (static_cast<int>(ids.size()) != rows) {
    throw ShapeError("select_last: need one index per row");
  }
  std::vector<double> out(rows);
  for (int r = 0; r < rows; ++r) {
    if (ids[r] < 0 || ids[r] >= cols) {
      throw ValueError("select_last: index " + std::to_string(ids[r]) +
                       " out of range [0," + std::to_string(cols) + ")");
    }
    out[r] = x.data()[static_cast<size_t>(r) * cols + ids[r]];
  }
  Shape out_shape = x.rank() == 1 ? Shape{} : Shape{rows};
  return record_op(detail::common_tape({&x}), OpKind::kSelectLast, {&x},
                   std::move(out_shape), std::move(out), ids);
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  return record_op(detail::common_tape({&x}), OpKind::kReshape, {&x},
                   std::move(shape), std::vector<double>(x.data()));
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace lewisim

#endif  // LEWISIM_TENSOR_HPP_
