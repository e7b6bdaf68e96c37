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
// Parameterized layers: linear, MLP, GRU cell and symbol embeddings.

#ifndef LEWISIM_NN_HPP_
#define LEWISIM_NN_HPP_

#include <string>
#include <utility>
#include <vector>

#include "lewisim/rng.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

/// Ordered list of (name, parameter) pairs. The order is the serialization
/// and optimizer-slot order, so it must be stable across runs.
using ParamSet = std::vector<std::pair<std::string, Tensor*>>;

/// Deep copy of a parameter set's values, e.g. a best-so-far checkpoint.
struct ParamSnapshot {
  std::vector<std::pair<std::string, Tensor>> values;
};

inline ParamSnapshot snapshot_params(const ParamSet& params) {
  ParamSnapshot s;
  s.values.reserve(params.size());
  for (const auto& [name, p] : params) {
    s.values.emplace_back(name, Tensor(p->shape(), p->data()));
  }
  return s;
}

inline void restore_params(ParamSet& params, const ParamSnapshot& snap) {
  if (snap.values.size() != params.size()) {
    throw ShapeError("parameter snapshot has " +
                     std::to_string(snap.values.size()) + " entries, model has " +
                     std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = snap.values[i];
    if (name != params[i].first) {
      throw ShapeError("parameter name mismatch: snapshot has '" + name +
                       "', model expects '" + params[i].first + "'");
    }
    if (value.shape() != params[i].second->shape()) {
      throw ShapeError("parameter '" + name + "': expected shape " +
                       shape_str(params[i].second->shape()) + ", found " +
                       shape_str(value.shape()));
    }
    params[i].second->mutable_data() = value.data();
  }
}

/// Xavier/Glorot uniform initialization: U(-sqrt(6/(fan_in+fan_out)), +...).
inline Tensor xavier_uniform(Shape shape, int fan_in, int fan_out,
                             RngStream& rng) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw ValueError("xavier_uniform: fan dimensions must be positive");
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform_range(-bound, bound);
  return Tensor(std::move(shape), std::move(data));
}

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(int in_dim, int out_dim, RngStream& rng)
      : W(xavier_uniform({out_dim, in_dim}, in_dim, out_dim, rng)),
        b(Tensor::zeros({out_dim})) {}

  /// x: [B, in] -> [B, out].
  Tensor forward(Tape* tape, const Tensor& x) const {
    return add(matmul(x, transpose(use(tape, W))), use(tape, b));
  }

  int in_dim() const { return W.dim(1); }
  int out_dim() const { return W.dim(0); }
  int64_t param_count() const { return W.size() + b.size(); }

  void collect(ParamSet& out, const std::string& prefix) {
    out.emplace_back(prefix + ".weight", &W);
    out.emplace_back(prefix + ".bias", &b);
  }

  Tensor W;  // [out, in]
  Tensor b;  // [out]
};

/// Stacked linear layers with an activation between them and none after the
/// final layer. `hidden_dims` may be empty, giving a single affine map.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in_dim, const std::vector<int>& hidden_dims, int out_dim,
      Activation act, RngStream& rng)
      : act_(act) {
    int d = in_dim;
    for (int h : hidden_dims) {
      layers_.emplace_back(d, h, rng);
      d = h;
    }
    layers_.emplace_back(d, out_dim, rng);
  }

  Tensor forward(Tape* tape, const Tensor& x) const {
    Tensor h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(tape, h);
      if (i + 1 < layers_.size()) h = activation(act_, h);
    }
    return h;
  }

  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
  }

  void collect(ParamSet& out, const std::string& prefix) {
    for (size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
    }
  }

  std::vector<LinearLayer>& layers() { return layers_; }
  const std::vector<LinearLayer>& layers() const { return layers_; }

 private:
  std::vector<LinearLayer> layers_;
  Activation act_ = Activation::kTanh;
};

/// Gated recurrent unit:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   hc = tanh(Wh x + Uh (r*h) + bh)
///   h' = (1-z)*h + z*hc
class GruCell {
 public:
  GruCell() = default;
  GruCell(int in_dim, int hidden_dim, RngStream& rng)
      : Wz(xavier_uniform({hidden_dim, in_dim}, in_dim, hidden_dim, rng)),
        Uz(xavier_uniform({hidden_dim, hidden_dim}, hidden_dim, hidden_dim, rng)),
        bz(Tensor::zeros({hidden_dim})),
        Wr(xavier_uniform({hidden_dim, in_dim}, in_dim, hidden_dim, rng)),
        Ur(xavier_uniform({hidden_dim, hidden_dim}, hidden_dim, hidden_dim, rng)),
        br(Tensor::zeros({hidden_dim})),
        Wh(xavier_uniform({hidden_dim, in_dim}, in_dim, hidden_dim, rng)),
        Uh(xavier_uniform({hidden_dim, hidden_dim}, hidden_dim, hidden_dim, rng)),
        bh(Tensor::zeros({hidden_dim})) {}

  /// x: [B, in], h_prev: [B, d] -> [B, d].
  Tensor step(Tape* tape, const Tensor& x, const Tensor& h_prev) const {
    const Tensor z = sigmoid(add(
        add(matmul(x, transpose(use(tape, Wz))),
            matmul(h_prev, transpose(use(tape, Uz)))),
        use(tape, bz)));
    const Tensor r = sigmoid(add(
        add(matmul(x, transpose(use(tape, Wr))),
            matmul(h_prev, transpose(use(tape, Ur)))),
        use(tape, br)));
    const Tensor hc = tanh(add(
        add(matmul(x, transpose(use(tape, Wh))),
            matmul(mul(r, h_prev), transpose(use(tape, Uh)))),
        use(tape, bh)));
    // h' = h + z*(hc - h)
    return add(h_prev, mul(z, sub(hc, h_prev)));
  }

  int in_dim() const { return Wz.dim(1); }
  int hidden_dim() const { return Wz.dim(0); }

  int64_t param_count() const {
    return Wz.size() + Uz.size() + bz.size() + Wr.size() + Ur.size() +
           br.size() + Wh.size() + Uh.size() + bh.size();
  }

  void collect(ParamSet& out, const std::string& prefix) {
    out.emplace_back(prefix + ".Wz", &Wz);
    out.emplace_back(prefix + ".Uz", &Uz);
    out.emplace_back(prefix + ".bz", &bz);
    out.emplace_back(prefix + ".Wr", &Wr);
    out.emplace_back(prefix + ".Ur", &Ur);
    out.emplace_back(prefix + ".br", &br);
    out.emplace_back(prefix + ".Wh", &Wh);
    out.emplace_back(prefix + ".Uh", &Uh);
    out.emplace_back(prefix + ".bh", &bh);
  }

  Tensor Wz, Uz, bz;
  Tensor Wr, Ur, br;
  Tensor Wh, Uh, bh;
};

/// One row per content symbol plus EOS (row 0) plus BOS (last row).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int vocab_size, int dim, RngStream& rng)
      : rows(xavier_uniform({vocab_size + 2, dim}, vocab_size + 2, dim, rng)),
        vocab_size_(vocab_size) {}

  /// ids -> [len(ids), d]; gradients scatter-add into the selected rows.
  Tensor lookup(Tape* tape, const std::vector<int>& ids) const {
    return gather_rows(use(tape, rows), ids);
  }

  int eos_id() const { return 0; }
  int bos_id() const { return vocab_size_ + 1; }
  int dim() const { return rows.dim(1); }
  int num_rows() const { return rows.dim(0); }

  void collect(ParamSet& out, const std::string& prefix) {
    out.emplace_back(prefix + ".rows", &rows);
  }

  Tensor rows;  // [|V|+2, d]

 private:
  int vocab_size_ = 0;
};

}  // namespace lewisim

#endif  // LEWISIM_NN_HPP_
