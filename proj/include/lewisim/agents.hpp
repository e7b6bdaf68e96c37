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
// Sender (perception + generation) and receiver (perception + understanding +
// action) agents. Messages are sequences over a vocabulary of content symbols
// 1..V with EOS id 0; generation stops on a sampled EOS or after L content
// symbols, in which case EOS is forced without a probability contribution.

#ifndef LEWISIM_AGENTS_HPP_
#define LEWISIM_AGENTS_HPP_

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "lewisim/nn.hpp"
#include "lewisim/rng.hpp"
#include "lewisim/tensor.hpp"

namespace lewisim {

inline constexpr int kEosId = 0;

/// Content symbols only; `terminated` records whether a sampled EOS ended the
/// message (false for messages truncated at the length bound).
struct Message {
  std::vector<int> symbols;
  bool terminated = true;

  int effective_length() const { return static_cast<int>(symbols.size()); }

  bool operator==(const Message& o) const {
    return terminated == o.terminated && symbols == o.symbols;
  }
};

inline int message_effective_length(const Message& m) {
  return m.effective_length();
}

struct MessageHash {
  size_t operator()(const Message& m) const {
    size_t h = m.terminated ? 0x9e3779b97f4a7c15ull : 0x517cc1b727220a95ull;
    for (int s : m.symbols) h = h * 1099511628211ull + static_cast<size_t>(s);
    return h;
  }
};

enum class DecodeMode { kSample, kGreedy };

/// Result of one batched sender rollout. log_prob and entropy are per-episode
/// sums over the sampled steps (the forced EOS after L symbols contributes to
/// neither); `steps` counts the sampled steps.
struct BatchPolicySample {
  std::vector<Message> messages;
  Tensor log_prob;  // [B]
  Tensor entropy;   // [B]
  std::vector<int> steps;

  double mean_step_entropy() const {
    double h = 0.0;
    int n = 0;
    for (size_t i = 0; i < steps.size(); ++i) {
      h += entropy.data()[i];
      n += steps[i];
    }
    return n > 0 ? h / n : 0.0;
  }
};

struct SenderConfig {
  int input_dim = 0;
  int perception_hidden = 128;  // 0 = single affine perception
  int hidden = 64;              // internal representation / GRU width
  int vocab = 0;                // |V| content symbols
  int max_length = 0;           // L
};

class Sender {
 public:
  Sender() = default;
  Sender(const SenderConfig& cfg, RngStream& rng)
      : cfg_(cfg),
        perception(cfg.input_dim, hidden_dims(cfg), cfg.hidden,
                   Activation::kTanh, rng),
        hidden_proj(cfg.hidden, cfg.hidden, rng),
        embed(cfg.vocab, cfg.hidden, rng),
        decoder(cfg.hidden, cfg.hidden, rng),
        out(cfg.hidden, cfg.vocab + 1, rng) {}

  const SenderConfig& config() const { return cfg_; }

  /// Initial decoder state from a batch of observations: proj(perceive(x)).
  Tensor initial_state(Tape* tape, const Tensor& xs) const {
    return hidden_proj.forward(tape, perception.forward(tape, xs));
  }

  void collect(ParamSet& out_params, const std::string& prefix = "sender") {
    perception.collect(out_params, prefix + ".perception");
    hidden_proj.collect(out_params, prefix + ".hidden_proj");
    embed.collect(out_params, prefix + ".embed");
    decoder.collect(out_params, prefix + ".decoder");
    out.collect(out_params, prefix + ".out");
  }

  SenderConfig cfg_;
  Mlp perception;
  LinearLayer hidden_proj;
  EmbeddingTable embed;
  GruCell decoder;
  LinearLayer out;

 private:
  static std::vector<int> hidden_dims(const SenderConfig& cfg) {
    return cfg.perception_hidden > 0 ? std::vector<int>{cfg.perception_hidden}
                                     : std::vector<int>{};
  }
};

namespace detail {

// Sampling helper over one row of a [B, n] log-probability matrix.
inline int sample_row(const std::vector<double>& logp, int row, int cols,
                      RngStream& rng) {
  std::vector<double> probs(cols);
  for (int c = 0; c < cols; ++c)
    probs[c] = std::exp(logp[static_cast<size_t>(row) * cols + c]);
  return rng.categorical(probs);
}

inline int argmax_row(const std::vector<double>& v, int row, int cols) {
  const size_t off = static_cast<size_t>(row) * cols;
  int best = 0;
  for (int c = 1; c < cols; ++c)
    if (v[off + c] > v[off + best]) best = c;
  return best;
}

}  // namespace detail

/// Autoregressive rollout over a batch of observations. When `forced` is
/// given, its messages are replayed instead of sampling, reproducing the
/// exact computation path of the rollout that produced them (so scored
/// log-probabilities match sampled ones bitwise).
inline BatchPolicySample sender_rollout(
    Tape* tape, const Sender& sender, const Tensor& xs, DecodeMode mode,
    RngStream* rng, const std::vector<Message>* forced = nullptr) {
  if (xs.rank() != 2 || xs.dim(1) != sender.config().input_dim) {
    throw ShapeError("sender_rollout: observation shape " +
                     shape_str(xs.shape()) + " does not match input_dim " +
                     std::to_string(sender.config().input_dim));
  }
  if (mode == DecodeMode::kSample && rng == nullptr && forced == nullptr) {
    throw ValueError("sender_rollout: sampling requires an RNG stream");
  }
  const int batch = xs.dim(0);
  const int vocab = sender.config().vocab;
  const int max_len = sender.config().max_length;

  BatchPolicySample res;
  res.messages.assign(batch, Message{{}, false});
  res.steps.assign(batch, 0);

  Tensor h = sender.initial_state(tape, xs);
  std::vector<int> prev_ids(batch, sender.embed.bos_id());
  std::vector<char> active(batch, 1);
  std::optional<Tensor> log_prob_acc, entropy_acc;

  for (int t = 0; t < max_len; ++t) {
    int num_active = 0;
    for (char a : active) num_active += a;
    if (num_active == 0) break;

    const Tensor e = sender.embed.lookup(tape, prev_ids);
    h = sender.decoder.step(tape, e, h);
    const Tensor logits = sender.out.forward(tape, h);
    const Tensor logp = log_softmax(logits);
    const Tensor ent = entropy_categorical(logits);

    std::vector<int> chosen(batch, kEosId);
    std::vector<double> mask(batch, 0.0);
    for (int i = 0; i < batch; ++i) {
      if (!active[i]) continue;
      int s;
      if (forced != nullptr) {
        const Message& fm = (*forced)[i];
        if (t < static_cast<int>(fm.symbols.size())) {
          s = fm.symbols[t];
          if (s < 1 || s > vocab) {
            throw ValueError("forced message symbol " + std::to_string(s) +
                             " out of range [1," + std::to_string(vocab) + "]");
          }
        } else if (fm.terminated) {
          s = kEosId;
        } else {
          // Truncated forced message shorter than L: nothing to replay.
          active[i] = 0;
          continue;
        }
      } else if (mode == DecodeMode::kGreedy) {
        s = detail::argmax_row(logp.data(), i, vocab + 1);
      } else {
        s = detail::sample_row(logp.data(), i, vocab + 1, *rng);
      }
      chosen[i] = s;
      mask[i] = 1.0;
      res.steps[i] += 1;
      if (s == kEosId) {
        res.messages[i].terminated = true;
        active[i] = 0;
      } else {
        res.messages[i].symbols.push_back(s);
        if (static_cast<int>(res.messages[i].symbols.size()) == max_len) {
          // Length bound hit: EOS is forced, not sampled, and contributes
          // neither log-probability nor entropy.
          active[i] = 0;
        }
      }
    }

    const Tensor mask_t(Shape{batch}, std::vector<double>(mask));
    const Tensor step_lp = mul(mask_t, select_last(logp, chosen));
    const Tensor step_h = mul(mask_t, ent);
    log_prob_acc = log_prob_acc ? add(*log_prob_acc, step_lp) : step_lp;
    entropy_acc = entropy_acc ? add(*entropy_acc, step_h) : step_h;

    prev_ids = chosen;
  }

  if (!log_prob_acc) {
    // max_length == 0 or all forced messages empty-truncated.
    log_prob_acc = Tensor::zeros({batch});
    entropy_acc = Tensor::zeros({batch});
  }
  res.log_prob = *log_prob_acc;
  res.entropy = *entropy_acc;
  return res;
}

/// Single-observation convenience wrapper (PolicySample of the spec).
struct PolicySample {
  Message message;
  Tensor log_prob;  // scalar
  Tensor entropy;   // scalar
  bool greedy = false;
  int steps = 0;
};

inline PolicySample sender_generate(Tape* tape, const Sender& sender,
                                    const Tensor& x, DecodeMode mode,
                                    RngStream* rng) {
  Tensor xs = reshape(x, {1, static_cast<int>(x.size())});
  BatchPolicySample b = sender_rollout(tape, sender, xs, mode, rng);
  PolicySample p;
  p.message = b.messages[0];
  p.log_prob = reshape(b.log_prob, {});
  p.entropy = reshape(b.entropy, {});
  p.greedy = mode == DecodeMode::kGreedy;
  p.steps = b.steps[0];
  return p;
}

/// Teacher-forced scoring of given messages; bitwise-identical to the
/// log-probabilities reported when the same messages were sampled.
inline BatchPolicySample sender_score(Tape* tape, const Sender& sender,
                                      const Tensor& xs,
                                      const std::vector<Message>& messages) {
  return sender_rollout(tape, sender, xs, DecodeMode::kSample, nullptr,
                        &messages);
}

struct ReceiverConfig {
  int input_dim = 0;
  int perception_hidden = 128;
  int hidden = 64;  // message representation / GRU width
  int vocab = 0;
  int max_length = 0;
};

class Receiver {
 public:
  Receiver() = default;
  Receiver(const ReceiverConfig& cfg, RngStream& rng)
      : cfg_(cfg),
        embed(cfg.vocab, cfg.hidden, rng),
        encoder(cfg.hidden, cfg.hidden, rng),
        perception(cfg.input_dim, hidden_dims(cfg), cfg.hidden,
                   Activation::kTanh, rng),
        action_proj(cfg.hidden, cfg.hidden, rng) {}

  const ReceiverConfig& config() const { return cfg_; }

  void collect(ParamSet& out_params, const std::string& prefix = "receiver") {
    embed.collect(out_params, prefix + ".embed");
    encoder.collect(out_params, prefix + ".encoder");
    perception.collect(out_params, prefix + ".perception");
    action_proj.collect(out_params, prefix + ".action_proj");
  }

  ReceiverConfig cfg_;
  EmbeddingTable embed;
  GruCell encoder;
  Mlp perception;         // shared across all candidates
  LinearLayer action_proj;

 private:
  static std::vector<int> hidden_dims(const ReceiverConfig& cfg) {
    return cfg.perception_hidden > 0 ? std::vector<int>{cfg.perception_hidden}
                                     : std::vector<int>{};
  }
};

/// GRU over the message symbols (EOS included as final input when present);
/// returns the final hidden state, and the zero state for an empty message.
inline Tensor receiver_encode_batch(Tape* tape, const Receiver& receiver,
                                    const std::vector<Message>& messages) {
  const int batch = static_cast<int>(messages.size());
  const int d = receiver.config().hidden;
  const int vocab = receiver.config().vocab;

  int max_steps = 0;
  std::vector<int> lengths(batch);
  for (int i = 0; i < batch; ++i) {
    const Message& m = messages[i];
    for (int s : m.symbols) {
      if (s < 1 || s > vocab) {
        throw ValueError("message symbol " + std::to_string(s) +
                         " out of range [1," + std::to_string(vocab) + "]");
      }
    }
    lengths[i] =
        static_cast<int>(m.symbols.size()) + (m.terminated ? 1 : 0);
    max_steps = std::max(max_steps, lengths[i]);
  }

  Tensor h = Tensor::zeros({batch, d});
  for (int t = 0; t < max_steps; ++t) {
    std::vector<int> ids(batch, kEosId);
    bool all_active = true;
    for (int i = 0; i < batch; ++i) {
      if (t < static_cast<int>(messages[i].symbols.size())) {
        ids[i] = messages[i].symbols[t];
      } else if (t >= lengths[i]) {
        all_active = false;
      }
    }
    const Tensor e = receiver.embed.lookup(tape, ids);
    Tensor h_next = receiver.encoder.step(tape, e, h);
    if (!all_active) {
      // Hold finished rows at their final state.
      std::vector<double> mask(static_cast<size_t>(batch) * d, 0.0);
      for (int i = 0; i < batch; ++i) {
        if (t < lengths[i]) {
          std::fill(mask.begin() + static_cast<size_t>(i) * d,
                    mask.begin() + static_cast<size_t>(i + 1) * d, 1.0);
        }
      }
      const Tensor m(Shape{batch, d}, std::move(mask));
      h_next = add(h, mul(m, sub(h_next, h)));
    }
    h = h_next;
  }
  return h;
}

inline Tensor receiver_encode_message(Tape* tape, const Receiver& receiver,
                                      const Message& m) {
  Tensor h = receiver_encode_batch(tape, receiver, {m});
  return reshape(h, {receiver.config().hidden});
}

/// Result of one batched receiver action. log_probs_all carries the full
/// [B, N] log distribution for supervised losses and cross-entropy metrics.
struct BatchActionSample {
  std::vector<int> actions;
  Tensor log_prob;       // [B] of the chosen action
  Tensor entropy;        // [B]
  Tensor log_probs_all;  // [B, N]
};

/// Scores each candidate by the dot product of its perceived representation
/// with the projected message representation, then samples (or argmaxes) from
/// the softmax over the N scores.
inline BatchActionSample receiver_act_batch(
    Tape* tape, const Receiver& receiver, const Tensor& message_repr,
    const std::vector<Tensor>& candidates, DecodeMode mode, RngStream* rng) {
  const int num_candidates = static_cast<int>(candidates.size());
  if (num_candidates < 2) {
    throw ValueError("receiver_act: need at least 2 candidates");
  }
  if (mode == DecodeMode::kSample && rng == nullptr) {
    throw ValueError("receiver_act: sampling requires an RNG stream");
  }
  const int batch = message_repr.dim(0);
  const Tensor proj = receiver.action_proj.forward(tape, message_repr);

  std::vector<Tensor> scores;
  scores.reserve(num_candidates);
  for (const Tensor& cand : candidates) {
    if (cand.dim(0) != batch) {
      throw ShapeError("receiver_act: candidate batch " +
                       std::to_string(cand.dim(0)) + " != " +
                       std::to_string(batch));
    }
    const Tensor repr = receiver.perception.forward(tape, cand);
    scores.push_back(reshape(reduce_sum(mul(proj, repr), 1), {batch, 1}));
  }
  const Tensor score_mat = concat(scores, 1);  // [B, N]
  const Tensor logp = log_softmax(score_mat);
  const Tensor ent = entropy_categorical(score_mat);

  BatchActionSample res;
  res.actions.resize(batch);
  for (int i = 0; i < batch; ++i) {
    if (mode == DecodeMode::kGreedy) {
      res.actions[i] = detail::argmax_row(logp.data(), i, num_candidates);
    } else {
      res.actions[i] = detail::sample_row(logp.data(), i, num_candidates, *rng);
    }
  }
  res.log_prob = select_last(logp, res.actions);
  res.entropy = ent;
  res.log_probs_all = logp;
  return res;
}

/// Single-episode wrapper: returns (action, log rho, entropy).
struct ActionSample {
  int action = -1;
  Tensor log_prob;  // scalar
  Tensor entropy;   // scalar
};

inline ActionSample receiver_act(Tape* tape, const Receiver& receiver,
                                 const Tensor& message_repr,
                                 const std::vector<Tensor>& candidates,
                                 DecodeMode mode, RngStream* rng) {
  const int d = static_cast<int>(message_repr.size());
  std::vector<Tensor> cand_rows;
  cand_rows.reserve(candidates.size());
  for (const Tensor& c : candidates) {
    cand_rows.push_back(reshape(c, {1, static_cast<int>(c.size())}));
  }
  BatchActionSample b = receiver_act_batch(
      tape, receiver, reshape(message_repr, {1, d}), cand_rows, mode, rng);
  ActionSample a;
  a.action = b.actions[0];
  a.log_prob = reshape(b.log_prob, {});
  a.entropy = reshape(b.entropy, {});
  return a;
}

}  // namespace lewisim

#endif  // LEWISIM_AGENTS_HPP_
