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
// REINFORCE losses with mean baseline and entropy regularization, the RL-RL
// and RL-SL pipelines, the training loop and greedy evaluation.
//
// Losses are minimized, so the score-function terms enter negated: descending
//   mean(-(R - B)_sg * log pi - lambda_s * H_s)
// ascends expected reward and policy entropy.

#ifndef LEWISIM_TRAINING_HPP_
#define LEWISIM_TRAINING_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lewisim/agents.hpp"
#include "lewisim/config.hpp"
#include "lewisim/log.hpp"
#include "lewisim/optim.hpp"
#include "lewisim/world.hpp"

namespace lewisim {

/// Mean reward over a batch; used as the constant baseline B.
inline double baseline_mean(const std::vector<double>& rewards) {
  if (rewards.empty()) throw ValueError("baseline_mean: empty batch");
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

namespace detail {

inline Tensor advantage_tensor(const std::vector<double>& rewards,
                               double baseline) {
  std::vector<double> adv(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - baseline;
  return Tensor({static_cast<int>(rewards.size())}, std::move(adv));
}

}  // namespace detail

/// Policy-gradient loss for one agent: mean over the batch of
/// -(R-B) * log_prob - lambda * entropy, with the advantage held constant.
inline Tensor policy_gradient_loss(const Tensor& log_prob,
                                   const Tensor& entropy,
                                   const std::vector<double>& rewards,
                                   double baseline, double lambda) {
  const Tensor adv = detail::advantage_tensor(rewards, baseline);
  Tensor loss = scale(reduce_mean(mul(adv, log_prob)), -1.0);
  if (lambda != 0.0) {
    loss = add(loss, scale(reduce_mean(entropy), -lambda));
  }
  return loss;
}

inline Tensor sender_loss(const BatchPolicySample& sample,
                          const std::vector<double>& rewards, double baseline,
                          double lambda_s) {
  return policy_gradient_loss(sample.log_prob, sample.entropy, rewards,
                              baseline, lambda_s);
}

inline Tensor receiver_loss_rl(const BatchActionSample& sample,
                               const std::vector<double>& rewards,
                               double baseline, double lambda_r) {
  return policy_gradient_loss(sample.log_prob, sample.entropy, rewards,
                              baseline, lambda_r);
}

/// Supervised pipeline: cross-entropy of the known correct action.
inline Tensor receiver_loss_sl(const BatchActionSample& sample,
                               const std::vector<int>& target_indices) {
  return scale(reduce_mean(select_last(sample.log_probs_all, target_indices)),
               -1.0);
}

struct StepMetrics {
  double mean_reward = 0.0;
  double sender_loss = 0.0;
  double receiver_loss = 0.0;
  double entropy_s = 0.0;  // mean per-step sender entropy
  double entropy_r = 0.0;  // mean receiver action entropy
};

/// Everything a training run owns. Construction is fully determined by the
/// config: parameters come from the init stream, splits from the data stream.
struct Experiment {
  explicit Experiment(const RunConfig& cfg)
      : config(cfg), rngs(cfg.seed), dataset(enumerate_objects(cfg.space())) {
    splits = split_dataset(dataset, cfg.split, rngs.data);
    SenderConfig scfg{dataset.space.onehot_dim(), cfg.perception_hidden,
                      cfg.hidden, cfg.vocab, cfg.max_length};
    ReceiverConfig rcfg{dataset.space.onehot_dim(), cfg.perception_hidden,
                        cfg.hidden, cfg.vocab, cfg.max_length};
    sender = Sender(scfg, rngs.init);
    receiver = Receiver(rcfg, rngs.init);
    sender.collect(sender_params);
    receiver.collect(receiver_params);
  }

  /// The split metrics are monitored on: validation when present, otherwise
  /// the train split (e.g. all-train worlds used for memorization probes).
  const std::vector<int>& monitored_split() const {
    return splits.val.empty() ? splits.train : splits.val;
  }

  RunConfig config;
  RngHub rngs;
  Dataset dataset;
  Splits splits;
  Sender sender;
  Receiver receiver;
  ParamSet sender_params;
  ParamSet receiver_params;
};

inline void gather_candidate_tensors(const Dataset& ds,
                                     const std::vector<DiscriminationEpisode>& eps,
                                     std::vector<Tensor>* out) {
  const int n = static_cast<int>(eps[0].candidates.size());
  out->clear();
  std::vector<int> ids(eps.size());
  for (int j = 0; j < n; ++j) {
    for (size_t i = 0; i < eps.size(); ++i) ids[i] = eps[i].candidates[j];
    out->push_back(onehot_batch(ds, ids));
  }
}

/// One step of the three-phase loop: play a batch of episodes in sample mode,
/// form rewards/baseline/losses, then backward + clip + one optimizer step
/// per agent.
inline StepMetrics train_step(Experiment& ex, AdamW& opt_sender,
                              AdamW& opt_receiver, int step_index = 0) {
  const RunConfig& cfg = ex.config;
  const auto episodes = build_discrimination_batch(
      ex.splits.train, cfg.candidates, cfg.batch_size, ex.rngs.data);

  std::vector<int> targets(episodes.size()), target_idx(episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i) {
    targets[i] = episodes[i].target_object;
    target_idx[i] = episodes[i].target_index;
  }
  const Tensor xs = onehot_batch(ex.dataset, targets);
  std::vector<Tensor> candidates;
  gather_candidate_tensors(ex.dataset, episodes, &candidates);

  Tape tape;
  const BatchPolicySample sroll = sender_rollout(
      &tape, ex.sender, xs, DecodeMode::kSample, &ex.rngs.sender);
  const Tensor enc = receiver_encode_batch(&tape, ex.receiver, sroll.messages);
  const BatchActionSample act = receiver_act_batch(
      &tape, ex.receiver, enc, candidates, DecodeMode::kSample,
      &ex.rngs.receiver);

  std::vector<double> rewards(episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i) {
    rewards[i] = compute_reward_discrimination(episodes[i], act.actions[i]);
  }
  const double baseline = baseline_mean(rewards);

  const Tensor loss_s =
      sender_loss(sroll, rewards, baseline, cfg.entropy_sender);
  const Tensor loss_r =
      cfg.pipeline == Pipeline::kRlRl
          ? receiver_loss_rl(act, rewards, baseline, cfg.entropy_receiver)
          : receiver_loss_sl(act, target_idx);

  if (!std::isfinite(loss_s.item()) || !std::isfinite(loss_r.item())) {
    throw NumericError("train_step " + std::to_string(step_index) +
                       ": non-finite loss (sender=" +
                       std::to_string(loss_s.item()) + ", receiver=" +
                       std::to_string(loss_r.item()) + ")");
  }

  tape.backward(loss_s);
  Grads grads_s = collect_grads(tape, ex.sender_params);
  tape.reset_grads();
  tape.backward(loss_r);
  Grads grads_r = collect_grads(tape, ex.receiver_params);

  clip_global_norm(grads_s, cfg.clip_norm);
  clip_global_norm(grads_r, cfg.clip_norm);
  opt_sender.step(ex.sender_params, grads_s);
  opt_receiver.step(ex.receiver_params, grads_r);

  StepMetrics m;
  m.mean_reward = baseline;
  m.sender_loss = loss_s.item();
  m.receiver_loss = loss_r.item();
  m.entropy_s = sroll.mean_step_entropy();
  double hr = 0.0;
  for (double h : act.entropy.data()) hr += h;
  m.entropy_r = hr / static_cast<double>(act.entropy.size());
  return m;
}

struct EvalMetrics {
  double accuracy = 0.0;
  double mean_reward = 0.0;
  double cross_entropy = 0.0;
  int episodes = 0;
};

/// Greedy-sender / argmax-receiver evaluation over episodes drawn from the
/// given split with a dedicated stream, so repeated evaluations (and the
/// analyze command) see the same episodes.
inline EvalMetrics evaluate_greedy(const Sender& sender,
                                   const Receiver& receiver,
                                   const Dataset& dataset,
                                   const std::vector<int>& split,
                                   int num_candidates, int num_episodes,
                                   RngStream rng) {
  if (split.empty()) throw ConfigError("evaluate: empty split");
  const auto episodes =
      build_discrimination_batch(split, num_candidates, num_episodes, rng);

  std::vector<int> targets(episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i)
    targets[i] = episodes[i].target_object;
  const Tensor xs = onehot_batch(dataset, targets);
  std::vector<Tensor> candidates;
  gather_candidate_tensors(dataset, episodes, &candidates);

  const BatchPolicySample sroll =
      sender_rollout(nullptr, sender, xs, DecodeMode::kGreedy, nullptr);
  const Tensor enc = receiver_encode_batch(nullptr, receiver, sroll.messages);
  const BatchActionSample act = receiver_act_batch(
      nullptr, receiver, enc, candidates, DecodeMode::kGreedy, nullptr);

  EvalMetrics m;
  m.episodes = static_cast<int>(episodes.size());
  double xent = 0.0;
  for (size_t i = 0; i < episodes.size(); ++i) {
    m.mean_reward +=
        compute_reward_discrimination(episodes[i], act.actions[i]);
    xent -= act.log_probs_all.data()[i * episodes[i].candidates.size() +
                                     episodes[i].target_index];
  }
  m.mean_reward /= static_cast<double>(m.episodes);
  m.accuracy = m.mean_reward;
  m.cross_entropy = xent / static_cast<double>(m.episodes);
  return m;
}

struct TrainResult {
  std::vector<LogRow> log;
  ParamSnapshot best_sender, best_receiver;
  ParamSnapshot final_sender, final_receiver;
  int best_step = 0;
  int steps_run = 0;
  std::string stop_reason = "max_steps";
};

/// Algorithm loop: train steps with an evaluation beat every `eval_every`
/// steps (and at the final step), early stopping on the monitored
/// cross-entropy, best-checkpoint tracking, and an optional stop once the
/// monitored accuracy reaches `target_accuracy`.
inline TrainResult train_loop(
    Experiment& ex, const std::function<void(const LogRow&)>& on_row = {}) {
  const RunConfig& cfg = ex.config;
  AdamW opt_sender({cfg.lr_sender, 0.9, 0.999, 1e-8, cfg.weight_decay});
  AdamW opt_receiver({cfg.lr_receiver, 0.9, 0.999, 1e-8, cfg.weight_decay});
  EarlyStopper stopper(cfg.patience);
  const bool early_stopping_enabled = !ex.splits.val.empty();

  TrainResult res;
  res.best_sender = snapshot_params(ex.sender_params);
  res.best_receiver = snapshot_params(ex.receiver_params);

  StepMetrics step_metrics;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    step_metrics = train_step(ex, opt_sender, opt_receiver, step);
    res.steps_run = step;

    const bool eval_beat =
        step % cfg.eval_every == 0 || step == cfg.max_steps;
    if (!eval_beat) continue;

    const EvalMetrics ev = evaluate_greedy(
        ex.sender, ex.receiver, ex.dataset, ex.monitored_split(),
        cfg.candidates, cfg.eval_episodes, ex.rngs.fresh_eval_stream());

    LogRow row{step, step_metrics.mean_reward, step_metrics.sender_loss,
               step_metrics.receiver_loss, step_metrics.entropy_s,
               step_metrics.entropy_r, ev.accuracy, ev.cross_entropy};
    res.log.push_back(row);
    if (on_row) on_row(row);

    const auto decision = stopper.observe(ev.cross_entropy);
    if (decision.improved || res.best_step == 0) {
      res.best_sender = snapshot_params(ex.sender_params);
      res.best_receiver = snapshot_params(ex.receiver_params);
      res.best_step = step;
    }
    if (cfg.target_accuracy >= 0.0 && ev.accuracy >= cfg.target_accuracy) {
      res.stop_reason = "target_accuracy";
      break;
    }
    if (early_stopping_enabled && decision.stop) {
      res.stop_reason = "early_stop";
      break;
    }
  }
  res.final_sender = snapshot_params(ex.sender_params);
  res.final_receiver = snapshot_params(ex.receiver_params);
  if (res.best_step == 0) {
    res.best_sender = res.final_sender;
    res.best_receiver = res.final_receiver;
  }
  return res;
}

}  // namespace lewisim

#endif  // LEWISIM_TRAINING_HPP_
