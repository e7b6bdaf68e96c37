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
// Run configuration: JSON schema, defaults, strict validation (unknown keys
// are rejected with a nearest-key suggestion) and a canonical resolved form.

#ifndef LEWISIM_CONFIG_HPP_
#define LEWISIM_CONFIG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lewisim/world.hpp"

namespace lewisim {

enum class Pipeline { kRlRl, kRlSl };

inline std::string pipeline_name(Pipeline p) {
  return p == Pipeline::kRlRl ? "rl-rl" : "rl-sl";
}

struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir;

  // world
  int attributes = 0;       // K
  int values = 0;           // V_attr
  std::array<double, 3> split = {0.8, 0.1, 0.1};

  // channel
  int vocab = 0;            // |V| content symbols
  int max_length = 0;       // L

  // game
  int candidates = 0;       // N

  // model
  int hidden = 64;
  int perception_hidden = 128;

  // train
  Pipeline pipeline = Pipeline::kRlSl;
  int batch_size = 512;
  double lr_sender = 4e-3;
  double lr_receiver = 4e-3;
  double entropy_sender = 0.02;
  double entropy_receiver = 0.02;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  int max_steps = 20000;
  int eval_every = 100;
  int eval_episodes = 1024;
  int patience = 20;
  double target_accuracy = -1.0;  // < 0 disables the stop-when-solved rule

  AttributeSpace space() const { return {attributes, values}; }
};

namespace detail {

inline int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::vector<std::string>& known,
                                const std::string& section) {
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    bool ok = false;
    for (const auto& k : known) {
      if (k == key) {
        ok = true;
        break;
      }
    }
    if (ok) continue;
    std::string best;
    int best_d = 1 << 30;
    for (const auto& k : known) {
      const int d = edit_distance(key, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    std::string where = section.empty() ? "config" : "section '" + section + "'";
    throw ConfigError("unknown key '" + key + "' in " + where +
                      " (did you mean '" + best + "'?)");
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for key '") + key +
                      "': " + e.what());
  }
}

template <typename T>
T get_required(const nlohmann::json& obj, const char* key,
               const std::string& section) {
  if (!obj.contains(key)) {
    throw ConfigError("missing required key '" + std::string(key) +
                      "' in section '" + section + "'");
  }
  return get_or<T>(obj, key, T{});
}

}  // namespace detail

/// Validates semantic constraints; throws ConfigError naming the offending
/// key.
inline void validate_config(const RunConfig& c) {
  if (c.attributes < 1) throw ConfigError("world.attributes: must be >= 1");
  if (c.values < 2) throw ConfigError("world.values: must be >= 2");
  const double fsum = c.split[0] + c.split[1] + c.split[2];
  if (std::abs(fsum - 1.0) > 1e-9) {
    throw ConfigError("world.split: fractions must sum to 1, got " +
                      std::to_string(fsum));
  }
  for (double f : c.split) {
    if (f < 0.0) throw ConfigError("world.split: fractions must be >= 0");
  }
  if (c.vocab < 1) throw ConfigError("channel.vocab: must be >= 1");
  if (c.max_length < 1) throw ConfigError("channel.max_length: must be >= 1");
  if (c.candidates < 2) throw ConfigError("game.candidates: must be >= 2");
  if (c.hidden < 1) throw ConfigError("model.hidden: must be >= 1");
  if (c.perception_hidden < 0) {
    throw ConfigError("model.perception_hidden: must be >= 0");
  }
  if (c.batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (c.lr_sender <= 0 || c.lr_receiver <= 0) {
    throw ConfigError("train.lr_sender/lr_receiver: must be > 0");
  }
  if (c.entropy_sender < 0 || c.entropy_receiver < 0) {
    throw ConfigError("train.entropy_sender/entropy_receiver: must be >= 0");
  }
  if (c.weight_decay < 0) throw ConfigError("train.weight_decay: must be >= 0");
  if (c.clip_norm <= 0) throw ConfigError("train.clip_norm: must be > 0");
  if (c.max_steps < 0) throw ConfigError("train.max_steps: must be >= 0");
  if (c.eval_every < 1) throw ConfigError("train.eval_every: must be >= 1");
  if (c.eval_episodes < 1) throw ConfigError("train.eval_episodes: must be >= 1");
  if (c.patience < 1) throw ConfigError("train.patience: must be >= 1");

  const AttributeSpace space = c.space();
  const int64_t total = space.total_objects();
  if (total > kMaxObjects) {
    throw ConfigError("world.attributes/values: universe of " +
                      std::to_string(total) + " objects exceeds the limit of " +
                      std::to_string(kMaxObjects));
  }
  const int n_val = static_cast<int>(std::llround(total * c.split[1]));
  const int n_test = static_cast<int>(std::llround(total * c.split[2]));
  const int n_train = static_cast<int>(total) - n_val - n_test;
  if (n_train < c.candidates) {
    throw ConfigError("game.candidates: " + std::to_string(c.candidates) +
                      " exceeds the train split size of " +
                      std::to_string(n_train));
  }
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using nlohmann::json;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  detail::reject_unknown_keys(
      j, {"seed", "out_dir", "world", "channel", "game", "model", "train"}, "");

  RunConfig c;
  c.seed = detail::get_or<uint64_t>(j, "seed", 1);
  c.out_dir = detail::get_or<std::string>(j, "out_dir", "");

  const json world = j.value("world", json::object());
  detail::reject_unknown_keys(world, {"attributes", "values", "split"}, "world");
  c.attributes = detail::get_required<int>(world, "attributes", "world");
  c.values = detail::get_required<int>(world, "values", "world");
  if (world.contains("split")) {
    const auto v = world.at("split").get<std::vector<double>>();
    if (v.size() != 3) {
      throw ConfigError("world.split: expected 3 fractions [train,val,test]");
    }
    c.split = {v[0], v[1], v[2]};
  }

  const json channel = j.value("channel", json::object());
  detail::reject_unknown_keys(channel, {"vocab", "max_length"}, "channel");
  c.vocab = detail::get_required<int>(channel, "vocab", "channel");
  c.max_length = detail::get_required<int>(channel, "max_length", "channel");

  const json game = j.value("game", json::object());
  detail::reject_unknown_keys(game, {"candidates"}, "game");
  c.candidates = detail::get_required<int>(game, "candidates", "game");

  const json model = j.value("model", json::object());
  detail::reject_unknown_keys(model, {"hidden", "perception_hidden"}, "model");
  c.hidden = detail::get_or<int>(model, "hidden", c.hidden);
  c.perception_hidden =
      detail::get_or<int>(model, "perception_hidden", c.perception_hidden);

  const json train = j.value("train", json::object());
  detail::reject_unknown_keys(
      train,
      {"pipeline", "batch_size", "lr_sender", "lr_receiver", "entropy_sender",
       "entropy_receiver", "weight_decay", "clip_norm", "max_steps",
       "eval_every", "eval_episodes", "patience", "target_accuracy"},
      "train");
  const std::string pipeline =
      detail::get_or<std::string>(train, "pipeline", "rl-sl");
  if (pipeline == "rl-rl") {
    c.pipeline = Pipeline::kRlRl;
  } else if (pipeline == "rl-sl") {
    c.pipeline = Pipeline::kRlSl;
  } else {
    throw ConfigError("train.pipeline: expected 'rl-rl' or 'rl-sl', got '" +
                      pipeline + "'");
  }
  c.batch_size = detail::get_or<int>(train, "batch_size", c.batch_size);
  c.lr_sender = detail::get_or<double>(train, "lr_sender", c.lr_sender);
  c.lr_receiver = detail::get_or<double>(train, "lr_receiver", c.lr_receiver);
  c.entropy_sender =
      detail::get_or<double>(train, "entropy_sender", c.entropy_sender);
  c.entropy_receiver =
      detail::get_or<double>(train, "entropy_receiver", c.entropy_receiver);
  c.weight_decay = detail::get_or<double>(train, "weight_decay", c.weight_decay);
  c.clip_norm = detail::get_or<double>(train, "clip_norm", c.clip_norm);
  c.max_steps = detail::get_or<int>(train, "max_steps", c.max_steps);
  c.eval_every = detail::get_or<int>(train, "eval_every", c.eval_every);
  c.eval_episodes =
      detail::get_or<int>(train, "eval_episodes", c.eval_episodes);
  c.patience = detail::get_or<int>(train, "patience", c.patience);
  c.target_accuracy =
      detail::get_or<double>(train, "target_accuracy", c.target_accuracy);

  validate_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Count newlines up to the error byte so the message carries a line number.
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("config parse error at line " + std::to_string(line) +
                      ": " + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

/// Canonical resolved form: every knob explicit, keys sorted by the JSON
/// library. Used for the config snapshot and the checkpoint hash.
inline nlohmann::json resolved_config_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["world"]["attributes"] = c.attributes;
  j["world"]["values"] = c.values;
  j["world"]["split"] = {c.split[0], c.split[1], c.split[2]};
  j["channel"]["vocab"] = c.vocab;
  j["channel"]["max_length"] = c.max_length;
  j["game"]["candidates"] = c.candidates;
  j["model"]["hidden"] = c.hidden;
  j["model"]["perception_hidden"] = c.perception_hidden;
  j["train"]["pipeline"] = pipeline_name(c.pipeline);
  j["train"]["batch_size"] = c.batch_size;
  j["train"]["lr_sender"] = c.lr_sender;
  j["train"]["lr_receiver"] = c.lr_receiver;
  j["train"]["entropy_sender"] = c.entropy_sender;
  j["train"]["entropy_receiver"] = c.entropy_receiver;
  j["train"]["weight_decay"] = c.weight_decay;
  j["train"]["clip_norm"] = c.clip_norm;
  j["train"]["max_steps"] = c.max_steps;
  j["train"]["eval_every"] = c.eval_every;
  j["train"]["eval_episodes"] = c.eval_episodes;
  j["train"]["patience"] = c.patience;
  j["train"]["target_accuracy"] = c.target_accuracy;
  return j;
}

/// FNV-1a over the canonical dump; identifies a model-compatible config.
inline uint64_t config_hash(const RunConfig& c) {
  // Only fields that shape the model and world feed the hash, so analysis
  // configs may tweak evaluation knobs without invalidating checkpoints.
  nlohmann::json j;
  j["world"]["attributes"] = c.attributes;
  j["world"]["values"] = c.values;
  j["channel"]["vocab"] = c.vocab;
  j["channel"]["max_length"] = c.max_length;
  j["model"]["hidden"] = c.hidden;
  j["model"]["perception_hidden"] = c.perception_hidden;
  const std::string s = j.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lewisim

#endif  // LEWISIM_CONFIG_HPP_
