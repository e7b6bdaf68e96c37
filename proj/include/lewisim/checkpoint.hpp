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
// Versioned, self-describing checkpoint container: shape-tagged flat float
// arrays per named parameter plus the config hash. Save -> load -> save is
// byte-identical (keys are sorted and doubles round-trip exactly).

#ifndef LEWISIM_CHECKPOINT_HPP_
#define LEWISIM_CHECKPOINT_HPP_

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lewisim/config.hpp"
#include "lewisim/nn.hpp"

namespace lewisim {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  uint64_t config_hash = 0;
  ParamSnapshot sender;
  ParamSnapshot receiver;
};

namespace detail {

inline nlohmann::json snapshot_to_json(const ParamSnapshot& snap) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, tensor] : snap.values) {
    nlohmann::json entry;
    entry["shape"] = tensor.shape();
    entry["data"] = tensor.data();
    out[name] = std::move(entry);
  }
  return out;
}

inline ParamSnapshot snapshot_from_json(const nlohmann::json& j) {
  ParamSnapshot snap;
  for (const auto& item : j.items()) {
    const auto& entry = item.value();
    const Shape shape = entry.at("shape").get<Shape>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
      throw CheckpointError("parameter '" + item.key() + "': " +
                            std::to_string(data.size()) +
                            " values do not fill shape " + shape_str(shape));
    }
    snap.values.emplace_back(item.key(), Tensor(shape, std::move(data)));
  }
  return snap;
}

}  // namespace detail

inline std::string checkpoint_to_string(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format_version"] = ckpt.version;
  j["config_hash"] = ckpt.config_hash;
  j["sender"] = detail::snapshot_to_json(ckpt.sender);
  j["receiver"] = detail::snapshot_to_json(ckpt.receiver);
  return j.dump(2) + "\n";
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out << checkpoint_to_string(ckpt);
}

inline Checkpoint checkpoint_from_string(const std::string& text,
                                         const std::string& origin = "") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint " + origin + ": " + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.version = j.at("format_version").get<int>();
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(ckpt.version));
    }
    ckpt.config_hash = j.at("config_hash").get<uint64_t>();
    ckpt.sender = detail::snapshot_from_json(j.at("sender"));
    ckpt.receiver = detail::snapshot_from_json(j.at("receiver"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + origin + ": " + e.what());
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return checkpoint_from_string(text, path);
}

/// Applies a loaded checkpoint to live parameters. Shape or name mismatches
/// raise errors naming the parameter with expected vs found shapes.
inline void apply_checkpoint(const Checkpoint& ckpt, ParamSet& sender_params,
                             ParamSet& receiver_params) {
  auto apply = [](ParamSet& params, const ParamSnapshot& snap,
                  const char* which) {
    // The snapshot arrives sorted by name (JSON object order); match by name.
    for (auto& [name, tensor] : params) {
      const std::pair<std::string, Tensor>* found = nullptr;
      for (const auto& entry : snap.values) {
        if (entry.first == name) {
          found = &entry;
          break;
        }
      }
      if (found == nullptr) {
        throw CheckpointError(std::string(which) +
                              ": checkpoint is missing parameter '" + name +
                              "'");
      }
      if (found->second.shape() != tensor->shape()) {
        throw CheckpointError(std::string(which) + ": parameter '" + name +
                              "': expected shape " +
                              shape_str(tensor->shape()) + ", found " +
                              shape_str(found->second.shape()));
      }
    }
    if (snap.values.size() != params.size()) {
      throw CheckpointError(std::string(which) + ": checkpoint has " +
                            std::to_string(snap.values.size()) +
                            " parameters, model expects " +
                            std::to_string(params.size()));
    }
    for (auto& [name, tensor] : params) {
      for (const auto& entry : snap.values) {
        if (entry.first == name) {
          tensor->mutable_data() = entry.second.data();
          break;
        }
      }
    }
  };
  apply(sender_params, ckpt.sender, "sender");
  apply(receiver_params, ckpt.receiver, "receiver");
}

}  // namespace lewisim

#endif  // LEWISIM_CHECKPOINT_HPP_
