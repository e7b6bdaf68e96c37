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
// Fixed-schema CSV metrics log.

#ifndef LEWISIM_LOG_HPP_
#define LEWISIM_LOG_HPP_

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lewisim {

struct LogRow {
  int step = 0;
  double train_reward = 0.0;
  double sender_loss = 0.0;
  double receiver_loss = 0.0;
  double entropy_s = 0.0;
  double entropy_r = 0.0;
  double val_accuracy = 0.0;
  double val_xent = 0.0;
};

inline constexpr const char* kLogHeader =
    "step,train_reward,sender_loss,receiver_loss,entropy_s,entropy_r,"
    "val_accuracy,val_xent";

inline std::string format_float6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string format_log_row(const LogRow& r) {
  std::string out = std::to_string(r.step);
  for (double v : {r.train_reward, r.sender_loss, r.receiver_loss, r.entropy_s,
                   r.entropy_r, r.val_accuracy, r.val_xent}) {
    out += ',';
    out += format_float6(v);
  }
  return out;
}

inline LogRow parse_log_row(const std::string& line) {
  std::istringstream in(line);
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (fields.size() != 8) {
    throw std::runtime_error("log row has " + std::to_string(fields.size()) +
                             " fields, expected 8: " + line);
  }
  LogRow r;
  r.step = std::stoi(fields[0]);
  r.train_reward = std::stod(fields[1]);
  r.sender_loss = std::stod(fields[2]);
  r.receiver_loss = std::stod(fields[3]);
  r.entropy_s = std::stod(fields[4]);
  r.entropy_r = std::stod(fields[5]);
  r.val_accuracy = std::stod(fields[6]);
  r.val_xent = std::stod(fields[7]);
  return r;
}

}  // namespace lewisim

#endif  // LEWISIM_LOG_HPP_
