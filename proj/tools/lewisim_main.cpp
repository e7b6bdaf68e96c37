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
// Command-line front end: `lewisim train` runs the game loop and writes the
// metrics log plus checkpoints; `lewisim analyze` evaluates a checkpoint and
// writes the metrics document and the language dump.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lewisim/analysis.hpp"
#include "lewisim/checkpoint.hpp"
#include "lewisim/config.hpp"
#include "lewisim/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

lewisim::RunConfig load_run_config(const std::string& config_path,
                                   const std::string& out_override) {
  lewisim::RunConfig cfg = lewisim::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.out_dir.empty()) {
    throw lewisim::ConfigError(
        "no output directory: set out_dir in the config or pass --out");
  }
  return cfg;
}

lewisim::Checkpoint make_checkpoint(const lewisim::RunConfig& cfg,
                                    const lewisim::ParamSnapshot& sender,
                                    const lewisim::ParamSnapshot& receiver) {
  lewisim::Checkpoint ckpt;
  ckpt.config_hash = lewisim::config_hash(cfg);
  ckpt.sender = sender;
  ckpt.receiver = receiver;
  return ckpt;
}

int run_train(const std::string& config_path, const std::string& out_override) {
  const lewisim::RunConfig cfg = load_run_config(config_path, out_override);
  fs::create_directories(cfg.out_dir);

  const fs::path out_dir(cfg.out_dir);
  std::ofstream log_file(out_dir / "metrics.csv", std::ios::binary);
  if (!log_file) {
    throw lewisim::ConfigError("cannot write to output directory " +
                               cfg.out_dir);
  }
  log_file << lewisim::kLogHeader << "\n";
  log_file.flush();

  lewisim::Experiment ex(cfg);
  std::cout << lewisim::kLogHeader << "\n";
  lewisim::TrainResult result =
      lewisim::train_loop(ex, [&](const lewisim::LogRow& row) {
        const std::string line = lewisim::format_log_row(row);
        log_file << line << "\n";
        log_file.flush();
        std::cout << line << "\n";
      });

  lewisim::save_checkpoint(
      (out_dir / "checkpoint_best.json").string(),
      make_checkpoint(cfg, result.best_sender, result.best_receiver));
  lewisim::save_checkpoint(
      (out_dir / "checkpoint_final.json").string(),
      make_checkpoint(cfg, result.final_sender, result.final_receiver));
  std::ofstream snapshot(out_dir / "config_resolved.json", std::ios::binary);
  snapshot << lewisim::resolved_config_json(cfg).dump(2) << "\n";

  std::cout << "stopped after " << result.steps_run << " steps ("
            << result.stop_reason << "), best step " << result.best_step
            << "\n";
  return kExitOk;
}

json eval_split_json(const lewisim::Experiment& ex,
                     const std::vector<int>& split) {
  if (split.empty() ||
      static_cast<int>(split.size()) < ex.config.candidates) {
    return json{{"accuracy", nullptr}, {"cross_entropy", nullptr}};
  }
  const lewisim::EvalMetrics m = lewisim::evaluate_greedy(
      ex.sender, ex.receiver, ex.dataset, split, ex.config.candidates,
      ex.config.eval_episodes, ex.rngs.fresh_eval_stream());
  return json{{"accuracy", m.accuracy}, {"cross_entropy", m.cross_entropy}};
}

int run_analyze(const std::string& checkpoint_path,
                const std::string& config_path,
                const std::string& out_override) {
  const lewisim::RunConfig cfg = load_run_config(config_path, out_override);
  const lewisim::Checkpoint ckpt = lewisim::load_checkpoint(checkpoint_path);
  if (ckpt.config_hash != lewisim::config_hash(cfg)) {
    std::cerr << "warning: checkpoint was written under a different "
                 "model/world config (hash mismatch); shapes are still "
                 "checked\n";
  }

  lewisim::Experiment ex(cfg);
  lewisim::apply_checkpoint(ckpt, ex.sender_params, ex.receiver_params);

  json doc;
  doc["checkpoint"] = checkpoint_path;
  doc["eval_episodes"] = cfg.eval_episodes;
  doc["splits"]["train"] = eval_split_json(ex, ex.splits.train);
  doc["splits"]["val"] = eval_split_json(ex, ex.splits.val);
  doc["splits"]["test"] = eval_split_json(ex, ex.splits.test);

  const lewisim::LanguageTable table =
      lewisim::dump_language(ex.sender, ex.dataset);
  try {
    doc["topographic_similarity"] = lewisim::topographic_similarity(table);
  } catch (const lewisim::UndefinedCorrelationError& e) {
    doc["topographic_similarity"] = nullptr;
    doc["topographic_similarity_error"] = e.what();
  }
  const lewisim::LengthStats ls = lewisim::length_stats(table);
  doc["length"]["mean"] = ls.mean_length;
  doc["length"]["histogram"] = ls.histogram;
  if (ls.freq_length_spearman) {
    doc["length"]["freq_length_spearman"] = *ls.freq_length_spearman;
  } else {
    doc["length"]["freq_length_spearman"] = nullptr;
  }
  const lewisim::UniquenessStats us = lewisim::uniqueness_and_entropy(table);
  doc["uniqueness"]["distinct_ratio"] = us.distinct_ratio;
  doc["uniqueness"]["message_entropy"] = us.message_entropy;

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  std::ofstream metrics(out_dir / "analysis.json", std::ios::binary);
  metrics << doc.dump(2) << "\n";

  std::ofstream dump(out_dir / "language.jsonl", std::ios::binary);
  for (size_t i = 0; i < table.size(); ++i) {
    json line;
    line["attrs"] = table.objects[i].attrs;
    line["message"] = table.messages[i].symbols;
    line["length"] = table.messages[i].effective_length();
    dump << line.dump() << "\n";
  }

  std::cout << doc.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lewis-game language emergence simulator"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_override;

  CLI::App* train = app.add_subcommand("train", "Train a sender/receiver pair");
  train->add_option("config", config_path, "Run configuration (JSON)")
      ->required();
  train->add_option("--out", out_override, "Output directory override");

  CLI::App* analyze =
      app.add_subcommand("analyze", "Evaluate a checkpoint and dump language");
  analyze->add_option("checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  analyze->add_option("config", config_path, "Run configuration (JSON)")
      ->required();
  analyze->add_option("--out", out_override, "Output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*train) return run_train(config_path, out_override);
    return run_analyze(checkpoint_path, config_path, out_override);
  } catch (const lewisim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const lewisim::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
