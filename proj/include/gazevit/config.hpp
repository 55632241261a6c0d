/*
 * Copyright 2026 The gazevit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <filesystem>

#include <json.hpp>

#include "gazevit/gaze.hpp"
#include "gazevit/metrics.hpp"
#include "gazevit/model.hpp"
#include "gazevit/train.hpp"

namespace gazevit {

using Json = nlohmann::ordered_json;

// JSON mapping of every configuration block. Parsing is strict: unknown keys
// are rejected so typos do not silently fall back to defaults. Missing keys
// keep their defaults.
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const GazeConfig& c);
Json to_json(const MetricSettings& c);

void from_json(const Json& j, ModelConfig& c);
void from_json(const Json& j, TrainConfig& c);
void from_json(const Json& j, GazeConfig& c);
void from_json(const Json& j, MetricSettings& c);

/// All blocks of one experiment, as stored in a `--config` file:
/// {"model": {...}, "train": {...}, "gaze": {...}, "metrics": {...}}.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  GazeConfig gaze;
  MetricSettings metrics;
};
Json to_json(const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const Json& j, const std::filesystem::path& path);

/// Checkpoint directory: `config.json` (model config) + `params.egpc`.
void save_checkpoint(const SiameseModel& model, const std::filesystem::path& dir);
SiameseModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace gazevit
