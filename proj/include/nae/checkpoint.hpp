// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nae/data.hpp"
#include "nae/metrics.hpp"
#include "nae/model.hpp"
#include "nae/training.hpp"

namespace nae {

inline constexpr int kCheckpointFormatVersion = 1;

/// Hyperparameter records as JSON. Keys follow the usual NAE hyperparameter names
/// (`layers`, `hidden_dimension`, `dropout_expert`, `variation_penalty`, ...). Readers reject
/// unknown keys and name missing required ones.
nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& where = "model");
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where = "train");
nlohmann::json metrics_config_to_json(const MetricsConfig& c);
MetricsConfig metrics_config_from_json(const nlohmann::json& j, const std::string& where = "metrics");

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const NaeParams& p);
NaeParams params_from_json(const nlohmann::json& j);

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  ModelConfig model;
  TrainConfig train;
  NaeParams params;
  std::vector<std::string> feature_names;
  std::vector<std::vector<std::string>> levels;
  std::optional<QuantileTransform> transform;
  nlohmann::json seeds = nlohmann::json::object();
  std::size_t best_epoch = 0;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
  /// Shape and finiteness checks against the stored config.
  void validate() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nae
