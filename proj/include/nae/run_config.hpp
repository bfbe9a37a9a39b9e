// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nae/checkpoint.hpp"
#include "nae/data.hpp"
#include "nae/metrics.hpp"
#include "nae/model.hpp"
#include "nae/training.hpp"

namespace nae {

/// Exactly one of `simulation` or `csv_path` is set.
struct DataSource {
  std::optional<SimSpec> simulation;
  std::string csv_path;
  std::string schema_path;
  bool quantile_transform = true;
};

struct RunConfig {
  ModelConfig model;  // n_features and cardinalities are filled from the data
  TrainConfig train;  // task and seed are filled from the data and `seed`
  MetricsConfig metrics;
  DataSource data;
  std::string output_dir = ".";
  std::uint64_t seed = 0;

  /// Relative data paths resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Sub-seed offsets applied to RunConfig::seed.
inline constexpr std::uint64_t kDataSeedOffset = 100;
inline constexpr std::uint64_t kSplitSeedOffset = 101;

struct PreparedData {
  Dataset raw;
  Dataset inputs;  // after the quantile transform, if any
  std::optional<QuantileTransform> transform;
  std::vector<std::string> warnings;
};

PreparedData prepare_data(const RunConfig& run);

/// Model and train configs completed from the prepared data.
ModelConfig resolved_model_config(const RunConfig& run, const Dataset& data);
TrainConfig resolved_train_config(const RunConfig& run, const Dataset& data);

struct RunOutcome {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  nlohmann::json metrics;  // {metric, <metric>, val_<metric>, additivity, tightness, penalty, ...}
};

/// Trains and evaluates on the Test split (or Val, then Train, when empty).
RunOutcome execute_run(const RunConfig& run, const PreparedData& data,
                       const EpochCallback& on_epoch = {});

/// Variation penalty (unscaled) of `params` on `x` in Eval mode.
double eval_penalty(const NaeParams& params, const ModelConfig& config, const Matrix& x);

/// Writes checkpoint.json, train_log.csv and metrics.json into `dir`, creating it if needed.
void write_run_outputs(const RunOutcome& outcome, const std::string& dir);
void write_train_log(const std::vector<EpochLog>& log, const std::string& path);

struct SweepRow {
  double lambda = 0.0;
  bool failed = false;
  std::string error;
  double additivity = 0.0;
  double tightness = 0.0;
  double penalty = 0.0;
  double metric = 0.0;
};

struct SweepReport {
  std::string metric_name;
  std::vector<SweepRow> rows;
  /// "pass", "fail" or "vacuous" (fewer than two finished runs).
  std::string penalty_monotone;
  std::string additivity_monotone;
  /// "pass"/"fail" when the largest lambda is >= 10, otherwise "not_applicable".
  std::string terminal_additivity;
  bool failed = false;  // a run diverged; the report is partial

  nlohmann::json to_json() const;
  /// True when no run failed and no verdict is "fail".
  bool all_pass() const;
};

inline constexpr double kPenaltyMonotoneTol = 1e-3;
inline constexpr double kTerminalAdditivity = 0.99;

/// One run per lambda (ascending) sharing data, seed and schedule. `jobs` > 1 runs them on
/// worker threads; rows are always reported in lambda order.
SweepReport lambda_monotonicity_experiment(const RunConfig& base, std::vector<double> lambdas,
                                           std::size_t jobs = 1);

}  // namespace nae
