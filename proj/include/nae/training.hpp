// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nae/data.hpp"
#include "nae/model.hpp"

namespace nae {

struct TrainConfig {
  Task task = Task::Regression;
  double lambda_var = 0.1;
  double output_penalty = 0.0;
  double weight_decay = 0.0;
  double learning_rate = 1e-3;
  std::size_t max_iterations = 100;  // epochs over the training split
  std::size_t batch_size = 256;
  double dropout = 0.0;
  double dropout_expert = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Gradients laid out exactly like the parameters they belong to.
struct GradientSet {
  NaeParams grads;
};

/// Per-sample loss; for classification `y_pred` is a logit.
double task_loss(Task task, double y_true, double y_pred);
/// d task_loss / d y_pred.
double task_loss_grad(Task task, double y_true, double y_pred);

/// (1 / (n B K)) sum over samples, features and experts of (o_ik - mean_l o_il)^2.
double variation_penalty(const BatchTrace& trace);
/// Mean over samples and features of o_i^2.
double output_penalty(const BatchTrace& trace);

struct LossTerms {
  double task = 0.0;       // mean task loss
  double variation = 0.0;  // unscaled
  double output = 0.0;     // unscaled
  double total = 0.0;      // task + lambda * variation + output_penalty * output
};

LossTerms objective(const BatchTrace& trace, std::span<const double> targets,
                    const TrainConfig& train_config);

/// Reverse-mode gradient of `objective` for the network that produced `trace`.
/// Throws NumericalError naming the first tensor with a non-finite gradient.
GradientSet backward(const NaeParams& params, const ModelConfig& config,
                     const TrainConfig& train_config, std::span<const double> targets,
                     const BatchTrace& trace);

struct AdamState {
  NaeParams m;
  NaeParams v;
  std::uint64_t step = 0;

  static AdamState like(const NaeParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One AdamW update with decoupled weight decay on every trainable tensor.
void adamw_step(NaeParams& params, const GradientSet& grads, AdamState& state, double lr,
                double weight_decay);

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double penalty = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  NaeParams params;  // best-validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_metric = 0.0;
};

/// Sub-seed offsets derived from TrainConfig::seed.
enum SeedStream : std::uint64_t { kInitStream = 1, kShuffleStream = 2, kNoiseStream = 3 };

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch AdamW with per-step cosine decay. Validation uses RMSE (regression) or AUC
/// (classification) on the Val split, falling back to Train when Val is empty.
TrainResult train(const Dataset& data, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

/// Eval-mode predictions in chunks.
std::vector<double> predict(const NaeParams& params, const ModelConfig& config, const Matrix& x);

/// Eval-mode trace over all rows of `x`, computed in chunks. Encoder caches are left empty.
BatchTrace evaluate(const NaeParams& params, const ModelConfig& config, const Matrix& x);

/// Validation metric for the task: RMSE or AUC.
double task_metric(Task task, std::span<const double> targets, std::span<const double> predictions);
/// Whether `a` is a better value of task_metric than `b`.
bool metric_improves(Task task, double a, double b);

}  // namespace nae
