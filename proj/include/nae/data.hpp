// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nae/numerics.hpp"

namespace nae {

enum class Task { Regression, BinaryClassification };
enum class Split : std::uint8_t { Train, Val, Test };

std::string to_string(Task t);
Task parse_task(const std::string& s);
std::string to_string(Split s);

struct Dataset {
  Matrix features;                          // N x n
  std::vector<std::string> feature_names;
  std::vector<std::size_t> cardinalities;   // 0 = continuous
  std::vector<std::vector<std::string>> levels;  // category labels, first-appearance order
  std::vector<double> targets;
  Task task = Task::Regression;
  std::vector<Split> splits;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t n_features() const noexcept { return features.cols(); }
  bool is_categorical(std::size_t i) const { return cardinalities[i] != 0; }

  std::vector<std::size_t> indices(Split s) const;
  /// Rows of one split, keeping column metadata. The result's split labels all equal `s`.
  Dataset subset(Split s) const;
  /// Throws DataError when row counts, codes or names are inconsistent.
  void validate() const;
};

/// Rows indexed by `idx`, as a new matrix.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx);

enum class SimKind { Unimodal, Multimodal, Sparsity, Modality, Correlated, GenericInteraction };

std::string to_string(SimKind k);
SimKind parse_sim_kind(const std::string& s);

struct SimSpec {
  SimKind kind = SimKind::Multimodal;
  std::size_t n_samples = 10000;
  double sigma = 0.1;
  double minority_fraction = 0.5;  // Sparsity: P(x2 = +1)
  std::size_t cf = 1;              // Modality: number of +/-1 features
  double rho = 0.0;                // Correlated
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  double val_fraction = 0.15;

  void validate() const;
  nlohmann::json to_json() const;
  static SimSpec from_json(const nlohmann::json& j);
};

/// Draws a dataset; the split is seeded separately from the draws.
Dataset generate(const SimSpec& spec);

/// Noise-free target of `kind` at one feature row (`cf` is the Modality count).
double closed_form_mean(SimKind kind, std::span<const double> x, std::size_t cf = 1);

/// Shuffles rows with `seed` and labels the first fractions Train, then Val, rest Test.
void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction = 0.7,
                   double val_fraction = 0.15);

/// Per-feature map from raw values to normal scores, fitted on a reference split.
class QuantileTransform {
 public:
  /// Knots are the distinct reference values; each maps to the normal quantile of its
  /// average rank, (rank + 0.5) / N.
  static QuantileTransform fit(const Dataset& data, Split reference = Split::Train);

  double apply_value(std::size_t feature, double x) const;
  void apply(Dataset& data) const;
  Dataset applied(const Dataset& data) const;

  std::size_t n_features() const noexcept { return knots_.size(); }
  bool is_active(std::size_t feature) const { return active_[feature] != 0; }
  /// Features collapsed to zero because their reference values were all equal.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  nlohmann::json to_json() const;
  static QuantileTransform from_json(const nlohmann::json& j);

  friend bool operator==(const QuantileTransform&, const QuantileTransform&) = default;

 private:
  std::vector<std::uint8_t> active_;  // 0: categorical, passed through
  std::vector<std::vector<double>> knots_;
  std::vector<std::vector<double>> scores_;
  std::vector<std::string> warnings_;
};

/// Schema sidecar for CSV input: {"target": ..., "task": ..., "categorical": [...], "split": ...}.
struct Schema {
  std::string target;
  Task task = Task::Regression;
  std::vector<std::string> categorical;
  std::optional<std::string> split_column;

  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::string& path);
  nlohmann::json to_json() const;
};

/// Reads a headered CSV. Without a split column every row is labelled Train; callers
/// then run assign_splits.
Dataset load_csv(const std::string& path, const Schema& schema);

/// Writes features, target and split columns. Categorical cells use their level labels.
void write_csv(const Dataset& data, const std::string& path, const std::string& target_name = "y");

}  // namespace nae
