// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nae/data.hpp"
#include "nae/model.hpp"

namespace nae {

struct MetricsConfig {
  double delta = 1e-6;
  std::size_t grid_points = 101;
  std::size_t bins_for_conditional = 64;

  void validate() const;
  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

double rmse(std::span<const double> y_true, std::span<const double> y_pred);
double mse(std::span<const double> y_true, std::span<const double> y_pred);
/// Mann-Whitney AUC with ties counted as 1/2. Labels must be 0 or 1, both present.
double auc(std::span<const double> labels, std::span<const double> scores);

/// Bin index per sample for conditioning on `x`. Categorical columns (cardinality > 0), and
/// columns with at most `bins` distinct values, group by exact value. Otherwise samples are
/// split into `bins` equal-count bins in sorted order, never separating equal values.
std::vector<std::size_t> assign_bins(std::span<const double> x, std::size_t cardinality,
                                     std::size_t bins);

/// Mean over features of [Var(E(o_i | x_i)) + delta] / [Var(o_i) + delta], with the
/// conditional mean taken per bin. Population variances. contributions and x are N x n.
double additivity(const Matrix& contributions, const Matrix& x,
                  std::span<const std::size_t> cardinalities, const MetricsConfig& cfg);

/// Additivity of an NAE on inputs x. Each expert output is a function of x_i alone, so
/// E(o_i | x_i) = sum_k E(r_ik | x_i) o_ik(x_i); only the relevances are binned.
double model_additivity(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                        const MetricsConfig& cfg);

/// Mean over features of the count-weighted bin average of
/// (max o_i - min o_i + delta) / (max upper - min lower + delta). All inputs N x n.
double tightness(const Matrix& contributions, const Matrix& upper, const Matrix& lower,
                 const Matrix& x, std::span<const std::size_t> cardinalities,
                 const MetricsConfig& cfg);

double model_tightness(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                       const MetricsConfig& cfg);

struct ShapeRecord {
  std::size_t feature = 0;
  std::string name;
  double value = 0.0;         // raw feature value (category code for categoricals)
  std::string label;          // category label, empty for continuous features
  double contribution = 0.0;  // mean-centered
  double upper = 0.0;
  double lower = 0.0;
  double density = 0.0;       // share of rows in the grid cell
};

/// Shape curves on a uniform grid over each feature's observed range (or its categories).
/// `data` holds raw feature values; `transform`, if given, maps them to model inputs. The mean
/// curve at a grid value v is sum_k rbar_k g_ik(v), where rbar averages the relevances of rows
/// in v's cell (all rows when the cell is empty), so it always lies within the bounds at v.
/// Curves and bounds are shifted together so the count-weighted curve mean is 0.
std::vector<ShapeRecord> extract_shapes(const NaeParams& params, const ModelConfig& config,
                                        const Dataset& data, const MetricsConfig& cfg,
                                        const QuantileTransform* transform = nullptr,
                                        std::vector<std::string>* warnings = nullptr);

/// CSV with header `feature,value,contribution,upper,lower,density`.
void write_shape_csv(std::span<const ShapeRecord> records, const std::string& path);

struct InteractionGrid {
  std::vector<double> xi;
  std::vector<double> xj;
  Matrix values;  // xi.size() x xj.size(), mean-centered
};

/// Pairwise surface over raw-value grids spanning the observed ranges of features i and j.
InteractionGrid extract_interaction(const NaeParams& params, const ModelConfig& config,
                                    const Dataset& data, std::size_t i, std::size_t j,
                                    const MetricsConfig& cfg,
                                    const QuantileTransform* transform = nullptr);

/// CSV with header `xi,xj,value`, one row per grid cell.
void write_interaction_csv(const InteractionGrid& grid, const std::string& path);

}  // namespace nae
