// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nae/errors.hpp"
#include "nae/training.hpp"

namespace nae {

void MetricsConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  if (grid_points < 2) throw ConfigError("grid_points must be >= 2");
  if (bins_for_conditional < 1) throw ConfigError("bins_for_conditional must be >= 1");
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty())
    throw UsageError("mse: inputs must be nonempty and equally long");
  double s = 0.0;
  for (std::size_t t = 0; t < y_true.size(); ++t) s += (y_true[t] - y_pred[t]) * (y_true[t] - y_pred[t]);
  return s / static_cast<double>(y_true.size());
}

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  return std::sqrt(mse(y_true, y_pred));
}

double auc(std::span<const double> labels, std::span<const double> scores) {
  const std::size_t n = labels.size();
  if (scores.size() != n) throw UsageError("auc: labels and scores differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0;
  double rank_sum = 0.0;
  std::size_t start = 0;
  while (start < n) {
    std::size_t stop = start;
    while (stop < n && scores[order[stop]] == scores[order[start]]) ++stop;
    const double avg_rank = 0.5 * static_cast<double>(start + stop + 1);  // 1-based
    for (std::size_t p = start; p < stop; ++p) {
      const double y = labels[order[p]];
      if (y != 0.0 && y != 1.0) throw UsageError("auc: labels must be 0 or 1");
      if (y == 1.0) {
        pos += 1.0;
        rank_sum += avg_rank;
      }
    }
    start = stop;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw UsageError("auc: both classes must be present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<std::size_t> assign_bins(std::span<const double> x, std::size_t cardinality,
                                     std::size_t bins) {
  const std::size_t n = x.size();
  std::vector<std::size_t> out(n);
  if (cardinality > 0) {
    for (std::size_t t = 0; t < n; ++t) out[t] = static_cast<std::size_t>(x[t]);
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::size_t distinct = 0;
  for (std::size_t p = 0; p < n; ++p)
    if (p == 0 || x[order[p]] != x[order[p - 1]]) ++distinct;
  std::size_t group_bin = 0;
  std::size_t value_rank = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const bool new_value = p == 0 || x[order[p]] != x[order[p - 1]];
    if (new_value) {
      group_bin = distinct <= bins ? value_rank : p * bins / n;
      ++value_rank;
    }
    out[order[p]] = group_bin;
  }
  return out;
}

namespace {

double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double e : v) s += (e - mean) * (e - mean);
  return s / static_cast<double>(v.size());
}

std::size_t bin_count(std::span<const std::size_t> bins) {
  return bins.empty() ? 0 : *std::max_element(bins.begin(), bins.end()) + 1;
}

std::vector<double> column(const Matrix& m, std::size_t c) {
  std::vector<double> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, c);
  return v;
}

void check_shapes(const Matrix& a, const Matrix& x, std::span<const std::size_t> cards) {
  if (a.rows() != x.rows() || a.cols() != x.cols())
    throw UsageError("metric inputs must share the same N x n shape");
  if (!cards.empty() && cards.size() != x.cols())
    throw UsageError("cardinalities must be empty or one per feature");
}

std::size_t card_of(std::span<const std::size_t> cards, std::size_t i) {
  return cards.empty() ? 0 : cards[i];
}

}  // namespace

double additivity(const Matrix& contributions, const Matrix& x,
                  std::span<const std::size_t> cardinalities, const MetricsConfig& cfg) {
  check_shapes(contributions, x, cardinalities);
  if (x.rows() < 2) throw UsageError("additivity needs at least 2 samples");
  double total = 0.0;
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const auto o = column(contributions, i);
    const auto bins = assign_bins(column(x, i), card_of(cardinalities, i), cfg.bins_for_conditional);
    const std::size_t nb = bin_count(bins);
    std::vector<double> sum(nb, 0.0);
    std::vector<double> count(nb, 0.0);
    for (std::size_t t = 0; t < o.size(); ++t) {
      sum[bins[t]] += o[t];
      count[bins[t]] += 1.0;
    }
    std::vector<double> cond(o.size());
    for (std::size_t t = 0; t < o.size(); ++t) cond[t] = sum[bins[t]] / count[bins[t]];
    total += (population_variance(cond) + cfg.delta) / (population_variance(o) + cfg.delta);
  }
  return total / static_cast<double>(x.cols());
}

double model_additivity(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                        const MetricsConfig& cfg) {
  if (x.rows() < 2) throw UsageError("additivity needs at least 2 samples");
  const BatchTrace tr = evaluate(params, config, x);
  const std::size_t k = config.n_experts;
  double total = 0.0;
  for (std::size_t i = 0; i < config.n_features; ++i) {
    const auto bins = assign_bins(column(x, i), config.cardinality(i), cfg.bins_for_conditional);
    const std::size_t nb = bin_count(bins);
    Matrix rsum(nb, k);
    std::vector<double> count(nb, 0.0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      for (std::size_t c = 0; c < k; ++c) rsum(bins[t], c) += tr.relevances[i](t, c);
      count[bins[t]] += 1.0;
    }
    std::vector<double> cond(x.rows());
    const auto o = column(tr.contributions, i);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c)
        s += rsum(bins[t], c) / count[bins[t]] * tr.expert_outputs[i](t, c);
      cond[t] = s;
    }
    total += (population_variance(cond) + cfg.delta) / (population_variance(o) + cfg.delta);
  }
  return total / static_cast<double>(config.n_features);
}

double tightness(const Matrix& contributions, const Matrix& upper, const Matrix& lower,
                 const Matrix& x, std::span<const std::size_t> cardinalities,
                 const MetricsConfig& cfg) {
  check_shapes(contributions, x, cardinalities);
  check_shapes(upper, x, cardinalities);
  check_shapes(lower, x, cardinalities);
  if (x.rows() < 1) throw UsageError("tightness needs at least 1 sample");
  double total = 0.0;
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const auto bins = assign_bins(column(x, i), card_of(cardinalities, i), cfg.bins_for_conditional);
    const std::size_t nb = bin_count(bins);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> omax(nb, -inf), omin(nb, inf), umax(nb, -inf), lmin(nb, inf), count(nb, 0.0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      const std::size_t b = bins[t];
      omax[b] = std::max(omax[b], contributions(t, i));
      omin[b] = std::min(omin[b], contributions(t, i));
      umax[b] = std::max(umax[b], upper(t, i));
      lmin[b] = std::min(lmin[b], lower(t, i));
      count[b] += 1.0;
    }
    double acc = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      if (count[b] == 0.0) continue;
      acc += count[b] * (omax[b] - omin[b] + cfg.delta) / (umax[b] - lmin[b] + cfg.delta);
    }
    total += acc / static_cast<double>(x.rows());
  }
  return total / static_cast<double>(x.cols());
}

double model_tightness(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                       const MetricsConfig& cfg) {
  const BatchTrace tr = evaluate(params, config, x);
  const std::size_t n = config.n_features;
  Matrix upper(x.rows(), n);
  Matrix lower(x.rows(), n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < x.rows(); ++t) {
      const auto row = tr.expert_outputs[i].row(t);
      upper(t, i) = *std::max_element(row.begin(), row.end());
      lower(t, i) = *std::min_element(row.begin(), row.end());
    }
  return tightness(tr.contributions, upper, lower, x, config.cardinalities, cfg);
}

namespace {

struct FeatureGrid {
  std::vector<double> raw;           // grid values in raw units
  std::vector<std::size_t> cell;     // per dataset row
};

FeatureGrid make_grid(const Dataset& data, std::size_t i, std::size_t points) {
  FeatureGrid g;
  const std::size_t rows = data.rows();
  g.cell.resize(rows);
  if (data.is_categorical(i)) {
    for (std::size_t c = 0; c < data.cardinalities[i]; ++c) g.raw.push_back(static_cast<double>(c));
    for (std::size_t t = 0; t < rows; ++t) g.cell[t] = static_cast<std::size_t>(data.features(t, i));
    return g;
  }
  double lo = data.features(0, i);
  double hi = lo;
  for (std::size_t t = 0; t < rows; ++t) {
    lo = std::min(lo, data.features(t, i));
    hi = std::max(hi, data.features(t, i));
  }
  if (lo == hi) {
    g.raw = {lo};
    return g;
  }
  const double span = static_cast<double>(points - 1);
  for (std::size_t p = 0; p < points; ++p)
    g.raw.push_back(p + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(p) / span);
  for (std::size_t t = 0; t < rows; ++t)
    g.cell[t] = static_cast<std::size_t>(std::llround((data.features(t, i) - lo) / (hi - lo) * span));
  return g;
}

std::vector<double> to_model_space(const QuantileTransform* transform, std::size_t i,
                                   std::span<const double> raw) {
  std::vector<double> v(raw.begin(), raw.end());
  if (transform)
    for (double& e : v) e = transform->apply_value(i, e);
  return v;
}

}  // namespace

std::vector<ShapeRecord> extract_shapes(const NaeParams& params, const ModelConfig& config,
                                        const Dataset& data, const MetricsConfig& cfg,
                                        const QuantileTransform* transform,
                                        std::vector<std::string>* warnings) {
  cfg.validate();
  if (data.n_features() != config.n_features)
    throw UsageError("extract_shapes: dataset/model feature count mismatch");
  std::vector<ShapeRecord> out;
  if (data.rows() == 0) {
    if (warnings)
      for (const auto& name : data.feature_names) warnings->push_back("feature '" + name + "' has no rows; skipped");
    return out;
  }
  const Matrix x_model = transform ? transform->applied(data).features : data.features;
  const BatchTrace tr = evaluate(params, config, x_model);
  const std::size_t k = config.n_experts;
  const double rows = static_cast<double>(data.rows());

  for (std::size_t i = 0; i < config.n_features; ++i) {
    const FeatureGrid grid = make_grid(data, i, cfg.grid_points);
    const std::size_t g = grid.raw.size();
    Matrix rsum(g, k);
    std::vector<double> count(g, 0.0);
    std::vector<double> rall(k, 0.0);
    for (std::size_t t = 0; t < data.rows(); ++t) {
      for (std::size_t c = 0; c < k; ++c) {
        rsum(grid.cell[t], c) += tr.relevances[i](t, c);
        rall[c] += tr.relevances[i](t, c);
      }
      count[grid.cell[t]] += 1.0;
    }
    const auto model_grid = to_model_space(data.is_categorical(i) ? nullptr : transform, i, grid.raw);
    const Matrix experts = expert_outputs_at(params, config, i, model_grid);

    std::vector<ShapeRecord> recs(g);
    double center = 0.0;
    for (std::size_t p = 0; p < g; ++p) {
      const auto row = experts.row(p);
      double mean = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double rbar = count[p] > 0.0 ? rsum(p, c) / count[p] : rall[c] / rows;
        mean += rbar * row[c];
      }
      ShapeRecord& r = recs[p];
      r.feature = i;
      r.name = data.feature_names[i];
      r.value = grid.raw[p];
      if (data.is_categorical(i)) r.label = data.levels[i][p];
      r.contribution = mean;
      r.upper = *std::max_element(row.begin(), row.end());
      r.lower = *std::min_element(row.begin(), row.end());
      r.density = count[p] / rows;
      center += count[p] * mean;
    }
    center /= rows;
    for (auto& r : recs) {
      r.contribution -= center;
      r.upper -= center;
      r.lower -= center;
    }
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  return q + "\"";
}

}  // namespace

void write_shape_csv(std::span<const ShapeRecord> records, const std::string& path) {
  auto out = open_output(path);
  out << "feature,value,contribution,upper,lower,density\n";
  for (const auto& r : records)
    out << csv_cell(r.name) << ',' << (r.label.empty() ? format_real(r.value) : csv_cell(r.label))
        << ',' << format_real(r.contribution) << ',' << format_real(r.upper) << ','
        << format_real(r.lower) << ',' << format_real(r.density) << '\n';
}

InteractionGrid extract_interaction(const NaeParams& params, const ModelConfig& config,
                                    const Dataset& data, std::size_t i, std::size_t j,
                                    const MetricsConfig& cfg, const QuantileTransform* transform) {
  cfg.validate();
  if (i >= data.n_features() || j >= data.n_features())
    throw UsageError("interaction: feature index out of range");
  if (data.rows() == 0) throw UsageError("interaction: dataset is empty");
  InteractionGrid grid;
  grid.xi = make_grid(data, i, cfg.grid_points).raw;
  grid.xj = make_grid(data, j, cfg.grid_points).raw;
  const auto mi = to_model_space(data.is_categorical(i) ? nullptr : transform, i, grid.xi);
  const auto mj = to_model_space(data.is_categorical(j) ? nullptr : transform, j, grid.xj);
  grid.values = pairwise_interaction(params, config, i, j, mi, mj);
  double mean = 0.0;
  for (double v : grid.values.values()) mean += v;
  mean /= static_cast<double>(grid.values.size());
  for (double& v : grid.values.values()) v -= mean;
  return grid;
}

void write_interaction_csv(const InteractionGrid& grid, const std::string& path) {
  auto out = open_output(path);
  out << "xi,xj,value\n";
  for (std::size_t a = 0; a < grid.xi.size(); ++a)
    for (std::size_t b = 0; b < grid.xj.size(); ++b)
      out << format_real(grid.xi[a]) << ',' << format_real(grid.xj[b]) << ','
          << format_real(grid.values(a, b)) << '\n';
}

}  // namespace nae
