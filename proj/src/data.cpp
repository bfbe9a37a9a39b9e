// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "nae/errors.hpp"

namespace nae {

std::string to_string(Task t) {
  return t == Task::Regression ? "regression" : "binary_classification";
}

Task parse_task(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "binary_classification" || s == "classification") return Task::BinaryClassification;
  throw ConfigError("unknown task '" + s + "' (expected regression|binary_classification)");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw DataError("unknown split label '" + s + "'");
}

}  // namespace

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < splits.size(); ++r)
    if (splits[r] == s) idx.push_back(r);
  return idx;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(m.row(idx[r]).begin(), m.cols(), out.row(r).begin());
  return out;
}

Dataset Dataset::subset(Split s) const {
  const auto idx = indices(s);
  Dataset out;
  out.features = gather_rows(features, idx);
  out.feature_names = feature_names;
  out.cardinalities = cardinalities;
  out.levels = levels;
  out.task = task;
  out.targets.reserve(idx.size());
  for (std::size_t r : idx) out.targets.push_back(targets[r]);
  out.splits.assign(idx.size(), s);
  return out;
}

void Dataset::validate() const {
  const std::size_t n = n_features();
  if (feature_names.size() != n || cardinalities.size() != n || levels.size() != n)
    throw DataError("dataset column metadata does not match its feature count");
  if (targets.size() != rows() || splits.size() != rows())
    throw DataError("dataset targets/splits do not match its row count");
  for (std::size_t i = 0; i < n; ++i) {
    if (cardinalities[i] == 0) continue;
    for (std::size_t r = 0; r < rows(); ++r) {
      const double c = features(r, i);
      if (!(c >= 0.0) || c != std::floor(c) || c >= static_cast<double>(cardinalities[i]))
        throw DataError("feature '" + feature_names[i] + "' row " + std::to_string(r + 1) +
                        ": category code out of range");
    }
  }
  if (task == Task::BinaryClassification)
    for (double y : targets)
      if (y != 0.0 && y != 1.0) throw DataError("binary targets must be 0 or 1");
}

std::string to_string(SimKind k) {
  switch (k) {
    case SimKind::Unimodal: return "unimodal";
    case SimKind::Multimodal: return "multimodal";
    case SimKind::Sparsity: return "sparsity";
    case SimKind::Modality: return "modality";
    case SimKind::Correlated: return "correlated";
    case SimKind::GenericInteraction: return "generic_interaction";
  }
  return "multimodal";
}

SimKind parse_sim_kind(const std::string& s) {
  for (SimKind k : {SimKind::Unimodal, SimKind::Multimodal, SimKind::Sparsity, SimKind::Modality,
                    SimKind::Correlated, SimKind::GenericInteraction})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown simulation kind '" + s +
                    "' (expected unimodal|multimodal|sparsity|modality|correlated|"
                    "generic_interaction)");
}

void SimSpec::validate() const {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (kind == SimKind::Sparsity && !(minority_fraction > 0.0 && minority_fraction <= 1.0))
    throw ConfigError("minority_fraction must lie in (0, 1]");
  if (kind == SimKind::Modality && cf < 1) throw ConfigError("cf must be >= 1");
  if (kind == SimKind::Correlated && !(rho >= 0.0 && rho < 1.0))
    throw ConfigError("rho must lie in [0, 1)");
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction > 1.0)
    throw ConfigError("split fractions must be positive and sum to at most 1");
}

nlohmann::json SimSpec::to_json() const {
  return {{"kind", to_string(kind)},
          {"n_samples", n_samples},
          {"sigma", sigma},
          {"minority_fraction", minority_fraction},
          {"cf", cf},
          {"rho", rho},
          {"seed", seed},
          {"train_fraction", train_fraction},
          {"val_fraction", val_fraction}};
}

SimSpec SimSpec::from_json(const nlohmann::json& j) {
  SimSpec s;
  if (!j.contains("kind")) throw ConfigError("simulation spec: missing key 'kind'");
  s.kind = parse_sim_kind(j.at("kind").get<std::string>());
  s.n_samples = j.value("n_samples", s.n_samples);
  s.sigma = j.value("sigma", s.sigma);
  s.minority_fraction = j.value("minority_fraction", s.minority_fraction);
  s.cf = j.value("cf", s.cf);
  s.rho = j.value("rho", s.rho);
  s.seed = j.value("seed", s.seed);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  s.validate();
  return s;
}

double closed_form_mean(SimKind kind, std::span<const double> x, std::size_t cf) {
  constexpr double pi = std::numbers::pi;
  switch (kind) {
    case SimKind::Unimodal:
      return x[0] - 0.5 + std::sin(4.0 * pi * x[0]);
    case SimKind::Multimodal:
    case SimKind::Sparsity:
      return x[0] - 0.5 + x[1] * std::sin(4.0 * pi * x[0]);
    case SimKind::Modality: {
      double s = 0.0;
      for (std::size_t i = 1; i <= cf; ++i) s += x[i];
      return x[0] - 0.5 + s / static_cast<double>(cf) * std::sin(4.0 * pi * x[0]);
    }
    case SimKind::Correlated:
      return x[1] * std::sin(4.0 * pi * x[0]) + x[1];
    case SimKind::GenericInteraction:
      return 2.0 * std::sin(pi * x[0]) * std::cos(pi * x[1]) + 0.5 * x[0] * x[0] +
             0.5 * x[1] * x[1];
  }
  return 0.0;
}

Dataset generate(const SimSpec& spec) {
  spec.validate();
  SeededRng rng(SeededRng::derive_seed(spec.seed, 0));
  std::size_t n = 2;
  if (spec.kind == SimKind::Unimodal) n = 1;
  if (spec.kind == SimKind::Modality) n = 1 + spec.cf;

  Dataset d;
  d.features = Matrix(spec.n_samples, n);
  d.targets.resize(spec.n_samples);
  for (std::size_t i = 0; i < n; ++i) d.feature_names.push_back("x" + std::to_string(i + 1));
  d.cardinalities.assign(n, 0);
  d.levels.assign(n, {});
  auto sign = [&rng](double p_plus) { return rng.uniform() < p_plus ? 1.0 : -1.0; };

  for (std::size_t r = 0; r < spec.n_samples; ++r) {
    auto row = d.features.row(r);
    switch (spec.kind) {
      case SimKind::Unimodal:
        row[0] = rng.uniform();
        break;
      case SimKind::Multimodal:
        row[0] = rng.uniform();
        row[1] = sign(0.5);
        break;
      case SimKind::Sparsity:
        row[0] = rng.uniform();
        row[1] = sign(spec.minority_fraction);
        break;
      case SimKind::Modality:
        row[0] = rng.uniform();
        for (std::size_t i = 1; i < n; ++i) row[i] = sign(0.5);
        break;
      case SimKind::Correlated:
        row[0] = rng.uniform();
        row[1] = sign(spec.rho * row[0] + (1.0 - spec.rho) / 2.0);
        break;
      case SimKind::GenericInteraction:
        row[0] = rng.uniform(-1.0, 1.0);
        row[1] = rng.uniform(-1.0, 1.0);
        break;
    }
    const double noise = spec.sigma > 0.0 ? spec.sigma * rng.normal() : 0.0;
    d.targets[r] = closed_form_mean(spec.kind, row, spec.cf) + noise;
  }
  d.splits.assign(spec.n_samples, Split::Train);
  assign_splits(d, SeededRng::derive_seed(spec.seed, 1), spec.train_fraction, spec.val_fraction);
  return d;
}

void assign_splits(Dataset& data, std::uint64_t seed, double train_fraction, double val_fraction) {
  const std::size_t n = data.rows();
  SeededRng rng(seed);
  const auto order = shuffled_indices(n, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_val = std::min(
      n - n_train, static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))));
  data.splits.assign(n, Split::Test);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < n_train)
      data.splits[order[k]] = Split::Train;
    else if (k < n_train + n_val)
      data.splits[order[k]] = Split::Val;
  }
}

QuantileTransform QuantileTransform::fit(const Dataset& data, Split reference) {
  const auto idx = data.indices(reference);
  if (idx.empty()) throw DataError("quantile transform: reference split '" + to_string(reference) + "' is empty");
  QuantileTransform q;
  const std::size_t n = data.n_features();
  q.active_.assign(n, 0);
  q.knots_.resize(n);
  q.scores_.resize(n);
  const double total = static_cast<double>(idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (data.is_categorical(i)) continue;
    q.active_[i] = 1;
    std::vector<double> col;
    col.reserve(idx.size());
    for (std::size_t r : idx) col.push_back(data.features(r, i));
    std::sort(col.begin(), col.end());
    if (col.front() == col.back()) {
      q.warnings_.push_back("feature '" + data.feature_names[i] +
                            "' has zero variance on the reference split; mapped to 0");
      q.knots_[i] = {col.front()};
      q.scores_[i] = {0.0};
      continue;
    }
    std::size_t start = 0;
    while (start < col.size()) {
      std::size_t stop = start;
      while (stop < col.size() && col[stop] == col[start]) ++stop;
      const double avg_rank = 0.5 * static_cast<double>(start + stop - 1);
      q.knots_[i].push_back(col[start]);
      q.scores_[i].push_back(normal_quantile((avg_rank + 0.5) / total));
      start = stop;
    }
  }
  return q;
}

double QuantileTransform::apply_value(std::size_t feature, double x) const {
  if (!active_[feature]) return x;
  const auto& k = knots_[feature];
  const auto& s = scores_[feature];
  if (k.size() == 1) return s[0];
  if (x <= k.front()) return s.front();
  if (x >= k.back()) return s.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), x) - k.begin());
  const std::size_t lo = hi - 1;
  if (x == k[lo]) return s[lo];
  const double w = (x - k[lo]) / (k[hi] - k[lo]);
  return s[lo] + w * (s[hi] - s[lo]);
}

void QuantileTransform::apply(Dataset& data) const {
  if (data.n_features() != n_features())
    throw DataError("quantile transform fitted on " + std::to_string(n_features()) +
                    " features, dataset has " + std::to_string(data.n_features()));
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t i = 0; i < n_features(); ++i)
      data.features(r, i) = apply_value(i, data.features(r, i));
}

Dataset QuantileTransform::applied(const Dataset& data) const {
  Dataset out = data;
  apply(out);
  return out;
}

nlohmann::json QuantileTransform::to_json() const {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < n_features(); ++i)
    features.push_back({{"active", active_[i] != 0}, {"knots", knots_[i]}, {"scores", scores_[i]}});
  return {{"features", features}};
}

QuantileTransform QuantileTransform::from_json(const nlohmann::json& j) {
  QuantileTransform q;
  for (const auto& f : j.at("features")) {
    q.active_.push_back(f.at("active").get<bool>() ? 1 : 0);
    q.knots_.push_back(f.at("knots").get<std::vector<double>>());
    q.scores_.push_back(f.at("scores").get<std::vector<double>>());
    if (q.knots_.back().size() != q.scores_.back().size())
      throw ConfigError("quantile transform: knots and scores differ in length");
  }
  return q;
}

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s;
  if (!j.contains("target")) throw ConfigError("schema: missing key 'target'");
  s.target = j.at("target").get<std::string>();
  s.task = parse_task(j.value("task", std::string("regression")));
  s.categorical = j.value("categorical", std::vector<std::string>{});
  if (j.contains("split")) s.split_column = j.at("split").get<std::string>();
  return s;
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema file '" + path + "': " + e.what());
  }
}

nlohmann::json Schema::to_json() const {
  nlohmann::json j = {{"target", target}, {"task", to_string(task)}, {"categorical", categorical}};
  if (split_column) j["split"] = *split_column;
  return j;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t p = 0; p < line.size(); ++p) {
    const char c = line[p];
    if (quoted) {
      if (c == '"' && p + 1 < line.size() && line[p + 1] == '"') {
        cell.push_back('"');
        ++p;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

bool parse_real(const std::string& s, double& out) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && s[b] == ' ') ++b;
  while (e > b && s[e - 1] == ' ') --e;
  if (b == e) return false;
  const char* first = s.data() + b;
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + e, out);
  return res.ec == std::errc() && res.ptr == s.data() + e && std::isfinite(out);
}

std::string quote_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

}  // namespace

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file, expected a header row");
  const auto header = split_csv_line(line);

  std::ptrdiff_t target_col = -1;
  std::ptrdiff_t split_col = -1;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.target)
      target_col = static_cast<std::ptrdiff_t>(c);
    else if (schema.split_column && header[c] == *schema.split_column)
      split_col = static_cast<std::ptrdiff_t>(c);
    else
      feature_cols.push_back(c);
  }
  if (target_col < 0) throw DataError(path + ": missing target column '" + schema.target + "'");
  if (schema.split_column && split_col < 0)
    throw DataError(path + ": missing split column '" + *schema.split_column + "'");
  for (const auto& name : schema.categorical)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw DataError(path + ": categorical column '" + name + "' not in header");

  Dataset d;
  d.task = schema.task;
  const std::size_t n = feature_cols.size();
  for (std::size_t c : feature_cols) d.feature_names.push_back(header[c]);
  d.cardinalities.assign(n, 0);
  d.levels.assign(n, {});
  std::vector<bool> categorical(n, false);
  std::vector<std::map<std::string, std::size_t>> codes(n);
  for (std::size_t i = 0; i < n; ++i)
    categorical[i] = std::find(schema.categorical.begin(), schema.categorical.end(),
                               d.feature_names[i]) != schema.categorical.end();

  std::vector<double> values;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_csv_line(line);
    const std::string where = path + ": row " + std::to_string(row) + " (line " +
                              std::to_string(line_no) + ")";
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                      std::to_string(cells.size()));
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = cells[feature_cols[i]];
      double v = 0.0;
      if (categorical[i]) {
        auto [it, inserted] = codes[i].try_emplace(cell, d.levels[i].size());
        if (inserted) d.levels[i].push_back(cell);
        v = static_cast<double>(it->second);
      } else if (!parse_real(cell, v)) {
        throw DataError(where + ": cannot parse '" + cell + "' in column '" + d.feature_names[i] + "'");
      }
      values.push_back(v);
    }
    double y = 0.0;
    const std::string& ycell = cells[static_cast<std::size_t>(target_col)];
    if (!parse_real(ycell, y))
      throw DataError(where + ": cannot parse target '" + ycell + "'");
    if (schema.task == Task::BinaryClassification && y != 0.0 && y != 1.0)
      throw DataError(where + ": binary target must be 0 or 1, found '" + ycell + "'");
    d.targets.push_back(y);
    d.splits.push_back(split_col >= 0 ? parse_split(cells[static_cast<std::size_t>(split_col)])
                                      : Split::Train);
  }
  d.features = Matrix(row, n);
  std::copy(values.begin(), values.end(), d.features.data());
  for (std::size_t i = 0; i < n; ++i)
    if (categorical[i]) d.cardinalities[i] = d.levels[i].size();
  return d;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& target_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file '" + path + "'");
  for (std::size_t i = 0; i < data.n_features(); ++i) out << quote_cell(data.feature_names[i]) << ',';
  out << quote_cell(target_name) << ",split\n";
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t i = 0; i < data.n_features(); ++i) {
      const double v = data.features(r, i);
      if (data.is_categorical(i))
        out << quote_cell(data.levels[i][static_cast<std::size_t>(v)]);
      else
        out << format_real(v);
      out << ',';
    }
    out << format_real(data.targets[r]) << ',' << to_string(data.splits[r]) << '\n';
  }
  if (!out) throw DataError("failed writing CSV file '" + path + "'");
}

}  // namespace nae
