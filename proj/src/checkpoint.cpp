// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/checkpoint.hpp"

#include <fstream>
#include <set>

#include "nae/errors.hpp"

namespace nae {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

template <class T>
T required(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing required key '" + where + "." + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + where + "." + key + "' has the wrong type");
  }
}

template <class T>
T optional(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  return required<T>(j, key, where);
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"n_features", c.n_features},
          {"layers", c.encoder_layers},
          {"hidden_dimension", c.encoder_hidden},
          {"latent_dimension", c.latent_dim},
          {"total_experts", c.n_experts},
          {"activated_experts", c.n_active},
          {"variant", to_string(c.variant)},
          {"gumbel_tau", c.gumbel_tau},
          {"normalization", to_string(c.normalization)},
          {"cardinalities", c.cardinalities}};
}

ModelConfig model_config_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"n_features", "layers", "hidden_dimension", "latent_dimension", "total_experts",
                  "activated_experts", "variant", "gumbel_tau", "normalization", "cardinalities"},
                 where);
  ModelConfig c;
  c.n_features = optional<std::size_t>(j, "n_features", where, 1);
  c.encoder_layers = required<std::size_t>(j, "layers", where);
  c.encoder_hidden = required<std::size_t>(j, "hidden_dimension", where);
  c.latent_dim = required<std::size_t>(j, "latent_dimension", where);
  c.n_experts = required<std::size_t>(j, "total_experts", where);
  c.n_active = required<std::size_t>(j, "activated_experts", where);
  c.variant = parse_variant(optional<std::string>(j, "variant", where, "standard"));
  c.gumbel_tau = optional<double>(j, "gumbel_tau", where, 0.1);
  c.normalization = parse_normalization(optional<std::string>(j, "normalization", where, "layer_norm"));
  c.cardinalities = optional<std::vector<std::size_t>>(j, "cardinalities", where, {});
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"task", to_string(c.task)},
          {"variation_penalty", c.lambda_var},
          {"output_penalty", c.output_penalty},
          {"weight_decay", c.weight_decay},
          {"learning_rate", c.learning_rate},
          {"max_iteration", c.max_iterations},
          {"batch_size", c.batch_size},
          {"dropout", c.dropout},
          {"dropout_expert", c.dropout_expert},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"task", "variation_penalty", "output_penalty", "weight_decay", "learning_rate",
                  "max_iteration", "batch_size", "dropout", "dropout_expert", "seed"},
                 where);
  TrainConfig c;
  c.task = parse_task(optional<std::string>(j, "task", where, "regression"));
  c.lambda_var = required<double>(j, "variation_penalty", where);
  c.output_penalty = optional<double>(j, "output_penalty", where, 0.0);
  c.weight_decay = optional<double>(j, "weight_decay", where, 0.0);
  c.learning_rate = required<double>(j, "learning_rate", where);
  c.max_iterations = required<std::size_t>(j, "max_iteration", where);
  c.batch_size = required<std::size_t>(j, "batch_size", where);
  c.dropout = optional<double>(j, "dropout", where, 0.0);
  c.dropout_expert = optional<double>(j, "dropout_expert", where, 0.0);
  c.seed = optional<std::uint64_t>(j, "seed", where, 0);
  return c;
}

json metrics_config_to_json(const MetricsConfig& c) {
  return {{"delta", c.delta}, {"grid_points", c.grid_points}, {"bins_for_conditional", c.bins_for_conditional}};
}

MetricsConfig metrics_config_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"delta", "grid_points", "bins_for_conditional"}, where);
  MetricsConfig c;
  c.delta = optional<double>(j, "delta", where, c.delta);
  c.grid_points = optional<std::size_t>(j, "grid_points", where, c.grid_points);
  c.bins_for_conditional = optional<std::size_t>(j, "bins_for_conditional", where, c.bins_for_conditional);
  c.validate();
  return c;
}

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw ConfigError("checkpoint tensor: data length does not match shape");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

namespace {

json dense_to_json(const DenseLayer& l) {
  return {{"weight", matrix_to_json(l.weight)}, {"bias", matrix_to_json(l.bias)}};
}

DenseLayer dense_from_json(const json& j) {
  return {matrix_from_json(j.at("weight")), matrix_from_json(j.at("bias"))};
}

}  // namespace

json params_to_json(const NaeParams& p) {
  json features = json::array();
  for (const auto& f : p.features) {
    json enc;
    if (const auto* mlp = std::get_if<MlpEncoder>(&f.encoder)) {
      enc["type"] = "mlp";
      enc["layers"] = json::array();
      for (const auto& l : mlp->layers) enc["layers"].push_back(dense_to_json(l));
      enc["norms"] = json::array();
      for (const auto& n : mlp->norms)
        enc["norms"].push_back({{"gain", matrix_to_json(n.gain)},
                                {"shift", matrix_to_json(n.shift)},
                                {"running_mean", matrix_to_json(n.running_mean)},
                                {"running_var", matrix_to_json(n.running_var)}});
    } else {
      const auto& lk = std::get<LookupEncoder>(f.encoder);
      enc = {{"type", "lookup"}, {"lo", lk.lo}, {"hi", lk.hi}, {"table", matrix_to_json(lk.table)}};
    }
    features.push_back({{"encoder", enc}, {"experts", dense_to_json(f.experts)}});
  }
  json gate = json::array();
  for (const auto& a : p.gate) gate.push_back(matrix_to_json(a));
  return {{"features", features},
          {"gate", gate},
          {"gate_bias", matrix_to_json(p.gate_bias)},
          {"intercept", matrix_to_json(p.intercept)}};
}

NaeParams params_from_json(const json& j) {
  NaeParams p;
  for (const auto& f : j.at("features")) {
    FeatureParams fp;
    const auto& enc = f.at("encoder");
    const auto type = enc.at("type").get<std::string>();
    if (type == "mlp") {
      MlpEncoder mlp;
      for (const auto& l : enc.at("layers")) mlp.layers.push_back(dense_from_json(l));
      for (const auto& n : enc.at("norms"))
        mlp.norms.push_back({matrix_from_json(n.at("gain")), matrix_from_json(n.at("shift")),
                             matrix_from_json(n.at("running_mean")), matrix_from_json(n.at("running_var"))});
      fp.encoder = std::move(mlp);
    } else if (type == "lookup") {
      LookupEncoder lk;
      lk.lo = enc.at("lo").get<double>();
      lk.hi = enc.at("hi").get<double>();
      lk.table = matrix_from_json(enc.at("table"));
      fp.encoder = std::move(lk);
    } else {
      throw ConfigError("checkpoint: unknown encoder type '" + type + "'");
    }
    fp.experts = dense_from_json(f.at("experts"));
    p.features.push_back(std::move(fp));
  }
  for (const auto& a : j.at("gate")) p.gate.push_back(matrix_from_json(a));
  p.gate_bias = matrix_from_json(j.at("gate_bias"));
  p.intercept = matrix_from_json(j.at("intercept"));
  return p;
}

json Checkpoint::to_json() const {
  json j = {{"format_version", format_version},
            {"model", model_config_to_json(model)},
            {"train", train_config_to_json(train)},
            {"feature_names", feature_names},
            {"levels", levels},
            {"seeds", seeds},
            {"best_epoch", best_epoch},
            {"params", params_to_json(params)}};
  j["quantile_transform"] = transform ? transform->to_json() : json(nullptr);
  return j;
}

Checkpoint Checkpoint::from_json(const json& j) {
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointFormatVersion)
      throw ConfigError("checkpoint format_version " + std::to_string(c.format_version) +
                        " is not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    c.model = model_config_from_json(j.at("model"));
    c.train = train_config_from_json(j.at("train"));
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    c.levels = j.at("levels").get<std::vector<std::vector<std::string>>>();
    c.seeds = j.at("seeds");
    c.best_epoch = j.at("best_epoch").get<std::size_t>();
    c.params = params_from_json(j.at("params"));
    if (!j.at("quantile_transform").is_null())
      c.transform = QuantileTransform::from_json(j.at("quantile_transform"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
  c.validate();
  return c;
}

void Checkpoint::validate() const {
  model.validate();
  const std::size_t n = model.n_features;
  const std::size_t k = model.n_experts;
  const std::size_t d = model.latent_dim;
  if (params.features.size() != n) throw ConfigError("checkpoint: feature count differs from config");
  if (feature_names.size() != n) throw ConfigError("checkpoint: feature_names length differs from config");
  const std::size_t blocks = model.variant == Variant::Diagonal ? n : n * n;
  if (params.gate.size() != blocks) throw ConfigError("checkpoint: gate block count does not fit the variant");
  for (const auto& a : params.gate)
    if (a.rows() != d || a.cols() != k) throw ConfigError("checkpoint: gate block shape mismatch");
  if (params.gate_bias.rows() != n || params.gate_bias.cols() != k)
    throw ConfigError("checkpoint: gate_bias shape mismatch");
  for (const auto& f : params.features)
    if (f.experts.weight.rows() != d || f.experts.weight.cols() != k)
      throw ConfigError("checkpoint: expert head shape mismatch");
  if (!params.all_finite()) throw NumericalError("checkpoint", "non-finite parameter");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << ckpt.to_json().dump(1) << '\n';
  if (!out) throw ConfigError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return Checkpoint::from_json(j);
}

}  // namespace nae
