// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/run_config.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "nae/errors.hpp"

namespace nae {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!std::set<std::string>{"model", "train", "metrics", "data", "output_dir", "seed"}.contains(key))
      throw ConfigError("unknown key '" + key + "'");
  for (const char* key : {"model", "train", "data"})
    if (!j.contains(key)) throw ConfigError(std::string("missing required key '") + key + "'");

  RunConfig r;
  r.model = model_config_from_json(j.at("model"));
  r.train = train_config_from_json(j.at("train"));
  if (j.contains("metrics")) r.metrics = metrics_config_from_json(j.at("metrics"));
  if (j.contains("output_dir")) r.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("key 'seed' must be a nonnegative integer");
    r.seed = j.at("seed").get<std::uint64_t>();
  }

  const json& d = j.at("data");
  if (!d.is_object()) throw ConfigError("'data' must be a JSON object");
  for (const auto& [key, value] : d.items())
    if (!std::set<std::string>{"simulation", "csv", "schema", "quantile_transform"}.contains(key))
      throw ConfigError("unknown key 'data." + key + "'");
  const bool sim = d.contains("simulation");
  const bool csv = d.contains("csv");
  if (sim == csv) throw ConfigError("'data' needs exactly one of 'simulation' or 'csv'");
  if (sim) {
    json spec = d.at("simulation");
    if (!spec.contains("seed")) spec["seed"] = SeededRng::derive_seed(r.seed, kDataSeedOffset);
    try {
      r.data.simulation = SimSpec::from_json(spec);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("data.simulation: ") + e.what());
    }
  } else {
    r.data.csv_path = resolve(base_dir, d.at("csv").get<std::string>());
    if (!d.contains("schema")) throw ConfigError("missing required key 'data.schema'");
    r.data.schema_path = resolve(base_dir, d.at("schema").get<std::string>());
  }
  r.data.quantile_transform = d.value("quantile_transform", true);
  r.train.seed = r.seed;
  return r;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

json RunConfig::to_json() const {
  json model_json = model_config_to_json(model);
  model_json.erase("n_features");
  model_json.erase("cardinalities");
  json train_json = train_config_to_json(train);
  train_json.erase("task");
  train_json.erase("seed");
  json data_json;
  if (data.simulation)
    data_json["simulation"] = data.simulation->to_json();
  else
    data_json = {{"csv", data.csv_path}, {"schema", data.schema_path}};
  data_json["quantile_transform"] = data.quantile_transform;
  return {{"model", model_json},
          {"train", train_json},
          {"metrics", metrics_config_to_json(metrics)},
          {"data", data_json},
          {"output_dir", output_dir},
          {"seed", seed}};
}

PreparedData prepare_data(const RunConfig& run) {
  PreparedData p;
  if (run.data.simulation) {
    p.raw = generate(*run.data.simulation);
  } else {
    const Schema schema = Schema::load(run.data.schema_path);
    p.raw = load_csv(run.data.csv_path, schema);
    if (!schema.split_column)
      assign_splits(p.raw, SeededRng::derive_seed(run.seed, kSplitSeedOffset));
  }
  p.raw.validate();
  if (run.data.quantile_transform) {
    p.transform = QuantileTransform::fit(p.raw, Split::Train);
    p.inputs = p.transform->applied(p.raw);
    p.warnings = p.transform->warnings();
  } else {
    p.inputs = p.raw;
  }
  return p;
}

ModelConfig resolved_model_config(const RunConfig& run, const Dataset& data) {
  ModelConfig c = run.model;
  c.n_features = data.n_features();
  c.cardinalities = data.cardinalities;
  if (std::all_of(c.cardinalities.begin(), c.cardinalities.end(), [](std::size_t v) { return v == 0; }))
    c.cardinalities.clear();
  c.validate();
  return c;
}

TrainConfig resolved_train_config(const RunConfig& run, const Dataset& data) {
  TrainConfig c = run.train;
  c.task = data.task;
  c.seed = run.seed;
  c.validate();
  return c;
}

double eval_penalty(const NaeParams& params, const ModelConfig& config, const Matrix& x) {
  return variation_penalty(evaluate(params, config, x));
}

RunOutcome execute_run(const RunConfig& run, const PreparedData& data, const EpochCallback& on_epoch) {
  const ModelConfig mc = resolved_model_config(run, data.inputs);
  const TrainConfig tc = resolved_train_config(run, data.inputs);
  TrainResult tr = train(data.inputs, mc, tc, on_epoch);

  Split eval_split = Split::Test;
  if (data.inputs.indices(eval_split).empty()) eval_split = Split::Val;
  if (data.inputs.indices(eval_split).empty()) eval_split = Split::Train;
  const auto eval_idx = data.inputs.indices(eval_split);
  const Matrix x_eval = gather_rows(data.inputs.features, eval_idx);
  std::vector<double> y_eval;
  for (std::size_t r : eval_idx) y_eval.push_back(data.inputs.targets[r]);
  const Matrix x_train = gather_rows(data.inputs.features, data.inputs.indices(Split::Train));

  const std::string metric_name = tc.task == Task::Regression ? "rmse" : "auc";
  RunOutcome out;
  out.metrics = {{"task", to_string(tc.task)},
                 {"metric", metric_name},
                 {metric_name, task_metric(tc.task, y_eval, predict(tr.params, mc, x_eval))},
                 {"val_" + metric_name, tr.best_val_metric},
                 {"additivity", model_additivity(tr.params, mc, x_eval, run.metrics)},
                 {"tightness", model_tightness(tr.params, mc, x_eval, run.metrics)},
                 {"penalty", eval_penalty(tr.params, mc, x_train)},
                 {"best_epoch", tr.best_epoch},
                 {"evaluation_split", to_string(eval_split)},
                 {"extra_params", count_extra_params(tr.params)}};

  Checkpoint& ck = out.checkpoint;
  ck.model = mc;
  ck.train = tc;
  ck.params = std::move(tr.params);
  ck.feature_names = data.inputs.feature_names;
  ck.levels = data.inputs.levels;
  ck.transform = data.transform;
  ck.best_epoch = tr.best_epoch;
  ck.seeds = {{"run", run.seed},
              {"init", SeededRng::derive_seed(tc.seed, kInitStream)},
              {"shuffle", SeededRng::derive_seed(tc.seed, kShuffleStream)},
              {"dropout_gumbel", SeededRng::derive_seed(tc.seed, kNoiseStream)}};
  if (run.data.simulation)
    ck.seeds["data"] = run.data.simulation->seed;
  else
    ck.seeds["split"] = SeededRng::derive_seed(run.seed, kSplitSeedOffset);
  out.log = std::move(tr.log);
  return out;
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "epoch,lr,train_loss,penalty,val_metric\n";
  for (const auto& e : log)
    out << e.epoch << ',' << format_real(e.lr) << ',' << format_real(e.train_loss) << ','
        << format_real(e.penalty) << ',' << format_real(e.val_metric) << '\n';
}

void write_run_outputs(const RunOutcome& outcome, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  save_checkpoint(outcome.checkpoint, (fs::path(dir) / "checkpoint.json").string());
  write_train_log(outcome.log, (fs::path(dir) / "train_log.csv").string());
  std::ofstream out(fs::path(dir) / "metrics.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write metrics.json in '" + dir + "'");
  out << outcome.metrics.dump(2) << '\n';
}

json SweepReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json row = {{"lambda", r.lambda}, {"failed", r.failed}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["additivity"] = r.additivity;
      row["tightness"] = r.tightness;
      row["penalty"] = r.penalty;
      row[metric_name] = r.metric;
    }
    rows_json.push_back(row);
  }
  return {{"metric", metric_name},
          {"runs", rows_json},
          {"partial", failed},
          {"verdicts",
           {{"penalty_nonincreasing", penalty_monotone},
            {"additivity_nondecreasing", additivity_monotone},
            {"terminal_additivity", terminal_additivity}}}};
}

bool SweepReport::all_pass() const {
  return !failed && penalty_monotone != "fail" && additivity_monotone != "fail" &&
         terminal_additivity != "fail";
}

SweepReport lambda_monotonicity_experiment(const RunConfig& base, std::vector<double> lambdas,
                                           std::size_t jobs) {
  if (lambdas.empty()) throw ConfigError("lambda sweep needs at least one value");
  for (double l : lambdas)
    if (!(l >= 0.0)) throw ConfigError("lambda values must be >= 0");
  std::sort(lambdas.begin(), lambdas.end());
  const PreparedData data = prepare_data(base);

  SweepReport report;
  report.metric_name = data.inputs.task == Task::Regression ? "rmse" : "auc";
  report.rows.resize(lambdas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < lambdas.size(); r = next++) {
      SweepRow& row = report.rows[r];
      row.lambda = lambdas[r];
      RunConfig rc = base;
      rc.train.lambda_var = lambdas[r];
      try {
        const RunOutcome o = execute_run(rc, data);
        row.additivity = o.metrics.at("additivity").get<double>();
        row.tightness = o.metrics.at("tightness").get<double>();
        row.penalty = o.metrics.at("penalty").get<double>();
        row.metric = o.metrics.at(report.metric_name).get<double>();
      } catch (const NumericalError& e) {
        row.failed = true;
        row.error = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, lambdas.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<const SweepRow*> done;
  for (const auto& row : report.rows) {
    if (row.failed)
      report.failed = true;
    else
      done.push_back(&row);
  }
  if (done.size() < 2) {
    report.penalty_monotone = "vacuous";
    report.additivity_monotone = "vacuous";
  } else {
    bool pen = true;
    bool add = true;
    for (std::size_t r = 1; r < done.size(); ++r) {
      pen = pen && done[r]->penalty <= done[r - 1]->penalty + kPenaltyMonotoneTol;
      add = add && done[r]->additivity >= done[r - 1]->additivity - kPenaltyMonotoneTol;
    }
    report.penalty_monotone = pen ? "pass" : "fail";
    report.additivity_monotone = add ? "pass" : "fail";
  }
  const SweepRow& last = report.rows.back();
  if (last.lambda >= 10.0 && !last.failed)
    report.terminal_additivity = last.additivity >= kTerminalAdditivity ? "pass" : "fail";
  else if (last.lambda >= 10.0)
    report.terminal_additivity = "fail";
  else
    report.terminal_additivity = "not_applicable";
  return report;
}

}  // namespace nae
