// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

// nae: simulate data, train NAE models, export shapes, verify constructions, sweep lambda.
// Exit codes: 0 success, 1 failed check or divergence, 2 usage/config/data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nae/checkpoint.hpp"
#include "nae/data.hpp"
#include "nae/errors.hpp"
#include "nae/metrics.hpp"
#include "nae/run_config.hpp"
#include "nae/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct SimulateArgs {
  std::string kind = "multimodal";
  std::size_t n = 10000;
  double sigma = 0.1;
  double minority_fraction = 0.5;
  std::size_t cf = 1;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::string out = "data.csv";
};

struct TrainArgs {
  std::string config;
  std::string output_dir;
  bool quiet = false;
};

struct ExportArgs {
  std::string checkpoint;
  std::string data;
  std::string schema;
  std::string outdir = "shapes";
  std::vector<std::string> pairs;
  std::size_t grid_points = 0;
};

struct TheoryArgs {
  std::size_t grid = 101;
  std::size_t knots = 2001;
  double perturb = 0.0;
};

struct SweepArgs {
  std::string config;
  std::string lambdas = "0.1,1,10";
  std::size_t jobs = 1;
  std::string out;
};

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nae::ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

int cmd_simulate(const SimulateArgs& a) {
  nae::SimSpec spec;
  spec.kind = nae::parse_sim_kind(a.kind);
  spec.n_samples = a.n;
  spec.sigma = a.sigma;
  spec.minority_fraction = a.minority_fraction;
  spec.cf = a.cf;
  spec.rho = a.rho;
  spec.seed = a.seed;
  const nae::Dataset d = nae::generate(spec);
  nae::write_csv(d, a.out, "y");
  nae::Schema schema{"y", nae::Task::Regression, {}, std::string("split")};
  json sidecar = schema.to_json();
  sidecar["simulation"] = spec.to_json();
  write_json(sidecar, a.out + ".json");
  std::printf("wrote %zu rows to %s (schema and spec in %s.json)\n", d.rows(), a.out.c_str(), a.out.c_str());
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  nae::RunConfig run = nae::RunConfig::load(a.config);
  if (!a.output_dir.empty()) run.output_dir = a.output_dir;
  const nae::PreparedData data = nae::prepare_data(run);
  for (const auto& w : data.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  auto progress = [&](const nae::EpochLog& e) {
    if (!a.quiet)
      std::fprintf(stderr, "epoch %zu lr %.3g loss %.6g penalty %.6g val %.6g\n", e.epoch, e.lr,
                   e.train_loss, e.penalty, e.val_metric);
  };
  const nae::RunOutcome outcome = nae::execute_run(run, data, progress);
  nae::write_run_outputs(outcome, run.output_dir);
  std::printf("%s\n", outcome.metrics.dump(2).c_str());
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s + "]";
}

std::size_t parse_index(const std::string& s) {
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw nae::UsageError("cannot parse feature index '" + s + "'");
  }
}

int cmd_export_shapes(const ExportArgs& a) {
  const nae::Checkpoint ck = nae::load_checkpoint(a.checkpoint);
  std::string schema_path = a.schema.empty() ? a.data + ".json" : a.schema;
  if (!fs::exists(schema_path)) throw nae::UsageError("no schema given and '" + schema_path + "' does not exist");
  nae::Dataset data = nae::load_csv(a.data, nae::Schema::load(schema_path));
  if (data.feature_names != ck.feature_names)
    throw nae::DataError("dataset does not match the checkpoint schema: expected features " +
                         join(ck.feature_names) + ", found " + join(data.feature_names));
  for (std::size_t i = 0; i < data.n_features(); ++i)
    if (data.cardinalities[i] != ck.model.cardinality(i))
      throw nae::DataError("feature '" + data.feature_names[i] + "': expected " +
                           std::to_string(ck.model.cardinality(i)) + " categories, found " +
                           std::to_string(data.cardinalities[i]));

  nae::MetricsConfig cfg;
  if (a.grid_points) cfg.grid_points = a.grid_points;
  const nae::QuantileTransform* transform = ck.transform ? &*ck.transform : nullptr;
  std::vector<std::string> warnings;
  const auto records = nae::extract_shapes(ck.params, ck.model, data, cfg, transform, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  fs::create_directories(a.outdir);
  std::ofstream index(fs::path(a.outdir) / "index.csv", std::ios::binary);
  index << "feature,name,file\n";
  for (std::size_t i = 0; i < data.n_features(); ++i) {
    std::vector<nae::ShapeRecord> mine;
    for (const auto& r : records)
      if (r.feature == i) mine.push_back(r);
    if (mine.empty()) continue;
    const std::string file = "shape_" + data.feature_names[i] + ".csv";
    nae::write_shape_csv(mine, (fs::path(a.outdir) / file).string());
    index << i << ',' << data.feature_names[i] << ',' << file << '\n';
  }
  for (const auto& pair : a.pairs) {
    const auto parts = split_list(pair, ',');
    if (parts.size() != 2) throw nae::UsageError("--pairs expects i,j (got '" + pair + "')");
    const std::size_t i = parse_index(parts[0]);
    const std::size_t j = parse_index(parts[1]);
    const auto grid = nae::extract_interaction(ck.params, ck.model, data, i, j, cfg, transform);
    const std::string file = "interaction_" + std::to_string(i) + "_" + std::to_string(j) + ".csv";
    nae::write_interaction_csv(grid, (fs::path(a.outdir) / file).string());
  }
  std::printf("wrote shapes for %zu features to %s\n", data.n_features(), a.outdir.c_str());
  return kExitOk;
}

int cmd_verify_theory(const TheoryArgs& a) {
  nae::TheoryOptions opt;
  opt.eval_grid = a.grid;
  opt.knots = a.knots;
  opt.beta_perturbation = a.perturb;
  bool ok = true;
  for (const auto& c : nae::run_theory_checks(opt)) {
    std::printf("%-30s %s  measured=%.3e  tol=%.1e\n", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.measured, c.tolerance);
    ok = ok && c.passed;
  }
  if (!ok) std::fprintf(stderr, "verify-theory: one or more checks failed\n");
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_sweep_lambda(const SweepArgs& a) {
  const nae::RunConfig run = nae::RunConfig::load(a.config);
  std::vector<double> lambdas;
  for (const auto& s : split_list(a.lambdas, ',')) {
    try {
      std::size_t pos = 0;
      lambdas.push_back(std::stod(s, &pos));
      if (pos != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw nae::UsageError("cannot parse lambda value '" + s + "'");
    }
  }
  const nae::SweepReport report = nae::lambda_monotonicity_experiment(run, lambdas, a.jobs);
  const json j = report.to_json();
  const std::string out = a.out.empty() ? (fs::path(run.output_dir) / "sweep_report.json").string() : a.out;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_json(j, out);
  std::printf("%s\n", j.dump(2).c_str());
  return report.all_pass() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Additive Experts: simulate, train, export and verify"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset as CSV");
  simulate->add_option("--kind", sim.kind, "unimodal|multimodal|sparsity|modality|correlated|generic_interaction");
  simulate->add_option("--n", sim.n, "Number of samples")->check(CLI::PositiveNumber);
  simulate->add_option("--sigma", sim.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  simulate->add_option("--minority-fraction", sim.minority_fraction, "P(x2 = +1) for sparsity");
  simulate->add_option("--cf", sim.cf, "Number of +/-1 features for modality");
  simulate->add_option("--rho", sim.rho, "Correlation strength for correlated");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out, "Output CSV path");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("config", tr.config, "Run config JSON")->required();
  train->add_option("--output-dir", tr.output_dir, "Override the config's output_dir");
  train->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  ExportArgs ex;
  auto* exp = app.add_subcommand("export-shapes", "Export shape functions and interaction grids");
  exp->add_option("--checkpoint", ex.checkpoint, "checkpoint.json")->required();
  exp->add_option("--data", ex.data, "Dataset CSV (raw feature values)")->required();
  exp->add_option("--schema", ex.schema, "Schema JSON (default: <data>.json)");
  exp->add_option("--outdir", ex.outdir, "Output directory");
  exp->add_option("--pairs", ex.pairs, "Feature pair i,j for an interaction grid (repeatable)");
  exp->add_option("--grid-points", ex.grid_points, "Grid points per feature");

  TheoryArgs th;
  auto* theory = app.add_subcommand("verify-theory", "Check the exact constructions");
  theory->add_option("--grid", th.grid, "Verification grid points per axis")->check(CLI::Range(2, 100000));
  theory->add_option("--knots", th.knots, "Minimum lookup-table knots per feature");
  theory->add_option("--perturb", th.perturb, "Offset added to every tabulated gate value");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep-lambda", "Train one model per lambda and check monotonicity");
  sweep->add_option("config", sw.config, "Run config JSON")->required();
  sweep->add_option("--lambdas", sw.lambdas, "Comma-separated lambda values");
  sweep->add_option("--jobs", sw.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sw.out, "Report path (default: <output_dir>/sweep_report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*train) return cmd_train(tr);
    if (*exp) return cmd_export_shapes(ex);
    if (*theory) return cmd_verify_theory(th);
    if (*sweep) return cmd_sweep_lambda(sw);
  } catch (const nae::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  } catch (const nae::ConstructionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  } catch (const nae::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
