// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nae/errors.hpp"
#include "nae/metrics.hpp"

namespace nae {

void TrainConfig::validate() const {
  if (!(lambda_var >= 0.0)) throw ConfigError("variation_penalty must be >= 0");
  if (!(output_penalty >= 0.0)) throw ConfigError("output_penalty must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(dropout_expert >= 0.0 && dropout_expert < 1.0))
    throw ConfigError("dropout_expert must lie in [0, 1)");
}

double task_loss(Task task, double y_true, double y_pred) {
  if (!std::isfinite(y_true) || !std::isfinite(y_pred))
    throw NumericalError("task_loss", "non-finite input");
  if (task == Task::Regression) return (y_true - y_pred) * (y_true - y_pred);
  // -[y log s(z) + (1 - y) log(1 - s(z))] = softplus(z) - y z, written to avoid cancellation.
  if (y_true == 1.0) return softplus(-y_pred);
  if (y_true == 0.0) return softplus(y_pred);
  return softplus(y_pred) - y_true * y_pred;
}

double task_loss_grad(Task task, double y_true, double y_pred) {
  if (task == Task::Regression) return 2.0 * (y_pred - y_true);
  return sigmoid(y_pred) - y_true;
}

double variation_penalty(const BatchTrace& trace) {
  const std::size_t n = trace.expert_outputs.size();
  if (n == 0 || trace.batch == 0) return 0.0;
  const std::size_t k = trace.expert_outputs[0].cols();
  double total = 0.0;
  for (const Matrix& o : trace.expert_outputs) {
    for (std::size_t t = 0; t < trace.batch; ++t) {
      const auto row = o.row(t);
      if (std::all_of(row.begin(), row.end(), [&](double v) { return v == row[0]; })) continue;
      double mean = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(k);
      for (double v : row) total += (v - mean) * (v - mean);
    }
  }
  return total / static_cast<double>(n * trace.batch * k);
}

double output_penalty(const BatchTrace& trace) {
  const Matrix& c = trace.contributions;
  if (c.size() == 0) return 0.0;
  double total = 0.0;
  for (double v : c.values()) total += v * v;
  return total / static_cast<double>(c.size());
}

LossTerms objective(const BatchTrace& trace, std::span<const double> targets,
                    const TrainConfig& train_config) {
  if (targets.size() != trace.batch) throw ConfigError("objective: target count mismatch");
  LossTerms terms;
  for (std::size_t t = 0; t < trace.batch; ++t)
    terms.task += task_loss(train_config.task, targets[t], trace.predictions[t]);
  terms.task /= static_cast<double>(trace.batch);
  terms.variation = variation_penalty(trace);
  terms.output = output_penalty(trace);
  terms.total = terms.task + train_config.lambda_var * terms.variation +
                train_config.output_penalty * terms.output;
  return terms;
}

namespace {

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t t = 0; t < m.rows(); ++t)
    for (std::size_t c = 0; c < m.cols(); ++c) s(0, c) += m(t, c);
  return s;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t e = 0; e < dst.size(); ++e) dst.values()[e] += src.values()[e];
}

// Softmax backward over the active set: ds_k = r_k (dr_k - sum_l r_l dr_l).
void softmax_backward(std::span<const double> r, std::span<const double> dr,
                      std::span<const double> active, std::span<double> ds) {
  double dot = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (active[k] != 0.0) dot += r[k] * dr[k];
  for (std::size_t k = 0; k < r.size(); ++k)
    ds[k] = active[k] != 0.0 ? r[k] * (dr[k] - dot) : 0.0;
}

void mlp_backward(const MlpEncoder& enc, MlpEncoder& grad, Normalization kind, Mode mode,
                  const EncoderCache& cache, const std::vector<Matrix>& dropout_masks,
                  Matrix d_out) {
  const std::size_t b = cache.input.rows();
  for (std::size_t l = enc.layers.size(); l-- > 0;) {
    Matrix dy = std::move(d_out);
    if (!dropout_masks.empty())
      for (std::size_t e = 0; e < dy.size(); ++e) dy.values()[e] *= dropout_masks[l].values()[e];
    const Matrix& act = cache.activated[l];
    for (std::size_t e = 0; e < dy.size(); ++e)
      if (!(act.values()[e] > 0.0)) dy.values()[e] = 0.0;

    Matrix dz;
    if (l >= 1) {
      const NormLayer& norm = enc.norms[l - 1];
      NormLayer& gnorm = grad.norms[l - 1];
      const Matrix& xhat = cache.normalized[l];
      const std::vector<double>& inv = cache.inv_std[l];
      const std::size_t w = dy.cols();
      Matrix dxhat(b, w);
      for (std::size_t t = 0; t < b; ++t)
        for (std::size_t c = 0; c < w; ++c) {
          gnorm.gain(0, c) += dy(t, c) * xhat(t, c);
          gnorm.shift(0, c) += dy(t, c);
          dxhat(t, c) = dy(t, c) * norm.gain(0, c);
        }
      dz = Matrix(b, w);
      if (kind == Normalization::LayerNorm) {
        const double wd = static_cast<double>(w);
        for (std::size_t t = 0; t < b; ++t) {
          double s1 = 0.0;
          double s2 = 0.0;
          for (std::size_t c = 0; c < w; ++c) {
            s1 += dxhat(t, c);
            s2 += dxhat(t, c) * xhat(t, c);
          }
          for (std::size_t c = 0; c < w; ++c)
            dz(t, c) = inv[t] / wd * (wd * dxhat(t, c) - s1 - xhat(t, c) * s2);
        }
      } else if (mode == Mode::Train) {
        const double bd = static_cast<double>(b);
        for (std::size_t c = 0; c < w; ++c) {
          double s1 = 0.0;
          double s2 = 0.0;
          for (std::size_t t = 0; t < b; ++t) {
            s1 += dxhat(t, c);
            s2 += dxhat(t, c) * xhat(t, c);
          }
          for (std::size_t t = 0; t < b; ++t)
            dz(t, c) = inv[c] / bd * (bd * dxhat(t, c) - s1 - xhat(t, c) * s2);
        }
      } else {
        for (std::size_t t = 0; t < b; ++t)
          for (std::size_t c = 0; c < w; ++c) dz(t, c) = dxhat(t, c) * inv[c];
      }
    } else {
      dz = std::move(dy);
    }

    const Matrix& in = l == 0 ? cache.input : cache.output[l - 1];
    matmul_tn_accumulate(in, dz, grad.layers[l].weight);
    add_into(grad.layers[l].bias, column_sums(dz));
    if (l > 0) d_out = matmul_nt(dz, enc.layers[l].weight);
  }
}

}  // namespace

GradientSet backward(const NaeParams& params, const ModelConfig& config,
                     const TrainConfig& train_config, std::span<const double> targets,
                     const BatchTrace& trace) {
  const std::size_t n = config.n_features;
  const std::size_t k = config.n_experts;
  const std::size_t b = trace.batch;
  if (targets.size() != b) throw ConfigError("backward: target count mismatch");
  GradientSet gs{zeros_like(params)};
  NaeParams& g = gs.grads;

  std::vector<double> dpred(b);
  for (std::size_t t = 0; t < b; ++t)
    dpred[t] = task_loss_grad(train_config.task, targets[t], trace.predictions[t]) /
               static_cast<double>(b);
  for (double v : dpred) g.intercept(0, 0) += v;

  const double out_scale = 2.0 * train_config.output_penalty / static_cast<double>(n * b);
  const double var_scale = 2.0 * train_config.lambda_var / static_cast<double>(n * b * k);
  const bool expert_dropout = !trace.draws.expert_keep.empty();

  std::vector<Matrix> d_logits(n, Matrix(b, k));
  std::vector<Matrix> d_enc(n);
  std::vector<double> dr(k);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& o = trace.expert_outputs[i];
    const Matrix& r = trace.relevances[i];
    const Matrix& active = trace.active[i];
    Matrix d_o(b, k);
    for (std::size_t t = 0; t < b; ++t) {
      const double dc = dpred[t] + out_scale * trace.contributions(t, i);
      const auto orow = o.row(t);
      double mean = 0.0;
      for (double v : orow) mean += v;
      mean /= static_cast<double>(k);
      for (std::size_t c = 0; c < k; ++c) {
        const double keep = expert_dropout ? trace.draws.expert_keep[i](t, c) : 1.0;
        d_o(t, c) = dc * r(t, c) * keep + var_scale * (orow[c] - mean);
        dr[c] = dc * keep * orow[c];
      }
      auto ds = d_logits[i].row(t);
      // Even: r is uniform on the active set, so this is the softmax Jacobian at that point.
      softmax_backward(r.row(t), dr, active.row(t), ds);
      // The log-sum-exp shift inside the Gumbel logits has zero net gradient since the
      // softmax gradient sums to zero; only the 1/tau scale remains.
      if (trace.gumbel_applied)
        for (double& v : ds) v /= config.gumbel_tau;
    }

    const DenseLayer& heads = params.features[i].experts;
    matmul_tn_accumulate(trace.encodings[i], d_o, g.features[i].experts.weight);
    add_into(g.features[i].experts.bias, column_sums(d_o));
    d_enc[i] = matmul_nt(d_o, heads.weight);
  }

  for (std::size_t j = 0; j < n; ++j) {
    const Matrix& dphi = d_logits[j];
    for (std::size_t t = 0; t < b; ++t)
      for (std::size_t c = 0; c < k; ++c) g.gate_bias(j, c) += dphi(t, c);
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix* a = params.gate_block(i, j);
      if (!a) continue;
      matmul_tn_accumulate(trace.encodings[i], dphi, *g.gate_block(i, j));
      add_into(d_enc[i], matmul_nt(dphi, *a));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto* mlp = std::get_if<MlpEncoder>(&params.features[i].encoder);
    if (!mlp) continue;
    auto& gmlp = std::get<MlpEncoder>(g.features[i].encoder);
    static const std::vector<Matrix> no_masks;
    const auto& masks = trace.draws.encoder_dropout.empty() ? no_masks : trace.draws.encoder_dropout[i];
    mlp_backward(*mlp, gmlp, config.normalization, trace.mode, trace.encoders[i], masks,
                 std::move(d_enc[i]));
  }

  for (const auto& t : trainable_tensors(std::as_const(g)))
    if (!t.tensor->all_finite()) throw NumericalError("gradient of " + t.name, "non-finite value");
  return gs;
}

AdamState AdamState::like(const NaeParams& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

void adamw_step(NaeParams& params, const GradientSet& grads, AdamState& state, double lr,
                double weight_decay) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  auto p = trainable_tensors(params);
  const auto g = trainable_tensors(grads.grads);
  auto m = trainable_tensors(state.m);
  auto v = trainable_tensors(state.v);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ConfigError("adamw_step: parameter/gradient/state structure mismatch");
  for (std::size_t s = 0; s < p.size(); ++s) {
    double* pw = p[s].tensor->data();
    const double* gw = g[s].tensor->data();
    double* mw = m[s].tensor->data();
    double* vw = v[s].tensor->data();
    const std::size_t size = p[s].tensor->size();
    if (g[s].tensor->size() != size || m[s].tensor->size() != size)
      throw ConfigError("adamw_step: shape mismatch for " + p[s].name);
    for (std::size_t e = 0; e < size; ++e) {
      mw[e] = kAdamBeta1 * mw[e] + (1.0 - kAdamBeta1) * gw[e];
      vw[e] = kAdamBeta2 * vw[e] + (1.0 - kAdamBeta2) * gw[e] * gw[e];
      const double mhat = mw[e] / bc1;
      const double vhat = vw[e] / bc2;
      pw[e] -= lr * weight_decay * pw[e];
      pw[e] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) return lr0;
  const double frac = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return std::max(0.0, lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

namespace {

constexpr std::size_t kEvalChunk = 2048;

void append_rows(Matrix& dst, std::size_t offset, const Matrix& src) {
  std::copy_n(src.data(), src.size(), dst.data() + offset * src.cols());
}

}  // namespace

BatchTrace evaluate(const NaeParams& params, const ModelConfig& config, const Matrix& x) {
  const std::size_t rows = x.rows();
  const std::size_t n = config.n_features;
  const std::size_t k = config.n_experts;
  BatchTrace out;
  out.batch = rows;
  out.mode = Mode::Eval;
  out.encodings.assign(n, Matrix(rows, config.latent_dim));
  out.expert_outputs.assign(n, Matrix(rows, k));
  out.gate_logits.assign(n, Matrix(rows, k));
  out.active.assign(n, Matrix(rows, k));
  out.relevances.assign(n, Matrix(rows, k));
  out.contributions = Matrix(rows, n);
  out.predictions.reserve(rows);
  SeededRng unused(0);
  for (std::size_t start = 0; start < rows; start += kEvalChunk) {
    const std::size_t stop = std::min(rows, start + kEvalChunk);
    Matrix chunk(stop - start, x.cols());
    std::copy(x.data() + start * x.cols(), x.data() + stop * x.cols(), chunk.data());
    const BatchTrace tr = forward_batch(params, config, chunk, Mode::Eval, unused);
    for (std::size_t i = 0; i < n; ++i) {
      append_rows(out.encodings[i], start, tr.encodings[i]);
      append_rows(out.expert_outputs[i], start, tr.expert_outputs[i]);
      append_rows(out.gate_logits[i], start, tr.gate_logits[i]);
      append_rows(out.active[i], start, tr.active[i]);
      append_rows(out.relevances[i], start, tr.relevances[i]);
    }
    append_rows(out.contributions, start, tr.contributions);
    out.predictions.insert(out.predictions.end(), tr.predictions.begin(), tr.predictions.end());
  }
  return out;
}

std::vector<double> predict(const NaeParams& params, const ModelConfig& config, const Matrix& x) {
  std::vector<double> preds;
  preds.reserve(x.rows());
  SeededRng unused(0);
  for (std::size_t start = 0; start < x.rows(); start += kEvalChunk) {
    const std::size_t stop = std::min(x.rows(), start + kEvalChunk);
    Matrix chunk(stop - start, x.cols());
    std::copy(x.data() + start * x.cols(), x.data() + stop * x.cols(), chunk.data());
    const BatchTrace tr = forward_batch(params, config, chunk, Mode::Eval, unused);
    preds.insert(preds.end(), tr.predictions.begin(), tr.predictions.end());
  }
  return preds;
}

double task_metric(Task task, std::span<const double> targets, std::span<const double> predictions) {
  if (task == Task::Regression) return rmse(targets, predictions);
  return auc(targets, predictions);
}

bool metric_improves(Task task, double a, double b) {
  return task == Task::Regression ? a < b : a > b;
}

TrainResult train(const Dataset& data, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  model_config.validate();
  train_config.validate();
  if (data.n_features() != model_config.n_features)
    throw ConfigError("train: dataset has " + std::to_string(data.n_features()) +
                      " features, model expects " + std::to_string(model_config.n_features));
  if (data.task != train_config.task) throw ConfigError("train: dataset task differs from train config task");

  const auto train_idx = data.indices(Split::Train);
  if (train_idx.empty()) throw DataError("train: the training split is empty");
  auto val_idx = data.indices(Split::Val);
  if (val_idx.empty()) val_idx = train_idx;
  const Matrix x_val = gather_rows(data.features, val_idx);
  std::vector<double> y_val;
  for (std::size_t r : val_idx) y_val.push_back(data.targets[r]);

  SeededRng init_rng(SeededRng::derive_seed(train_config.seed, kInitStream));
  SeededRng shuffle_rng(SeededRng::derive_seed(train_config.seed, kShuffleStream));
  SeededRng noise_rng(SeededRng::derive_seed(train_config.seed, kNoiseStream));

  NaeParams params = init_params(model_config, init_rng);
  {
    double mean = 0.0;
    for (std::size_t r : train_idx) mean += data.targets[r];
    mean /= static_cast<double>(train_idx.size());
    if (train_config.task == Task::Regression) {
      params.intercept(0, 0) = mean;
    } else {
      const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
      params.intercept(0, 0) = std::log(p / (1.0 - p));
    }
  }
  AdamState adam = AdamState::like(params);

  const std::size_t n_train = train_idx.size();
  const std::size_t bs = std::min(train_config.batch_size, n_train);
  const std::size_t steps_per_epoch = (n_train + bs - 1) / bs;
  const std::size_t total_steps = steps_per_epoch * train_config.max_iterations;
  const DropoutRates rates{train_config.dropout, train_config.dropout_expert};

  TrainResult result;
  result.params = params;
  result.best_val_metric = train_config.task == Task::Regression
                               ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  Matrix xb;
  std::vector<double> yb;
  for (std::size_t epoch = 0; epoch < train_config.max_iterations; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = cosine_lr(step, total_steps, train_config.learning_rate);
    const auto order = shuffled_indices(n_train, shuffle_rng);
    double loss_sum = 0.0;
    double penalty_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const std::size_t start = s * bs;
      const std::size_t stop = std::min(n_train, start + bs);
      xb = Matrix(stop - start, data.n_features());
      yb.resize(stop - start);
      for (std::size_t t = start; t < stop; ++t) {
        const std::size_t r = train_idx[order[t]];
        std::copy_n(data.features.row(r).begin(), data.n_features(), xb.row(t - start).begin());
        yb[t - start] = data.targets[r];
      }
      try {
        const BatchTrace tr = forward_batch(params, model_config, xb, Mode::Train, noise_rng, rates);
        const LossTerms terms = objective(tr, yb, train_config);
        if (!std::isfinite(terms.total)) throw NumericalError("objective", "non-finite loss");
        const GradientSet grads = backward(params, model_config, train_config, yb, tr);
        adamw_step(params, grads, adam, cosine_lr(step, total_steps, train_config.learning_rate),
                   train_config.weight_decay);
        update_batchnorm_stats(params, model_config, tr);
        if (!params.all_finite()) throw NumericalError("parameter update", "non-finite parameter");
        const double w = static_cast<double>(stop - start);
        loss_sum += terms.total * w;
        penalty_sum += terms.variation * w;
      } catch (const NumericalError& e) {
        throw NumericalError(e.stage(), std::string("epoch ") + std::to_string(epoch) + " step " +
                                            std::to_string(step) + ": " + e.what());
      }
    }
    entry.train_loss = loss_sum / static_cast<double>(n_train);
    entry.penalty = penalty_sum / static_cast<double>(n_train);
    entry.val_metric = task_metric(train_config.task, y_val, predict(params, model_config, x_val));
    if (metric_improves(train_config.task, entry.val_metric, result.best_val_metric) ||
        result.log.empty()) {
      result.best_val_metric = entry.val_metric;
      result.best_epoch = epoch;
      result.params = params;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

}  // namespace nae
