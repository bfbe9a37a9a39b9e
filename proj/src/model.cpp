// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nae/errors.hpp"

namespace nae {

namespace {

constexpr double kNormEps = 1e-5;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix row_vector(std::size_t n, double fill = 0.0) { return Matrix(1, n, fill); }

void check_finite(const Matrix& m, const std::string& stage) {
  if (!m.all_finite()) throw NumericalError(stage, "non-finite value");
}

}  // namespace

void ModelConfig::validate() const {
  if (n_features < 1) throw ConfigError("n_features must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (n_experts < 1) throw ConfigError("n_experts must be >= 1");
  if (n_active < 1 || n_active > n_experts)
    throw ConfigError("n_active must lie in [1, n_experts]");
  if (encoder_layers < 1) throw ConfigError("encoder_layers must be >= 1");
  if (encoder_hidden < 1) throw ConfigError("encoder_hidden must be >= 1");
  if (variant == Variant::Diagonal && !(gumbel_tau > 0.0))
    throw ConfigError("gumbel_tau must be > 0 for the diagonal variant");
  if (!cardinalities.empty() && cardinalities.size() != n_features)
    throw ConfigError("cardinalities must be empty or have one entry per feature");
}

std::size_t ModelConfig::input_width(std::size_t feature) const {
  const std::size_t card = cardinality(feature);
  return card == 0 ? 1 : card;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::Diagonal: return "diagonal";
    case Variant::Even: return "even";
  }
  return "standard";
}

std::string to_string(Normalization n) {
  return n == Normalization::LayerNorm ? "layer_norm" : "batch_norm";
}

Variant parse_variant(const std::string& s) {
  if (s == "standard") return Variant::Standard;
  if (s == "diagonal") return Variant::Diagonal;
  if (s == "even") return Variant::Even;
  throw ConfigError("unknown variant '" + s + "' (expected standard|diagonal|even)");
}

Normalization parse_normalization(const std::string& s) {
  if (s == "layer_norm") return Normalization::LayerNorm;
  if (s == "batch_norm") return Normalization::BatchNorm;
  throw ConfigError("unknown normalization '" + s + "' (expected layer_norm|batch_norm)");
}

std::pair<std::size_t, double> LookupEncoder::locate(double x) const {
  const std::size_t knots = table.rows();
  if (knots < 2) return {0, 0.0};
  const double pos = (std::clamp(x, lo, hi) - lo) / (hi - lo) * static_cast<double>(knots - 1);
  auto k = static_cast<std::size_t>(std::floor(pos));
  if (k >= knots - 1) return {knots - 2, 1.0};
  return {k, pos - static_cast<double>(k)};
}

void LookupEncoder::eval(double x, std::span<double> out) const {
  const auto [k, w] = locate(x);
  if (table.rows() < 2) {
    std::copy_n(table.row(0).begin(), out.size(), out.begin());
    return;
  }
  const auto a = table.row(k);
  const auto b = table.row(k + 1);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = w == 0.0 ? a[c] : a[c] + w * (b[c] - a[c]);
}

double LookupEncoder::knot_value(std::size_t k) const {
  if (table.rows() < 2) return lo;
  return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(table.rows() - 1);
}

const Matrix* NaeParams::gate_block(std::size_t i, std::size_t j) const {
  const std::size_t n = features.size();
  if (gate.size() == n * n) return &gate[i * n + j];
  if (i != j) return nullptr;
  return &gate[i];
}

Matrix* NaeParams::gate_block(std::size_t i, std::size_t j) {
  return const_cast<Matrix*>(static_cast<const NaeParams&>(*this).gate_block(i, j));
}

bool NaeParams::all_finite() const {
  bool ok = true;
  for (const auto& t : trainable_tensors(*this)) ok = ok && t.tensor->all_finite();
  return ok;
}

namespace {

template <class Params, class Ref>
std::vector<Ref> collect_tensors(Params& params) {
  std::vector<Ref> out;
  const std::size_t n = params.features.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = params.features[i];
    const std::string prefix = "feature" + std::to_string(i) + ".";
    if (auto* mlp = std::get_if<MlpEncoder>(&f.encoder)) {
      for (std::size_t l = 0; l < mlp->layers.size(); ++l) {
        const std::string lp = prefix + "encoder.layer" + std::to_string(l) + ".";
        out.push_back({lp + "weight", &mlp->layers[l].weight});
        out.push_back({lp + "bias", &mlp->layers[l].bias});
        if (l >= 1) {
          out.push_back({lp + "norm_gain", &mlp->norms[l - 1].gain});
          out.push_back({lp + "norm_shift", &mlp->norms[l - 1].shift});
        }
      }
    }
    out.push_back({prefix + "experts.weight", &f.experts.weight});
    out.push_back({prefix + "experts.bias", &f.experts.bias});
  }
  if (params.gate.size() == n * n) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.push_back({"gate.A_" + std::to_string(i) + "_" + std::to_string(j),
                       &params.gate[i * n + j]});
  } else {
    for (std::size_t i = 0; i < params.gate.size(); ++i)
      out.push_back({"gate.A_" + std::to_string(i) + "_" + std::to_string(i), &params.gate[i]});
  }
  out.push_back({"gate.bias", &params.gate_bias});
  out.push_back({"intercept", &params.intercept});
  return out;
}

}  // namespace

std::vector<TensorRef> trainable_tensors(NaeParams& params) {
  return collect_tensors<NaeParams, TensorRef>(params);
}

std::vector<ConstTensorRef> trainable_tensors(const NaeParams& params) {
  return collect_tensors<const NaeParams, ConstTensorRef>(params);
}

NaeParams zeros_like(const NaeParams& params) {
  NaeParams z = params;
  for (auto& t : trainable_tensors(z)) t.tensor->fill(0.0);
  return z;
}

NaeParams init_params(const ModelConfig& config, SeededRng& rng) {
  config.validate();
  const std::size_t n = config.n_features;
  const std::size_t d = config.latent_dim;
  const std::size_t k = config.n_experts;

  auto scaled_normal = [&rng](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
  };

  NaeParams p;
  p.features.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    MlpEncoder enc;
    std::size_t in = config.input_width(i);
    for (std::size_t l = 0; l < config.encoder_layers; ++l) {
      const std::size_t out = (l + 1 == config.encoder_layers) ? d : config.encoder_hidden;
      enc.layers.push_back({scaled_normal(in, out), row_vector(out)});
      if (l >= 1)
        enc.norms.push_back({row_vector(out, 1.0), row_vector(out), row_vector(out),
                             row_vector(out, 1.0)});
      in = out;
    }
    p.features[i].encoder = std::move(enc);
    p.features[i].experts = {scaled_normal(d, k), row_vector(k)};
  }
  if (config.variant == Variant::Diagonal) {
    for (std::size_t i = 0; i < n; ++i) p.gate.push_back(scaled_normal(d, k));
  } else {
    // Each gate logit sums n blocks, so the fan-in is n * d.
    const double scale = 1.0 / std::sqrt(static_cast<double>(n * d));
    for (std::size_t b = 0; b < n * n; ++b) {
      Matrix m(d, k);
      for (double& v : m.values()) v = scale * rng.normal();
      p.gate.push_back(std::move(m));
    }
  }
  p.gate_bias = Matrix(n, k);
  p.intercept = Matrix(1, 1);
  return p;
}

namespace {

void build_input(const ModelConfig& config, std::size_t feature, const Matrix& x, Matrix& input) {
  const std::size_t b = x.rows();
  const std::size_t card = config.cardinality(feature);
  if (card == 0) {
    input = Matrix(b, 1);
    for (std::size_t t = 0; t < b; ++t) input(t, 0) = x(t, feature);
    return;
  }
  input = Matrix(b, card);
  for (std::size_t t = 0; t < b; ++t) {
    const double code = x(t, feature);
    if (!(code >= 0.0) || code != std::floor(code) || code >= static_cast<double>(card))
      throw DataError("feature " + std::to_string(feature) + ": category code " +
                      std::to_string(code) + " outside [0, " + std::to_string(card) + ")");
    input(t, static_cast<std::size_t>(code)) = 1.0;
  }
}

void normalize_layer(const NormLayer& norm, Normalization kind, Mode mode, const Matrix& z,
                     Matrix& xhat, std::vector<double>& inv_std, std::vector<double>& bmean,
                     std::vector<double>& bvar, Matrix& y) {
  const std::size_t b = z.rows();
  const std::size_t w = z.cols();
  xhat = Matrix(b, w);
  y = Matrix(b, w);
  if (kind == Normalization::LayerNorm) {
    inv_std.assign(b, 0.0);
    for (std::size_t t = 0; t < b; ++t) {
      const auto zr = z.row(t);
      double mean = 0.0;
      for (double v : zr) mean += v;
      mean /= static_cast<double>(w);
      double var = 0.0;
      for (double v : zr) var += (v - mean) * (v - mean);
      var /= static_cast<double>(w);
      const double inv = 1.0 / std::sqrt(var + kNormEps);
      inv_std[t] = inv;
      for (std::size_t c = 0; c < w; ++c) xhat(t, c) = (zr[c] - mean) * inv;
    }
  } else {
    inv_std.assign(w, 0.0);
    if (mode == Mode::Train) {
      bmean.assign(w, 0.0);
      bvar.assign(w, 0.0);
      for (std::size_t t = 0; t < b; ++t)
        for (std::size_t c = 0; c < w; ++c) bmean[c] += z(t, c);
      for (double& m : bmean) m /= static_cast<double>(b);
      for (std::size_t t = 0; t < b; ++t)
        for (std::size_t c = 0; c < w; ++c) bvar[c] += (z(t, c) - bmean[c]) * (z(t, c) - bmean[c]);
      for (double& v : bvar) v /= static_cast<double>(b);
      for (std::size_t c = 0; c < w; ++c) inv_std[c] = 1.0 / std::sqrt(bvar[c] + kNormEps);
      for (std::size_t t = 0; t < b; ++t)
        for (std::size_t c = 0; c < w; ++c) xhat(t, c) = (z(t, c) - bmean[c]) * inv_std[c];
    } else {
      for (std::size_t c = 0; c < w; ++c)
        inv_std[c] = 1.0 / std::sqrt(norm.running_var(0, c) + kNormEps);
      for (std::size_t t = 0; t < b; ++t)
        for (std::size_t c = 0; c < w; ++c)
          xhat(t, c) = (z(t, c) - norm.running_mean(0, c)) * inv_std[c];
    }
  }
  for (std::size_t t = 0; t < b; ++t)
    for (std::size_t c = 0; c < w; ++c)
      y(t, c) = norm.gain(0, c) * xhat(t, c) + norm.shift(0, c);
}

void run_mlp(const MlpEncoder& enc, Normalization norm_kind, Mode mode, double drop_p,
             SeededRng& rng, const std::vector<Matrix>* replay, EncoderCache& cache,
             std::vector<Matrix>& drop_record) {
  const std::size_t layers = enc.layers.size();
  const std::size_t b = cache.input.rows();
  cache.pre.resize(layers);
  cache.normalized.resize(layers);
  cache.inv_std.resize(layers);
  cache.batch_mean.resize(layers);
  cache.batch_var.resize(layers);
  cache.activated.resize(layers);
  cache.output.resize(layers);
  const bool use_dropout = mode == Mode::Train && (replay ? !replay->empty() : drop_p > 0.0);
  if (use_dropout) drop_record.resize(layers);

  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& in = l == 0 ? cache.input : cache.output[l - 1];
    const DenseLayer& layer = enc.layers[l];
    const std::size_t w = layer.weight.cols();
    Matrix z(b, w);
    for (std::size_t t = 0; t < b; ++t) std::copy_n(layer.bias.data(), w, z.row(t).begin());
    matmul_accumulate(in, layer.weight, z);

    Matrix act;
    if (l >= 1) {
      Matrix y;
      normalize_layer(enc.norms[l - 1], norm_kind, mode, z, cache.normalized[l], cache.inv_std[l],
                      cache.batch_mean[l], cache.batch_var[l], y);
      act = std::move(y);
    } else {
      act = z;
    }
    for (double& v : act.values()) v = relu(v);
    cache.pre[l] = std::move(z);

    if (use_dropout) {
      Matrix mask;
      if (replay) {
        mask = (*replay)[l];
      } else {
        mask = Matrix(b, w);
        const double keep_scale = 1.0 / (1.0 - drop_p);
        for (double& m : mask.values()) m = rng.uniform() < drop_p ? 0.0 : keep_scale;
      }
      Matrix out = act;
      for (std::size_t e = 0; e < out.size(); ++e) out.values()[e] *= mask.values()[e];
      drop_record[l] = std::move(mask);
      cache.output[l] = std::move(out);
    } else {
      cache.output[l] = act;
    }
    cache.activated[l] = std::move(act);
  }
}

Matrix run_encoder(const Encoder& encoder, const ModelConfig& config, Mode mode, double drop_p,
                   SeededRng& rng, const std::vector<Matrix>* replay, EncoderCache& cache,
                   std::vector<Matrix>& drop_record) {
  return std::visit(
      Overloaded{
          [&](const MlpEncoder& mlp) {
            run_mlp(mlp, config.normalization, mode, drop_p, rng, replay, cache, drop_record);
            return cache.output.back();
          },
          [&](const LookupEncoder& lookup) {
            const std::size_t b = cache.input.rows();
            Matrix e(b, config.latent_dim);
            for (std::size_t t = 0; t < b; ++t) lookup.eval(cache.input(t, 0), e.row(t));
            return e;
          }},
      encoder);
}

double log_sum_exp_active(std::span<const double> logits, const Matrix& active, std::size_t row) {
  double peak = kNegInf;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (active(row, k) != 0.0) peak = std::max(peak, logits[k]);
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (active(row, k) != 0.0) total += std::exp(logits[k] - peak);
  return peak + std::log(total);
}

}  // namespace

void eval_relevance(const ModelConfig& config, std::span<const double> logits,
                    std::span<double> out, MaskVector* mask_out) {
  MaskVector mask = top_c_mask(logits, config.n_active);
  if (config.variant == Variant::Even) {
    std::vector<double> flat(logits.size(), 0.0);
    softmax_masked_into(flat, mask, out);
  } else {
    softmax_masked_into(logits, mask, out);
  }
  if (mask_out) *mask_out = std::move(mask);
}

BatchTrace forward_batch(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                         Mode mode, SeededRng& rng, const DropoutRates& rates,
                         const StochasticDraws* replay) {
  const std::size_t n = config.n_features;
  const std::size_t k = config.n_experts;
  const std::size_t b = x.rows();
  if (x.cols() != n)
    throw ConfigError("forward: input has " + std::to_string(x.cols()) + " features, model expects " +
                      std::to_string(n));
  if (params.features.size() != n) throw ConfigError("forward: parameters do not match config");
  if (!x.all_finite()) throw NumericalError("input", "non-finite feature value");

  BatchTrace tr;
  tr.batch = b;
  tr.mode = mode;
  tr.encoders.resize(n);
  tr.encodings.resize(n);
  tr.expert_outputs.resize(n);
  tr.gate_logits.resize(n);
  tr.active.resize(n);
  tr.relevances.resize(n);
  tr.draws.encoder_dropout.resize(n);
  tr.draws.expert_keep.resize(n);
  tr.draws.gumbel.resize(n);

  const bool train = mode == Mode::Train;
  for (std::size_t i = 0; i < n; ++i) {
    build_input(config, i, x, tr.encoders[i].input);
    const std::vector<Matrix>* rep = replay ? &replay->encoder_dropout[i] : nullptr;
    tr.encodings[i] = run_encoder(params.features[i].encoder, config, mode, rates.encoder, rng, rep,
                                  tr.encoders[i], tr.draws.encoder_dropout[i]);
    check_finite(tr.encodings[i], "encoder[" + std::to_string(i) + "]");

    const DenseLayer& heads = params.features[i].experts;
    Matrix o(b, k);
    for (std::size_t t = 0; t < b; ++t) std::copy_n(heads.bias.data(), k, o.row(t).begin());
    matmul_accumulate(tr.encodings[i], heads.weight, o);
    check_finite(o, "expert_outputs[" + std::to_string(i) + "]");
    tr.expert_outputs[i] = std::move(o);
  }

  for (std::size_t j = 0; j < n; ++j) {
    Matrix phi(b, k);
    for (std::size_t t = 0; t < b; ++t) std::copy_n(params.gate_bias.row(j).begin(), k, phi.row(t).begin());
    for (std::size_t i = 0; i < n; ++i)
      if (const Matrix* a = params.gate_block(i, j)) matmul_accumulate(tr.encodings[i], *a, phi);
    check_finite(phi, "gate_logits[" + std::to_string(j) + "]");
    tr.gate_logits[j] = std::move(phi);
  }

  tr.gumbel_applied = train && config.variant == Variant::Diagonal;
  std::vector<double> scratch(k);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix& phi = tr.gate_logits[j];
    Matrix active(b, k);
    Matrix rel(b, k);
    Matrix gumbel;
    if (tr.gumbel_applied) gumbel = replay ? replay->gumbel[j] : sample_gumbel(rng, b, k);
    for (std::size_t t = 0; t < b; ++t) {
      const auto logits = phi.row(t);
      const MaskVector mask = top_c_mask(logits, config.n_active);
      for (std::size_t c = 0; c < k; ++c) active(t, c) = mask.active(c) ? 1.0 : 0.0;
      if (config.variant == Variant::Even) {
        // phi - stop_gradient(phi) is identically zero in value.
        std::fill(scratch.begin(), scratch.end(), 0.0);
        softmax_masked_into(scratch, mask, rel.row(t));
      } else if (tr.gumbel_applied) {
        const double lse = log_sum_exp_active(logits, active, t);
        for (std::size_t c = 0; c < k; ++c)
          scratch[c] = mask.active(c) ? (logits[c] - lse + gumbel(t, c)) / config.gumbel_tau : 0.0;
        softmax_masked_into(scratch, mask, rel.row(t));
      } else {
        softmax_masked_into(logits, mask, rel.row(t));
      }
    }
    check_finite(rel, "relevances[" + std::to_string(j) + "]");
    tr.active[j] = std::move(active);
    tr.relevances[j] = std::move(rel);
    if (tr.gumbel_applied) tr.draws.gumbel[j] = std::move(gumbel);
  }

  const bool expert_dropout = train && (replay ? !replay->expert_keep.empty() &&
                                                     !replay->expert_keep[0].empty()
                                               : rates.expert > 0.0);
  tr.contributions = Matrix(b, n);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix keep;
    if (expert_dropout) {
      if (replay) {
        keep = replay->expert_keep[i];
      } else {
        keep = Matrix(b, k);
        for (double& v : keep.values()) v = rng.uniform() < rates.expert ? 0.0 : 1.0;
      }
    }
    const Matrix& o = tr.expert_outputs[i];
    const Matrix& r = tr.relevances[i];
    for (std::size_t t = 0; t < b; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double kept = expert_dropout ? keep(t, c) : 1.0;
        s += r(t, c) * kept * o(t, c);
      }
      tr.contributions(t, i) = s;
    }
    if (expert_dropout) tr.draws.expert_keep[i] = std::move(keep);
  }
  if (!expert_dropout) tr.draws.expert_keep.clear();

  tr.predictions.assign(b, params.intercept(0, 0));
  for (std::size_t t = 0; t < b; ++t)
    for (std::size_t i = 0; i < n; ++i) tr.predictions[t] += tr.contributions(t, i);
  for (double p : tr.predictions)
    if (!std::isfinite(p)) throw NumericalError("prediction", "non-finite prediction");
  return tr;
}

ForwardTrace trace_row(const BatchTrace& tr, std::size_t row) {
  const std::size_t n = tr.encodings.size();
  const std::size_t d = n ? tr.encodings[0].cols() : 0;
  const std::size_t k = n ? tr.expert_outputs[0].cols() : 0;
  ForwardTrace f;
  f.encodings = Matrix(n, d);
  f.expert_outputs = Matrix(n, k);
  f.gate_logits = Matrix(n, k);
  f.relevances = Matrix(n, k);
  f.masks.resize(n);
  f.contributions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(tr.encodings[i].row(row).begin(), d, f.encodings.row(i).begin());
    std::copy_n(tr.expert_outputs[i].row(row).begin(), k, f.expert_outputs.row(i).begin());
    std::copy_n(tr.gate_logits[i].row(row).begin(), k, f.gate_logits.row(i).begin());
    std::copy_n(tr.relevances[i].row(row).begin(), k, f.relevances.row(i).begin());
    f.masks[i] = MaskVector(k);
    for (std::size_t c = 0; c < k; ++c) f.masks[i].set_active(c, tr.active[i](row, c) != 0.0);
    f.contributions[i] = tr.contributions(row, i);
  }
  f.prediction = tr.predictions[row];
  return f;
}

ForwardTrace forward(const NaeParams& params, const ModelConfig& config, std::span<const double> x,
                     Mode mode, SeededRng& rng, const DropoutRates& rates) {
  if (x.size() != config.n_features)
    throw ConfigError("forward: expected " + std::to_string(config.n_features) + " features");
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.row(0).begin());
  return trace_row(forward_batch(params, config, row, mode, rng, rates), 0);
}

void update_batchnorm_stats(NaeParams& params, const ModelConfig& config, const BatchTrace& trace,
                            double momentum) {
  if (config.normalization != Normalization::BatchNorm || trace.mode != Mode::Train) return;
  const double b = static_cast<double>(trace.batch);
  const double unbias = trace.batch > 1 ? b / (b - 1.0) : 1.0;
  for (std::size_t i = 0; i < params.features.size(); ++i) {
    auto* mlp = std::get_if<MlpEncoder>(&params.features[i].encoder);
    if (!mlp) continue;
    const EncoderCache& cache = trace.encoders[i];
    for (std::size_t l = 1; l < mlp->layers.size(); ++l) {
      NormLayer& norm = mlp->norms[l - 1];
      for (std::size_t c = 0; c < norm.gain.cols(); ++c) {
        norm.running_mean(0, c) =
            (1.0 - momentum) * norm.running_mean(0, c) + momentum * cache.batch_mean[l][c];
        norm.running_var(0, c) =
            (1.0 - momentum) * norm.running_var(0, c) + momentum * cache.batch_var[l][c] * unbias;
      }
    }
  }
}

Matrix encode_feature(const NaeParams& params, const ModelConfig& config, std::size_t feature,
                      std::span<const double> values) {
  if (feature >= config.n_features) throw UsageError("feature index out of range");
  Matrix x(values.size(), config.n_features);
  for (std::size_t t = 0; t < values.size(); ++t) x(t, feature) = values[t];
  EncoderCache cache;
  build_input(config, feature, x, cache.input);
  SeededRng unused(0);
  std::vector<Matrix> no_drop;
  return run_encoder(params.features[feature].encoder, config, Mode::Eval, 0.0, unused, nullptr,
                     cache, no_drop);
}

Matrix expert_outputs_at(const NaeParams& params, const ModelConfig& config, std::size_t feature,
                         std::span<const double> values) {
  const Matrix e = encode_feature(params, config, feature, values);
  const DenseLayer& heads = params.features[feature].experts;
  Matrix o(values.size(), config.n_experts);
  for (std::size_t t = 0; t < values.size(); ++t)
    std::copy_n(heads.bias.data(), config.n_experts, o.row(t).begin());
  matmul_accumulate(e, heads.weight, o);
  return o;
}

FeatureBounds feature_bounds(const NaeParams& params, const ModelConfig& config,
                             std::size_t feature, std::span<const double> grid) {
  for (double v : grid)
    if (!std::isfinite(v)) throw UsageError("feature_bounds: grid must be finite");
  const Matrix o = expert_outputs_at(params, config, feature, grid);
  FeatureBounds fb;
  fb.upper.resize(grid.size());
  fb.lower.resize(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const auto row = o.row(t);
    fb.upper[t] = *std::max_element(row.begin(), row.end());
    fb.lower[t] = *std::min_element(row.begin(), row.end());
  }
  return fb;
}

Matrix pairwise_interaction(const NaeParams& params, const ModelConfig& config, std::size_t i,
                            std::size_t j, std::span<const double> grid_i,
                            std::span<const double> grid_j) {
  if (i == j) throw UsageError("pairwise_interaction requires two distinct features");
  if (i >= config.n_features || j >= config.n_features)
    throw UsageError("pairwise_interaction: feature index out of range");
  const std::size_t k = config.n_experts;
  const Matrix experts = expert_outputs_at(params, config, i, grid_i);
  Matrix logits(grid_j.size(), k);
  if (const Matrix* a = params.gate_block(j, i)) {
    const Matrix ej = encode_feature(params, config, j, grid_j);
    matmul_accumulate(ej, *a, logits);
  }
  Matrix rel(grid_j.size(), k);
  for (std::size_t b = 0; b < grid_j.size(); ++b) eval_relevance(config, logits.row(b), rel.row(b));

  Matrix surface(grid_i.size(), grid_j.size());
  for (std::size_t a = 0; a < grid_i.size(); ++a)
    for (std::size_t b = 0; b < grid_j.size(); ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += rel(b, c) * experts(a, c);
      surface(a, b) = s;
    }
  return surface;
}

std::size_t count_extra_params(const ModelConfig& config) {
  const std::size_t n = config.n_features;
  const std::size_t k = config.n_experts;
  const std::size_t d = config.latent_dim;
  if (config.variant == Variant::Diagonal) return n * k * (2 * d + 2);
  return n * k * ((n + 1) * d + 2);
}

std::size_t count_extra_params(const NaeParams& params) {
  std::size_t total = params.gate_bias.size();
  for (const Matrix& a : params.gate) total += a.size();
  for (const auto& f : params.features) total += f.experts.weight.size() + f.experts.bias.size();
  return total;
}

}  // namespace nae
