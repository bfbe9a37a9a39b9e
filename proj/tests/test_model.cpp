// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "nae/errors.hpp"
#include "nae/model.hpp"

namespace nae {
namespace {

constexpr double kLayerNormEps = 1e-5;

ModelConfig small_config(Variant variant = Variant::Standard, std::size_t n = 2, std::size_t d = 3,
                         std::size_t k = 2, std::size_t c = 2) {
  ModelConfig cfg;
  cfg.n_features = n;
  cfg.latent_dim = d;
  cfg.n_experts = k;
  cfg.n_active = c;
  cfg.encoder_layers = 2;
  cfg.encoder_hidden = 5;
  cfg.variant = variant;
  return cfg;
}

// Randomizes every trainable tensor, including biases and norm affine terms, so the
// oracle comparison exercises all of them.
void randomize(NaeParams& p, SeededRng& rng, double scale = 0.7) {
  for (auto& t : trainable_tensors(p))
    for (double& v : t.tensor->values()) v = scale * rng.normal();
}

// Straight-line evaluation of one row: MLP encoders with layer norm, linear heads, gate
// logits summed over blocks, top-C softmax, weighted sum.
double oracle_prediction(const NaeParams& p, const ModelConfig& cfg, const std::vector<double>& x,
                         std::vector<double>* contributions, std::vector<std::vector<double>>* rel) {
  const std::size_t n = cfg.n_features, d = cfg.latent_dim, k = cfg.n_experts;
  std::vector<std::vector<double>> enc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mlp = std::get<MlpEncoder>(p.features[i].encoder);
    std::vector<double> h{x[i]};
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      const auto& W = mlp.layers[l].weight;
      std::vector<double> z(W.cols());
      for (std::size_t o = 0; o < W.cols(); ++o) {
        z[o] = mlp.layers[l].bias(0, o);
        for (std::size_t q = 0; q < W.rows(); ++q) z[o] += h[q] * W(q, o);
      }
      if (l >= 1) {
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= z.size();
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= z.size();
        for (std::size_t o = 0; o < z.size(); ++o)
          z[o] = mlp.norms[l - 1].gain(0, o) * (z[o] - mean) / std::sqrt(var + kLayerNormEps) +
                 mlp.norms[l - 1].shift(0, o);
      }
      for (double& v : z) v = std::max(0.0, v);
      h = z;
    }
    enc[i] = h;
  }
  double y = p.intercept(0, 0);
  if (contributions) contributions->assign(n, 0.0);
  if (rel) rel->assign(n, std::vector<double>(k));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> phi(k);
    for (std::size_t c = 0; c < k; ++c) {
      phi[c] = p.gate_bias(j, c);
      for (std::size_t i = 0; i < n; ++i) {
        const Matrix* a = p.gate_block(i, j);
        if (!a) continue;
        for (std::size_t e = 0; e < d; ++e) phi[c] += enc[i][e] * (*a)(e, c);
      }
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return phi[a] > phi[b]; });
    std::vector<double> r(k, 0.0);
    double z = 0.0;
    const double peak = phi[order[0]];
    for (std::size_t q = 0; q < cfg.n_active; ++q) {
      const double w = cfg.variant == Variant::Even ? 1.0 : std::exp(phi[order[q]] - peak);
      r[order[q]] = w;
      z += w;
    }
    double oi = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      r[c] /= z;
      double ok = p.features[j].experts.bias(0, c);
      for (std::size_t e = 0; e < d; ++e) ok += enc[j][e] * p.features[j].experts.weight(e, c);
      oi += r[c] * ok;
    }
    if (contributions) (*contributions)[j] = oi;
    if (rel) (*rel)[j] = r;
    y += oi;
  }
  return y;
}

TEST(ModelConfig, ValidationRejectsBadValues) {
  ModelConfig cfg = small_config();
  cfg.n_active = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.latent_dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config(Variant::Diagonal);
  cfg.gumbel_tau = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_variant("dense"), ConfigError);
  EXPECT_EQ(parse_variant(to_string(Variant::Even)), Variant::Even);
  EXPECT_EQ(parse_normalization(to_string(Normalization::BatchNorm)), Normalization::BatchNorm);
}

TEST(InitParams, SameSeedSameParams) {
  const ModelConfig cfg = small_config();
  SeededRng a(5), b(5), c(6);
  const NaeParams pa = init_params(cfg, a);
  EXPECT_EQ(pa, init_params(cfg, b));
  EXPECT_NE(pa, init_params(cfg, c));
}

TEST(InitParams, DiagonalHasNoOffDiagonalBlocks) {
  const ModelConfig cfg = small_config(Variant::Diagonal);
  SeededRng rng(1);
  const NaeParams p = init_params(cfg, rng);
  EXPECT_EQ(p.gate.size(), 2u);
  EXPECT_EQ(p.gate_block(0, 1), nullptr);
  EXPECT_EQ(p.gate_block(1, 0), nullptr);
  EXPECT_NE(p.gate_block(1, 1), nullptr);
}

TEST(InitParams, EncoderWeightScaleMatchesFanIn) {
  ModelConfig cfg = small_config();
  cfg.encoder_hidden = 100;
  cfg.latent_dim = 100;
  cfg.encoder_layers = 2;
  SeededRng rng(3);
  const NaeParams p = init_params(cfg, rng);
  const Matrix& w = std::get<MlpEncoder>(p.features[0].encoder).layers[1].weight;
  ASSERT_EQ(w.size(), 10000u);
  double s2 = 0.0;
  for (double v : w.values()) s2 += v * v;
  const double sd = std::sqrt(s2 / w.size());
  EXPECT_NEAR(sd, 1.0 / std::sqrt(100.0), 0.2 / std::sqrt(100.0));
  for (const auto& t : trainable_tensors(p)) {
    if (!t.name.ends_with(".bias") && t.name != "intercept") continue;
    for (double v : t.tensor->values()) EXPECT_EQ(v, 0.0) << t.name;
  }
}

TEST(Forward, MatchesStraightLineOracle) {
  for (Variant variant : {Variant::Standard, Variant::Diagonal, Variant::Even}) {
    for (std::size_t c : {std::size_t{1}, std::size_t{2}}) {
      const ModelConfig cfg = small_config(variant, 2, 3, 2, c);
      SeededRng rng(40 + c);
      NaeParams p = init_params(cfg, rng);
      randomize(p, rng);
      for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        std::vector<double> want_contrib;
        std::vector<std::vector<double>> want_rel;
        const double want = oracle_prediction(p, cfg, x, &want_contrib, &want_rel);
        const ForwardTrace tr = forward(p, cfg, x, Mode::Eval, rng);
        EXPECT_NEAR(tr.prediction, want, 1e-12) << to_string(variant);
        for (std::size_t i = 0; i < 2; ++i) {
          EXPECT_NEAR(tr.contributions[i], want_contrib[i], 1e-12);
          for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(tr.relevances(i, k), want_rel[i][k], 1e-12);
        }
      }
    }
  }
}

TEST(Forward, TraceInvariantsHold) {
  const ModelConfig cfg = small_config(Variant::Standard, 3, 4, 5, 3);
  SeededRng rng(8);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  Matrix x(50, 3);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const BatchTrace bt = forward_batch(p, cfg, x, Mode::Eval, rng);
  for (std::size_t t = 0; t < 50; ++t) {
    const ForwardTrace tr = trace_row(bt, t);
    double y = p.intercept(0, 0);
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0.0, oi = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        const double r = tr.relevances(i, k);
        EXPECT_GE(r, 0.0);
        if (!tr.masks[i].active(k)) {
          EXPECT_EQ(r, 0.0);
        }
        s += r;
        oi += r * tr.expert_outputs(i, k);
      }
      EXPECT_EQ(tr.masks[i].active_count(), 3u);
      EXPECT_NEAR(s, 1.0, 1e-12);
      EXPECT_NEAR(tr.contributions[i], oi, 1e-12);
      y += tr.contributions[i];
    }
    EXPECT_NEAR(tr.prediction, y, 1e-12);
  }
}

TEST(Forward, SingleExpertIsAdditive) {
  const ModelConfig cfg = small_config(Variant::Standard, 2, 3, 1, 1);
  SeededRng rng(2);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const ForwardTrace tr = forward(p, cfg, x, Mode::Eval, rng);
    double y = p.intercept(0, 0);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(tr.relevances(i, 0), 1.0);
      const std::vector<double> v{x[i]};
      y += expert_outputs_at(p, cfg, i, v)(0, 0);
    }
    EXPECT_NEAR(tr.prediction, y, 1e-12);
  }
}

TEST(Forward, ZeroGateMatricesGiveConstantRelevances) {
  const ModelConfig cfg = small_config(Variant::Standard, 2, 3, 3, 3);
  SeededRng rng(4);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  for (auto& a : p.gate) a.fill(0.0);
  const ForwardTrace first = forward(p, cfg, std::vector<double>{0.1, 0.2}, Mode::Eval, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    EXPECT_EQ(forward(p, cfg, x, Mode::Eval, rng).relevances, first.relevances);
  }
}

TEST(Forward, EvenVariantIsUniformOverActiveSet) {
  const ModelConfig cfg = small_config(Variant::Even, 2, 3, 4, 3);
  SeededRng rng(9);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  const ForwardTrace tr = forward(p, cfg, std::vector<double>{0.3, -0.4}, Mode::Eval, rng);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_EQ(tr.relevances(i, k), tr.masks[i].active(k) ? 1.0 / 3.0 : 0.0);
}

TEST(Forward, DiagonalRelevanceDependsOnOwnFeatureOnly) {
  const ModelConfig cfg = small_config(Variant::Diagonal, 3, 3, 3, 2);
  SeededRng rng(10);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  const std::vector<double> base{0.2, -0.5, 0.9};
  const ForwardTrace ref = forward(p, cfg, base, Mode::Eval, rng);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x = base;
    x[1] = rng.uniform(-3, 3);
    x[2] = rng.uniform(-3, 3);
    const ForwardTrace tr = forward(p, cfg, x, Mode::Eval, rng);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(tr.relevances(0, k), ref.relevances(0, k));
  }
}

TEST(Forward, DiagonalTrainModeReplaysGumbelDraws) {
  const ModelConfig cfg = small_config(Variant::Diagonal, 2, 3, 3, 3);
  SeededRng rng(12);
  NaeParams p = init_params(cfg, rng);
  Matrix x(4, 2);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const BatchTrace first = forward_batch(p, cfg, x, Mode::Train, rng);
  ASSERT_TRUE(first.gumbel_applied);
  ASSERT_EQ(first.draws.gumbel.size(), 2u);
  const BatchTrace again = forward_batch(p, cfg, x, Mode::Train, rng, {}, &first.draws);
  EXPECT_EQ(again.relevances, first.relevances);
  // Relevances are a tempered softmax of log-probabilities plus the recorded noise.
  for (std::size_t t = 0; t < 4; ++t) {
    const auto phi = first.gate_logits[0].row(t);
    double lse = 0.0;
    for (double v : phi) lse += std::exp(v);
    lse = std::log(lse);
    std::vector<double> s(3);
    double z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      s[k] = std::exp((phi[k] - lse + first.draws.gumbel[0](t, k)) / cfg.gumbel_tau);
      z += s[k];
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(first.relevances[0](t, k), s[k] / z, 1e-12);
  }
}

TEST(Forward, DropoutOnlyInTrainMode) {
  const ModelConfig cfg = small_config();
  SeededRng rng(13);
  const NaeParams p = init_params(cfg, rng);
  Matrix x(8, 2);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const DropoutRates rates{0.5, 0.5};
  const BatchTrace eval1 = forward_batch(p, cfg, x, Mode::Eval, rng, rates);
  const BatchTrace eval2 = forward_batch(p, cfg, x, Mode::Eval, rng);
  EXPECT_EQ(eval1.predictions, eval2.predictions);
  const BatchTrace tr = forward_batch(p, cfg, x, Mode::Train, rng, rates);
  EXPECT_FALSE(tr.draws.expert_keep.empty());
  EXPECT_FALSE(tr.draws.encoder_dropout[0].empty());
  const BatchTrace replay = forward_batch(p, cfg, x, Mode::Train, rng, rates, &tr.draws);
  EXPECT_EQ(replay.predictions, tr.predictions);
}

TEST(Forward, NonFiniteInputNamesStage) {
  const ModelConfig cfg = small_config();
  SeededRng rng(14);
  const NaeParams p = init_params(cfg, rng);
  try {
    forward(p, cfg, std::vector<double>{std::nan(""), 0.0}, Mode::Eval, rng);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.stage(), "input");
  }
  NaeParams bad = p;
  bad.features[1].experts.bias(0, 0) = std::numeric_limits<double>::infinity();
  try {
    forward(bad, cfg, std::vector<double>{0.0, 0.0}, Mode::Eval, rng);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.stage(), "expert_outputs[1]");
  }
}

TEST(Forward, CategoricalFeatureUsesEmbeddingRow) {
  ModelConfig cfg = small_config();
  cfg.cardinalities = {0, 3};
  SeededRng rng(15);
  NaeParams p = init_params(cfg, rng);
  EXPECT_EQ(std::get<MlpEncoder>(p.features[1].encoder).layers[0].weight.rows(), 3u);
  EXPECT_NO_THROW(forward(p, cfg, std::vector<double>{0.1, 2.0}, Mode::Eval, rng));
  EXPECT_THROW(forward(p, cfg, std::vector<double>{0.1, 3.0}, Mode::Eval, rng), DataError);
  EXPECT_THROW(forward(p, cfg, std::vector<double>{0.1, 0.5}, Mode::Eval, rng), DataError);
}

TEST(BatchNorm, RunningStatisticsUseMomentum) {
  ModelConfig cfg = small_config();
  cfg.normalization = Normalization::BatchNorm;
  SeededRng rng(16);
  NaeParams p = init_params(cfg, rng);
  Matrix x(6, 2);
  for (double& v : x.values()) v = rng.uniform(-1, 1);
  const BatchTrace tr = forward_batch(p, cfg, x, Mode::Train, rng);
  const NormLayer before = std::get<MlpEncoder>(p.features[0].encoder).norms[0];
  update_batchnorm_stats(p, cfg, tr, 0.1);
  const NormLayer& after = std::get<MlpEncoder>(p.features[0].encoder).norms[0];
  const Matrix& pre = tr.encoders[0].pre[1];
  for (std::size_t c = 0; c < pre.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 6; ++t) mean += pre(t, c);
    mean /= 6.0;
    double var = 0.0;
    for (std::size_t t = 0; t < 6; ++t) var += (pre(t, c) - mean) * (pre(t, c) - mean);
    var /= 5.0;
    EXPECT_NEAR(after.running_mean(0, c), 0.9 * before.running_mean(0, c) + 0.1 * mean, 1e-14);
    EXPECT_NEAR(after.running_var(0, c), 0.9 * before.running_var(0, c) + 0.1 * var, 1e-14);
  }
}

TEST(FeatureBounds, SingleExpertHasEqualBounds) {
  const ModelConfig cfg = small_config(Variant::Standard, 2, 3, 1, 1);
  SeededRng rng(17);
  const NaeParams p = init_params(cfg, rng);
  const std::vector<double> grid{-1.0, 0.0, 0.5, 2.0};
  const FeatureBounds fb = feature_bounds(p, cfg, 0, grid);
  EXPECT_EQ(fb.upper, fb.lower);
}

TEST(FeatureBounds, ContributionStaysInsideBoundsForAnyContext) {
  const ModelConfig cfg = small_config(Variant::Standard, 3, 4, 4, 3);
  SeededRng rng(18);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng, 1.5);
  const std::vector<double> v{0.37};
  const FeatureBounds fb = feature_bounds(p, cfg, 1, v);
  Matrix x(10000, 3);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    x(t, 0) = rng.uniform(-3, 3);
    x(t, 1) = 0.37;
    x(t, 2) = rng.uniform(-3, 3);
  }
  const BatchTrace tr = forward_batch(p, cfg, x, Mode::Eval, rng);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    EXPECT_LE(tr.contributions(t, 1), fb.upper[0] + 1e-12);
    EXPECT_GE(tr.contributions(t, 1), fb.lower[0] - 1e-12);
  }
}

TEST(PairwiseInteraction, SameFeatureIsUsageError) {
  const ModelConfig cfg = small_config();
  SeededRng rng(19);
  const NaeParams p = init_params(cfg, rng);
  const std::vector<double> g{0.0, 1.0};
  EXPECT_THROW(pairwise_interaction(p, cfg, 0, 0, g, g), UsageError);
}

TEST(PairwiseInteraction, ZeroCrossBlockIsConstantAlongPartner) {
  const ModelConfig cfg = small_config(Variant::Standard, 2, 3, 3, 3);
  SeededRng rng(20);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  p.gate_block(1, 0)->fill(0.0);
  const std::vector<double> gi{-1.0, 0.0, 1.0}, gj{-2.0, -0.5, 0.5, 2.0};
  const Matrix s = pairwise_interaction(p, cfg, 0, 1, gi, gj);
  for (std::size_t a = 0; a < gi.size(); ++a)
    for (std::size_t b = 1; b < gj.size(); ++b) EXPECT_EQ(s(a, b), s(a, 0));
}

TEST(PairwiseInteraction, SingleExpertIgnoresPartner) {
  const ModelConfig cfg = small_config(Variant::Standard, 2, 3, 1, 1);
  SeededRng rng(21);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  const std::vector<double> gi{-1.0, 1.0}, gj{-2.0, 0.0, 2.0};
  const Matrix s = pairwise_interaction(p, cfg, 0, 1, gi, gj);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(s(a, b), s(a, 0));
}

TEST(PairwiseInteraction, ExcludesBiasAndThirdFeature) {
  const ModelConfig cfg = small_config(Variant::Standard, 3, 3, 3, 3);
  SeededRng rng(22);
  NaeParams p = init_params(cfg, rng);
  randomize(p, rng);
  const std::vector<double> gi{0.4}, gj{-0.3};
  const Matrix s = pairwise_interaction(p, cfg, 0, 1, gi, gj);
  // Rebuild by hand from A_10 and the encodings only.
  const Matrix e1 = encode_feature(p, cfg, 1, gj);
  const Matrix o0 = expert_outputs_at(p, cfg, 0, gi);
  std::vector<double> phi(3, 0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t e = 0; e < 3; ++e) phi[c] += e1(0, e) * (*p.gate_block(1, 0))(e, c);
  const auto r = softmax_masked(phi, MaskVector(3));
  double want = 0.0;
  for (std::size_t c = 0; c < 3; ++c) want += r[c] * o0(0, c);
  EXPECT_NEAR(s(0, 0), want, 1e-14);
}

TEST(ParamCount, HousingValues) {
  ModelConfig cfg;
  cfg.n_features = 8;
  cfg.n_experts = 4;
  cfg.n_active = 4;
  cfg.latent_dim = 128;
  EXPECT_EQ(count_extra_params(cfg), 36928u);
  cfg.n_experts = 64;
  cfg.n_active = 64;
  cfg.variant = Variant::Diagonal;
  EXPECT_EQ(count_extra_params(cfg), 132096u);
}

TEST(ParamCount, MatchesAllocatedTensors) {
  SeededRng rng(23);
  for (Variant v : {Variant::Standard, Variant::Diagonal, Variant::Even}) {
    for (std::size_t n : {1u, 3u, 5u}) {
      ModelConfig cfg = small_config(v, n, 6, 4, 2);
      EXPECT_EQ(count_extra_params(cfg), count_extra_params(init_params(cfg, rng)));
    }
  }
}

TEST(ParamCount, FormulaForNinetyFeatures) {
  ModelConfig cfg;
  cfg.n_features = 90;
  cfg.n_experts = 4;
  cfg.n_active = 4;
  cfg.latent_dim = 128;
  // nK[(n+1)d+2] with n=90, K=4, d=128.
  EXPECT_EQ(count_extra_params(cfg), 90u * 4u * (91u * 128u + 2u));
}

TEST(TrainableTensors, NamesAreStableAndUnique) {
  const ModelConfig cfg = small_config();
  SeededRng rng(24);
  NaeParams p = init_params(cfg, rng);
  const auto refs = trainable_tensors(p);
  std::vector<std::string> names;
  for (const auto& r : refs) names.push_back(r.name);
  EXPECT_EQ(names.front(), "feature0.encoder.layer0.weight");
  EXPECT_EQ(names.back(), "intercept");
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
  const NaeParams z = zeros_like(p);
  for (const auto& r : trainable_tensors(z))
    for (double v : r.tensor->values()) EXPECT_EQ(v, 0.0);
}

TEST(LookupEncoder, InterpolatesAndClamps) {
  LookupEncoder lk;
  lk.lo = 0.0;
  lk.hi = 2.0;
  lk.table = Matrix::from_rows({{0.0}, {10.0}, {40.0}});
  std::vector<double> out(1);
  lk.eval(0.5, out);
  EXPECT_DOUBLE_EQ(out[0], 5.0);
  lk.eval(1.5, out);
  EXPECT_DOUBLE_EQ(out[0], 25.0);
  lk.eval(-4.0, out);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  lk.eval(9.0, out);
  EXPECT_DOUBLE_EQ(out[0], 40.0);
  EXPECT_DOUBLE_EQ(lk.knot_value(1), 1.0);
}

}  // namespace
}  // namespace nae
