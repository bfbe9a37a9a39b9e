// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nae/numerics.hpp"

namespace nae {

/// Gating flavour. Standard gates every feature from all features, Diagonal only from
/// itself (with Gumbel resampling in training), Even spreads weight uniformly over the
/// active experts while keeping a softmax gradient.
enum class Variant { Standard, Diagonal, Even };
enum class Normalization { LayerNorm, BatchNorm };
enum class Mode { Train, Eval };

struct ModelConfig {
  std::size_t n_features = 1;
  std::size_t latent_dim = 8;
  std::size_t n_experts = 1;
  std::size_t n_active = 1;
  std::size_t encoder_layers = 1;
  std::size_t encoder_hidden = 16;
  Variant variant = Variant::Standard;
  double gumbel_tau = 0.1;
  Normalization normalization = Normalization::LayerNorm;
  /// Per-feature category count; 0 marks a continuous feature. Empty means all continuous.
  std::vector<std::size_t> cardinalities;

  void validate() const;
  std::size_t cardinality(std::size_t feature) const {
    return cardinalities.empty() ? 0 : cardinalities[feature];
  }
  /// Width of the first encoder layer's input (1, or the one-hot width for categoricals).
  std::size_t input_width(std::size_t feature) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(Variant v);
std::string to_string(Normalization n);
Variant parse_variant(const std::string& s);
Normalization parse_normalization(const std::string& s);

/// Affine layer; weight is (in x out), bias is (1 x out).
struct DenseLayer {
  Matrix weight;
  Matrix bias;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Normalization affine parameters plus BatchNorm running statistics (1 x width each).
struct NormLayer {
  Matrix gain;
  Matrix shift;
  Matrix running_mean;
  Matrix running_var;
  friend bool operator==(const NormLayer&, const NormLayer&) = default;
};

/// ReLU MLP encoder. Layer 0 maps the raw input (or a one-hot category, which makes its
/// weight rows per-category embeddings) to the hidden width; layers >= 1 are followed by
/// normalization. norms[l - 1] belongs to layer l.
struct MlpEncoder {
  std::vector<DenseLayer> layers;
  std::vector<NormLayer> norms;
  friend bool operator==(const MlpEncoder&, const MlpEncoder&) = default;
};

/// Piecewise-linear table on a uniform knot grid over [lo, hi]; inputs are clamped.
/// Used to realize exact functions when checking representability results.
struct LookupEncoder {
  double lo = 0.0;
  double hi = 1.0;
  Matrix table;  // knots x latent_dim

  /// Knot index and interpolation weight for x.
  std::pair<std::size_t, double> locate(double x) const;
  void eval(double x, std::span<double> out) const;
  double knot_value(std::size_t k) const;
  friend bool operator==(const LookupEncoder&, const LookupEncoder&) = default;
};

using Encoder = std::variant<MlpEncoder, LookupEncoder>;

struct FeatureParams {
  Encoder encoder;
  DenseLayer experts;  // weight: latent_dim x K, bias: 1 x K
  friend bool operator==(const FeatureParams&, const FeatureParams&) = default;
};

struct NaeParams {
  std::vector<FeatureParams> features;
  /// Standard/Even: n*n blocks, gate[i * n + j] = A_ij (d x K).
  /// Diagonal: n blocks, gate[i] = A_ii; off-diagonal blocks do not exist.
  std::vector<Matrix> gate;
  Matrix gate_bias;  // n x K, row j = mu_j
  Matrix intercept;  // 1 x 1

  /// A_ij, or nullptr when the block is structurally zero.
  const Matrix* gate_block(std::size_t i, std::size_t j) const;
  Matrix* gate_block(std::size_t i, std::size_t j);
  bool all_finite() const;

  friend bool operator==(const NaeParams&, const NaeParams&) = default;
};

/// Named handle to one learnable tensor, in a fixed traversal order.
struct TensorRef {
  std::string name;
  Matrix* tensor;
};
struct ConstTensorRef {
  std::string name;
  const Matrix* tensor;
};

std::vector<TensorRef> trainable_tensors(NaeParams& params);
std::vector<ConstTensorRef> trainable_tensors(const NaeParams& params);

/// Same structure as `params`, every trainable tensor zero.
NaeParams zeros_like(const NaeParams& params);

NaeParams init_params(const ModelConfig& config, SeededRng& rng);

/// Training-time regularization rates. Ignored in Eval mode.
struct DropoutRates {
  double encoder = 0.0;
  double expert = 0.0;
};

/// Random draws consumed by a Train-mode forward pass. Recording them lets the backward
/// pass (and finite-difference checks) replay the exact same network.
struct StochasticDraws {
  std::vector<std::vector<Matrix>> encoder_dropout;  // [feature][layer]: 0 or 1/(1-p); empty = none
  std::vector<Matrix> expert_keep;                   // [feature]: B x K of {0,1}; empty = none
  std::vector<Matrix> gumbel;                        // [feature]: B x K; empty = none
};

/// Intermediate values of one encoder for a batch.
struct EncoderCache {
  Matrix input;                         // B x in
  std::vector<Matrix> pre;              // linear outputs per layer
  std::vector<Matrix> normalized;       // x-hat per layer (empty for layer 0)
  std::vector<std::vector<double>> inv_std;  // LayerNorm: per row; BatchNorm: per column
  std::vector<std::vector<double>> batch_mean;  // BatchNorm Train only, per column
  std::vector<std::vector<double>> batch_var;
  std::vector<Matrix> activated;        // after ReLU
  std::vector<Matrix> output;           // after dropout (what the next layer consumes)
};

/// Batched forward record consumed by losses, penalties, metrics and backprop.
struct BatchTrace {
  std::size_t batch = 0;
  Mode mode = Mode::Eval;
  bool gumbel_applied = false;
  std::vector<EncoderCache> encoders;
  std::vector<Matrix> encodings;       // [feature] B x d
  std::vector<Matrix> expert_outputs;  // [feature] B x K, o_ik before expert dropout
  std::vector<Matrix> gate_logits;     // [feature] B x K, phi_j
  std::vector<Matrix> active;          // [feature] B x K, 1 where the mask is 0
  std::vector<Matrix> relevances;      // [feature] B x K
  Matrix contributions;                // B x n
  std::vector<double> predictions;     // B
  StochasticDraws draws;
};

/// Per-sample view of a forward pass.
struct ForwardTrace {
  Matrix encodings;        // n x d
  Matrix expert_outputs;   // n x K
  Matrix gate_logits;      // n x K
  std::vector<MaskVector> masks;
  Matrix relevances;       // n x K
  std::vector<double> contributions;
  double prediction = 0.0;
};

/// Runs the network on every row of `x` (B x n). In Train mode, dropout and Gumbel draws come
/// from `rng` unless `replay` supplies them. Throws NumericalError naming the first stage that
/// produced a non-finite value.
BatchTrace forward_batch(const NaeParams& params, const ModelConfig& config, const Matrix& x,
                         Mode mode, SeededRng& rng, const DropoutRates& rates = {},
                         const StochasticDraws* replay = nullptr);

ForwardTrace forward(const NaeParams& params, const ModelConfig& config, std::span<const double> x,
                     Mode mode, SeededRng& rng, const DropoutRates& rates = {});

ForwardTrace trace_row(const BatchTrace& trace, std::size_t row);

/// Folds the batch statistics of a Train-mode trace into BatchNorm running averages.
void update_batchnorm_stats(NaeParams& params, const ModelConfig& config, const BatchTrace& trace,
                            double momentum = 0.1);

/// Eval-mode encodings of a single feature for the given values (values.size() x d).
Matrix encode_feature(const NaeParams& params, const ModelConfig& config, std::size_t feature,
                      std::span<const double> values);

/// Eval-mode expert outputs g_ik(E_i(v)) for each value (values.size() x K).
Matrix expert_outputs_at(const NaeParams& params, const ModelConfig& config, std::size_t feature,
                         std::span<const double> values);

struct FeatureBounds {
  std::vector<double> upper;
  std::vector<double> lower;
};

/// max_k / min_k of the expert outputs at each grid value.
FeatureBounds feature_bounds(const NaeParams& params, const ModelConfig& config,
                             std::size_t feature, std::span<const double> grid);

/// Contribution of feature i when its gate sees only feature j: logits A_ji^T E_j(x_j), no bias.
/// Result is grid_i.size() x grid_j.size().
Matrix pairwise_interaction(const NaeParams& params, const ModelConfig& config, std::size_t i,
                            std::size_t j, std::span<const double> grid_i,
                            std::span<const double> grid_j);

/// Gate relevances for one row of logits under the variant's Eval-mode rule.
void eval_relevance(const ModelConfig& config, std::span<const double> logits,
                    std::span<double> out, MaskVector* mask_out = nullptr);

/// Parameters added on top of a plain additive network (gating, expert heads, gate biases).
std::size_t count_extra_params(const ModelConfig& config);
/// The same quantity counted from the tensors actually allocated.
std::size_t count_extra_params(const NaeParams& params);

}  // namespace nae
