// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nae/model.hpp"

namespace nae {

using ScalarFn = std::function<double(double)>;
using Domain = std::pair<double, double>;

/// One product u(x_i) v(x_j) routed through head i, gated by feature j.
struct SeparableTerm {
  std::size_t i = 0;
  std::size_t j = 1;
  ScalarFn u;
  ScalarFn v;
  double c_const = 1.0;  // must exceed sup |v|
};

struct Ga2mSpec {
  double intercept = 0.0;
  std::vector<ScalarFn> univariate;  // one per feature; empty function means f_i = 0
  std::vector<SeparableTerm> pairs;
  std::vector<Domain> domains;       // one per feature

  std::size_t n_features() const noexcept { return domains.size(); }
  /// Closed-form value at one input row.
  double eval(std::span<const double> x) const;
};

struct TheoryOptions {
  std::size_t knots = 2001;          // lookup-table resolution per feature
  std::size_t eval_grid = 101;       // points per axis of the verification grid
  std::size_t check_grid = 1001;     // points used to validate c_const against |v|
  double beta_perturbation = 0.0;    // added to every tabulated gate value (fault injection)
};

inline constexpr double kBetaClamp = 18.0;
/// Gate bias that gives an unused expert exactly zero relevance.
inline constexpr double kUnusedLogit = -1000.0;

/// Uniform grid of `points` values over `d` (points >= 2).
std::vector<double> uniform_grid(const Domain& d, std::size_t points);

/// K = 1 NAE with lookup encoders realizing omega0 + sum_i f_i(x_i).
NaeParams build_gam(const std::vector<ScalarFn>& f, double intercept, const ModelConfig& config,
                    const std::vector<Domain>& domains, const TheoryOptions& opt = {});

/// Two experts on head i output +C u(x_i) and -C u(x_i); head i's gate logits are
/// (-beta(x_j), +beta(x_j)) with beta = -artanh(v / C), so o_i = u(x_i) v(x_j). Every other
/// gate block is zero and every other head outputs 0.
NaeParams build_product(const SeparableTerm& term, const ModelConfig& config,
                        const std::vector<Domain>& domains, const TheoryOptions& opt = {});

/// beta(x_j) = -artanh(v(x_j) / C), clamped to |beta| <= kBetaClamp.
double product_beta(const SeparableTerm& term, double vx);

/// Experts needed on each head: 1 + 2 * (number of pair terms routed through it).
std::vector<std::size_t> expert_budget(const Ga2mSpec& spec);

struct TermError {
  std::string name;
  double sup_error = 0.0;
};

struct Ga2mBuild {
  NaeParams params;
  double achieved_error = 0.0;  // sup over the verification grid
  std::vector<TermError> term_errors;
};

/// Composes additive experts and pair blocks. Each pair block's logits carry
/// -log cosh(beta) so every block keeps a constant softmax mass; heads are scaled by the
/// number of blocks to undo the shared normalization.
Ga2mBuild build_ga2m(const Ga2mSpec& spec, const ModelConfig& config, const TheoryOptions& opt = {});

/// Verification points: the full product grid when it has at most 1e6 points, otherwise
/// 1e5 seeded uniform draws.
Matrix verification_points(const std::vector<Domain>& domains, std::size_t points_per_axis);

/// sup |model(x) - target(x)| over the rows of `points`.
double sup_error(const NaeParams& params, const ModelConfig& config, const Matrix& points,
                 const std::function<double(std::span<const double>)>& target);

/// Largest |(r+ - r-) + tanh(beta)| over `draws` random (alpha, beta), |beta| <= beta_max.
double gate_identity_error(std::size_t draws, double beta_max, std::uint64_t seed);

struct SeparableExpansion {
  std::vector<SeparableTerm> terms;
  double residual = 0.0;  // sup over a check grid of |f - sum u v|
};

/// Tensor-product Chebyshev interpolation of f on dom_i x dom_j with degree `degree` per axis,
/// regrouped into degree + 1 separable terms.
SeparableExpansion chebyshev_separable(const std::function<double(double, double)>& f,
                                       std::size_t i, std::size_t j, const Domain& dom_i,
                                       const Domain& dom_j, std::size_t degree,
                                       std::size_t check_points = 201);

/// D.4-style target 2 sin(pi x1) cos(pi x2) + x1^2 / 2 + x2^2 / 2 on [-1, 1]^2.
Ga2mSpec generic_interaction_spec();

struct TheoryCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// All representability checks behind `verify-theory`.
std::vector<TheoryCheck> run_theory_checks(const TheoryOptions& opt);

}  // namespace nae
