// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "nae/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nae/errors.hpp"
#include "nae/training.hpp"

namespace nae {

double Ga2mSpec::eval(std::span<const double> x) const {
  double y = intercept;
  for (std::size_t i = 0; i < univariate.size(); ++i)
    if (univariate[i]) y += univariate[i](x[i]);
  for (const auto& t : pairs) y += t.u(x[t.i]) * t.v(x[t.j]);
  return y;
}

std::vector<double> uniform_grid(const Domain& d, std::size_t points) {
  if (points < 2) throw UsageError("uniform_grid needs at least 2 points");
  std::vector<double> g(points);
  for (std::size_t p = 0; p < points; ++p)
    g[p] = p + 1 == points ? d.second
                           : d.first + (d.second - d.first) * static_cast<double>(p) /
                                           static_cast<double>(points - 1);
  return g;
}

namespace {

double log_cosh(double b) {
  const double a = std::abs(b);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// Knot grid over `d` with the given per-column functions; unused columns stay zero.
LookupEncoder make_lookup(const Domain& d, std::size_t knots, std::size_t width,
                          const std::vector<std::pair<std::size_t, ScalarFn>>& columns) {
  if (knots < 2) throw ConfigError("lookup tables need at least 2 knots");
  if (!(d.second > d.first)) throw ConfigError("feature domain must have lo < hi");
  LookupEncoder enc;
  enc.lo = d.first;
  enc.hi = d.second;
  enc.table = Matrix(knots, width);
  for (std::size_t k = 0; k < knots; ++k) {
    const double x = enc.knot_value(k);
    for (const auto& [c, f] : columns) enc.table(k, c) = f(x);
  }
  return enc;
}

NaeParams empty_params(const ModelConfig& config) {
  const std::size_t n = config.n_features;
  const std::size_t d = config.latent_dim;
  const std::size_t k = config.n_experts;
  NaeParams p;
  p.features.resize(n);
  for (auto& f : p.features) f.experts = {Matrix(d, k), Matrix(1, k)};
  const std::size_t blocks = config.variant == Variant::Diagonal ? n : n * n;
  p.gate.assign(blocks, Matrix(d, k));
  p.gate_bias = Matrix(n, k);
  p.intercept = Matrix(1, 1);
  return p;
}

void check_domains(const ModelConfig& config, const std::vector<Domain>& domains) {
  config.validate();
  if (domains.size() != config.n_features)
    throw ConfigError("need one domain per feature (" + std::to_string(config.n_features) + ")");
  if (!config.cardinalities.empty())
    for (std::size_t c : config.cardinalities)
      if (c != 0) throw ConfigError("constructions support continuous features only");
}

void check_c_const(const SeparableTerm& term, const Domain& dom_j, const TheoryOptions& opt) {
  if (!(term.c_const > 0.0)) throw ConstructionError("product term: C must be > 0");
  double vmax = 0.0;
  for (double z : uniform_grid(dom_j, std::max<std::size_t>(opt.check_grid, 2)))
    vmax = std::max(vmax, std::abs(term.v(z)));
  for (double z : uniform_grid(dom_j, opt.knots)) vmax = std::max(vmax, std::abs(term.v(z)));
  if (vmax / term.c_const >= 1.0)
    throw ConstructionError("product term (" + std::to_string(term.i) + "," + std::to_string(term.j) +
                            "): sup|v| = " + format_real(vmax) + " is not below C = " +
                            format_real(term.c_const));
}

void check_pair(const SeparableTerm& term, std::size_t n) {
  if (term.i >= n || term.j >= n) throw ConfigError("product term references a feature >= n");
  if (term.i == term.j) throw ConfigError("product term needs two distinct features");
  if (!term.u || !term.v) throw ConfigError("product term needs both u and v");
}

}  // namespace

double product_beta(const SeparableTerm& term, double vx) {
  const double ratio = vx / term.c_const;
  if (!(std::abs(ratio) < 1.0))
    throw ConstructionError("product term: |v| / C >= 1 at v = " + format_real(vx));
  return std::clamp(-std::atanh(ratio), -kBetaClamp, kBetaClamp);
}

NaeParams build_gam(const std::vector<ScalarFn>& f, double intercept, const ModelConfig& config,
                    const std::vector<Domain>& domains, const TheoryOptions& opt) {
  check_domains(config, domains);
  if (config.n_experts != 1) throw UsageError("build_gam requires K = 1");
  if (!f.empty() && f.size() != config.n_features)
    throw ConfigError("build_gam: need one function per feature");
  NaeParams p = empty_params(config);
  for (std::size_t i = 0; i < config.n_features; ++i) {
    std::vector<std::pair<std::size_t, ScalarFn>> cols;
    if (!f.empty() && f[i]) cols.emplace_back(0, f[i]);
    p.features[i].encoder = make_lookup(domains[i], opt.knots, config.latent_dim, cols);
    p.features[i].experts.weight(0, 0) = 1.0;
  }
  p.intercept(0, 0) = intercept;
  return p;
}

NaeParams build_product(const SeparableTerm& term, const ModelConfig& config,
                        const std::vector<Domain>& domains, const TheoryOptions& opt) {
  check_domains(config, domains);
  check_pair(term, config.n_features);
  if (config.variant != Variant::Standard)
    throw ConfigError("build_product needs the standard variant (cross-feature gates, softmax weights)");
  if (config.n_experts < 2 || config.n_active < 2)
    throw ConfigError("build_product needs at least 2 active experts");
  check_c_const(term, domains[term.j], opt);

  NaeParams p = empty_params(config);
  for (std::size_t f = 0; f < config.n_features; ++f) {
    std::vector<std::pair<std::size_t, ScalarFn>> cols;
    if (f == term.i) cols.emplace_back(0, term.u);
    if (f == term.j)
      cols.emplace_back(0, [&](double z) { return product_beta(term, term.v(z)) + opt.beta_perturbation; });
    p.features[f].encoder = make_lookup(domains[f], opt.knots, config.latent_dim, cols);
  }
  Matrix& heads = p.features[term.i].experts.weight;
  heads(0, 0) = term.c_const;
  heads(0, 1) = -term.c_const;
  Matrix& a = *p.gate_block(term.j, term.i);
  a(0, 0) = -1.0;
  a(0, 1) = 1.0;
  for (std::size_t k = 2; k < config.n_experts; ++k) p.gate_bias(term.i, k) = kUnusedLogit;
  return p;
}

std::vector<std::size_t> expert_budget(const Ga2mSpec& spec) {
  std::vector<std::size_t> k(spec.n_features(), 1);
  for (const auto& t : spec.pairs)
    if (t.i < k.size()) k[t.i] += 2;
  return k;
}

Matrix verification_points(const std::vector<Domain>& domains, std::size_t points_per_axis) {
  const std::size_t n = domains.size();
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<double>(points_per_axis);
  if (total <= 1e6) {
    const auto count = static_cast<std::size_t>(total);
    std::vector<std::vector<double>> axes;
    for (const auto& d : domains) axes.push_back(uniform_grid(d, points_per_axis));
    Matrix pts(count, n);
    for (std::size_t r = 0; r < count; ++r) {
      std::size_t rem = r;
      for (std::size_t i = n; i-- > 0;) {
        pts(r, i) = axes[i][rem % points_per_axis];
        rem /= points_per_axis;
      }
    }
    return pts;
  }
  SeededRng rng(0x5EED);
  Matrix pts(100000, n);
  for (std::size_t r = 0; r < pts.rows(); ++r)
    for (std::size_t i = 0; i < n; ++i) pts(r, i) = rng.uniform(domains[i].first, domains[i].second);
  return pts;
}

double sup_error(const NaeParams& params, const ModelConfig& config, const Matrix& points,
                 const std::function<double(std::span<const double>)>& target) {
  const auto pred = predict(params, config, points);
  double worst = 0.0;
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const double e = std::abs(pred[r] - target(points.row(r)));
    if (!(e <= worst)) worst = e;  // propagates NaN
  }
  return worst;
}

Ga2mBuild build_ga2m(const Ga2mSpec& spec, const ModelConfig& config, const TheoryOptions& opt) {
  check_domains(config, spec.domains);
  const std::size_t n = config.n_features;
  if (!spec.univariate.empty() && spec.univariate.size() != n)
    throw ConfigError("build_ga2m: need one univariate function per feature");
  if (config.variant != Variant::Standard && !spec.pairs.empty())
    throw ConfigError("build_ga2m: pairwise terms need the standard variant");
  for (const auto& t : spec.pairs) check_pair(t, n);

  const auto budget = expert_budget(spec);
  for (std::size_t i = 0; i < n; ++i)
    if (budget[i] > config.n_experts || budget[i] > config.n_active)
      throw ConfigError("expert budget: feature " + std::to_string(i) + " needs K_i = 1 + 2 * sum_j M_ij = " +
                        std::to_string(budget[i]) + " active experts, config has K = " +
                        std::to_string(config.n_experts) + ", C = " + std::to_string(config.n_active));

  // Latent columns: [f_i | u of pairs headed by i | (beta, log cosh beta) of pairs gated by i].
  std::vector<std::vector<std::pair<std::size_t, ScalarFn>>> cols(n);
  std::vector<std::size_t> width(n, 1);
  std::vector<std::size_t> u_col(spec.pairs.size());
  std::vector<std::size_t> b_col(spec.pairs.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!spec.univariate.empty() && spec.univariate[i]) cols[i].emplace_back(0, spec.univariate[i]);
  for (std::size_t m = 0; m < spec.pairs.size(); ++m) {
    const SeparableTerm& t = spec.pairs[m];
    check_c_const(t, spec.domains[t.j], opt);
    u_col[m] = width[t.i]++;
    cols[t.i].emplace_back(u_col[m], t.u);
    b_col[m] = width[t.j];
    width[t.j] += 2;
    const double perturb = opt.beta_perturbation;
    cols[t.j].emplace_back(b_col[m], [t, perturb](double z) { return product_beta(t, t.v(z)) + perturb; });
    cols[t.j].emplace_back(b_col[m] + 1, [t](double z) { return log_cosh(product_beta(t, t.v(z))); });
  }
  const std::size_t need = *std::max_element(width.begin(), width.end());
  if (config.latent_dim < need)
    throw ConfigError("build_ga2m: latent_dim " + std::to_string(config.latent_dim) +
                      " is below the " + std::to_string(need) + " columns this spec needs");

  NaeParams p = empty_params(config);
  for (std::size_t i = 0; i < n; ++i)
    p.features[i].encoder = make_lookup(spec.domains[i], opt.knots, config.latent_dim, cols[i]);

  std::vector<std::size_t> next_expert(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = static_cast<double>(budget[i] + 1) / 2.0;  // 1 + M_i blocks
    p.features[i].experts.weight(0, 0) = scale;
    p.gate_bias(i, 0) = std::numbers::ln2;
    for (std::size_t k = budget[i]; k < config.n_experts; ++k) p.gate_bias(i, k) = kUnusedLogit;
  }
  for (std::size_t m = 0; m < spec.pairs.size(); ++m) {
    const SeparableTerm& t = spec.pairs[m];
    const double scale = static_cast<double>(budget[t.i] + 1) / 2.0;
    const std::size_t plus = next_expert[t.i];
    const std::size_t minus = plus + 1;
    next_expert[t.i] += 2;
    Matrix& heads = p.features[t.i].experts.weight;
    heads(u_col[m], plus) = scale * t.c_const;
    heads(u_col[m], minus) = -scale * t.c_const;
    Matrix& a = *p.gate_block(t.j, t.i);
    a(b_col[m], plus) = -1.0;
    a(b_col[m], minus) = 1.0;
    a(b_col[m] + 1, plus) = -1.0;
    a(b_col[m] + 1, minus) = -1.0;
  }
  p.intercept(0, 0) = spec.intercept;

  Ga2mBuild out;
  const Matrix pts = verification_points(spec.domains, opt.eval_grid);
  out.achieved_error = sup_error(p, config, pts, [&](std::span<const double> x) { return spec.eval(x); });

  ModelConfig single = config;
  single.n_experts = 1;
  single.n_active = 1;
  single.latent_dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.univariate.empty() || !spec.univariate[i]) continue;
    std::vector<ScalarFn> only(n);
    only[i] = spec.univariate[i];
    const NaeParams g = build_gam(only, 0.0, single, spec.domains, opt);
    out.term_errors.push_back(
        {"f_" + std::to_string(i),
         sup_error(g, single, pts, [&](std::span<const double> x) { return only[i](x[i]); })});
  }
  ModelConfig pair_cfg = config;
  pair_cfg.n_experts = 2;
  pair_cfg.n_active = 2;
  pair_cfg.latent_dim = 1;
  for (std::size_t m = 0; m < spec.pairs.size(); ++m) {
    const SeparableTerm& t = spec.pairs[m];
    const NaeParams g = build_product(t, pair_cfg, spec.domains, opt);
    out.term_errors.push_back(
        {"pair_" + std::to_string(m) + "(" + std::to_string(t.i) + "," + std::to_string(t.j) + ")",
         sup_error(g, pair_cfg, pts, [&](std::span<const double> x) { return t.u(x[t.i]) * t.v(x[t.j]); })});
  }
  out.params = std::move(p);
  return out;
}

double gate_identity_error(std::size_t draws, double beta_max, std::uint64_t seed) {
  SeededRng rng(seed);
  const MaskVector all(2);
  double worst = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    const double alpha = rng.uniform(-50.0, 50.0);
    const double beta = rng.uniform(-beta_max, beta_max);
    const double logits[2] = {alpha - beta, alpha + beta};
    const auto r = softmax_masked(logits, all);
    worst = std::max(worst, std::abs((r[0] - r[1]) + std::tanh(beta)));
  }
  return worst;
}

namespace {

double to_unit(const Domain& d, double x) {
  return std::clamp((2.0 * x - d.first - d.second) / (d.second - d.first), -1.0, 1.0);
}

// T_0..T_degree at t.
std::vector<double> chebyshev_basis(double t, std::size_t degree) {
  std::vector<double> b(degree + 1);
  b[0] = 1.0;
  if (degree >= 1) b[1] = t;
  for (std::size_t a = 2; a <= degree; ++a) b[a] = 2.0 * t * b[a - 1] - b[a - 2];
  return b;
}

}  // namespace

SeparableExpansion chebyshev_separable(const std::function<double(double, double)>& f,
                                       std::size_t i, std::size_t j, const Domain& dom_i,
                                       const Domain& dom_j, std::size_t degree,
                                       std::size_t check_points) {
  const std::size_t nodes = degree + 1;
  std::vector<double> t(nodes);
  for (std::size_t p = 0; p < nodes; ++p)
    t[p] = std::cos(std::numbers::pi * (static_cast<double>(p) + 0.5) / static_cast<double>(nodes));
  auto from_unit = [](const Domain& d, double s) { return 0.5 * (d.first + d.second) + 0.5 * (d.second - d.first) * s; };

  Matrix coeff(nodes, nodes);
  std::vector<std::vector<double>> basis(nodes);
  for (std::size_t p = 0; p < nodes; ++p) basis[p] = chebyshev_basis(t[p], degree);
  for (std::size_t p = 0; p < nodes; ++p)
    for (std::size_t q = 0; q < nodes; ++q) {
      const double fv = f(from_unit(dom_i, t[p]), from_unit(dom_j, t[q]));
      for (std::size_t a = 0; a < nodes; ++a)
        for (std::size_t b = 0; b < nodes; ++b) coeff(a, b) += fv * basis[p][a] * basis[q][b];
    }
  const double norm = 4.0 / static_cast<double>(nodes * nodes);
  for (std::size_t a = 0; a < nodes; ++a)
    for (std::size_t b = 0; b < nodes; ++b)
      coeff(a, b) *= norm * (a == 0 ? 0.5 : 1.0) * (b == 0 ? 0.5 : 1.0);

  SeparableExpansion out;
  const auto grid_j = uniform_grid(dom_j, check_points);
  for (std::size_t a = 0; a < nodes; ++a) {
    SeparableTerm term;
    term.i = i;
    term.j = j;
    term.u = [a, degree, dom_i](double x) { return chebyshev_basis(to_unit(dom_i, x), degree)[a]; };
    std::vector<double> row(coeff.row(a).begin(), coeff.row(a).end());
    term.v = [row, degree, dom_j](double y) {
      const auto b = chebyshev_basis(to_unit(dom_j, y), degree);
      double s = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) s += row[k] * b[k];
      return s;
    };
    double vmax = 0.0;
    for (double y : grid_j) vmax = std::max(vmax, std::abs(term.v(y)));
    term.c_const = vmax > 0.0 ? 2.0 * vmax : 1.0;
    out.terms.push_back(std::move(term));
  }
  const auto grid_i = uniform_grid(dom_i, check_points);
  for (double x : grid_i)
    for (double y : grid_j) {
      double s = 0.0;
      for (const auto& term : out.terms) s += term.u(x) * term.v(y);
      out.residual = std::max(out.residual, std::abs(f(x, y) - s));
    }
  return out;
}

Ga2mSpec generic_interaction_spec() {
  constexpr double pi = std::numbers::pi;
  Ga2mSpec spec;
  spec.domains = {{-1.0, 1.0}, {-1.0, 1.0}};
  spec.univariate = {[](double x) { return 0.5 * x * x; }, [](double x) { return 0.5 * x * x; }};
  SeparableTerm t;
  t.i = 0;
  t.j = 1;
  t.u = [](double x) { return 2.0 * std::sin(pi * x); };
  t.v = [](double z) { return std::cos(pi * z); };
  t.c_const = 1.5;
  spec.pairs.push_back(t);
  return spec;
}

namespace {

TheoryCheck check(std::string name, double measured, double tolerance) {
  return {std::move(name), measured, tolerance, measured <= tolerance};
}

ModelConfig lookup_config(std::size_t n, std::size_t d, std::size_t k) {
  ModelConfig c;
  c.n_features = n;
  c.latent_dim = d;
  c.n_experts = k;
  c.n_active = k;
  return c;
}

}  // namespace

std::vector<TheoryCheck> run_theory_checks(const TheoryOptions& base) {
  TheoryOptions opt = base;
  if (opt.eval_grid < 2) throw UsageError("verification grid needs at least 2 points");
  // Align knots with the verification grid so every grid point is a table knot.
  const std::size_t steps = opt.eval_grid - 1;
  const std::size_t per_step = std::max<std::size_t>(1, (std::max<std::size_t>(opt.knots, 2) - 1 + steps - 1) / steps);
  opt.knots = steps * per_step + 1;

  std::vector<TheoryCheck> out;
  out.push_back(check("gate_identity", gate_identity_error(10000, 15.0, 2024), 1e-12));

  {
    const std::vector<Domain> dom = {{-1.0, 1.0}, {-1.0, 1.0}};
    const std::vector<ScalarFn> f = {[](double x) { return x; }, [](double x) { return x * x; }};
    const ModelConfig cfg = lookup_config(2, 1, 1);
    const NaeParams p = build_gam(f, 1.0, cfg, dom, opt);
    const Matrix pts = verification_points(dom, opt.eval_grid);
    out.push_back(check("gam_containment",
                        sup_error(p, cfg, pts, [](std::span<const double> x) { return 1.0 + x[0] + x[1] * x[1]; }),
                        1e-9));
  }

  {
    const std::vector<Domain> dom = {{0.0, 1.0}, {0.0, 1.0}};
    SeparableTerm t;
    t.i = 0;
    t.j = 1;
    t.u = [](double x) { return x; };
    t.v = [](double z) { return 0.9 * std::cos(std::numbers::pi * z); };
    t.c_const = 1.0;
    const ModelConfig cfg = lookup_config(2, 1, 2);
    const NaeParams p = build_product(t, cfg, dom, opt);
    const Matrix pts = verification_points(dom, opt.eval_grid);
    out.push_back(check("product_construction",
                        sup_error(p, cfg, pts, [&](std::span<const double> x) { return t.u(x[0]) * t.v(x[1]); }),
                        1e-9));
    const auto gi = uniform_grid(dom[0], opt.eval_grid);
    const auto gj = uniform_grid(dom[1], opt.eval_grid);
    const Matrix surface = pairwise_interaction(p, cfg, 0, 1, gi, gj);
    double worst = 0.0;
    for (std::size_t a = 0; a < gi.size(); ++a)
      for (std::size_t b = 0; b < gj.size(); ++b)
        worst = std::max(worst, std::abs(surface(a, b) - t.u(gi[a]) * t.v(gj[b])));
    out.push_back(check("product_interaction_surface", worst, 1e-9));
  }

  {
    Ga2mSpec spec;
    spec.domains = {{-1.0, 1.0}, {-1.0, 1.0}};
    SeparableTerm t;
    t.u = [](double x) { return x; };
    t.v = [](double z) { return z; };
    t.c_const = 1.5;
    spec.pairs.push_back(t);
    const auto k = expert_budget(spec);
    const ModelConfig cfg = lookup_config(2, 3, *std::max_element(k.begin(), k.end()));
    out.push_back(check("ga2m_product_x1_x2", build_ga2m(spec, cfg, opt).achieved_error, 1e-9));
  }

  {
    const Ga2mSpec spec = generic_interaction_spec();
    const auto k = expert_budget(spec);
    const ModelConfig cfg = lookup_config(2, 3, *std::max_element(k.begin(), k.end()));
    const Ga2mBuild b = build_ga2m(spec, cfg, opt);
    out.push_back(check("ga2m_generic_interaction", b.achieved_error, 1e-6));
    double sum = 0.0;
    for (const auto& e : b.term_errors) sum += e.sup_error;
    out.push_back(check("ga2m_triangle_bound", b.achieved_error - sum, 1e-12));

    bool rejected = false;
    try {
      build_ga2m(spec, lookup_config(2, 3, k[0] - 1), opt);
    } catch (const ConfigError&) {
      rejected = true;
    }
    out.push_back(check("ga2m_budget_enforced", rejected ? 0.0 : 1.0, 0.0));
  }
  return out;
}

}  // namespace nae
