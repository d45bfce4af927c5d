#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lcnl/error.hpp"
#include "lcnl/model.hpp"

namespace lcnl {

/// How observations are weighted in a class-specific table.
///  - indicator: plain average of P(m|c) derivatives (membership forced to
///    the class indicator).
///  - membership: average weighted by each observation's H(c). With these
///    weights sum_c mean(H(c)) * table_c equals the mixture table exactly.
enum class ClassWeighting { indicator, membership };

struct EffectsOptions {
  /// Use P(x=1) - P(x=0) for variables observed only at 0 and 1.
  bool discrete_binary = true;
  /// Central-difference step h = relative_step * max(1, |x|).
  double relative_step = 1e-5;
};

/// Rows are variables, columns alternatives. Each cell is the sample mean of
/// dP(m)/dx (or the discrete 0 -> 1 change).
struct EffectsTable {
  std::vector<std::string> variables;
  std::vector<std::string> alternatives;
  std::vector<std::vector<double>> effects;
  std::vector<double> base;
  std::vector<bool> discrete;
  std::optional<std::size_t> cls;
  ClassWeighting weighting = ClassWeighting::indicator;

  double row_sum(std::size_t r) const {
    double s = 0.0;
    for (double v : effects[r]) s += v;
    return s;
  }
};

namespace detail {

struct EffectsContext {
  const Layout& layout;
  const Design& design;
  std::span<const double> theta;
  std::optional<std::size_t> cls;
  ClassWeighting weighting;
};

/// P(m) (or P(m|c)) at a design row.
inline std::vector<double> row_probabilities(const EffectsContext& ctx, const double* x, const double* z) {
  if (!ctx.cls) return probabilities(ctx.layout, ctx.theta, x, z).mixture;
  return probabilities(ctx.layout, ctx.theta, x, z, ctx.cls).conditional[*ctx.cls];
}

inline double observation_weight(const EffectsContext& ctx, const double* x, const double* z) {
  if (!ctx.cls || ctx.weighting == ClassWeighting::indicator) return 1.0;
  return probabilities(ctx.layout, ctx.theta, x, z).membership[*ctx.cls];
}

inline bool is_binary(const Design& design, std::size_t column) {
  for (std::size_t i = 0; i < design.size(); ++i) {
    const double v = design.x(i)[column];
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

inline EffectsTable effects_table(const Layout& layout, const Dataset& data, const ParameterSet& params,
                                  const std::vector<std::string>& variables, std::optional<std::size_t> cls,
                                  ClassWeighting weighting, const EffectsOptions& options) {
  if (data.empty()) throw ModelError(ErrorKind::empty_data, "effects", "dataset has no observations");
  if (cls && *cls >= layout.classes())
    throw ModelError(ErrorKind::out_of_range, "class " + std::to_string(*cls),
                     "model has " + std::to_string(layout.classes()) + " classes");
  const auto& covs = layout.covariates();
  std::vector<std::optional<std::size_t>> columns;
  for (const auto& v : variables) {
    auto it = std::find(covs.begin(), covs.end(), v);
    if (it != covs.end()) {
      columns.emplace_back(static_cast<std::size_t>(it - covs.begin()));
    } else if (data.covariate_index(v)) {
      columns.emplace_back(std::nullopt);  // present in the data, enters no utility
    } else {
      throw ModelError(ErrorKind::unknown_variable, v, "not a covariate of the model or the dataset");
    }
  }

  Design design(layout, data);
  const auto theta = layout.pack(params);
  const EffectsContext ctx{layout, design, theta, cls, weighting};
  const std::size_t alts = layout.tree().alternative_count();
  const std::size_t n = design.size();

  EffectsTable table;
  table.variables = variables;
  table.alternatives = layout.tree().alternative_ids();
  table.cls = cls;
  table.weighting = weighting;
  table.effects.assign(variables.size(), std::vector<double>(alts, 0.0));
  table.base.assign(alts, 0.0);
  for (const auto& col : columns) table.discrete.push_back(col && options.discrete_binary && is_binary(design, *col));

  std::vector<double> weights(n);
  double total_weight = 0.0;
  std::vector<double> row(design.covariate_count());
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = design.x(i);
    const double* z = design.z(i);
    weights[i] = observation_weight(ctx, x, z);
    total_weight += weights[i];
    const auto p = row_probabilities(ctx, x, z);
    for (std::size_t m = 0; m < alts; ++m) table.base[m] += weights[i] * p[m];

    for (std::size_t r = 0; r < variables.size(); ++r) {
      if (!columns[r]) continue;
      const std::size_t k = *columns[r];
      std::copy(x, x + row.size(), row.begin());
      if (table.discrete[r]) {
        row[k] = 1.0;
        const auto hi = row_probabilities(ctx, row.data(), z);
        row[k] = 0.0;
        const auto lo = row_probabilities(ctx, row.data(), z);
        for (std::size_t m = 0; m < alts; ++m) table.effects[r][m] += weights[i] * (hi[m] - lo[m]);
        continue;
      }
      const double h = options.relative_step * std::max(1.0, std::abs(x[k]));
      row[k] = x[k] + h;
      const auto hi = row_probabilities(ctx, row.data(), z);
      row[k] = x[k] - h;
      const auto lo = row_probabilities(ctx, row.data(), z);
      const double scale = weights[i] / (2.0 * h);
      for (std::size_t m = 0; m < alts; ++m) table.effects[r][m] += scale * (hi[m] - lo[m]);
    }
  }
  if (!(total_weight > 0.0)) throw ModelError(ErrorKind::empty_data, "effects", "class weights sum to zero");
  for (auto& r : table.effects)
    for (double& v : r) v /= total_weight;
  for (double& v : table.base) v /= total_weight;
  return table;
}

}  // namespace detail

/// Averaged marginal effects of each named covariate on every alternative's
/// mixture probability. A variable is perturbed in every utility and nest
/// design vector containing it at once, so effects flow through inclusive
/// values to alternatives whose own utility omits the variable.
inline EffectsTable marginal_effects(const Layout& layout, const Dataset& data, const ParameterSet& params,
                                     const std::vector<std::string>& variables, const EffectsOptions& options = {}) {
  return detail::effects_table(layout, data, params, variables, std::nullopt, ClassWeighting::indicator, options);
}

/// Same as marginal_effects for the class-c probabilities P(m|c).
inline EffectsTable class_effects(const Layout& layout, const Dataset& data, const ParameterSet& params,
                                  const std::vector<std::string>& variables, std::size_t cls,
                                  ClassWeighting weighting = ClassWeighting::indicator,
                                  const EffectsOptions& options = {}) {
  return detail::effects_table(layout, data, params, variables, cls, weighting, options);
}

/// One row of class_effects.
inline std::vector<double> class_conditional_effects(const Layout& layout, const Dataset& data,
                                                     const ParameterSet& params, const std::string& variable,
                                                     std::size_t cls,
                                                     ClassWeighting weighting = ClassWeighting::indicator,
                                                     const EffectsOptions& options = {}) {
  return class_effects(layout, data, params, {variable}, cls, weighting, options).effects.front();
}

/// effect / base, e.g. a 0.0165 change on a 0.1847 base is +8.9%.
inline double relative_effect(double effect, double base) {
  if (!(base > 0.0)) throw ModelError(ErrorKind::out_of_range, "base", "base probability must be positive");
  return effect / base;
}

/// Mean membership probability of each class over the dataset.
inline std::vector<double> class_shares(const Layout& layout, const Dataset& data, const ParameterSet& params) {
  const Design design(layout, data);
  const auto theta = layout.pack(params);
  std::vector<double> shares(layout.classes(), 0.0), a(layout.classes()), h(layout.classes());
  for (std::size_t i = 0; i < design.size(); ++i) {
    kernel::membership_logits(layout, theta, design.z(i), a);
    softmax(a, h);
    for (std::size_t c = 0; c < h.size(); ++c) shares[c] += h[c];
  }
  for (double& s : shares) s /= static_cast<double>(design.size());
  return shares;
}

}  // namespace lcnl
