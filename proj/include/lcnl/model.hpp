#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcnl/dataset.hpp"
#include "lcnl/error.hpp"
#include "lcnl/numeric.hpp"
#include "lcnl/parameters.hpp"

namespace lcnl {

/// Dataset compiled against a Layout: dense row-major covariate matrix with
/// the layout's columns, predictor matrix, and chosen alternative indices.
class Design {
 public:
  Design() = default;

  Design(const Layout& layout, const Dataset& data) : k_(layout.covariates().size()), p_(layout.predictors().size()) {
    const ChoiceTree& tree = layout.tree();
    std::vector<std::size_t> cov_src;
    for (const auto& name : layout.covariates()) {
      auto idx = data.covariate_index(name);
      if (!idx)
        throw ModelError(ErrorKind::missing_covariate, name,
                         "not present for individual " + (data.empty() ? std::string("<none>") : data.observations[0].id));
      cov_src.push_back(*idx);
    }
    std::vector<std::size_t> pred_src;
    for (const auto& name : layout.predictors()) {
      auto idx = data.predictor_index(name);
      if (!idx)
        throw ModelError(ErrorKind::missing_covariate, name,
                         "class predictor not present for individual " +
                             (data.empty() ? std::string("<none>") : data.observations[0].id));
      pred_src.push_back(*idx);
    }
    x_.reserve(data.size() * k_);
    z_.reserve(data.size() * p_);
    for (const Observation& obs : data.observations) {
      auto chosen = tree.alternative_index(obs.choice);
      if (!chosen)
        throw ModelError(ErrorKind::unknown_alternative, obs.choice, "chosen by individual " + obs.id);
      chosen_.push_back(*chosen);
      ids_.push_back(obs.id);
      for (std::size_t k = 0; k < k_; ++k) {
        const std::size_t src = cov_src[k];
        if (src >= obs.covariates.size() || !std::isfinite(obs.covariates[src]))
          throw ModelError(ErrorKind::missing_covariate, layout.covariates()[k], "missing or non-finite for individual " + obs.id);
        x_.push_back(obs.covariates[src]);
      }
      for (std::size_t k = 0; k < p_; ++k) {
        const std::size_t src = pred_src[k];
        if (src >= obs.predictors.size() || !std::isfinite(obs.predictors[src]))
          throw ModelError(ErrorKind::missing_covariate, layout.predictors()[k], "missing or non-finite for individual " + obs.id);
        z_.push_back(obs.predictors[src]);
      }
    }
  }

  std::size_t size() const noexcept { return chosen_.size(); }
  std::size_t covariate_count() const noexcept { return k_; }
  std::size_t predictor_count() const noexcept { return p_; }
  const double* x(std::size_t i) const { return x_.data() + i * k_; }
  const double* z(std::size_t i) const { return z_.data() + i * p_; }
  std::size_t chosen(std::size_t i) const { return chosen_[i]; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<double> mutable_x(std::size_t i) { return {x_.data() + i * k_, k_}; }

 private:
  std::size_t k_ = 0;
  std::size_t p_ = 0;
  std::vector<double> x_;
  std::vector<double> z_;
  std::vector<std::size_t> chosen_;
  std::vector<std::string> ids_;
};

namespace kernel {

/// intercept + sum of slope * design value.
inline double linear(std::span<const double> theta, const BlockRef& b, const double* row) {
  double u = theta[b.offset];
  for (std::size_t k = 0; k < b.columns.size(); ++k) u += theta[b.offset + 1 + k] * row[b.columns[k]];
  return u;
}

inline double dissimilarity(const Layout& layout, std::span<const double> theta, std::size_t n) {
  const std::size_t at = layout.dissimilarity(n);
  return at == BlockRef::npos ? 1.0 : theta[at];
}

/// Alternative utilities of class c; the outside option is exactly zero.
inline void utilities(const Layout& layout, std::span<const double> theta, std::size_t c, const double* x,
                      std::span<double> v) {
  const auto outside = layout.tree().outside_option();
  for (std::size_t m = 0; m < v.size(); ++m)
    v[m] = (outside && *outside == m) ? 0.0 : linear(theta, layout.alternative(c, m), x);
}

/// Nest utilities of class c; degenerate entries are left at zero.
inline void nest_utilities(const Layout& layout, std::span<const double> theta, std::size_t c, const double* x,
                           std::span<double> w) {
  for (std::size_t n = 0; n < w.size(); ++n) {
    const BlockRef& b = layout.nest(c, n);
    w[n] = b.present() ? linear(theta, b, x) : 0.0;
  }
}

/// Membership logits z*theta_c for every class.
inline void membership_logits(const Layout& layout, std::span<const double> theta, const double* z,
                              std::span<double> a) {
  for (std::size_t c = 0; c < a.size(); ++c) a[c] = linear(theta, layout.membership(c), z);
}

/// Per-thread scratch sized for one tree.
struct Scratch {
  explicit Scratch(const Layout& layout)
      : score(layout.tree().nest_count()),
        gamma(layout.tree().nest_count()),
        member(layout.tree().alternative_count()),
        mix(2 * layout.classes()),
        v(layout.tree().alternative_count()),
        w(layout.tree().nest_count()),
        a(layout.classes()),
        lp(layout.classes()) {}

  std::vector<double> score, gamma, member, mix, v, w, a, lp;
};

/// Inclusive value of nest n given member utilities: log-sum-exp of V/lambda,
/// or the member's utility itself for a degenerate nest.
inline double inclusive(const ChoiceTree& tree, std::span<const double> v, std::size_t n, double lambda,
                        std::span<double> buf) {
  const Nest& nest = tree.nests()[n];
  const std::size_t first = tree.first_member(n);
  if (nest.degenerate()) return v[first];
  const std::size_t size = nest.alternatives.size();
  for (std::size_t j = 0; j < size; ++j) buf[j] = v[first + j] / lambda;
  return log_sum_exp(buf.first(size));
}

/// Fills gamma[n] and score[n] (the upper-level logit index of each nest).
inline void nest_scores(const Layout& layout, std::span<const double> theta, std::span<const double> v,
                        std::span<const double> w, Scratch& s) {
  const ChoiceTree& tree = layout.tree();
  for (std::size_t n = 0; n < tree.nest_count(); ++n) {
    const double lambda = dissimilarity(layout, theta, n);
    s.gamma[n] = inclusive(tree, v, n, lambda, s.member);
    s.score[n] = tree.nests()[n].degenerate() ? s.gamma[n] : w[n] + lambda * s.gamma[n];
  }
}

/// log P(m | c) for a single alternative from class-c utilities.
inline double class_log_prob(const Layout& layout, std::span<const double> theta, std::span<const double> v,
                             std::span<const double> w, std::size_t m, Scratch& s) {
  const ChoiceTree& tree = layout.tree();
  nest_scores(layout, theta, v, w, s);
  const std::size_t n = tree.nest_of(m);
  const double log_nest = s.score[n] - log_sum_exp(s.score);
  if (tree.nests()[n].degenerate()) return log_nest;
  const double lambda = dissimilarity(layout, theta, n);
  return log_nest + (v[m] / lambda - s.gamma[n]);
}

/// log H(c) from membership logits.
inline double log_membership(std::span<const double> a, std::size_t c) { return a[c] - log_sum_exp(a); }

/// log H(c) for every class.
inline void log_memberships(std::span<const double> a, std::span<double> log_h) {
  const double norm = log_sum_exp(a);
  for (std::size_t c = 0; c < a.size(); ++c) log_h[c] = a[c] - norm;
}

/// logsumexp_c [log H(c) + log P(m|c)] from precomputed log H.
inline double mixture_from_log_h(std::span<const double> log_h, std::span<const double> class_lp,
                                 std::span<double> buf) {
  for (std::size_t c = 0; c < log_h.size(); ++c) buf[c] = log_h[c] + class_lp[c];
  return log_sum_exp(buf.first(log_h.size()));
}

/// log P(m) = logsumexp_c [log H(c) + log P(m|c)].
inline double mixture_log_prob(std::span<const double> a, std::span<const double> class_lp, std::span<double> buf) {
  std::span<double> log_h = buf.subspan(a.size(), a.size());
  log_memberships(a, log_h);
  return mixture_from_log_h(log_h, class_lp, buf);
}

/// Log-likelihood contribution of one observation.
inline double observation_log_prob(const Layout& layout, std::span<const double> theta, const double* x,
                                   const double* z, std::size_t chosen, Scratch& s) {
  membership_logits(layout, theta, z, s.a);
  for (std::size_t c = 0; c < layout.classes(); ++c) {
    utilities(layout, theta, c, x, s.v);
    nest_utilities(layout, theta, c, x, s.w);
    s.lp[c] = class_log_prob(layout, theta, s.v, s.w, chosen, s);
  }
  return mixture_log_prob(s.a, s.lp, s.mix);
}

}  // namespace kernel

/// Every probability the model defines for one observation.
struct ProbabilityBundle {
  std::vector<double> membership;                // H(c)
  std::vector<std::vector<double>> inclusive;    // [c][nest] inclusive value
  std::vector<std::vector<double>> nest;         // [c][nest] P(n|c)
  std::vector<std::vector<double>> within;       // [c][alt] P(m|n,c)
  std::vector<std::vector<double>> conditional;  // [c][alt] P(m|c)
  std::vector<double> mixture;                   // P(m)
};

/// Probabilities for one design row. When `force_class` is set, membership
/// is replaced by the indicator of that class.
inline ProbabilityBundle probabilities(const Layout& layout, std::span<const double> theta, const double* x,
                                       const double* z, std::optional<std::size_t> force_class = std::nullopt) {
  const ChoiceTree& tree = layout.tree();
  const std::size_t classes = layout.classes();
  const std::size_t alts = tree.alternative_count();
  const std::size_t nests = tree.nest_count();
  kernel::Scratch s(layout);
  ProbabilityBundle out;
  out.membership.resize(classes);
  if (force_class) {
    out.membership[*force_class] = 1.0;
  } else {
    kernel::membership_logits(layout, theta, z, s.a);
    softmax(s.a, out.membership);
  }
  out.mixture.assign(alts, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    kernel::utilities(layout, theta, c, x, s.v);
    kernel::nest_utilities(layout, theta, c, x, s.w);
    kernel::nest_scores(layout, theta, s.v, s.w, s);
    std::vector<double> pn(nests), pw(alts), pc(alts);
    softmax(s.score, pn);
    for (std::size_t m = 0; m < alts; ++m) {
      const std::size_t n = tree.nest_of(m);
      pw[m] = tree.nests()[n].degenerate()
                  ? 1.0
                  : std::exp(s.v[m] / kernel::dissimilarity(layout, theta, n) - s.gamma[n]);
      pc[m] = pw[m] * pn[n];
      out.mixture[m] += out.membership[c] * pc[m];
    }
    out.inclusive.push_back(s.gamma);
    out.nest.push_back(std::move(pn));
    out.within.push_back(std::move(pw));
    out.conditional.push_back(std::move(pc));
  }
  return out;
}

/// H(c) = exp(z.theta_c) / sum exp(z.theta_c'). `theta` has one row per class
/// and columns (intercept, predictors...), so z has cols-1 entries.
inline std::vector<double> class_membership(std::span<const double> z, const Eigen::MatrixXd& theta) {
  if (theta.rows() == 0) throw ModelError(ErrorKind::dimension_mismatch, "theta", "no classes");
  if (static_cast<std::size_t>(theta.cols()) != z.size() + 1)
    throw ModelError(ErrorKind::dimension_mismatch, "z",
                     "has " + std::to_string(z.size()) + " entries; theta expects " + std::to_string(theta.cols() - 1) +
                         " predictors plus intercept");
  std::vector<double> a(theta.rows()), h(theta.rows());
  for (Eigen::Index c = 0; c < theta.rows(); ++c) {
    double s = theta(c, 0);
    for (std::size_t k = 0; k < z.size(); ++k) s += theta(c, k + 1) * z[k];
    a[c] = s;
  }
  softmax(a, h);
  return h;
}

/// Named, per-observation entry points over a fixed model structure. These
/// resolve covariates by name so errors can name the variable and the
/// individual; estimation uses the compiled Design path.
class ChoiceModel {
 public:
  explicit ChoiceModel(ModelSpec spec) : layout_(std::move(spec)) {}

  const Layout& layout() const noexcept { return layout_; }
  const ChoiceTree& tree() const noexcept { return layout_.tree(); }

  double alternative_utility(const Dataset& data, std::size_t i, const std::string& alt, std::size_t c,
                             const ParameterSet& params) const {
    auto m = tree().alternative_index(alt);
    if (!m) throw ModelError(ErrorKind::unknown_alternative, alt, "not in the choice tree");
    check_class(c);
    if (tree().alternative(*m).outside_option) return 0.0;
    const auto theta = layout_.pack(params);
    const auto row = design_row(data, i, tree().alternative(*m).covariates);
    return kernel::linear(theta, layout_.alternative(c, *m), row.data());
  }

  double inclusive_value(const Dataset& data, std::size_t i, const std::string& nest, std::size_t c,
                         const ParameterSet& params) const {
    auto n = tree().nest_index(nest);
    if (!n) throw ModelError(ErrorKind::invalid_tree, nest, "no such nest");
    check_class(c);
    const Nest& def = tree().nests()[*n];
    std::vector<std::string> needed;
    for (const auto& alt : def.alternatives) needed.insert(needed.end(), alt.covariates.begin(), alt.covariates.end());
    const auto theta = layout_.pack(params);
    const auto row = design_row(data, i, needed);
    std::vector<double> v(tree().alternative_count()), buf(tree().alternative_count());
    kernel::utilities(layout_, theta, c, row.data(), v);
    return kernel::inclusive(tree(), v, *n, kernel::dissimilarity(layout_, theta, *n), buf);
  }

  ProbabilityBundle choice_probabilities(const Dataset& data, std::size_t i, const ParameterSet& params) const {
    const auto theta = layout_.pack(params);
    const auto row = design_row(data, i, layout_.covariates());
    const auto z = predictor_row(data, i);
    return probabilities(layout_, theta, row.data(), z.data());
  }

 private:
  void check_class(std::size_t c) const {
    if (c >= layout_.classes())
      throw ModelError(ErrorKind::out_of_range, "class " + std::to_string(c), "model has " + std::to_string(layout_.classes()) + " classes");
  }

  /// Row over the layout's covariate columns; only `needed` must be present.
  std::vector<double> design_row(const Dataset& data, std::size_t i, const std::vector<std::string>& needed) const {
    if (i >= data.size()) throw ModelError(ErrorKind::out_of_range, "observation " + std::to_string(i), "past end of dataset");
    const Observation& obs = data.observations[i];
    std::vector<double> row(layout_.covariates().size(), 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::string& name = layout_.covariates()[k];
      const bool required = std::find(needed.begin(), needed.end(), name) != needed.end();
      auto idx = data.covariate_index(name);
      if (!idx || *idx >= obs.covariates.size() || !std::isfinite(obs.covariates[*idx])) {
        if (required) throw ModelError(ErrorKind::missing_covariate, name, "missing for individual " + obs.id);
        continue;
      }
      row[k] = obs.covariates[*idx];
    }
    return row;
  }

  std::vector<double> predictor_row(const Dataset& data, std::size_t i) const {
    const Observation& obs = data.observations[i];
    std::vector<double> z;
    for (const auto& name : layout_.predictors()) {
      auto idx = data.predictor_index(name);
      if (!idx || *idx >= obs.predictors.size() || !std::isfinite(obs.predictors[*idx]))
        throw ModelError(ErrorKind::missing_covariate, name, "class predictor missing for individual " + obs.id);
      z.push_back(obs.predictors[*idx]);
    }
    return z;
  }

  Layout layout_;
};

}  // namespace lcnl
