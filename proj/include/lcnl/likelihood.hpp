#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcnl/model.hpp"
#include "lcnl/numeric.hpp"

namespace lcnl {

inline constexpr const char* kBicConvention = "k*ln(N) - 2*LL";

struct LikelihoodReport {
  double log_likelihood = 0.0;
  std::vector<double> per_observation;
  std::size_t observations = 0;
  std::size_t free_parameters = 0;
  double bic = 0.0;
  std::string bic_convention = kBicConvention;
};

/// k*ln(N) - 2*LL.
inline double bic(double log_likelihood, std::size_t free_parameters, double observations) {
  if (!(observations > 0)) throw ModelError(ErrorKind::empty_data, "bic", "N must be positive");
  return static_cast<double>(free_parameters) * std::log(observations) - 2.0 * log_likelihood;
}

inline double bic(const LikelihoodReport& r) {
  return bic(r.log_likelihood, r.free_parameters, static_cast<double>(r.observations));
}

/// Full-information log-likelihood over a compiled design. Per-observation
/// terms are written to an array (optionally in parallel) and reduced with
/// pairwise_sum, so the total does not depend on the thread count.
class Likelihood {
 public:
  Likelihood(const Layout& layout, const Design& design) : layout_(&layout), design_(&design) {}

  const Layout& layout() const noexcept { return *layout_; }
  const Design& design() const noexcept { return *design_; }

  void per_observation(std::span<const double> theta, std::span<double> out) const {
    const auto n = static_cast<long>(design_->size());
#pragma omp parallel
    {
      kernel::Scratch s(*layout_);
#pragma omp for schedule(static)
      for (long i = 0; i < n; ++i)
        out[i] = kernel::observation_log_prob(*layout_, theta, design_->x(i), design_->z(i), design_->chosen(i), s);
    }
  }

  std::vector<double> per_observation(std::span<const double> theta) const {
    std::vector<double> out(design_->size());
    per_observation(theta, out);
    return out;
  }

  double operator()(std::span<const double> theta) const {
    const auto terms = per_observation(theta);
    return pairwise_sum(terms);
  }

  LikelihoodReport report(std::span<const double> theta, std::size_t free_parameters) const {
    LikelihoodReport r;
    r.per_observation = per_observation(theta);
    r.log_likelihood = pairwise_sum(r.per_observation);
    r.observations = design_->size();
    r.free_parameters = free_parameters;
    r.bic = r.observations > 0 ? bic(r) : 0.0;
    return r;
  }

 private:
  const Layout* layout_;
  const Design* design_;
};

/// Log-likelihood of `data` under `params`.
inline LikelihoodReport log_likelihood(const Layout& layout, const Dataset& data, const ParameterSet& params) {
  const Design design(layout, data);
  const auto theta = layout.pack(params);
  const auto tags = layout.tags(params);
  return Likelihood(layout, design).report(theta, free_indices(tags).size());
}

/// Log-likelihood with cached per-observation state, for coordinate-wise
/// search. propose() evaluates the objective with one coordinate changed,
/// recomputing only what that coordinate touches; commit() keeps the last
/// proposal. Values are bit-identical to Likelihood on the same vector
/// because both run the same kernel on the same inputs.
class IncrementalLikelihood {
 public:
  IncrementalLikelihood(const Layout& layout, const Design& design)
      : layout_(&layout),
        design_(&design),
        n_(design.size()),
        classes_(layout.classes()),
        alts_(layout.tree().alternative_count()),
        nests_(layout.tree().nest_count()) {
    v_.resize(n_ * classes_ * alts_);
    w_.resize(n_ * classes_ * nests_);
    a_.resize(n_ * classes_);
    log_h_.resize(n_ * classes_);
    trial_log_h_.resize(n_ * classes_);
    lp_.resize(n_ * classes_);
    ll_.resize(n_);
    trial_value_.resize(n_);
    trial_lp_.resize(n_ * classes_);
    trial_ll_.resize(n_);
  }

  double reset(std::span<const double> theta) {
    theta_.assign(theta.begin(), theta.end());
    const auto n = static_cast<long>(n_);
#pragma omp parallel
    {
      kernel::Scratch s(*layout_);
#pragma omp for schedule(static)
      for (long i = 0; i < n; ++i) {
        const double* x = design_->x(i);
        std::span<double> a{&a_[i * classes_], classes_};
        kernel::membership_logits(*layout_, theta_, design_->z(i), a);
        for (std::size_t c = 0; c < classes_; ++c) {
          std::span<double> v{&v_[(i * classes_ + c) * alts_], alts_};
          std::span<double> w{&w_[(i * classes_ + c) * nests_], nests_};
          kernel::utilities(*layout_, theta_, c, x, v);
          kernel::nest_utilities(*layout_, theta_, c, x, w);
          lp_[i * classes_ + c] = kernel::class_log_prob(*layout_, theta_, v, w, design_->chosen(i), s);
        }
        std::span<double> log_h{&log_h_[i * classes_], classes_};
        kernel::log_memberships(a, log_h);
        ll_[i] = kernel::mixture_from_log_h(log_h, {&lp_[i * classes_], classes_}, s.mix);
      }
    }
    value_ = pairwise_sum(ll_);
    pending_ = false;
    return value_;
  }

  double value() const noexcept { return value_; }
  std::span<const double> point() const noexcept { return theta_; }

  double propose(std::size_t j, double x) {
    const Slot& slot = layout_->slots()[j];
    const double saved = theta_[j];
    theta_[j] = x;
    const auto n = static_cast<long>(n_);
    const std::size_t C = classes_;
    // A slope whose design value is 0 leaves that row untouched.
    const double* column = nullptr;
    std::size_t stride = 0;
    if (slot.kind != BlockKind::dissimilarity && slot.coef > 0) {
      const BlockRef& b = slot.kind == BlockKind::alternative ? layout_->alternative(slot.cls, slot.owner)
                          : slot.kind == BlockKind::nest      ? layout_->nest(slot.cls, slot.owner)
                                                              : layout_->membership(slot.cls);
      const std::size_t k = b.columns[slot.coef - 1];
      column = (slot.kind == BlockKind::membership ? design_->z(0) : design_->x(0)) + k;
      stride = slot.kind == BlockKind::membership ? design_->predictor_count() : design_->covariate_count();
    }
#pragma omp parallel
    {
      kernel::Scratch s(*layout_);
#pragma omp for schedule(static)
      for (long i = 0; i < n; ++i) {
        std::span<double> lp{&trial_lp_[i * C], C};
        std::span<double> log_h{&trial_log_h_[i * C], C};
        std::copy(&lp_[i * C], &lp_[i * C] + C, lp.begin());
        std::copy(&log_h_[i * C], &log_h_[i * C] + C, log_h.begin());
        if (column && column[i * stride] == 0.0) {
          trial_ll_[i] = ll_[i];
          switch (slot.kind) {
            case BlockKind::alternative: trial_value_[i] = v_[(i * C + slot.cls) * alts_ + slot.owner]; break;
            case BlockKind::nest: trial_value_[i] = w_[(i * C + slot.cls) * nests_ + slot.owner]; break;
            default: trial_value_[i] = a_[i * C + slot.cls]; break;
          }
          continue;
        }
        const double* xi = design_->x(i);
        const std::size_t chosen = design_->chosen(i);
        switch (slot.kind) {
          case BlockKind::alternative: {
            const std::size_t c = slot.cls;
            std::copy_n(&v_[(i * C + c) * alts_], alts_, s.v.begin());
            const auto outside = layout_->tree().outside_option();
            const double u = (outside && *outside == slot.owner)
                                 ? 0.0
                                 : kernel::linear(theta_, layout_->alternative(c, slot.owner), xi);
            s.v[slot.owner] = u;
            trial_value_[i] = u;
            lp[c] = kernel::class_log_prob(*layout_, theta_, s.v, {&w_[(i * C + c) * nests_], nests_}, chosen, s);
            break;
          }
          case BlockKind::nest: {
            const std::size_t c = slot.cls;
            std::copy_n(&w_[(i * C + c) * nests_], nests_, s.w.begin());
            const double u = kernel::linear(theta_, layout_->nest(c, slot.owner), xi);
            s.w[slot.owner] = u;
            trial_value_[i] = u;
            lp[c] = kernel::class_log_prob(*layout_, theta_, {&v_[(i * C + c) * alts_], alts_}, s.w, chosen, s);
            break;
          }
          case BlockKind::membership: {
            std::copy_n(&a_[i * C], C, s.a.begin());
            const double u = kernel::linear(theta_, layout_->membership(slot.cls), design_->z(i));
            s.a[slot.cls] = u;
            trial_value_[i] = u;
            kernel::log_memberships(s.a, log_h);
            break;
          }
          case BlockKind::dissimilarity: {
            for (std::size_t c = 0; c < C; ++c)
              lp[c] = kernel::class_log_prob(*layout_, theta_, {&v_[(i * C + c) * alts_], alts_},
                                             {&w_[(i * C + c) * nests_], nests_}, chosen, s);
            break;
          }
        }
        trial_ll_[i] = kernel::mixture_from_log_h(log_h, lp, s.mix);
      }
    }
    theta_[j] = saved;
    pending_ = true;
    pending_index_ = j;
    pending_x_ = x;
    trial_total_ = pairwise_sum(trial_ll_);
    return trial_total_;
  }

  /// Keeps the last proposal. No-op if nothing is pending.
  void commit() {
    if (!pending_) return;
    const std::size_t j = pending_index_;
    const Slot& slot = layout_->slots()[j];
    theta_[j] = pending_x_;
    const std::size_t C = classes_;
    for (std::size_t i = 0; i < n_; ++i) {
      switch (slot.kind) {
        case BlockKind::alternative: v_[(i * C + slot.cls) * alts_ + slot.owner] = trial_value_[i]; break;
        case BlockKind::nest: w_[(i * C + slot.cls) * nests_ + slot.owner] = trial_value_[i]; break;
        case BlockKind::membership: a_[i * C + slot.cls] = trial_value_[i]; break;
        case BlockKind::dissimilarity: break;
      }
    }
    lp_.swap(trial_lp_);
    log_h_.swap(trial_log_h_);
    ll_.swap(trial_ll_);
    value_ = trial_total_;
    pending_ = false;
  }

 private:
  const Layout* layout_;
  const Design* design_;
  std::size_t n_, classes_, alts_, nests_;
  std::vector<double> theta_;
  std::vector<double> v_, w_, a_, log_h_, lp_, ll_;
  std::vector<double> trial_value_, trial_log_h_, trial_lp_, trial_ll_;
  double value_ = 0.0;
  double trial_total_ = 0.0;
  bool pending_ = false;
  std::size_t pending_index_ = 0;
  double pending_x_ = 0.0;
};

}  // namespace lcnl
