#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcnl/error.hpp"

namespace lcnl {

/// Step sizes h_i = relative * max(1, |x_i|).
struct StepPolicy {
  double gradient = 1e-6;
  double hessian = 1e-4;

  static double step(double x, double relative) { return relative * std::max(1.0, std::abs(x)); }
};

namespace detail {

inline std::string coordinate_name(std::size_t i, std::span<const std::string> labels) {
  return i < labels.size() ? labels[i] : "coordinate " + std::to_string(i);
}

template <class F>
double checked_eval(F& f, const std::vector<double>& x, std::size_t i, std::span<const std::string> labels) {
  const double v = f(std::span<const double>(x));
  if (!std::isfinite(v))
    throw ModelError(ErrorKind::non_finite, coordinate_name(i, labels), "objective not finite at perturbed point");
  return v;
}

}  // namespace detail

/// Central-difference gradient over `coords`; other entries are 0.
template <class F>
std::vector<double> central_gradient(F&& f, std::span<const double> x, std::span<const std::size_t> coords,
                                     double relative = StepPolicy{}.gradient,
                                     std::span<const std::string> labels = {}) {
  std::vector<double> g(x.size(), 0.0);
  std::vector<double> work(x.begin(), x.end());
  for (std::size_t i : coords) {
    const double h = StepPolicy::step(x[i], relative);
    work[i] = x[i] + h;
    const double up = detail::checked_eval(f, work, i, labels);
    work[i] = x[i] - h;
    const double down = detail::checked_eval(f, work, i, labels);
    work[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Four-point second difference d2f/dxi dxj with steps hi, hj. The
/// perturbation is applied to coordinate i first, then j.
template <class F>
double second_difference(F&& f, std::span<const double> x, std::size_t i, std::size_t j, double hi, double hj,
                         std::span<const std::string> labels = {}) {
  std::vector<double> work(x.begin(), x.end());
  if (i == j) {
    const double f0 = detail::checked_eval(f, work, i, labels);
    work[i] = x[i] + hi;
    const double up = detail::checked_eval(f, work, i, labels);
    work[i] = x[i] - hi;
    const double down = detail::checked_eval(f, work, i, labels);
    return (up - 2.0 * f0 + down) / (hi * hi);
  }
  auto at = [&](double si, double sj) {
    work[i] = x[i] + si * hi;
    work[j] = x[j] + sj * hj;
    const double v = detail::checked_eval(f, work, i, labels);
    work[i] = x[i];
    work[j] = x[j];
    return v;
  };
  return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hi * hj);
}

/// Hessian over `coords` only (row/column k is coordinate coords[k]).
/// Central second differences; the result is symmetrized as (H + H^T)/2.
template <class F>
Eigen::MatrixXd central_hessian(F&& f, std::span<const double> x, std::span<const std::size_t> coords,
                                double relative = StepPolicy{}.hessian, std::span<const std::string> labels = {}) {
  const auto k = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd h(k, k);
  std::vector<double> work(x.begin(), x.end());
  const double f0 = detail::checked_eval(f, work, coords.empty() ? 0 : coords[0], labels);
  for (Eigen::Index a = 0; a < k; ++a) {
    const std::size_t i = coords[a];
    const double hi = StepPolicy::step(x[i], relative);
    work[i] = x[i] + hi;
    const double up = detail::checked_eval(f, work, i, labels);
    work[i] = x[i] - hi;
    const double down = detail::checked_eval(f, work, i, labels);
    work[i] = x[i];
    h(a, a) = (up - 2.0 * f0 + down) / (hi * hi);
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const std::size_t j = coords[b];
      h(a, b) = second_difference(f, x, i, j, hi, StepPolicy::step(x[j], relative), labels);
      h(b, a) = h(a, b);
    }
  }
  return 0.5 * (h + h.transpose());
}

/// Per-observation central-difference scores. `terms(x, out)` writes the
/// per-observation objective terms; row r of the result is observation r,
/// column k is coordinate coords[k].
template <class F>
Eigen::MatrixXd central_scores(F&& terms, std::span<const double> x, std::span<const std::size_t> coords,
                               std::size_t observations, double relative = StepPolicy{}.gradient,
                               std::span<const std::string> labels = {}) {
  Eigen::MatrixXd s(static_cast<Eigen::Index>(observations), static_cast<Eigen::Index>(coords.size()));
  std::vector<double> work(x.begin(), x.end());
  std::vector<double> up(observations), down(observations);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const std::size_t i = coords[k];
    const double h = StepPolicy::step(x[i], relative);
    work[i] = x[i] + h;
    terms(std::span<const double>(work), std::span<double>(up));
    work[i] = x[i] - h;
    terms(std::span<const double>(work), std::span<double>(down));
    work[i] = x[i];
    for (std::size_t r = 0; r < observations; ++r) {
      if (!std::isfinite(up[r]) || !std::isfinite(down[r]))
        throw ModelError(ErrorKind::non_finite, detail::coordinate_name(i, labels),
                         "observation term not finite at perturbed point");
      s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = (up[r] - down[r]) / (2.0 * h);
    }
  }
  return s;
}

}  // namespace lcnl
