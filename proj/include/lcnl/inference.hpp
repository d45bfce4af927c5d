#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcnl/derivatives.hpp"
#include "lcnl/error.hpp"
#include "lcnl/likelihood.hpp"

namespace lcnl {

/// Which middle term the sandwich uses. `opg` sums per-observation score
/// outer products; `literal_eq15` uses the outer product of the summed
/// gradient, which is near zero at an interior optimum.
enum class MiddleTerm { opg, literal_eq15 };

struct InferenceOptions {
  MiddleTerm middle = MiddleTerm::opg;
  double ridge_floor = 1e-8;
  double ridge_cap = 1e-2;
  StepPolicy steps;
};

struct CovarianceReport {
  Eigen::MatrixXd covariance;
  std::vector<double> standard_errors;
  std::vector<std::string> names;
  std::vector<std::size_t> flat_index;
  double ridge = 0.0;
  double min_eigenvalue = 0.0;
  bool literal_eq15 = false;
};

/// [A]^-1 B [A]^-1 with A = -H. A ridge eps*I is added only when the smallest
/// eigenvalue of A is below `ridge_floor`; eps starts at ridge_floor and
/// doubles up to `ridge_cap`.
inline CovarianceReport sandwich(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& middle,
                                 const InferenceOptions& options = {}) {
  if (hessian.rows() != hessian.cols() || middle.rows() != hessian.rows() || middle.cols() != hessian.cols())
    throw ModelError(ErrorKind::dimension_mismatch, "sandwich", "hessian and middle term must be square and equal-sized");
  CovarianceReport r;
  r.literal_eq15 = options.middle == MiddleTerm::literal_eq15;
  const auto k = hessian.rows();
  if (k == 0) return r;

  Eigen::MatrixXd a = -0.5 * (hessian + hessian.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  const double max_eigenvalue = eig.eigenvalues().maxCoeff();
  if (r.min_eigenvalue < options.ridge_floor) {
    double eps = options.ridge_floor;
    for (;; eps *= 2.0) {
      if (eps > options.ridge_cap) {
        const double cond = r.min_eigenvalue > 0 ? max_eigenvalue / r.min_eigenvalue
                                                 : std::numeric_limits<double>::infinity();
        throw ModelError(ErrorKind::singular_matrix, "-H",
                         "min eigenvalue " + std::to_string(r.min_eigenvalue) + ", max eigenvalue " +
                             std::to_string(max_eigenvalue) + ", condition number " + std::to_string(cond) +
                             "; ridge cap " + std::to_string(options.ridge_cap) + " exceeded");
      }
      if (r.min_eigenvalue + eps >= options.ridge_floor) break;
    }
    r.ridge = eps;
    a += eps * Eigen::MatrixXd::Identity(k, k);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd cov = inv * middle * inv;
  r.covariance = 0.5 * (cov + cov.transpose());
  r.standard_errors.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) r.standard_errors[i] = std::sqrt(std::max(0.0, r.covariance(i, i)));
  return r;
}

/// Sum of per-observation score outer products (scores: N x k).
inline Eigen::MatrixXd outer_product_of_scores(const Eigen::MatrixXd& scores) { return scores.transpose() * scores; }

/// Robust covariance of the free parameters at `theta_hat`.
inline CovarianceReport sandwich_covariance(const Likelihood& likelihood, std::span<const double> theta_hat,
                                            std::span<const Constraint> tags, const InferenceOptions& options = {}) {
  const Layout& layout = likelihood.layout();
  const auto coords = free_indices(tags);
  const auto labels = layout.labels();
  const Eigen::MatrixXd h = central_hessian(likelihood, theta_hat, coords, options.steps.hessian, labels);
  Eigen::MatrixXd middle;
  if (options.middle == MiddleTerm::opg) {
    const auto terms = [&](std::span<const double> x, std::span<double> out) { likelihood.per_observation(x, out); };
    const Eigen::MatrixXd scores =
        central_scores(terms, theta_hat, coords, likelihood.design().size(), options.steps.gradient, labels);
    middle = outer_product_of_scores(scores);
  } else {
    const auto g = central_gradient(likelihood, theta_hat, coords, options.steps.gradient, labels);
    Eigen::VectorXd gv(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k) gv[static_cast<Eigen::Index>(k)] = g[coords[k]];
    middle = gv * gv.transpose();
  }
  CovarianceReport r = sandwich(h, middle, options);
  r.flat_index = coords;
  for (std::size_t i : coords) r.names.push_back(labels[i]);
  return r;
}

/// sqrt of the covariance diagonal, labeled in report order.
inline std::vector<std::pair<std::string, double>> standard_errors(const CovarianceReport& cov) {
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index i = 0; i < cov.covariance.rows(); ++i) {
    const std::string name = static_cast<std::size_t>(i) < cov.names.size() ? cov.names[i] : "parameter " + std::to_string(i);
    const double v = cov.covariance(i, i);
    if (v < 0.0) throw ModelError(ErrorKind::invalid_parameters, name, "negative variance " + std::to_string(v));
    out.emplace_back(name, std::sqrt(v));
  }
  return out;
}

}  // namespace lcnl
