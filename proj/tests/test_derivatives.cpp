#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "lcnl/derivatives.hpp"
#include "lcnl/likelihood.hpp"
#include "oracle.hpp"

using namespace lcnl;

namespace {

double cubic(std::span<const double> x) { return x[0] * x[0] * x[1] + 3.0 * x[1] * x[1] - std::sin(x[0]); }

std::vector<std::size_t> all(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Derivatives, StepScalesWithMagnitude) {
  EXPECT_DOUBLE_EQ(StepPolicy::step(0.2, 1e-6), 1e-6);
  EXPECT_DOUBLE_EQ(StepPolicy::step(-40.0, 1e-6), 4e-5);
}

TEST(Derivatives, GradientOfSmoothFunction) {
  const std::vector<double> x{0.7, -1.3};
  const auto idx = all(2);
  const auto g = central_gradient(cubic, x, idx);
  EXPECT_NEAR(g[0], 2 * 0.7 * -1.3 - std::cos(0.7), 1e-8);
  EXPECT_NEAR(g[1], 0.49 + 6 * -1.3, 1e-8);
}

TEST(Derivatives, GradientSkipsUnlistedCoordinates) {
  const std::vector<double> x{0.7, -1.3};
  const std::vector<std::size_t> only{1};
  const auto g = central_gradient(cubic, x, only);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_NE(g[1], 0.0);
}

TEST(Derivatives, HessianOfSmoothFunction) {
  const std::vector<double> x{0.7, -1.3};
  const auto h = central_hessian(cubic, x, all(2));
  EXPECT_NEAR(h(0, 0), 2 * -1.3 + std::sin(0.7), 1e-6);
  EXPECT_NEAR(h(0, 1), 2 * 0.7, 1e-6);
  EXPECT_NEAR(h(1, 1), 6.0, 1e-6);
  EXPECT_EQ(h(0, 1), h(1, 0));
}

TEST(Derivatives, MixedDifferenceOrderAgrees) {
  const std::vector<double> x{0.7, -1.3};
  const double a = second_difference(cubic, x, 0, 1, 1e-4, 2e-4);
  const double b = second_difference(cubic, x, 1, 0, 2e-4, 1e-4);
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(Derivatives, NonFiniteValueNamesCoordinate) {
  auto f = [](std::span<const double> x) { return std::log(x[1]); };
  // only the step on b crosses zero
  const std::vector<double> x{1.0, 1e-7};
  const std::vector<std::string> labels{"a", "b"};
  try {
    central_gradient(f, x, all(2), 1e-6, labels);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite);
    EXPECT_EQ(e.subject(), "b");
  }
}

// Single-class flat tree: log-likelihood gradient has the closed form
// sum_i (y_im - p_im) x_i for each alternative's coefficients.
TEST(Derivatives, LikelihoodGradientMatchesMultinomialLogit) {
  const std::vector<std::string> covs{"u", "w"};
  const ModelSpec spec{fixtures::flat_tree(4, covs), 1, {}};
  const Layout layout(spec);
  ParameterSet p = make_parameter_set(spec);
  std::mt19937_64 rng(3);
  oracle::randomize(p, rng, 0.5);
  const Dataset d = fixtures::random_dataset(spec.tree, {}, 500, 9, {});
  const Design design(layout, d);
  const Likelihood ll(layout, design);
  const auto theta = layout.pack(p);
  const auto free = free_indices(layout.tags(p));
  const auto g = central_gradient(ll, theta, free);

  std::vector<long double> want(theta.size(), 0.0L);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = oracle::covariate_map(d, i);
    std::vector<oracle::real> v;
    for (std::size_t m = 0; m < 4; ++m) v.push_back(m == 3 ? 0 : oracle::dot(p.alternative[0][m], x));
    const auto pr = oracle::flat_mnl(v);
    const auto chosen = *spec.tree.alternative_index(d.observations[i].choice);
    for (std::size_t m = 0; m < 3; ++m) {
      const long double r = (m == chosen ? 1.0L : 0.0L) - pr[m];
      const auto off = layout.alternative(0, m).offset;
      want[off] += r;
      want[off + 1] += r * x.at("u");
      want[off + 2] += r * x.at("w");
    }
  }
  for (std::size_t j : free) EXPECT_NEAR(g[j], static_cast<double>(want[j]), 2e-5) << layout.labels()[j];
}

TEST(Derivatives, ScoresSumToGradient) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  const Layout layout(spec);
  ParameterSet p = make_parameter_set(spec);
  std::mt19937_64 rng(4);
  oracle::randomize(p, rng, 0.5);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 150, 10);
  const Design design(layout, d);
  const Likelihood ll(layout, design);
  const auto theta = layout.pack(p);
  const auto free = free_indices(layout.tags(p));
  const auto g = central_gradient(ll, theta, free);
  auto terms = [&](std::span<const double> t, std::span<double> out) { ll.per_observation(t, out); };
  const auto s = central_scores(terms, theta, free, d.size());
  ASSERT_EQ(s.rows(), 150);
  ASSERT_EQ(s.cols(), static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k)
    EXPECT_NEAR(s.col(static_cast<Eigen::Index>(k)).sum(), g[free[k]], 1e-6);
}

TEST(Derivatives, GradientStableUnderStepHalving) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  const Layout layout(spec);
  ParameterSet p = make_parameter_set(spec);
  std::mt19937_64 rng(5);
  oracle::randomize(p, rng, 0.5);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 300, 11);
  const Design design(layout, d);
  const Likelihood ll(layout, design);
  const auto theta = layout.pack(p);
  const auto free = free_indices(layout.tags(p));
  const auto g1 = central_gradient(ll, theta, free, 1e-5);
  const auto g2 = central_gradient(ll, theta, free, 5e-6);
  for (std::size_t j : free) EXPECT_LT(std::abs(g1[j] - g2[j]) / std::max(1.0, std::abs(g1[j])), 1e-5);
}
