#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "lcnl/model.hpp"
#include "oracle.hpp"

using namespace lcnl;

namespace {

Dataset one_row(const std::vector<std::string>& covs, const std::vector<double>& x,
                const std::vector<std::string>& preds = {}, const std::vector<double>& z = {},
                const std::string& choice = "forgo") {
  Dataset d;
  d.covariate_names = covs;
  d.predictor_names = preds;
  d.observations.push_back(Observation{"p1", "c1", choice, x, z});
  return d;
}

std::size_t count_covs(const ChoiceTree& t, const std::string& alt) {
  return t.alternative(*t.alternative_index(alt)).covariates.size();
}

}  // namespace

TEST(CanonicalTree, Shape) {
  const ChoiceTree t = build_canonical_tree();
  EXPECT_EQ(t.nest_count(), 4u);
  EXPECT_EQ(t.alternative_count(), 5u);
  ASSERT_TRUE(t.outside_option());
  EXPECT_EQ(t.alternative(*t.outside_option()).id, "forgo");
  EXPECT_FALSE(t.nests()[0].degenerate());
  for (std::size_t n = 1; n < 4; ++n) EXPECT_TRUE(t.nests()[n].degenerate());
}

TEST(CanonicalTree, CovariateLists) {
  const ChoiceTree t = build_canonical_tree();
  EXPECT_EQ(count_covs(t, "bride_capture"), 9u);
  EXPECT_EQ(count_covs(t, "love_marriage"), 7u);
  EXPECT_EQ(count_covs(t, "arranged_marriage"), 7u);
  EXPECT_EQ(count_covs(t, "mock_kidnapping"), 8u);
  EXPECT_EQ(count_covs(t, "forgo"), 0u);
  const auto& mock = t.alternative(*t.alternative_index("mock_kidnapping")).covariates;
  EXPECT_EQ(t.nests()[0].covariates, mock);
  EXPECT_EQ(std::count(mock.begin(), mock.end(), "police"), 0);
  EXPECT_EQ(std::count(mock.begin(), mock.end(), "aksakal"), 1);
  const auto& love = t.alternative(*t.alternative_index("love_marriage")).covariates;
  EXPECT_EQ(std::count(love.begin(), love.end(), "aksakal"), 0);
}

TEST(ChoiceTreeValidation, RejectsBadTrees) {
  auto expect_invalid = [](std::vector<Nest> nests) {
    try {
      ChoiceTree t(std::move(nests));
      FAIL() << "accepted an invalid tree";
    } catch (const ModelError& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_tree);
    }
  };
  expect_invalid({Nest{"a", {}, {Alternative{"x", {}}}}, Nest{"b", {}, {Alternative{"x", {}}}}});
  expect_invalid({Nest{"a", {}, {Alternative{"x", {}}}}, Nest{"a", {}, {Alternative{"y", {}}}}});
  expect_invalid({Nest{"a", {}, {}}});
  expect_invalid({Nest{"a", {}, {Alternative{"x", {}}, Alternative{"o", {}, true}}}});
  expect_invalid({Nest{"a", {}, {Alternative{"o", {"k"}, true}}}});
  expect_invalid({Nest{"a", {}, {Alternative{"o1", {}, true}}}, Nest{"b", {}, {Alternative{"o2", {}, true}}}});
  expect_invalid({Nest{"a", {"k"}, {Alternative{"x", {"k"}}}}});
}

TEST(ClassMembership, Symmetric) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 3);
  const std::vector<double> z{1.0, 0.0};
  const auto h = class_membership(z, theta);
  EXPECT_DOUBLE_EQ(h[0], 0.5);
  EXPECT_DOUBLE_EQ(h[1], 0.5);
}

TEST(ClassMembership, ClosedForm) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 2);
  theta(0, 1) = std::log(3.0);
  const std::vector<double> z{1.0};
  const auto h = class_membership(z, theta);
  EXPECT_NEAR(h[0], 0.75, 1e-15);
  EXPECT_NEAR(h[1], 0.25, 1e-15);
}

TEST(ClassMembership, MatchesExtendedPrecision) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd theta(3, 5);
    std::vector<double> z(4);
    for (Eigen::Index c = 0; c < 3; ++c)
      for (Eigen::Index k = 0; k < 5; ++k) theta(c, k) = n(rng);
    for (double& v : z) v = n(rng);
    std::vector<long double> a(3);
    long double total = 0;
    for (int c = 0; c < 3; ++c) {
      a[c] = theta(c, 0);
      for (int k = 0; k < 4; ++k) a[c] += static_cast<long double>(theta(c, k + 1)) * z[k];
      a[c] = std::exp(a[c]);
      total += a[c];
    }
    const auto h = class_membership(z, theta);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(h[c], static_cast<double>(a[c] / total), 1e-14);
  }
}

TEST(ClassMembership, NoOverflow) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 2);
  theta(0, 1) = 1e4;
  theta(1, 1) = -1e4;
  const std::vector<double> z{1.0};
  const auto h = class_membership(z, theta);
  EXPECT_TRUE(std::isfinite(h[0]) && std::isfinite(h[1]));
  EXPECT_DOUBLE_EQ(h[0], 1.0);
  EXPECT_DOUBLE_EQ(h[1] + h[0], 1.0);
}

TEST(ClassMembership, DimensionMismatchNamesVector) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 3);
  const std::vector<double> z{1.0};
  try {
    class_membership(z, theta);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
    EXPECT_EQ(e.subject(), "z");
  }
}

TEST(AlternativeUtility, OutsideOptionIsZero) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  std::mt19937_64 rng(3);
  oracle::randomize(p, rng, 2.0);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 1, 5);
  EXPECT_EQ(model.alternative_utility(d, 0, "forgo", 0, p), 0.0);
  EXPECT_EQ(model.alternative_utility(d, 0, "forgo", 1, p), 0.0);
}

TEST(AlternativeUtility, InterceptOnly) {
  const ModelSpec spec = fixtures::canonical_spec(1, {});
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  p.alternative[0][*spec.tree.alternative_index("bride_capture")]["intercept"] = 1.5;
  const Dataset d = fixtures::random_dataset(spec.tree, {}, 1, 5);
  EXPECT_DOUBLE_EQ(model.alternative_utility(d, 0, "bride_capture", 0, p), 1.5);
}

TEST(AlternativeUtility, DotProduct) {
  const ChoiceTree tree({Nest{"n1", {}, {Alternative{"a", {"u", "w"}}}}, Nest{"n2", {}, {Alternative{"o", {}, true}}}});
  const ModelSpec spec{tree, 1, {}};
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  p.alternative[0][0].values = {0.0, 2.0, -1.0};
  const Dataset d = one_row({"u", "w"}, {3.0, 4.0}, {}, {}, "a");
  EXPECT_DOUBLE_EQ(model.alternative_utility(d, 0, "a", 0, p), 2.0);
}

TEST(AlternativeUtility, MissingCovariateNamesVariableAndIndividual) {
  const ChoiceTree tree({Nest{"n1", {}, {Alternative{"a", {"u", "w"}}}}, Nest{"n2", {}, {Alternative{"o", {}, true}}}});
  const ModelSpec spec{tree, 1, {}};
  ChoiceModel model(spec);
  const ParameterSet p = make_parameter_set(spec);
  const Dataset d = one_row({"u"}, {3.0}, {}, {}, "a");
  try {
    model.alternative_utility(d, 0, "a", 0, p);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_covariate);
    EXPECT_EQ(e.subject(), "w");
    EXPECT_NE(std::string(e.what()).find("p1"), std::string::npos);
  }
}

TEST(InclusiveValue, DegenerateNestEqualsUtility) {
  const ModelSpec spec = fixtures::canonical_spec(1, {});
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  p.alternative[0][*spec.tree.alternative_index("arranged_marriage")]["intercept"] = -0.7;
  Dataset d = fixtures::random_dataset(spec.tree, {}, 1, 5);
  for (auto& v : d.observations[0].covariates) v = 0.0;
  EXPECT_DOUBLE_EQ(model.inclusive_value(d, 0, "arranged", 0, p), -0.7);
}

TEST(InclusiveValue, TwoZeroUtilities) {
  const ModelSpec spec = fixtures::canonical_spec(1, {});
  ChoiceModel model(spec);
  const ParameterSet p = make_parameter_set(spec);
  const Dataset d = fixtures::random_dataset(spec.tree, {}, 1, 5);
  EXPECT_NEAR(model.inclusive_value(d, 0, "choice", 0, p), std::log(2.0), 1e-15);
}

TEST(InclusiveValue, LargeUtilitiesStayFinite) {
  const ModelSpec spec = fixtures::canonical_spec(1, {});
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  p.alternative[0][*spec.tree.alternative_index("love_marriage")]["intercept"] = 710.0;
  p.alternative[0][*spec.tree.alternative_index("mock_kidnapping")]["intercept"] = 709.0;
  Dataset d = fixtures::random_dataset(spec.tree, {}, 1, 5);
  for (auto& v : d.observations[0].covariates) v = 0.0;
  const double g = model.inclusive_value(d, 0, "choice", 0, p);
  const long double want = 710.0L + std::log1p(std::exp(-1.0L));
  ASSERT_TRUE(std::isfinite(g));
  EXPECT_NEAR(g, static_cast<double>(want), 1e-12);
}

TEST(ChoiceProbabilities, AllZeroCanonical) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  ChoiceModel model(spec);
  const ParameterSet p = make_parameter_set(spec);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 1, 9);
  const auto b = model.choice_probabilities(d, 0, p);
  for (double v : b.mixture) EXPECT_NEAR(v, 0.2, 1e-15);
  EXPECT_NEAR(b.nest[0][0], 0.4, 1e-15);
  EXPECT_NEAR(b.inclusive[0][0], std::log(2.0), 1e-15);
}

TEST(ChoiceProbabilities, FlatTreeIsMultinomialLogit) {
  const ChoiceTree tree = fixtures::flat_tree(4, {"x1", "x2"});
  const ModelSpec spec{tree, 1, {}};
  ChoiceModel model(spec);
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    ParameterSet p = make_parameter_set(spec);
    oracle::randomize(p, rng, 1.5);
    const Dataset d = fixtures::random_dataset(tree, {}, 1, 100 + rep);
    const auto b = model.choice_probabilities(d, 0, p);
    const auto x = oracle::covariate_map(d, 0);
    std::vector<oracle::real> v;
    for (std::size_t m = 0; m < 4; ++m) v.push_back(m == 3 ? 0 : oracle::dot(p.alternative[0][m], x));
    const auto want = oracle::flat_mnl(v);
    for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(b.mixture[m], static_cast<double>(want[m]), 1e-14);
  }
}

TEST(ChoiceProbabilities, ZeroNestCoefficientsCollapseToMnl) {
  const ModelSpec spec = fixtures::canonical_spec(1, {});
  ChoiceModel model(spec);
  ParameterOptions opts;
  opts.fix_nest_coefficients = true;
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    ParameterSet p = make_parameter_set(spec, opts);
    oracle::randomize(p, rng, 1.0);
    const Dataset d = fixtures::random_dataset(spec.tree, {}, 1, 1000 + rep);
    const auto b = model.choice_probabilities(d, 0, p);
    const auto x = oracle::covariate_map(d, 0);
    std::vector<oracle::real> v;
    for (std::size_t m = 0; m < 5; ++m)
      v.push_back(spec.tree.alternative(m).outside_option ? 0 : oracle::dot(p.alternative[0][m], x));
    const auto want = oracle::flat_mnl(v);
    for (std::size_t m = 0; m < 5; ++m) EXPECT_NEAR(b.mixture[m], static_cast<double>(want[m]), 1e-10);
  }
}

TEST(ChoiceProbabilities, MatchesExtendedPrecisionOracle) {
  const ModelSpec spec = fixtures::canonical_spec(3);
  ChoiceModel model(spec);
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 50; ++rep) {
    ParameterSet p = make_parameter_set(spec);
    oracle::randomize(p, rng, 1.0);
    const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 1, 500 + rep);
    const auto b = model.choice_probabilities(d, 0, p);
    const auto want = oracle::mixture(spec.tree, p, oracle::covariate_map(d, 0), oracle::predictor_map(d, 0));
    for (std::size_t m = 0; m < 5; ++m) EXPECT_NEAR(b.mixture[m], static_cast<double>(want[m]), 1e-13);
  }
}

TEST(ChoiceProbabilities, SimplexSumsAndDegenerateIdentity) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  ChoiceModel model(spec);
  std::mt19937_64 rng(31);
  const ChoiceTree& t = spec.tree;
  for (int rep = 0; rep < 200; ++rep) {
    ParameterSet p = make_parameter_set(spec);
    oracle::randomize(p, rng, 3.0);
    const Dataset d = fixtures::random_dataset(t, spec.predictors, 1, 2000 + rep);
    const auto b = model.choice_probabilities(d, 0, p);
    double s = 0.0, h = 0.0;
    for (double v : b.mixture) {
      s += v;
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (double v : b.membership) h += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(h, 1.0, 1e-12);
    for (std::size_t c = 0; c < 2; ++c) {
      double ns = 0.0;
      for (double v : b.nest[c]) ns += v;
      EXPECT_NEAR(ns, 1.0, 1e-12);
      for (std::size_t n = 0; n < t.nest_count(); ++n) {
        double w = 0.0;
        for (std::size_t j = 0; j < t.nests()[n].alternatives.size(); ++j) w += b.within[c][t.first_member(n) + j];
        EXPECT_NEAR(w, 1.0, 1e-12);
        if (t.nests()[n].degenerate()) {
          EXPECT_EQ(b.within[c][t.first_member(n)], 1.0);
        }
        EXPECT_TRUE(std::isfinite(b.inclusive[c][n]));
      }
    }
  }
}

TEST(ChoiceProbabilities, TranslationInvariance) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  ChoiceModel model(spec);
  std::mt19937_64 rng(37);
  ParameterSet p = make_parameter_set(spec);
  oracle::randomize(p, rng, 1.0);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 1, 77);
  const auto base = model.choice_probabilities(d, 0, p);

  // same shift on both choice-nest members: within-nest split unchanged
  ParameterSet q = p;
  for (std::size_t m = 0; m < 2; ++m) q.alternative[0][m].values[0] += 2.5;
  const auto shifted = model.choice_probabilities(d, 0, q);
  for (std::size_t m = 0; m < 2; ++m) EXPECT_NEAR(shifted.within[0][m], base.within[0][m], 1e-10);

  // a tree with no outside option: shifting every leaf shifts every Γ, so
  // every nest score moves by the same amount
  const ChoiceTree open({Nest{"pair", {"k1"}, {Alternative{"a1", {"k1"}}, Alternative{"a2", {"k1"}}}},
                         Nest{"solo", {}, {Alternative{"b", {"k1"}}}}});
  const ModelSpec os{open, 1, {}};
  ChoiceModel om(os);
  ParameterSet op = make_parameter_set(os);
  oracle::randomize(op, rng, 1.0);
  const Dataset od = fixtures::random_dataset(open, {}, 1, 78);
  const auto before = om.choice_probabilities(od, 0, op);
  for (auto& blk : op.alternative[0]) blk.values[0] += 3.25;
  const auto after = om.choice_probabilities(od, 0, op);
  for (std::size_t n = 0; n < 2; ++n) EXPECT_NEAR(after.nest[0][n], before.nest[0][n], 1e-10);
}

TEST(ChoiceProbabilities, OverflowSafety) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  ChoiceModel model(spec);
  ParameterSet p = make_parameter_set(spec);
  const std::vector<double> big{700.0, -700.0, 650.0, -690.0};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t m = 0; m < 4; ++m) p.alternative[c][m].values[0] = big[m] * (c ? -1.0 : 1.0);
  p.membership[0].values[0] = 700.0;
  Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 1, 3);
  for (auto& v : d.observations[0].covariates) v = 0.0;
  const auto b = model.choice_probabilities(d, 0, p);
  double s = 0.0;
  for (double v : b.mixture) {
    EXPECT_TRUE(std::isfinite(v));
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}
