#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "lcnl/annealer.hpp"
#include "lcnl/likelihood.hpp"
#include "oracle.hpp"

using namespace lcnl;

namespace {

// Concave with maximum 0 at (1, -2, 0.5).
double bowl(std::span<const double> x) {
  return -((x[0] - 1) * (x[0] - 1) + 2 * (x[1] + 2) * (x[1] + 2) + 0.5 * (x[2] - 0.5) * (x[2] - 0.5));
}

Bounds box(std::size_t n, double b) { return Bounds{std::vector<double>(n, -b), std::vector<double>(n, b)}; }

AnnealConfig quick(std::uint64_t seed) {
  AnnealConfig c;
  c.seed = seed;
  c.cycles = 5;
  c.tolerance = 1e-10;
  return c;
}

}  // namespace

TEST(Annealer, BoundsFromTags) {
  const std::vector<Constraint> tags{Constraint::unrestricted(), Constraint::nonneg(), Constraint::nonpos(),
                                     Constraint::fixed(0.25)};
  const Bounds b = bounds_from_tags(tags, 50);
  EXPECT_EQ(b.lower, (std::vector<double>{-50, 0, -50, 0.25}));
  EXPECT_EQ(b.upper, (std::vector<double>{50, 50, 0, 0.25}));
}

TEST(Annealer, MaximizesConcaveQuadratic) {
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, box(3, 10), quick(3));
  EXPECT_EQ(r.trace.status, AnnealStatus::converged);
  EXPECT_NEAR(r.best[0], 1.0, 1e-3);
  EXPECT_NEAR(r.best[1], -2.0, 1e-3);
  EXPECT_NEAR(r.best[2], 0.5, 1e-3);
  EXPECT_GT(r.value, -1e-6);
  EXPECT_EQ(r.value, bowl(r.best));
}

TEST(Annealer, SameSeedSameRun) {
  const std::vector<double> start{0, 0, 0};
  const auto a = anneal(bowl, start, box(3, 10), quick(17));
  const auto b = anneal(bowl, start, box(3, 10), quick(17));
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.trace.evaluations, b.trace.evaluations);
  const auto c = anneal(bowl, start, box(3, 10), quick(18));
  EXPECT_NE(a.best, c.best);
}

TEST(Annealer, FixedAndSignRestrictedCoordinates) {
  const std::vector<Constraint> tags{Constraint::nonneg(), Constraint::fixed(0.0), Constraint::unrestricted()};
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, bounds_from_tags(tags, 5), quick(4));
  EXPECT_EQ(r.best[1], 0.0);
  EXPECT_NEAR(r.best[0], 1.0, 1e-3);
  EXPECT_NEAR(r.best[2], 0.5, 1e-3);

  // unconstrained optimum at x0 = 1 lies outside [-5, 0]
  const std::vector<Constraint> neg{Constraint::nonpos(), Constraint::unrestricted(), Constraint::unrestricted()};
  const auto q = anneal(bowl, start, bounds_from_tags(neg, 5), quick(4));
  EXPECT_LE(q.best[0], 0.0);
  EXPECT_NEAR(q.best[0], 0.0, 1e-3);
}

TEST(Annealer, EvaluationBudget) {
  AnnealConfig c = quick(5);
  c.max_evaluations = 777;
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, box(3, 10), c);
  EXPECT_EQ(r.trace.status, AnnealStatus::eval_budget);
  EXPECT_EQ(r.trace.evaluations, 777u);
}

TEST(Annealer, StallsAtTemperatureFloor) {
  AnnealConfig c = quick(6);
  c.tolerance = 1e-300;
  c.min_temperature = 1e-3;
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, box(3, 10), c);
  EXPECT_EQ(r.trace.status, AnnealStatus::stalled);
  EXPECT_LT(r.trace.stages.back().temperature, 1e-3 / 0.85 + 1e-12);
}

TEST(Annealer, TemperatureFollowsCoolingSchedule) {
  AnnealConfig c = quick(7);
  c.initial_temperature = 2.0;
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, box(3, 10), c);
  EXPECT_DOUBLE_EQ(r.trace.initial_temperature, 2.0);
  for (std::size_t k = 0; k < r.trace.stages.size(); ++k)
    EXPECT_NEAR(r.trace.stages[k].temperature, 2.0 * std::pow(0.85, static_cast<double>(k)), 1e-12);
  for (std::size_t k = 1; k < r.trace.stages.size(); ++k)
    EXPECT_GE(r.trace.stages[k].best, r.trace.stages[k - 1].best);
}

TEST(Annealer, StartOutsideBoundsRejected) {
  const std::vector<double> start{20, 0, 0};
  EXPECT_THROW(anneal(bowl, start, box(3, 10), quick(1)), ModelError);
}

TEST(Annealer, InvalidConfigRejected) {
  AnnealConfig c;
  c.cooling = 1.0;
  EXPECT_THROW(c.validate(), ModelError);
  c = AnnealConfig{};
  c.cycles = 0;
  EXPECT_THROW(c.validate(), ModelError);
  c = AnnealConfig{};
  c.initial_temperature = -1.0;
  EXPECT_THROW(c.validate(), ModelError);
  EXPECT_EQ(AnnealConfig{}.cycles_for(76), 380u);
  EXPECT_EQ(AnnealConfig{}.cycles_for(3), 100u);
}

TEST(Annealer, PilotTemperatureHitsTarget) {
  const std::vector<double> downhill{0.5, 1.0, 2.0, 4.0, 8.0, 0.1};
  const double t = detail::pilot_temperature(downhill, 4, 10, 0.8);
  double rate = 4.0;
  for (double d : downhill) rate += std::exp(-d / t);
  EXPECT_NEAR(rate / 10.0, 0.8, 1e-9);
  // target already met by uphill moves alone
  EXPECT_GT(detail::pilot_temperature(downhill, 9, 10, 0.8), 0.0);
}

TEST(Annealer, NonFiniteProposalsAreRejected) {
  auto f = [](std::span<const double> x) { return x[0] < 0 ? std::nan("") : -(x[0] - 2) * (x[0] - 2); };
  const std::vector<double> start{1.0};
  const auto r = anneal(f, start, box(1, 10), quick(8));
  EXPECT_GT(r.trace.non_finite, 0u);
  EXPECT_NEAR(r.best[0], 2.0, 1e-3);
}

// Incremental and full evaluation see identical values, so the whole run
// must be identical too.
TEST(Annealer, IncrementalObjectiveMatchesFullEvaluation) {
  const ModelSpec spec = fixtures::canonical_spec(2);
  const Layout layout(spec);
  ParameterOptions opts;
  opts.fix_nest_coefficients = true;
  ParameterSet p = make_parameter_set(spec, opts);
  const Dataset d = fixtures::random_dataset(spec.tree, spec.predictors, 200, 12);
  const Design design(layout, d);
  const Likelihood full(layout, design);
  IncrementalLikelihood inc(layout, design);
  const auto start = layout.pack(p);
  const Bounds b = bounds_from_tags(layout.tags(p), 50);
  AnnealConfig c = quick(9);
  c.max_evaluations = 4000;
  const auto a = anneal(inc, start, b, c);
  const auto f = anneal([&](std::span<const double> t) { return full(t); }, start, b, c);
  EXPECT_EQ(a.best, f.best);
  EXPECT_EQ(a.value, f.value);
  EXPECT_GT(a.value, full(start));
}

TEST(Annealer, TraceFormat) {
  const std::vector<double> start{0, 0, 0};
  const auto r = anneal(bowl, start, box(3, 10), quick(2));
  std::ostringstream os;
  write_trace(os, r.trace);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# stage\tT\tbestLL\tacceptRate\tevals");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 4);
  }
  EXPECT_EQ(rows, r.trace.stages.size());
}

TEST(Polish, ImprovesAndNeverWorsens) {
  const std::vector<double> start{0.9, -2.1, 0.45};
  const auto r = polish(bowl, start, box(3, 10));
  EXPECT_GT(r.value, bowl(start));
  EXPECT_NEAR(r.best[0], 1.0, 1e-5);
  EXPECT_NEAR(r.best[1], -2.0, 1e-5);

  const std::vector<double> top{1.0, -2.0, 0.5};
  const auto s = polish(bowl, top, box(3, 10));
  EXPECT_EQ(s.best, top);
  EXPECT_EQ(s.value, 0.0);
}

TEST(Polish, StaysInsideBounds) {
  const Bounds b{{0.0, -10, -10}, {0.5, 10, 10}};
  const std::vector<double> start{0.1, 0, 0};
  const auto r = polish(bowl, start, b);
  EXPECT_TRUE(b.contains(r.best));
  EXPECT_NEAR(r.best[0], 0.5, 1e-5);
}
