#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lcnl/dataio.hpp"
#include "lcnl/dataset.hpp"
#include "lcnl/error.hpp"
#include "lcnl/model.hpp"
#include "lcnl/parameters.hpp"

namespace lcnl {

/// Generating process for synthetic respondents. Community-level draws:
/// aksakal (exact count), police, kalym, village. Everything else is drawn
/// per individual. Covariates with no setting are standard normal.
struct SimulationSpec {
  ModelSpec model;
  ParameterSet truth;
  std::size_t individuals = 1000;
  std::size_t communities = 111;
  std::size_t aksakal_communities = 23;
  double police_share = 0.5;
  double kalym_median = 15.0;
  double kalym_sigma = 0.4;
  double income_median = 1.0;
  double income_sigma = 0.5;
  std::map<std::string, double> bernoulli{
      {"second_home", 0.08}, {"vehicle", 0.44}, {"loan", 0.5}, {"event_host", 0.32}, {"employed", 0.6}};
  std::map<std::string, double> predictor_share{{"kyrgyz_kazakh", 0.7}, {"village", 0.6}};
  double default_predictor_share = 0.5;
  std::uint64_t seed = 7;

  void validate() const {
    auto fail = [](const std::string& what, const std::string& why) {
      throw ModelError(ErrorKind::config_error, what, why);
    };
    if (individuals == 0) fail("individuals", "must be > 0");
    if (communities == 0) fail("communities", "must be > 0");
    if (aksakal_communities > communities) fail("aksakal_communities", "exceeds community count");
    auto prob = [&](const std::string& name, double p) {
      if (!(p >= 0.0 && p <= 1.0)) fail(name, "probability outside [0, 1]");
    };
    prob("police_share", police_share);
    prob("default_predictor_share", default_predictor_share);
    for (const auto& [k, p] : bernoulli) prob(k, p);
    for (const auto& [k, p] : predictor_share) prob(k, p);
    if (!(kalym_median > 0.0) || !(income_median > 0.0)) fail("median", "lognormal medians must be positive");
    if (!(kalym_sigma >= 0.0) || !(income_sigma >= 0.0)) fail("sigma", "lognormal sigmas must be nonnegative");
    Layout(model).check_consistent(truth);
  }
};

namespace detail {

/// Independent stream per (seed, purpose, index).
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Index m with cumulative probability first exceeding u.
inline std::size_t inverse_cdf(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    acc += p[m];
    if (u < acc) return m;
  }
  for (std::size_t m = p.size(); m-- > 0;)
    if (p[m] > 0.0) return m;
  return p.size() - 1;
}

}  // namespace detail

/// Draws a dataset from the model. Each individual's class comes from H(c|z)
/// and the choice from P(m|c) by inverse-CDF sampling, so the data follow the
/// likelihood exactly.
inline Dataset simulate_dataset(const SimulationSpec& spec) {
  spec.validate();
  const Layout layout(spec.model);
  const auto theta = layout.pack(spec.truth);
  const ChoiceTree& tree = layout.tree();

  struct Community {
    std::string id;
    double aksakal, police, kalym, village;
  };
  std::vector<Community> comms(spec.communities);
  {
    auto rng = detail::stream(spec.seed, 0, 0);
    std::vector<std::size_t> order(spec.communities);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> flagged(spec.communities, false);
    for (std::size_t k = 0; k < spec.aksakal_communities; ++k) flagged[order[k]] = true;
    auto vshare = spec.predictor_share.find("village");
    const double village_p = vshare == spec.predictor_share.end() ? spec.default_predictor_share : vshare->second;
    for (std::size_t j = 0; j < spec.communities; ++j) {
      auto r = detail::stream(spec.seed, 1, j);
      std::normal_distribution<double> normal;
      char buf[16];
      std::snprintf(buf, sizeof buf, "c%03zu", j + 1);
      comms[j].id = buf;
      comms[j].aksakal = flagged[j] ? 1.0 : 0.0;
      comms[j].police = detail::uniform01(r) < spec.police_share ? 1.0 : 0.0;
      comms[j].kalym = spec.kalym_median * std::exp(spec.kalym_sigma * normal(r));
      comms[j].village = detail::uniform01(r) < village_p ? 1.0 : 0.0;
    }
  }

  Dataset data;
  data.covariate_names = layout.covariates();
  data.predictor_names = spec.model.predictors;
  data.observations.resize(spec.individuals);
  data.provenance.rows_read = spec.individuals;
  const auto ids = tree.alternative_ids();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(spec.individuals); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto rng = detail::stream(spec.seed, 2, i);
    std::normal_distribution<double> normal;
    const Community& home = comms[static_cast<std::size_t>(rng() % spec.communities)];
    Observation& obs = data.observations[i];
    obs.id = std::to_string(i + 1);
    obs.community = home.id;
    for (const auto& name : data.covariate_names) {
      double v;
      if (name == "aksakal") v = home.aksakal;
      else if (name == "police") v = home.police;
      else if (name == "kalym") v = home.kalym;
      else if (name == "income") v = spec.income_median * std::exp(spec.income_sigma * normal(rng));
      else if (auto it = spec.bernoulli.find(name); it != spec.bernoulli.end())
        v = detail::uniform01(rng) < it->second ? 1.0 : 0.0;
      else v = normal(rng);
      obs.covariates.push_back(v);
    }
    for (const auto& name : data.predictor_names) {
      if (name == "village") {
        obs.predictors.push_back(home.village);
        continue;
      }
      auto it = spec.predictor_share.find(name);
      const double p = it == spec.predictor_share.end() ? spec.default_predictor_share : it->second;
      obs.predictors.push_back(detail::uniform01(rng) < p ? 1.0 : 0.0);
    }
    const auto bundle = probabilities(layout, theta, obs.covariates.data(), obs.predictors.data());
    const std::size_t c = detail::inverse_cdf(bundle.membership, detail::uniform01(rng));
    obs.choice = ids[detail::inverse_cdf(bundle.conditional[c], detail::uniform01(rng))];
  }
  return data;
}

/// Two-class canonical model used for recovery runs: five class predictors,
/// nest coefficients fixed at zero, last class as reference.
struct RecoveryFixture {
  ModelSpec model;
  ParameterOptions options;
  ParameterSet truth;
};

inline RecoveryFixture recovery_fixture() {
  RecoveryFixture f;
  f.model.tree = build_canonical_tree();
  f.model.classes = 2;
  f.model.predictors = {"kyrgyz_kazakh", "village", "husband_decides", "spouse_obedient", "dual_income"};
  f.options.fix_nest_coefficients = true;
  const auto signs = canonical_predictor_signs();
  for (const auto& name : f.model.predictors)
    if (auto it = signs.find(name); it != signs.end()) f.options.predictor_signs[name] = it->second;
  f.truth = make_parameter_set(f.model, f.options);

  // intercept first, then the alternative's covariates in tree order
  const std::map<std::string, std::vector<double>> class1{
      {"love_marriage", {0.2, -0.02, 0.3, -0.5, 0.4, 0.5, 0.2, -0.3}},
      {"mock_kidnapping", {-1.0, 0.3, -0.03, 0.1, 0.2, 0.1, 0.3, -0.4, -0.2}},
      {"arranged_marriage", {0.8, 0.01, 0.2, 0.6, -0.2, -0.1, 0.3, 1.0}},
      {"bride_capture", {0.3, 0.9, 0.2, 0.04, 0.2, 0.5, -0.4, -0.5, -0.3, -0.2}},
  };
  const std::map<std::string, std::vector<double>> class2{
      {"love_marriage", {1.2, 0.02, 0.1, 0.4, 0.3, 0.4, 0.1, 0.2}},
      {"mock_kidnapping", {-0.5, -0.4, -0.02, 0.3, -0.3, 0.2, 0.3, 0.2, 0.1}},
      {"arranged_marriage", {-0.2, -0.03, 0.3, 0.3, 0.2, 0.4, 0.1, 0.6}},
      {"bride_capture", {-1.5, 0.4, 0.3, 0.02, -0.3, 0.2, -0.5, -0.3, -0.4, -0.5}},
  };
  const ChoiceTree& tree = f.model.tree;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& values = c == 0 ? class1 : class2;
    for (std::size_t m = 0; m < tree.alternative_count(); ++m) {
      auto it = values.find(tree.alternative(m).id);
      if (it != values.end()) f.truth.alternative[c][m].values = it->second;
    }
  }
  // kyrgyz_kazakh, village, husband_decides (+), spouse_obedient (+), dual_income (-)
  f.truth.membership[0].values = {-0.2, 0.5, -0.3, 0.8, 0.8, -0.8};
  return f;
}

}  // namespace lcnl
