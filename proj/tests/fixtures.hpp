#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lcnl/choice_tree.hpp"
#include "lcnl/dataset.hpp"
#include "lcnl/parameters.hpp"

namespace fixtures {

inline lcnl::ModelSpec canonical_spec(std::size_t classes, std::vector<std::string> predictors = {"z1", "z2"}) {
  return lcnl::ModelSpec{lcnl::build_canonical_tree(), classes, std::move(predictors)};
}

/// Every alternative in its own nest; the last one is the outside option.
inline lcnl::ChoiceTree flat_tree(std::size_t alternatives, const std::vector<std::string>& covariates) {
  std::vector<lcnl::Nest> nests;
  for (std::size_t m = 0; m + 1 < alternatives; ++m) {
    const std::string id = "a" + std::to_string(m + 1);
    nests.push_back(lcnl::Nest{id, {}, {lcnl::Alternative{id, covariates}}});
  }
  nests.push_back(lcnl::Nest{"out", {}, {lcnl::Alternative{"outside", {}, true}}});
  return lcnl::ChoiceTree(std::move(nests));
}

/// N observations with covariates ~ N(0, 1) (binary ones ~ Bernoulli(1/2))
/// and binary predictors; choices cycle through the alternatives.
inline lcnl::Dataset random_dataset(const lcnl::ChoiceTree& tree, const std::vector<std::string>& predictors,
                                    std::size_t n, std::uint64_t seed,
                                    const std::vector<std::string>& binary = {"aksakal", "police", "second_home",
                                                                              "vehicle", "loan", "event_host",
                                                                              "employed"}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  lcnl::Dataset d;
  d.covariate_names = tree.covariates();
  d.predictor_names = predictors;
  const auto ids = tree.alternative_ids();
  for (std::size_t i = 0; i < n; ++i) {
    lcnl::Observation o;
    o.id = "r" + std::to_string(i + 1);
    o.community = "c" + std::to_string(i % 7);
    o.choice = ids[i % ids.size()];
    for (const auto& name : d.covariate_names) {
      const bool is_binary = std::find(binary.begin(), binary.end(), name) != binary.end();
      o.covariates.push_back(is_binary ? (coin(rng) ? 1.0 : 0.0) : normal(rng));
    }
    for (std::size_t k = 0; k < predictors.size(); ++k) o.predictors.push_back(coin(rng) ? 1.0 : 0.0);
    d.observations.push_back(std::move(o));
  }
  return d;
}

}  // namespace fixtures
