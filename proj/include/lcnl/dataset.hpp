#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lcnl {

/// One respondent. `covariates` and `predictors` are aligned with the owning
/// Dataset's name lists.
struct Observation {
  std::string id;
  std::string community;
  std::string choice;
  std::vector<double> covariates;
  std::vector<double> predictors;
};

/// Row accounting from ingestion: rows read and rows dropped per filter.
struct Provenance {
  std::size_t rows_read = 0;
  std::map<std::string, std::size_t> dropped;

  std::size_t dropped_by(const std::string& filter) const {
    auto it = dropped.find(filter);
    return it == dropped.end() ? 0 : it->second;
  }
};

struct Dataset {
  std::vector<std::string> covariate_names;
  std::vector<std::string> predictor_names;
  std::vector<Observation> observations;
  Provenance provenance;

  std::size_t size() const noexcept { return observations.size(); }
  bool empty() const noexcept { return observations.empty(); }

  std::optional<std::size_t> covariate_index(const std::string& name) const {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - covariate_names.begin());
  }

  std::optional<std::size_t> predictor_index(const std::string& name) const {
    auto it = std::find(predictor_names.begin(), predictor_names.end(), name);
    if (it == predictor_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - predictor_names.begin());
  }

  bool operator==(const Dataset& other) const {
    if (covariate_names != other.covariate_names || predictor_names != other.predictor_names ||
        observations.size() != other.observations.size())
      return false;
    for (std::size_t i = 0; i < observations.size(); ++i) {
      const Observation& a = observations[i];
      const Observation& b = other.observations[i];
      if (a.id != b.id || a.community != b.community || a.choice != b.choice || a.covariates != b.covariates ||
          a.predictors != b.predictors)
        return false;
    }
    return true;
  }
};

}  // namespace lcnl
