#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "lcnl/choice_tree.hpp"
#include "lcnl/csv.hpp"
#include "lcnl/dataset.hpp"
#include "lcnl/error.hpp"

namespace lcnl {

/// How a raw attitude item becomes a 0/1 class predictor.
///  agree:      Likert 1..4, indicator = response >= 3
///  importance: 1 (most important) .. 4 (not important), indicator = response <= 2
///  trust:      1..4, indicator = response >= 3
enum class ItemRule { agree, importance, trust };

struct ItemCoding {
  std::string name;
  ItemRule rule;
};

/// Attitude items in table order.
inline const std::vector<ItemCoding>& canonical_items() {
  static const std::vector<ItemCoding> items{
      {"husband_decides", ItemRule::agree},
      {"man_earns_woman_home", ItemRule::agree},
      {"fulfilled_as_mother", ItemRule::agree},
      {"husband_career_first", ItemRule::agree},
      {"boy_education_first", ItemRule::agree},
      {"no_work_religious", ItemRule::agree},
      {"housewife_fulfilling", ItemRule::agree},
      {"working_mother_warm", ItemRule::agree},
      {"dual_income", ItemRule::agree},
      {"spouse_respectful", ItemRule::importance},
      {"spouse_obedient", ItemRule::importance},
      {"spouse_confident", ItemRule::importance},
      {"spouse_intelligent", ItemRule::importance},
      {"spouse_respected", ItemRule::importance},
      {"trust_people", ItemRule::trust},
      {"rely_on_nobody", ItemRule::trust},
      {"caution_needed", ItemRule::trust},
      {"trust_family", ItemRule::trust},
      {"trust_neighbors", ItemRule::trust},
      {"trust_strangers", ItemRule::trust},
      {"trust_other_ethnic", ItemRule::trust},
  };
  return items;
}

/// All class predictors: the attitude items, then ethnicity and village.
inline std::vector<std::string> canonical_predictors() {
  std::vector<std::string> out;
  for (const auto& item : canonical_items()) out.push_back(item.name);
  out.push_back("kyrgyz_kazakh");
  out.push_back("village");
  return out;
}

/// +1: coefficient restricted >= 0 in the first class (patriarchal agreement);
/// -1: restricted <= 0 (egalitarian agreement). Trust items, ethnicity and
/// village are left free.
inline std::map<std::string, int> canonical_predictor_signs() {
  return {
      {"husband_decides", 1},     {"man_earns_woman_home", 1}, {"fulfilled_as_mother", 1},
      {"husband_career_first", 1}, {"boy_education_first", 1},  {"no_work_religious", 1},
      {"housewife_fulfilling", 1}, {"spouse_respectful", 1},    {"spouse_obedient", 1},
      {"spouse_confident", 1},     {"working_mother_warm", -1}, {"dual_income", -1},
      {"spouse_intelligent", -1},  {"spouse_respected", -1},
  };
}

inline const std::string& aksakal_answer() {
  static const std::string answer =
      "Community leaders, eg. aksakals make a decision, and other community members accept it";
  return answer;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string squeeze(const std::string& s) {
  std::string out;
  for (char ch : s)
    if (!std::isspace(static_cast<unsigned char>(ch))) out += ch;
  return out;
}

inline bool is_missing(const std::string& cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == ".";
}

inline std::string where(const std::string& source, const CsvTable& t, std::size_t r) {
  return source + ":" + std::to_string(t.lines[r]);
}

/// Strict decimal parse; nullopt for a missing cell.
inline std::optional<double> parse_number(const std::string& cell, const std::string& column, const std::string& at) {
  if (is_missing(cell)) return std::nullopt;
  const std::string t = trim(cell);
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ModelError(ErrorKind::parse_error, at, "column " + column + ": '" + cell + "' is not a number");
  return v;
}

inline std::optional<int> parse_code(const std::string& cell, const std::string& column, const std::string& at) {
  auto v = parse_number(cell, column, at);
  if (!v) return std::nullopt;
  if (*v != std::floor(*v))
    throw ModelError(ErrorKind::out_of_range, column, "response code " + cell + " at " + at + " is not an integer");
  return static_cast<int>(*v);
}

}  // namespace detail

/// Indicator for one raw response. Codes outside 1..4 are an error naming
/// the column and the value.
inline double code_response(ItemRule rule, int response, const std::string& column) {
  if (response < 1 || response > 4)
    throw ModelError(ErrorKind::out_of_range, column,
                     "response code " + std::to_string(response) + " outside documented range 1..4");
  switch (rule) {
    case ItemRule::agree:
    case ItemRule::trust: return response >= 3 ? 1.0 : 0.0;
    case ItemRule::importance: return response <= 2 ? 1.0 : 0.0;
  }
  return 0.0;
}

/// 1 for Kyrgyz or Kazakh (case-insensitive), else 0.
inline double code_ethnicity(const std::string& ethnicity) {
  std::string t = detail::trim(ethnicity);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return t == "kyrgyz" || t == "kazakh" ? 1.0 : 0.0;
}

/// Codes the named predictors for every raw row. Missing responses come back
/// as NaN so the caller can count them as incomplete cases.
inline std::vector<std::vector<double>> code_class_predictors(const CsvTable& raw,
                                                              const std::vector<std::string>& predictors,
                                                              const std::string& source = "<survey>") {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  struct Column {
    std::size_t index;
    enum { item, ethnicity, village } kind;
    ItemRule rule;
  };
  std::vector<Column> cols;
  for (const auto& name : predictors) {
    if (name == "kyrgyz_kazakh") {
      cols.push_back({raw.require("ethnicity", source), Column::ethnicity, ItemRule::agree});
    } else if (name == "village") {
      cols.push_back({raw.require("village", source), Column::village, ItemRule::agree});
    } else {
      const auto& items = canonical_items();
      auto it = std::find_if(items.begin(), items.end(), [&](const ItemCoding& c) { return c.name == name; });
      if (it == items.end()) throw ModelError(ErrorKind::unknown_variable, name, "not a known class predictor");
      cols.push_back({raw.require(name, source), Column::item, it->rule});
    }
  }

  std::vector<std::vector<double>> z(raw.rows.size(), std::vector<double>(predictors.size(), nan));
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto at = detail::where(source, raw, r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::string& cell = raw.rows[r][cols[k].index];
      if (detail::is_missing(cell)) continue;
      switch (cols[k].kind) {
        case Column::ethnicity: z[r][k] = code_ethnicity(cell); break;
        case Column::village: {
          const int v = *detail::parse_code(cell, "village", at);
          if (v != 0 && v != 1)
            throw ModelError(ErrorKind::out_of_range, "village", "value " + cell + " at " + at + " is not 0/1");
          z[r][k] = v;
          break;
        }
        case Column::item: {
          const int v = *detail::parse_code(cell, predictors[k], at);
          if (v < 1 || v > 4)
            throw ModelError(ErrorKind::out_of_range, predictors[k],
                             "response code " + detail::trim(cell) + " at " + at + " outside documented range 1..4");
          z[r][k] = code_response(cols[k].rule, v, predictors[k]);
          break;
        }
      }
    }
  }
  return z;
}

/// community_id -> 1 if the community respondent gave the aksakal answer.
/// Whitespace is ignored in the comparison.
inline std::map<std::string, int> code_aksakal_governance(const CsvTable& communities,
                                                          const std::string& answer = aksakal_answer(),
                                                          const std::string& source = "<communities>") {
  const auto id = communities.require("community_id", source);
  const auto resp = communities.require("decision_answer", source);
  const std::string want = detail::squeeze(answer);
  std::map<std::string, int> out;
  for (const auto& row : communities.rows) out[detail::trim(row[id])] = detail::squeeze(row[resp]) == want ? 1 : 0;
  return out;
}

/// Per-community mean sheep-equivalent payment over unique marriages from
/// the 2011 and 2012 waves. A marriage recorded in both waves counts once
/// (the earlier record is kept). Communities listed in `communities` without
/// any record map to nullopt.
inline std::map<std::string, std::optional<double>> aggregate_kalym(const CsvTable& marriages,
                                                                    const std::vector<std::string>& communities = {},
                                                                    const std::string& source = "<marriages>") {
  const auto mid = marriages.require("marriage_id", source);
  const auto cid = marriages.require("community_id", source);
  const auto wid = marriages.require("wave", source);
  const auto pid = marriages.require("payment", source);

  struct Record {
    std::string community;
    int wave;
    double payment;
  };
  std::map<std::string, Record> unique;
  for (std::size_t r = 0; r < marriages.rows.size(); ++r) {
    const auto& row = marriages.rows[r];
    const auto at = detail::where(source, marriages, r);
    const auto wave = detail::parse_code(row[wid], "wave", at);
    if (!wave || (*wave != 2011 && *wave != 2012))
      throw ModelError(ErrorKind::out_of_range, "wave", "'" + row[wid] + "' at " + at + " is not 2011 or 2012");
    const auto pay = detail::parse_number(row[pid], "payment", at);
    if (!pay) continue;
    if (*pay < 0.0) throw ModelError(ErrorKind::out_of_range, "payment", "negative payment " + row[pid] + " at " + at);
    const std::string key = detail::trim(row[mid]);
    auto it = unique.find(key);
    if (it == unique.end() || *wave < it->second.wave) unique[key] = Record{detail::trim(row[cid]), *wave, *pay};
  }

  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& [_, rec] : unique) {
    auto& s = sums[rec.community];
    s.first += rec.payment;
    s.second += 1;
  }
  std::map<std::string, std::optional<double>> out;
  for (const auto& c : communities) out[c] = std::nullopt;
  for (const auto& [c, s] : sums) out[c] = s.first / static_cast<double>(s.second);
  return out;
}

/// Who counts as a kidnapper: married through one of `choices`, or a 1 in
/// `attempt_column` (an unsuccessful attempt). An empty column name skips
/// the second test.
struct KidnapperFilter {
  std::vector<std::string> choices{"bride_capture", "mock_kidnapping"};
  std::string attempt_column = "kidnap_attempt";
};

struct AdvantageTable {
  std::vector<std::string> questions;
  std::vector<std::size_t> affirmative;
  std::vector<std::size_t> answered;
  std::vector<double> percent;
  std::size_t subset = 0;
};

/// Percent of the kidnapper subset rating each advantage item (adv_q1..adv_q6)
/// as 1 or 2. Missing answers are left out of that item's denominator.
inline AdvantageTable tabulate_advantages(const CsvTable& raw, const KidnapperFilter& filter = {},
                                          const std::string& source = "<survey>") {
  AdvantageTable t;
  for (int q = 1; q <= 6; ++q) t.questions.push_back("adv_q" + std::to_string(q));
  std::vector<std::size_t> cols;
  for (const auto& q : t.questions) cols.push_back(raw.require(q, source));
  const auto choice = raw.require("choice", source);
  std::optional<std::size_t> attempt;
  if (!filter.attempt_column.empty()) attempt = raw.require(filter.attempt_column, source);
  t.affirmative.assign(cols.size(), 0);
  t.answered.assign(cols.size(), 0);

  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const auto at = detail::where(source, raw, r);
    bool kidnapper = std::find(filter.choices.begin(), filter.choices.end(), detail::trim(row[choice])) !=
                     filter.choices.end();
    if (!kidnapper && attempt) {
      const auto a = detail::parse_code(row[*attempt], filter.attempt_column, at);
      kidnapper = a && *a == 1;
    }
    if (!kidnapper) continue;
    ++t.subset;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto v = detail::parse_code(row[cols[k]], t.questions[k], at);
      if (!v) continue;
      t.affirmative[k] += static_cast<std::size_t>(code_response(ItemRule::importance, *v, t.questions[k]));
      ++t.answered[k];
    }
  }
  for (std::size_t k = 0; k < cols.size(); ++k)
    t.percent.push_back(t.answered[k] ? 100.0 * static_cast<double>(t.affirmative[k]) / static_cast<double>(t.answered[k])
                                      : std::numeric_limits<double>::quiet_NaN());
  return t;
}

enum class DataFormat { survey, coded };

/// Where the data lives and how to read it. `survey` files carry raw
/// responses that are coded on load; `coded` files carry predictors already
/// coded (the format write_dataset emits).
struct DataConfig {
  std::string path;
  DataFormat format = DataFormat::survey;
  std::vector<std::string> covariates = canonical::covariates();
  std::vector<std::string> predictors = canonical_predictors();
  double min_age = 18.0;
  std::string communities;  // optional: aksakal from decision_answer
  std::string marriages;    // optional: kalym from marriage payments
  std::string aksakal_answer = lcnl::aksakal_answer();
  bool standardize_income = false;
};

/// Applies, in order: age >= min_age ("age"), reliable == 1 ("reliability"),
/// complete cases ("missing"), and a known community kalym ("missing_kalym").
/// Age and reliability are required in survey files and applied to coded
/// files only when the columns exist.
inline Dataset load_dataset(const CsvTable& raw, const DataConfig& config, const std::string& source = "<data>") {
  const bool survey = config.format == DataFormat::survey;
  const auto id_col = raw.require("individual_id", source);
  const auto comm_col = raw.require("community_id", source);
  const auto choice_col = raw.require("choice", source);
  std::optional<std::size_t> age_col = raw.column("age"), rel_col = raw.column("reliable");
  if (survey) {
    age_col = raw.require("age", source);
    rel_col = raw.require("reliable", source);
  }

  std::optional<std::map<std::string, int>> aksakal;
  if (!config.communities.empty())
    aksakal = code_aksakal_governance(read_csv(config.communities), config.aksakal_answer, config.communities);
  std::optional<std::map<std::string, std::optional<double>>> kalym;
  if (!config.marriages.empty()) {
    std::vector<std::string> comms;
    for (const auto& row : raw.rows) comms.push_back(detail::trim(row[comm_col]));
    kalym = aggregate_kalym(read_csv(config.marriages), comms, config.marriages);
  }

  // merged covariates are not read from the individual file
  std::vector<std::optional<std::size_t>> cov_cols;
  for (const auto& name : config.covariates) {
    if ((name == "aksakal" && aksakal) || (name == "kalym" && kalym))
      cov_cols.emplace_back(std::nullopt);
    else
      cov_cols.emplace_back(raw.require(name, source));
  }

  std::vector<std::vector<double>> coded;
  std::vector<std::size_t> pred_cols;
  if (survey)
    coded = code_class_predictors(raw, config.predictors, source);
  else
    for (const auto& name : config.predictors) pred_cols.push_back(raw.require(name, source));

  Dataset data;
  data.covariate_names = config.covariates;
  data.predictor_names = config.predictors;
  auto& prov = data.provenance;
  for (const char* f : {"age", "reliability", "missing", "missing_kalym"}) prov.dropped[f] = 0;
  std::set<std::string> seen;

  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const auto at = detail::where(source, raw, r);
    ++prov.rows_read;
    const std::string id = detail::trim(row[id_col]);
    if (id.empty()) throw ModelError(ErrorKind::parse_error, at, "empty individual_id");
    if (!seen.insert(id).second) throw ModelError(ErrorKind::parse_error, at, "duplicate individual_id " + id);

    if (age_col) {
      const auto age = detail::parse_number(row[*age_col], "age", at);
      if (age && *age < config.min_age) {
        ++prov.dropped["age"];
        continue;
      }
    }
    if (rel_col) {
      const auto rel = detail::parse_code(row[*rel_col], "reliable", at);
      if (rel && *rel != 1) {
        ++prov.dropped["reliability"];
        continue;
      }
    }

    Observation obs;
    obs.id = id;
    obs.community = detail::trim(row[comm_col]);
    obs.choice = detail::trim(row[choice_col]);
    bool complete = !obs.choice.empty() && !obs.community.empty();
    if (age_col && detail::is_missing(row[*age_col])) complete = false;
    if (rel_col && detail::is_missing(row[*rel_col])) complete = false;
    bool kalym_missing = false;

    for (std::size_t k = 0; k < config.covariates.size(); ++k) {
      const auto& name = config.covariates[k];
      std::optional<double> v;
      if (cov_cols[k]) {
        v = detail::parse_number(row[*cov_cols[k]], name, at);
      } else if (name == "aksakal") {
        auto it = aksakal->find(obs.community);
        if (it != aksakal->end()) v = it->second;
      } else {
        auto it = kalym->find(obs.community);
        if (it != kalym->end() && it->second) v = *it->second;
        else kalym_missing = true;
      }
      if (!v && !(name == "kalym" && kalym_missing)) complete = false;
      obs.covariates.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t k = 0; k < config.predictors.size(); ++k) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (survey) {
        v = coded[r][k];
      } else if (auto p = detail::parse_number(row[pred_cols[k]], config.predictors[k], at)) {
        v = *p;
      }
      if (std::isnan(v)) complete = false;
      obs.predictors.push_back(v);
    }
    if (!complete) {
      ++prov.dropped["missing"];
      continue;
    }
    if (kalym_missing) {
      ++prov.dropped["missing_kalym"];
      continue;
    }
    data.observations.push_back(std::move(obs));
  }

  if (config.standardize_income) {
    if (auto k = data.covariate_index("income"); k && data.size() > 1) {
      double mean = 0.0, var = 0.0;
      for (const auto& o : data.observations) mean += o.covariates[*k];
      mean /= static_cast<double>(data.size());
      for (const auto& o : data.observations) var += (o.covariates[*k] - mean) * (o.covariates[*k] - mean);
      const double sd = std::sqrt(var / static_cast<double>(data.size() - 1));
      if (sd > 0.0)
        for (auto& o : data.observations) o.covariates[*k] = (o.covariates[*k] - mean) / sd;
    }
  }
  return data;
}

inline Dataset load_dataset(const DataConfig& config) {
  return load_dataset(read_csv(config.path), config, config.path);
}

/// Coded format: individual_id, community_id, choice, covariates, predictors.
inline void write_dataset(std::ostream& os, const Dataset& data) {
  std::vector<std::string> header{"individual_id", "community_id", "choice"};
  header.insert(header.end(), data.covariate_names.begin(), data.covariate_names.end());
  header.insert(header.end(), data.predictor_names.begin(), data.predictor_names.end());
  write_csv_row(os, header);
  std::vector<std::string> fields;
  for (const auto& o : data.observations) {
    fields = {o.id, o.community, o.choice};
    for (double v : o.covariates) fields.push_back(format_double(v));
    for (double v : o.predictors) fields.push_back(format_double(v));
    write_csv_row(os, fields);
  }
}

inline void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ModelError(ErrorKind::io_error, path, "cannot open for writing");
  write_dataset(out, data);
  if (!out) throw ModelError(ErrorKind::io_error, path, "write failed");
}

}  // namespace lcnl
