#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lcnl/annealer.hpp"
#include "lcnl/csv.hpp"
#include "lcnl/dataio.hpp"
#include "lcnl/effects.hpp"
#include "lcnl/error.hpp"
#include "lcnl/inference.hpp"
#include "lcnl/likelihood.hpp"
#include "lcnl/parameters.hpp"

namespace lcnl {

/// One coefficient in report order (the flat packing order).
struct ParameterRow {
  std::string cls;  // "1", "2", ... or "all" for dissimilarities
  std::string equation;
  std::string coefficient;
  double estimate = 0.0;
  std::optional<double> se;
  Constraint tag;
};

inline ParameterRow describe_slot(const Layout& layout, const Slot& s) {
  const ChoiceTree& tree = layout.tree();
  ParameterRow r;
  r.cls = std::to_string(s.cls + 1);
  switch (s.kind) {
    case BlockKind::nest: {
      const Nest& nest = tree.nests()[s.owner];
      r.equation = "nest:" + nest.id;
      r.coefficient = s.coef == 0 ? "intercept" : nest.covariates[s.coef - 1];
      break;
    }
    case BlockKind::alternative: {
      const Alternative& alt = tree.alternative(s.owner);
      r.equation = alt.id;
      r.coefficient = s.coef == 0 ? "intercept" : alt.covariates[s.coef - 1];
      break;
    }
    case BlockKind::membership:
      r.equation = "membership";
      r.coefficient = s.coef == 0 ? "intercept" : layout.predictors()[s.coef - 1];
      break;
    case BlockKind::dissimilarity:
      r.cls = "all";
      r.equation = "dissimilarity";
      r.coefficient = tree.nests()[s.owner].id;
      break;
  }
  return r;
}

inline std::vector<ParameterRow> parameter_rows(const Layout& layout, std::span<const double> flat,
                                                std::span<const Constraint> tags,
                                                const CovarianceReport* cov = nullptr) {
  std::vector<ParameterRow> rows;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    ParameterRow r = describe_slot(layout, layout.slots()[i]);
    r.estimate = flat[i];
    r.tag = tags[i];
    rows.push_back(std::move(r));
  }
  if (cov)
    for (std::size_t k = 0; k < cov->flat_index.size(); ++k) rows[cov->flat_index[k]].se = cov->standard_errors[k];
  return rows;
}

inline void write_parameter_csv(std::ostream& os, const std::vector<ParameterRow>& rows) {
  write_csv_row(os, {"class", "equation", "coefficient", "estimate", "se", "constraint"});
  for (const auto& r : rows)
    write_csv_row(os, {r.cls, r.equation, r.coefficient, format_double(r.estimate), r.se ? format_double(*r.se) : "",
                       r.tag.str()});
}

/// Reads a parameter table back into `shape`. Every coefficient of the model
/// must appear exactly once; values must satisfy their constraints.
inline ParameterSet read_parameter_table(std::istream& in, const Layout& layout, const ParameterSet& shape,
                                         const std::string& source = "<parameters>") {
  const CsvTable t = parse_csv(in, source);
  const auto ccls = t.require("class", source), ceq = t.require("equation", source),
             ccoef = t.require("coefficient", source), cest = t.require("estimate", source);
  const auto ccon = t.column("constraint");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ParameterRow r = describe_slot(layout, layout.slots()[i]);
    index[r.cls + "|" + r.equation + "|" + r.coefficient] = i;
  }
  std::vector<double> flat(layout.size());
  auto tags = layout.tags(shape);
  std::vector<bool> seen(layout.size(), false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string at = source + ":" + std::to_string(t.lines[r]);
    const std::string key = detail::trim(row[ccls]) + "|" + detail::trim(row[ceq]) + "|" + detail::trim(row[ccoef]);
    auto it = index.find(key);
    if (it == index.end())
      throw ModelError(ErrorKind::parse_error, at, "coefficient " + row[ccls] + "/" + row[ceq] + "/" + row[ccoef] +
                                                       " is not part of the model");
    if (seen[it->second]) throw ModelError(ErrorKind::parse_error, at, "coefficient listed twice");
    seen[it->second] = true;
    const auto v = detail::parse_number(row[cest], "estimate", at);
    if (!v) throw ModelError(ErrorKind::parse_error, at, "missing estimate");
    flat[it->second] = *v;
    if (ccon) {
      try {
        tags[it->second] = Constraint::parse(detail::trim(row[*ccon]));
      } catch (const ModelError&) {
        throw ModelError(ErrorKind::parse_error, at, "bad constraint '" + row[*ccon] + "'");
      }
    }
  }
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (!seen[i]) throw ModelError(ErrorKind::parse_error, source, "missing coefficient " + layout.slots()[i].label);
  ParameterSet p = layout.unpack(flat, shape);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Slot& s = layout.slots()[i];
    Constraint* tag = nullptr;
    switch (s.kind) {
      case BlockKind::nest: tag = &p.nest[s.cls][s.owner].tags[s.coef]; break;
      case BlockKind::alternative: tag = &p.alternative[s.cls][s.owner].tags[s.coef]; break;
      case BlockKind::membership: tag = &p.membership[s.cls].tags[s.coef]; break;
      case BlockKind::dissimilarity: tag = &p.dissimilarity_tags[s.owner]; break;
    }
    *tag = tags[i];
  }
  layout.check_consistent(p);
  return p;
}

inline ParameterSet read_parameter_table(const std::string& path, const Layout& layout, const ParameterSet& shape) {
  std::ifstream in(path);
  if (!in) throw ModelError(ErrorKind::io_error, path, "cannot open parameter table");
  return read_parameter_table(in, layout, shape, path);
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Left column plus one column per class; each cell "estimate (se)".
inline void write_class_grid(std::ostream& os, const std::vector<std::string>& row_names,
                             const std::vector<std::vector<std::string>>& cells, std::size_t classes) {
  std::size_t w0 = 12;
  for (const auto& r : row_names) w0 = std::max(w0, r.size());
  std::vector<std::size_t> w(classes, 7);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < classes; ++c) w[c] = std::max(w[c], row[c].size());
  os << std::left << std::setw(static_cast<int>(w0)) << "" << std::right;
  for (std::size_t c = 0; c < classes; ++c)
    os << "  " << std::setw(static_cast<int>(w[c])) << ("Class " + std::to_string(c + 1));
  os << '\n';
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    os << std::left << std::setw(static_cast<int>(w0)) << row_names[r] << std::right;
    for (std::size_t c = 0; c < classes; ++c) os << "  " << std::setw(static_cast<int>(w[c])) << cells[r][c];
    os << '\n';
  }
}

inline std::string cell(const ParameterRow& r) {
  std::string s = fixed4(r.estimate);
  if (r.se) s += " (" + fixed4(*r.se) + ")";
  else if (r.tag.is_fixed()) s += " (fixed)";
  return s;
}

}  // namespace detail

/// Utility coefficients grouped by equation, classes side by side.
inline void write_parameter_text(std::ostream& os, const Layout& layout, const std::vector<ParameterRow>& rows) {
  std::vector<std::string> equations;
  for (const auto& r : rows)
    if (r.equation != "membership" && r.equation != "dissimilarity" &&
        std::find(equations.begin(), equations.end(), r.equation) == equations.end())
      equations.push_back(r.equation);
  for (const auto& eq : equations) {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
      if (r.equation != eq) continue;
      const std::size_t c = std::stoul(r.cls) - 1;
      auto it = std::find(names.begin(), names.end(), r.coefficient);
      std::size_t k = static_cast<std::size_t>(it - names.begin());
      if (it == names.end()) {
        names.push_back(r.coefficient);
        cells.emplace_back(layout.classes(), "");
      }
      cells[k][c] = detail::cell(r);
    }
    os << eq << '\n';
    detail::write_class_grid(os, names, cells, layout.classes());
    os << '\n';
  }
  bool any = false;
  for (const auto& r : rows) {
    if (r.equation != "dissimilarity") continue;
    if (!any) os << "dissimilarity\n";
    any = true;
    os << "  " << r.coefficient << "  " << detail::cell(r) << '\n';
  }
}

/// Membership coefficients: predictors as rows, classes as columns.
inline void write_membership_text(std::ostream& os, const Layout& layout, const std::vector<ParameterRow>& rows) {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    if (r.equation != "membership") continue;
    const std::size_t c = std::stoul(r.cls) - 1;
    auto it = std::find(names.begin(), names.end(), r.coefficient);
    std::size_t k = static_cast<std::size_t>(it - names.begin());
    if (it == names.end()) {
      names.push_back(r.coefficient);
      cells.emplace_back(layout.classes(), "");
    }
    cells[k][c] = detail::cell(r);
  }
  detail::write_class_grid(os, names, cells, layout.classes());
}

/// Fit metadata as key = value lines.
struct FitSummary {
  double log_likelihood = 0.0;
  double bic = 0.0;
  std::size_t observations = 0;
  std::size_t free_parameters = 0;
  AnnealStatus status = AnnealStatus::converged;
  std::size_t evaluations = 0;
  std::size_t non_finite = 0;
  double initial_temperature = 0.0;
  bool polished = false;
  std::optional<double> ridge;
  std::optional<double> min_eigenvalue;
  std::string middle_term;
  std::map<std::string, std::size_t> dropped;
  std::size_t rows_read = 0;
};

inline void write_fit(std::ostream& os, const FitSummary& f) {
  os << "log_likelihood = " << format_double(f.log_likelihood) << '\n'
     << "bic = " << format_double(f.bic) << '\n'
     << "bic_convention = " << kBicConvention << '\n'
     << "observations = " << f.observations << '\n'
     << "free_parameters = " << f.free_parameters << '\n'
     << "status = " << to_string(f.status) << '\n'
     << "evaluations = " << f.evaluations << '\n'
     << "non_finite_proposals = " << f.non_finite << '\n'
     << "initial_temperature = " << format_double(f.initial_temperature) << '\n'
     << "polished = " << (f.polished ? "true" : "false") << '\n';
  if (f.ridge) os << "hessian_ridge_added = " << format_double(*f.ridge) << '\n';
  if (f.min_eigenvalue) os << "min_eigenvalue_neg_hessian = " << format_double(*f.min_eigenvalue) << '\n';
  if (!f.middle_term.empty()) os << "covariance_middle_term = " << f.middle_term << '\n';
  os << "rows_read = " << f.rows_read << '\n';
  for (const auto& [k, v] : f.dropped) os << "dropped_" << k << " = " << v << '\n';
}

inline void write_effects_csv(std::ostream& os, const EffectsTable& t) {
  std::vector<std::string> header{"variable"};
  header.insert(header.end(), t.alternatives.begin(), t.alternatives.end());
  header.push_back("row_sum");
  write_csv_row(os, header);
  for (std::size_t r = 0; r < t.variables.size(); ++r) {
    std::vector<std::string> f{t.variables[r]};
    for (double v : t.effects[r]) f.push_back(format_double(v));
    f.push_back(format_double(t.row_sum(r)));
    write_csv_row(os, f);
  }
  std::vector<std::string> base{"base_probability"};
  double s = 0.0;
  for (double v : t.base) {
    base.push_back(format_double(v));
    s += v;
  }
  base.push_back(format_double(s));
  write_csv_row(os, base);
}

inline void write_effects_text(std::ostream& os, const EffectsTable& t) {
  std::size_t w0 = 16;
  for (const auto& v : t.variables) w0 = std::max(w0, v.size());
  std::vector<std::size_t> w;
  for (const auto& a : t.alternatives) w.push_back(std::max<std::size_t>(a.size(), 8));
  os << std::left << std::setw(static_cast<int>(w0)) << "" << std::right;
  for (std::size_t m = 0; m < w.size(); ++m) os << "  " << std::setw(static_cast<int>(w[m])) << t.alternatives[m];
  os << '\n';
  auto line = [&](const std::string& name, const std::vector<double>& values) {
    os << std::left << std::setw(static_cast<int>(w0)) << name << std::right;
    for (std::size_t m = 0; m < w.size(); ++m) os << "  " << std::setw(static_cast<int>(w[m])) << detail::fixed4(values[m]);
    os << '\n';
  };
  for (std::size_t r = 0; r < t.variables.size(); ++r) line(t.variables[r], t.effects[r]);
  line("Base Probability", t.base);
}

}  // namespace lcnl
