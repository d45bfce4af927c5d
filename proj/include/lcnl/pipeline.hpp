#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lcnl/annealer.hpp"
#include "lcnl/config.hpp"
#include "lcnl/dataio.hpp"
#include "lcnl/effects.hpp"
#include "lcnl/inference.hpp"
#include "lcnl/likelihood.hpp"
#include "lcnl/model.hpp"
#include "lcnl/report.hpp"
#include "lcnl/simulate.hpp"

namespace lcnl {

/// Process exit codes.
enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_not_converged = 2 };

namespace detail {

inline std::filesystem::path output_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return std::filesystem::path(cfg.output_dir) / name;
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError(ErrorKind::io_error, path.string(), "cannot open for writing");
  body(out);
  if (!out) throw ModelError(ErrorKind::io_error, path.string(), "write failed");
}

}  // namespace detail

inline void apply_threads(const RunConfig& cfg) {
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
  (void)cfg;
#endif
}

/// Parameters used to simulate: the preset truth, all zero, or a parameter
/// table.
inline ParameterSet simulation_truth(const RunConfig& cfg) {
  const ModelSpec spec = cfg.model_spec();
  const Layout layout(spec);
  const ParameterSet shape = make_parameter_set(spec, cfg.parameter_options());
  if (cfg.truth == "zero") return shape;
  if (cfg.truth == "preset") {
    if (cfg.preset != "recovery")
      throw ModelError(ErrorKind::config_error, "simulate.truth", "truth = preset needs model.preset = recovery");
    const RecoveryFixture f = recovery_fixture();
    // same model, so the fixture's values drop straight in
    return layout.unpack(Layout(f.model).pack(f.truth), shape);
  }
  return read_parameter_table(cfg.truth, layout, shape);
}

inline Dataset obtain_data(const RunConfig& cfg) {
  if (cfg.data) return load_dataset(*cfg.data);
  SimulationSpec spec = *cfg.simulate;
  spec.model = cfg.model_spec();
  spec.truth = simulation_truth(cfg);
  return simulate_dataset(spec);
}

/// Starting values: model.params if set, else all zero.
inline ParameterSet starting_parameters(const RunConfig& cfg, const Layout& layout) {
  const ParameterSet shape = make_parameter_set(cfg.model_spec(), cfg.parameter_options());
  if (cfg.params.empty()) return shape;
  return read_parameter_table(cfg.params, layout, shape);
}

struct EstimateOutcome {
  ParameterSet estimate;
  AnnealResult anneal;
  std::optional<CovarianceReport> covariance;
  std::string covariance_error;
  FitSummary fit;
  int exit_code = exit_ok;
};

/// Full estimation: SA (+ optional polish), sandwich covariance, reports.
/// Writes parameters.csv, parameters.txt, membership.txt, fit.txt and
/// trace.tsv under the output directory.
inline EstimateOutcome run_estimate(const RunConfig& cfg, std::ostream& log) {
  apply_threads(cfg);
  const Dataset data = obtain_data(cfg);
  if (data.empty()) throw ModelError(ErrorKind::empty_data, "estimate", "dataset has no observations");
  const Layout layout(cfg.model_spec());
  const ParameterSet start = starting_parameters(cfg, layout);
  const Design design(layout, data);
  const auto tags = layout.tags(start);
  const auto free = free_indices(tags);

  AnnealConfig ac = cfg.anneal;
  ac.seed = cfg.seed;
  IncrementalLikelihood objective(layout, design);
  const Bounds bounds = bounds_from_tags(tags, ac.bound);
  auto x0 = layout.pack(start);
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = std::clamp(x0[i], bounds.lower[i], bounds.upper[i]);
  log << "annealing " << free.size() << " free parameters over " << data.size() << " observations\n";

  EstimateOutcome out;
  out.anneal = anneal(objective, x0, bounds, ac);
  std::vector<double> theta = out.anneal.best;
  const Likelihood likelihood(layout, design);
  if (ac.polish) {
    auto p = polish([&](std::span<const double> x) { return likelihood(x); }, theta, bounds, ac.polish_config);
    theta = p.best;
  }
  out.estimate = layout.unpack(theta, start);
  const LikelihoodReport rep = likelihood.report(theta, free.size());
  log << "log-likelihood " << format_double(rep.log_likelihood) << " (" << to_string(out.anneal.trace.status) << ", "
      << out.anneal.trace.evaluations << " evaluations)\n";

  if (cfg.inference && !free.empty()) {
    try {
      out.covariance = sandwich_covariance(likelihood, theta, tags, cfg.inference_options);
    } catch (const ModelError& e) {
      if (e.kind() != ErrorKind::singular_matrix && e.kind() != ErrorKind::non_finite) throw;
      out.covariance_error = e.what();
      log << "covariance unavailable: " << e.what() << '\n';
    }
  }

  FitSummary& fit = out.fit;
  fit.log_likelihood = rep.log_likelihood;
  fit.bic = rep.bic;
  fit.observations = rep.observations;
  fit.free_parameters = free.size();
  fit.status = out.anneal.trace.status;
  fit.evaluations = out.anneal.trace.evaluations;
  fit.non_finite = out.anneal.trace.non_finite;
  fit.initial_temperature = out.anneal.trace.initial_temperature;
  fit.polished = ac.polish;
  if (out.covariance) {
    fit.ridge = out.covariance->ridge;
    fit.min_eigenvalue = out.covariance->min_eigenvalue;
    fit.middle_term = out.covariance->literal_eq15 ? "literal_eq15" : "opg";
  }
  fit.rows_read = data.provenance.rows_read;
  fit.dropped = data.provenance.dropped;

  const auto rows = parameter_rows(layout, theta, tags, out.covariance ? &*out.covariance : nullptr);
  detail::write_file(detail::output_path(cfg, "parameters.csv"), [&](std::ostream& os) { write_parameter_csv(os, rows); });
  detail::write_file(detail::output_path(cfg, "parameters.txt"),
                     [&](std::ostream& os) { write_parameter_text(os, layout, rows); });
  detail::write_file(detail::output_path(cfg, "membership.txt"),
                     [&](std::ostream& os) { write_membership_text(os, layout, rows); });
  detail::write_file(detail::output_path(cfg, "fit.txt"), [&](std::ostream& os) {
    write_fit(os, fit);
    if (!out.covariance_error.empty()) os << "covariance_error = " << out.covariance_error << '\n';
  });
  detail::write_file(detail::output_path(cfg, "trace.tsv"), [&](std::ostream& os) { write_trace(os, out.anneal.trace); });

  out.exit_code = fit.status == AnnealStatus::converged ? exit_ok : exit_not_converged;
  return out;
}

/// Estimated parameters for effects/validate: model.params if set, else the
/// estimate's parameters.csv if present, else all zero.
inline ParameterSet fitted_parameters(const RunConfig& cfg, const Layout& layout, std::ostream& log) {
  const ParameterSet shape = make_parameter_set(cfg.model_spec(), cfg.parameter_options());
  if (!cfg.params.empty()) return read_parameter_table(cfg.params, layout, shape);
  const auto path = std::filesystem::path(cfg.output_dir) / "parameters.csv";
  if (std::filesystem::exists(path)) return read_parameter_table(path.string(), layout, shape);
  log << "no parameter table found; using all-zero parameters\n";
  return shape;
}

struct EffectsOutcome {
  EffectsTable mixture;
  std::vector<EffectsTable> classes;
  std::vector<double> shares;
};

/// Mixture and per-class effects tables: effects.csv/.txt and
/// effects_class<k>.csv/.txt plus class_shares.csv.
inline EffectsOutcome run_effects(const RunConfig& cfg, std::ostream& log) {
  apply_threads(cfg);
  const Dataset data = obtain_data(cfg);
  const Layout layout(cfg.model_spec());
  const ParameterSet params = fitted_parameters(cfg, layout, log);
  EffectsOptions opts;
  opts.discrete_binary = cfg.discrete_binary;

  EffectsOutcome out;
  out.mixture = marginal_effects(layout, data, params, cfg.effect_variables, opts);
  out.shares = class_shares(layout, data, params);
  for (std::size_t c = 0; c < layout.classes(); ++c)
    out.classes.push_back(class_effects(layout, data, params, cfg.effect_variables, c, cfg.effect_weighting, opts));

  detail::write_file(detail::output_path(cfg, "effects.csv"), [&](std::ostream& os) { write_effects_csv(os, out.mixture); });
  detail::write_file(detail::output_path(cfg, "effects.txt"), [&](std::ostream& os) { write_effects_text(os, out.mixture); });
  for (std::size_t c = 0; c < out.classes.size(); ++c) {
    const std::string stem = "effects_class" + std::to_string(c + 1);
    detail::write_file(detail::output_path(cfg, stem + ".csv"), [&](std::ostream& os) { write_effects_csv(os, out.classes[c]); });
    detail::write_file(detail::output_path(cfg, stem + ".txt"), [&](std::ostream& os) { write_effects_text(os, out.classes[c]); });
  }
  detail::write_file(detail::output_path(cfg, "class_shares.csv"), [&](std::ostream& os) {
    write_csv_row(os, {"class", "mean_membership"});
    for (std::size_t c = 0; c < out.shares.size(); ++c) write_csv_row(os, {std::to_string(c + 1), format_double(out.shares[c])});
  });
  log << "effects for " << cfg.effect_variables.size() << " variables over " << data.size() << " observations\n";
  return out;
}

/// Simulated dataset (coded format) plus the generating parameters.
inline Dataset run_simulate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.simulate) throw ModelError(ErrorKind::config_error, "simulate", "simulate needs a [simulate] section");
  apply_threads(cfg);
  const Dataset data = obtain_data(cfg);
  const Layout layout(cfg.model_spec());
  const ParameterSet truth = simulation_truth(cfg);
  const auto flat = layout.pack(truth);
  const auto tags = layout.tags(truth);
  detail::write_file(detail::output_path(cfg, "dataset.csv"), [&](std::ostream& os) { write_dataset(os, data); });
  detail::write_file(detail::output_path(cfg, "truth.csv"),
                     [&](std::ostream& os) { write_parameter_csv(os, parameter_rows(layout, flat, tags)); });
  log << "simulated " << data.size() << " individuals\n";
  return data;
}

/// Advantage-item proportions for the kidnapper subset (advantages.csv).
inline AdvantageTable run_tabulate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.data) throw ModelError(ErrorKind::config_error, "data", "tabulate needs a [data] survey file");
  KidnapperFilter filter;
  filter.attempt_column = cfg.kidnap_attempt_column;
  const AdvantageTable t = tabulate_advantages(read_csv(cfg.data->path), filter, cfg.data->path);
  detail::write_file(detail::output_path(cfg, "advantages.csv"), [&](std::ostream& os) {
    write_csv_row(os, {"question", "affirmative", "answered", "percent"});
    for (std::size_t k = 0; k < t.questions.size(); ++k)
      write_csv_row(os, {t.questions[k], std::to_string(t.affirmative[k]), std::to_string(t.answered[k]),
                         format_double(t.percent[k])});
  });
  log << "kidnapper subset: " << t.subset << " respondents\n";
  return t;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Invariant suite over the configured model, data and parameters.
inline std::vector<CheckResult> validate_model(const Layout& layout, const Dataset& data, const ParameterSet& params,
                                               const std::vector<std::string>& effect_variables) {
  std::vector<CheckResult> checks;
  if (data.empty()) {
    checks.push_back({"data", false, "no observations"});
    return checks;
  }
  checks.push_back({"data", true, std::to_string(data.size()) + " observations"});
  auto run = [&](const std::string& name, const std::function<std::string(bool&)>& body) {
    CheckResult r{name, true, ""};
    try {
      r.detail = body(r.passed);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = e.what();
    }
    checks.push_back(r);
  };
  const Design design(layout, data);
  const auto theta = layout.pack(params);
  const ChoiceTree& tree = layout.tree();

  run("simplex_sums", [&](bool& ok) {
    double worst = 0.0;
    for (std::size_t i = 0; i < design.size(); ++i) {
      const auto b = probabilities(layout, theta, design.x(i), design.z(i));
      double s = 0.0;
      for (double p : b.mixture) s += p;
      worst = std::max(worst, std::abs(s - 1.0));
      s = 0.0;
      for (double h : b.membership) s += h;
      worst = std::max(worst, std::abs(s - 1.0));
      for (std::size_t c = 0; c < layout.classes(); ++c)
        for (std::size_t n = 0; n < tree.nest_count(); ++n) {
          double w = 0.0;
          for (std::size_t j = 0; j < tree.nests()[n].alternatives.size(); ++j) w += b.within[c][tree.first_member(n) + j];
          worst = std::max(worst, std::abs(w - 1.0));
        }
    }
    ok = worst <= 1e-12;
    return "max |sum - 1| = " + format_double(worst);
  });

  run("zero_sum_effects", [&](bool& ok) {
    const auto t = marginal_effects(layout, data, params, effect_variables);
    double worst = 0.0, base = 0.0;
    for (std::size_t r = 0; r < t.variables.size(); ++r) worst = std::max(worst, std::abs(t.row_sum(r)));
    for (double b : t.base) base += b;
    ok = worst <= 1e-10 && std::abs(base - 1.0) <= 1e-10;
    return "max |row sum| = " + format_double(worst) + ", base sum = " + format_double(base);
  });

  run("mnl_collapse", [&](bool& ok) {
    // class 1 utilities, one class, nest utilities zeroed: must equal a flat logit
    ModelSpec one = layout.spec();
    one.classes = 1;
    const Layout l1(one);
    ParameterOptions po;
    po.fix_nest_coefficients = true;
    ParameterSet p1 = make_parameter_set(one, po);
    p1.alternative[0] = params.alternative[0];
    const auto t1 = l1.pack(p1);
    const Design d1(l1, data);
    double worst = 0.0;
    const std::size_t n = std::min<std::size_t>(design.size(), 1000);
    std::vector<double> u(tree.alternative_count());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& obs = data.observations[i];
      for (std::size_t m = 0; m < u.size(); ++m) {
        const auto& b = params.alternative[0][m];
        double v = b.values[0];
        for (std::size_t k = 1; k < b.size(); ++k) v += b.values[k] * obs.covariates[*data.covariate_index(b.names[k])];
        u[m] = tree.alternative(m).outside_option ? 0.0 : v;
      }
      const double top = *std::max_element(u.begin(), u.end());
      double z = 0.0;
      for (double v : u) z += std::exp(v - top);
      const auto b = probabilities(l1, t1, d1.x(i), d1.z(i));
      for (std::size_t m = 0; m < u.size(); ++m) worst = std::max(worst, std::abs(b.mixture[m] - std::exp(u[m] - top) / z));
    }
    ok = worst <= 1e-10;
    return "max |P - P_mnl| = " + format_double(worst);
  });

  run("gradient_step_halving", [&](bool& ok) {
    const Likelihood ll(layout, design);
    const auto tags = layout.tags(params);
    const auto coords = free_indices(tags);
    const auto labels = layout.labels();
    const auto g1 = central_gradient(ll, theta, coords, 1e-6, labels);
    const auto g2 = central_gradient(ll, theta, coords, 0.5e-6, labels);
    double worst = 0.0;
    for (std::size_t i : coords) worst = std::max(worst, std::abs(g1[i] - g2[i]) / std::max(1.0, std::abs(g2[i])));
    ok = worst < 1e-5;
    return "max relative drift = " + format_double(worst);
  });
  return checks;
}

/// Prints one PASS/FAIL line per check; exit_ok iff all pass.
inline int run_validate(const RunConfig& cfg, std::ostream& os) {
  apply_threads(cfg);
  const Layout layout(cfg.model_spec());
  const ParameterSet params = fitted_parameters(cfg, layout, os);
  const Dataset data = obtain_data(cfg);
  const auto checks = validate_model(layout, data, params, cfg.effect_variables);
  bool all = true;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.passed;
  }
  return all ? exit_ok : exit_config;
}

}  // namespace lcnl
