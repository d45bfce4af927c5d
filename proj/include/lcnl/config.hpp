#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcnl/annealer.hpp"
#include "lcnl/choice_tree.hpp"
#include "lcnl/dataio.hpp"
#include "lcnl/effects.hpp"
#include "lcnl/error.hpp"
#include "lcnl/inference.hpp"
#include "lcnl/parameters.hpp"
#include "lcnl/simulate.hpp"

namespace lcnl {

/// Everything one command needs. Loaded from an INI file; every key has a
/// default, and print_config writes the resolved values back out in the same
/// format.
struct RunConfig {
  std::uint64_t seed = 7;
  int threads = 0;  // 0: all available cores

  // [model]
  std::string preset = "none";  // none | recovery
  std::string tree_kind = "canonical";
  ChoiceTree tree = build_canonical_tree();
  std::size_t classes = 2;
  std::vector<std::string> predictors = canonical_predictors();
  std::string sign_restrictions = "canonical";  // canonical | none
  bool reference_class = true;
  bool fix_nest_coefficients = false;
  bool free_dissimilarity = false;
  std::string params;  // start values; empty = all zero

  // [anneal]
  AnnealConfig anneal;

  // [inference]
  bool inference = true;
  InferenceOptions inference_options;

  // [data]
  std::optional<DataConfig> data;
  std::string kidnap_attempt_column = "kidnap_attempt";

  // [simulate]
  std::optional<SimulationSpec> simulate;
  bool simulate_seed_set = false;
  std::string truth = "preset";  // preset | zero | path to a parameter table

  // [effects]
  std::vector<std::string> effect_variables = canonical::covariates();
  ClassWeighting effect_weighting = ClassWeighting::membership;
  bool discrete_binary = true;

  // [output]
  std::string output_dir = "out";

  ModelSpec model_spec() const { return ModelSpec{tree, classes, predictors}; }

  ParameterOptions parameter_options() const {
    ParameterOptions o;
    o.reference_class = reference_class;
    o.fix_nest_coefficients = fix_nest_coefficients;
    o.free_dissimilarity = free_dissimilarity;
    if (sign_restrictions == "canonical") {
      const auto signs = canonical_predictor_signs();
      for (const auto& p : predictors)
        if (auto it = signs.find(p); it != signs.end()) o.predictor_signs[p] = it->second;
    }
    return o;
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + v[k];
  return out;
}

/// Reads keys from one section and remembers which were used so unknown
/// keys can be reported.
class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool present() const { return tree_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  void text(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  template <class T>
  void number(const std::string& key, T& out) {
    if (auto v = raw(key)) out = parse<T>(key, *v);
  }

  template <class T>
  void number(const std::string& key, std::optional<T>& out) {
    if (auto v = raw(key)) {
      if (*v == "auto")
        out.reset();
      else
        out = parse<T>(key, *v);
    }
  }

  void flag(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else fail(key, "expected true or false, got '" + *v + "'");
    }
  }

  void list(const std::string& key, std::vector<std::string>& out) {
    if (auto v = raw(key)) out = split_list(*v);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ModelError(ErrorKind::config_error, name_ + "." + key, why);
  }

  void check_unknown() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_)
      if (!used_.count(key)) fail(key, "unknown key");
  }

 private:
  template <class T>
  T parse(const std::string& key, const std::string& v) const {
    std::istringstream in(v);
    T out{};
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.empty() && v[0] == '-') fail(key, "must be nonnegative, got '" + v + "'");
    }
    in >> out;
    if (!in || !(in >> std::ws).eof()) fail(key, "cannot parse '" + v + "'");
    return out;
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

/// [tree] section: `nests` lists nest ids; `nest.<id>` lists its
/// alternatives; `nest.<id>.covariates` and `alt.<id>.covariates` list
/// covariates; `outside` names the outside option.
inline ChoiceTree parse_tree(Section& s) {
  std::vector<std::string> nest_ids;
  s.list("nests", nest_ids);
  if (nest_ids.empty()) s.fail("nests", "custom tree needs at least one nest");
  std::string outside;
  s.text("outside", outside);
  std::vector<Nest> nests;
  for (const auto& nid : nest_ids) {
    Nest nest{nid, {}, {}};
    std::vector<std::string> members;
    s.list("nest." + nid, members);
    if (members.empty()) s.fail("nest." + nid, "nest has no alternatives");
    s.list("nest." + nid + ".covariates", nest.covariates);
    for (const auto& m : members) {
      Alternative alt{m, {}, m == outside};
      s.list("alt." + m + ".covariates", alt.covariates);
      nest.alternatives.push_back(alt);
    }
    nests.push_back(std::move(nest));
  }
  return ChoiceTree(std::move(nests));
}

inline std::string weighting_name(ClassWeighting w) { return w == ClassWeighting::membership ? "membership" : "indicator"; }

}  // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  pt::ptree root;
  try {
    std::istringstream body(text);
    pt::read_ini(body, root);
  } catch (const pt::ini_parser_error& e) {
    throw ModelError(ErrorKind::config_error, source + ":" + std::to_string(e.line()), e.message());
  }
  // read_ini drops sections without keys; a bare "[simulate]" still selects that source
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto first = line.find_first_not_of(" \t");
      const auto last = line.find_last_not_of(" \t\r");
      if (first == std::string::npos || line[first] != '[' || line[last] != ']') continue;
      const std::string name = line.substr(first + 1, last - first - 1);
      if (!root.get_child_optional(pt::ptree::path_type(name, '\0')))
        root.push_back({name, pt::ptree()});
    }
  }
  auto section = [&](const std::string& name) {
    auto child = root.get_child_optional(pt::ptree::path_type(name, '\0'));
    return detail::Section(child ? &*child : nullptr, name);
  };
  static const std::set<std::string> known{"run", "model", "tree", "anneal", "inference", "data", "simulate", "effects", "output"};
  for (const auto& [name, child] : root) {
    if (!child.data().empty()) throw ModelError(ErrorKind::config_error, name, "keys must sit inside a section");
    if (!known.count(name)) throw ModelError(ErrorKind::config_error, name, "unknown section");
  }

  RunConfig c;
  auto run = section("run");
  run.number("seed", c.seed);
  run.number("threads", c.threads);
  run.check_unknown();

  auto model = section("model");
  model.text("preset", c.preset);
  if (c.preset == "recovery") {
    const auto f = recovery_fixture();
    c.classes = f.model.classes;
    c.predictors = f.model.predictors;
    c.fix_nest_coefficients = true;
  } else if (c.preset != "none") {
    model.fail("preset", "expected none or recovery");
  }
  model.text("tree", c.tree_kind);
  model.number("classes", c.classes);
  model.list("predictors", c.predictors);
  model.text("sign_restrictions", c.sign_restrictions);
  if (c.sign_restrictions != "canonical" && c.sign_restrictions != "none")
    model.fail("sign_restrictions", "expected canonical or none");
  model.flag("reference_class", c.reference_class);
  std::string nest_coefficients = c.fix_nest_coefficients ? "fixed" : "free";
  model.text("nest_coefficients", nest_coefficients);
  if (nest_coefficients != "free" && nest_coefficients != "fixed") model.fail("nest_coefficients", "expected free or fixed");
  c.fix_nest_coefficients = nest_coefficients == "fixed";
  std::string dissimilarity = c.free_dissimilarity ? "free" : "fixed";
  model.text("dissimilarity", dissimilarity);
  if (dissimilarity != "free" && dissimilarity != "fixed") model.fail("dissimilarity", "expected fixed or free");
  c.free_dissimilarity = dissimilarity == "free";
  model.text("params", c.params);
  model.check_unknown();
  if (c.classes < 1) throw ModelError(ErrorKind::config_error, "model.classes", "class count must be >= 1");

  auto tree = section("tree");
  if (c.tree_kind == "custom") {
    if (!tree.present()) throw ModelError(ErrorKind::config_error, "model.tree", "custom tree needs a [tree] section");
    c.tree = detail::parse_tree(tree);
  } else if (c.tree_kind != "canonical") {
    throw ModelError(ErrorKind::config_error, "model.tree", "expected canonical or custom");
  } else if (tree.present()) {
    throw ModelError(ErrorKind::config_error, "tree", "[tree] given but model.tree = canonical");
  }
  tree.check_unknown();

  auto an = section("anneal");
  AnnealConfig& a = c.anneal;
  an.number("initial_temperature", a.initial_temperature);
  an.number("cooling", a.cooling);
  an.number("cycles", a.cycles);
  an.number("adjustments", a.adjustments);
  an.number("tolerance", a.tolerance);
  an.number("window", a.window);
  an.number("max_evaluations", a.max_evaluations);
  an.number("bound", a.bound);
  an.number("initial_step", a.initial_step);
  an.number("min_step_fraction", a.min_step_fraction);
  an.number("step_factor", a.step_factor);
  an.number("pilot_proposals", a.pilot_proposals);
  an.number("pilot_acceptance", a.pilot_acceptance);
  an.number("min_temperature", a.min_temperature);
  an.flag("polish", a.polish);
  an.number("polish_evaluations", a.polish_config.max_evaluations);
  an.check_unknown();
  a.validate();

  auto inf = section("inference");
  inf.flag("enabled", c.inference);
  std::string middle = "opg";
  inf.text("middle", middle);
  if (middle == "opg") c.inference_options.middle = MiddleTerm::opg;
  else if (middle == "literal_eq15") c.inference_options.middle = MiddleTerm::literal_eq15;
  else inf.fail("middle", "expected opg or literal_eq15");
  inf.number("ridge_floor", c.inference_options.ridge_floor);
  inf.number("ridge_cap", c.inference_options.ridge_cap);
  inf.number("gradient_step", c.inference_options.steps.gradient);
  inf.number("hessian_step", c.inference_options.steps.hessian);
  inf.check_unknown();
  if (!(c.inference_options.ridge_floor > 0.0) || c.inference_options.ridge_cap < c.inference_options.ridge_floor)
    throw ModelError(ErrorKind::config_error, "inference.ridge_cap", "need 0 < ridge_floor <= ridge_cap");

  auto data = section("data");
  if (data.present()) {
    DataConfig d;
    d.predictors = c.predictors;
    d.covariates = c.tree.covariates();
    data.text("path", d.path);
    std::string format = "survey";
    data.text("format", format);
    if (format == "survey") d.format = DataFormat::survey;
    else if (format == "coded") d.format = DataFormat::coded;
    else data.fail("format", "expected survey or coded");
    data.text("communities", d.communities);
    data.text("marriages", d.marriages);
    data.number("min_age", d.min_age);
    data.text("aksakal_answer", d.aksakal_answer);
    data.flag("standardize_income", d.standardize_income);
    data.text("kidnap_attempt_column", c.kidnap_attempt_column);
    if (d.path.empty()) data.fail("path", "data file path is required");
    c.data = d;
  }
  data.check_unknown();

  auto sim = section("simulate");
  if (sim.present()) {
    SimulationSpec s;
    s.seed = c.seed;
    sim.number("individuals", s.individuals);
    sim.number("communities", s.communities);
    sim.number("aksakal_communities", s.aksakal_communities);
    sim.number("police_share", s.police_share);
    sim.number("kalym_median", s.kalym_median);
    sim.number("kalym_sigma", s.kalym_sigma);
    sim.number("income_median", s.income_median);
    sim.number("income_sigma", s.income_sigma);
    sim.number("default_predictor_share", s.default_predictor_share);
    if (sim.raw("seed")) {
      sim.number("seed", s.seed);
      c.simulate_seed_set = true;
    }
    sim.text("truth", c.truth);
    c.simulate = s;
  }
  sim.check_unknown();
  if (c.data && c.simulate)
    throw ModelError(ErrorKind::config_error, "data", "give exactly one data source: [data] or [simulate], not both");
  if (!c.data && !c.simulate)
    throw ModelError(ErrorKind::config_error, "data", "no data source: add a [data] or [simulate] section");

  auto eff = section("effects");
  eff.list("variables", c.effect_variables);
  std::string weighting = detail::weighting_name(c.effect_weighting);
  eff.text("class_weighting", weighting);
  if (weighting == "membership") c.effect_weighting = ClassWeighting::membership;
  else if (weighting == "indicator") c.effect_weighting = ClassWeighting::indicator;
  else eff.fail("class_weighting", "expected membership or indicator");
  eff.flag("discrete_binary", c.discrete_binary);
  eff.check_unknown();

  auto out = section("output");
  out.text("dir", c.output_dir);
  out.check_unknown();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(ErrorKind::io_error, path, "cannot open config");
  RunConfig c = parse_config(in, path);
  // input files are relative to the config file; output.dir stays relative to the working directory
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto rebase = [&](std::string& file) {
    if (!file.empty() && std::filesystem::path(file).is_relative()) file = (base / file).lexically_normal().string();
  };
  if (c.data) {
    rebase(c.data->path);
    rebase(c.data->communities);
    rebase(c.data->marriages);
  }
  rebase(c.params);
  if (c.truth != "preset" && c.truth != "zero") rebase(c.truth);
  return c;
}

/// Resolved configuration in INI form; parse_config reads it back unchanged.
inline void print_config(std::ostream& os, const RunConfig& c) {
  auto num = [](double v) { return format_double(v); };
  os << "[run]\nseed = " << c.seed << "\nthreads = " << c.threads << "\n\n";
  os << "[model]\npreset = " << c.preset << "\ntree = " << c.tree_kind << "\nclasses = " << c.classes
     << "\npredictors = " << detail::join_list(c.predictors) << "\nsign_restrictions = " << c.sign_restrictions
     << "\nreference_class = " << (c.reference_class ? "true" : "false")
     << "\nnest_coefficients = " << (c.fix_nest_coefficients ? "fixed" : "free")
     << "\ndissimilarity = " << (c.free_dissimilarity ? "free" : "fixed") << "\nparams = " << c.params << "\n\n";
  if (c.tree_kind == "custom") {
    os << "[tree]\n";
    std::vector<std::string> ids;
    for (const auto& n : c.tree.nests()) ids.push_back(n.id);
    os << "nests = " << detail::join_list(ids) << "\n";
    if (auto o = c.tree.outside_option()) os << "outside = " << c.tree.alternative(*o).id << "\n";
    for (const auto& n : c.tree.nests()) {
      std::vector<std::string> members;
      for (const auto& a : n.alternatives) members.push_back(a.id);
      os << "nest." << n.id << " = " << detail::join_list(members) << "\n";
      if (!n.covariates.empty()) os << "nest." << n.id << ".covariates = " << detail::join_list(n.covariates) << "\n";
      for (const auto& a : n.alternatives)
        if (!a.covariates.empty()) os << "alt." << a.id << ".covariates = " << detail::join_list(a.covariates) << "\n";
    }
    os << "\n";
  }
  const AnnealConfig& a = c.anneal;
  os << "[anneal]\ninitial_temperature = " << (a.initial_temperature ? num(*a.initial_temperature) : "auto")
     << "\ncooling = " << num(a.cooling)
     << "\ncycles = " << (a.cycles ? std::to_string(*a.cycles) : "auto") << "\nadjustments = " << a.adjustments
     << "\ntolerance = " << num(a.tolerance) << "\nwindow = " << a.window << "\nmax_evaluations = " << a.max_evaluations
     << "\nbound = " << num(a.bound) << "\ninitial_step = " << num(a.initial_step)
     << "\nmin_step_fraction = " << num(a.min_step_fraction) << "\nstep_factor = " << num(a.step_factor)
     << "\npilot_proposals = " << a.pilot_proposals << "\npilot_acceptance = " << num(a.pilot_acceptance)
     << "\nmin_temperature = " << num(a.min_temperature) << "\npolish = " << (a.polish ? "true" : "false")
     << "\npolish_evaluations = " << a.polish_config.max_evaluations << "\n\n";
  const InferenceOptions& io = c.inference_options;
  os << "[inference]\nenabled = " << (c.inference ? "true" : "false")
     << "\nmiddle = " << (io.middle == MiddleTerm::opg ? "opg" : "literal_eq15") << "\nridge_floor = " << num(io.ridge_floor)
     << "\nridge_cap = " << num(io.ridge_cap) << "\ngradient_step = " << num(io.steps.gradient)
     << "\nhessian_step = " << num(io.steps.hessian) << "\n\n";
  if (c.data) {
    const DataConfig& d = *c.data;
    os << "[data]\npath = " << d.path << "\nformat = " << (d.format == DataFormat::survey ? "survey" : "coded")
       << "\ncommunities = " << d.communities << "\nmarriages = " << d.marriages << "\nmin_age = " << num(d.min_age)
       << "\naksakal_answer = " << d.aksakal_answer
       << "\nstandardize_income = " << (d.standardize_income ? "true" : "false")
       << "\nkidnap_attempt_column = " << c.kidnap_attempt_column << "\n\n";
  }
  if (c.simulate) {
    const SimulationSpec& s = *c.simulate;
    os << "[simulate]\nindividuals = " << s.individuals << "\ncommunities = " << s.communities
       << "\naksakal_communities = " << s.aksakal_communities << "\npolice_share = " << num(s.police_share)
       << "\nkalym_median = " << num(s.kalym_median) << "\nkalym_sigma = " << num(s.kalym_sigma)
       << "\nincome_median = " << num(s.income_median) << "\nincome_sigma = " << num(s.income_sigma)
       << "\ndefault_predictor_share = " << num(s.default_predictor_share) << "\nseed = " << s.seed
       << "\ntruth = " << c.truth << "\n\n";
  }
  os << "[effects]\nvariables = " << detail::join_list(c.effect_variables)
     << "\nclass_weighting = " << detail::weighting_name(c.effect_weighting)
     << "\ndiscrete_binary = " << (c.discrete_binary ? "true" : "false") << "\n\n";
  os << "[output]\ndir = " << c.output_dir << "\n";
}

}  // namespace lcnl
