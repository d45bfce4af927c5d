// lcnl: estimate | effects | simulate | tabulate | validate <config>

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "lcnl/config.hpp"
#include "lcnl/pipeline.hpp"

namespace {

int dispatch(const std::string& command, lcnl::RunConfig& cfg) {
  if (command == "estimate") {
    const auto out = lcnl::run_estimate(cfg, std::cerr);
    if (out.exit_code == lcnl::exit_not_converged)
      std::cerr << "annealing stopped without converging (" << lcnl::to_string(out.fit.status) << ")\n";
    return out.exit_code;
  }
  if (command == "effects") {
    lcnl::run_effects(cfg, std::cerr);
    return lcnl::exit_ok;
  }
  if (command == "simulate") {
    lcnl::run_simulate(cfg, std::cerr);
    return lcnl::exit_ok;
  }
  if (command == "tabulate") {
    const auto t = lcnl::run_tabulate(cfg, std::cerr);
    for (std::size_t k = 0; k < t.questions.size(); ++k)
      std::cout << t.questions[k] << '\t' << lcnl::format_double(t.percent[k]) << '\n';
    return lcnl::exit_ok;
  }
  return lcnl::run_validate(cfg, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-class nested logit estimation"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  bool print = false;
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--threads", threads, "Worker threads (default: all cores)");
  app.add_option("--out", out, "Output directory");
  app.add_flag("--print-config", print, "Print the resolved configuration and exit");

  std::string config_path;
  const char* commands[][2] = {{"estimate", "Fit the model by simulated annealing"},
                               {"effects", "Averaged marginal effects, overall and per class"},
                               {"simulate", "Write a synthetic dataset and its generating parameters"},
                               {"tabulate", "Advantage-item proportions for the kidnapper subset"},
                               {"validate", "Run the invariant checks"}};
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("config", config_path, "INI configuration file")->required();
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lcnl::exit_config;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  lcnl::RunConfig cfg;
  try {
    cfg = lcnl::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      if (cfg.simulate && !cfg.simulate_seed_set) cfg.simulate->seed = *seed;
    }
    if (threads) cfg.threads = *threads;
    if (out) cfg.output_dir = *out;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lcnl::exit_config;
  }
  if (print) {
    lcnl::print_config(std::cout, cfg);
    return lcnl::exit_ok;
  }

  try {
    return dispatch(command, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lcnl::exit_config;
  }
}
