#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mfgvar/experiment.hpp"

using namespace mfgvar;

namespace {

struct Flags {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  // bifurcate / spectrum
  std::optional<double> fprime1, cubic_coef;
  std::optional<int> dim, direction, samples;
  std::string amplitudes;
  std::optional<std::string> formulation;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--amplitudes: cannot read '" + item + "' as a number");
    }
  }
  return out;
}

int execute(const std::string& task, const Flags& f) {
  ExperimentConfig c;
  try {
    if (!f.config.empty()) c = load_config(f.config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  c.task = task;
  if (!f.output.empty()) c.output_dir = f.output;
  if (f.seed) c.seed = *f.seed;
  if (f.fprime1) c.bifurcation.fprime1 = *f.fprime1;
  if (f.cubic_coef) c.bifurcation.cubic_coef = *f.cubic_coef;
  if (f.dim) c.bifurcation.d = *f.dim;
  if (f.direction) c.bifurcation.direction = *f.direction;
  if (f.samples) c.bifurcation.samples = *f.samples;
  if (f.formulation) c.solver.formulation = *f.formulation;
  try {
    if (!f.amplitudes.empty()) c.bifurcation.amplitudes = parse_list(f.amplitudes);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  const RunResult r = run(c);
  std::cout << r.summary;
  if (r.exit_code == 2) std::cerr << "config error: " << r.error << "\n";
  if (r.exit_code == 1) std::cerr << "solver failure: " << r.error << "\n";
  for (const auto& name : r.failed_checks) std::cerr << "check failed: " << name << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfgvar: variational tools for mean-field game systems"};
  app.require_subcommand(1);
  Flags f;
  const std::pair<const char*, const char*> tasks[] = {
      {"report", "payoff functionals and derivative checks on a stationary state"},
      {"solve-stationary", "stationary congestion system (bb | stream2d | potential)"},
      {"solve-mfg", "time-dependent MFG system"},
      {"solve-mfc", "time-dependent mean-field control system"},
      {"compare", "equilibrium versus planner on seeded instances"},
      {"bifurcate", "continue a time-periodic branch from the critical period"},
      {"spectrum", "near-zero eigenvalues of the linearized periodic operator"},
      {"crosscheck", "optimal-control duality identities at a solved state"}};
  for (const auto& [name, help] : tasks) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", f.config, "JSON config file");
    sub->add_option("-o,--output", f.output, "output directory (default $MFGVAR_OUTPUT_DIR)");
    sub->add_option("--seed", f.seed, "RNG seed");
    const std::string n = name;
    if (n == "solve-stationary") sub->add_option("--formulation", f.formulation, "bb | stream2d | potential");
    if (n == "bifurcate" || n == "spectrum") {
      sub->add_option("--fprime1", f.fprime1, "f'(1), inside (-8 pi^2, -4 pi^2)");
      sub->add_option("--dim", f.dim, "spatial dimension");
    }
    if (n == "bifurcate") {
      sub->add_option("--cubic-coef", f.cubic_coef, "cubic coefficient of f about m = 1");
      sub->add_option("--amplitudes", f.amplitudes, "comma-separated increasing amplitudes");
      sub->add_option("--direction", f.direction, "kernel direction index in [0, 4d)");
    }
    if (n == "spectrum") sub->add_option("--samples", f.samples, "number of periods scanned");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  for (CLI::App* sub : app.get_subcommands()) return execute(sub->get_name(), f);
  return 2;
}
