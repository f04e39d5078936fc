#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mfgvar/bifurcation.hpp"
#include "mfgvar/dynamics.hpp"
#include "mfgvar/stationary.hpp"

namespace mfgvar {

struct ModelSpec {
  std::string kind = "separable";  // separable | congestion
  std::vector<double> poly{0.0, 1.0};
  double center = 0.0;
  std::vector<Coupling::TrigTerm> trig;
  std::vector<double> Q;  // congestion drift, padded with zeros to d
  double alpha = 0.5;
  double gamma = 2.0;
  double beta = 2.0;
  double m_min = 1e-10;

  Coupling coupling() const { return Coupling(poly, center, trig); }
  std::unique_ptr<HamiltonianModel> build(int d) const;
};

struct GridSpec {
  int d = 1;
  int n = 32;
  int n_t = 32;
  double T = 1.0;
};

struct SolverSpec {
  double tol = 1e-8;
  int max_iter = 20000;
  double damping = 0.5;
  double check_tol = 1e-6;  // threshold of the declared post-solve checks
  std::string formulation = "bb";  // bb | stream2d | potential
};

// initial density 1 + amplitude cos(2 pi k x_0) + random band-limited part,
// normalized to unit mass; terminal cost amplitude * sin(2 pi x_0)
struct DynamicSpec {
  double eps = 0.1;
  double m0_amplitude = 0.2;
  int m0_k = 1;
  double m0_random = 0.0;
  double uT_amplitude = 0.0;
  int instances = 1;  // compare: seeded instances
};

struct BifurcationSpec {
  double fprime1 = -6.0 * M_PI * M_PI;
  double cubic_coef = 1.0;
  double f1 = 0.0;
  std::vector<double> amplitudes{1e-3, 3e-3, 1e-2};
  int direction = 0;
  int d = 1;
  int n_x = 16;
  int n_t = 16;
  // spectrum scan, as multiples of the critical period
  double scan_min = 0.5;
  double scan_max = 1.5;
  int samples = 50;
  double window = 1.0;
};

struct ReportSpec {
  std::string state = "trivial";  // trivial | random
  double Hbar = 0.0;
  double fd_step = 1e-6;
};

struct ExperimentConfig {
  std::string task;
  ModelSpec model;
  GridSpec grid;
  SolverSpec solver;
  DynamicSpec dynamic;
  BifurcationSpec bifurcation;
  ReportSpec report;
  std::string output_dir;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& task_names();

// Throws ConfigError with the offending line or field path.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& c);

// MFGVAR_OUTPUT_DIR, falling back to ./mfgvar_out
std::string default_output_dir();

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 solver failure, 2 config error, 3 check failure
  std::string summary;  // JSON text, also written to summary.json
  std::vector<std::string> files;
  std::vector<std::string> failed_checks;
  std::string error;  // message of a config error or solver failure
};

RunResult run(const ExperimentConfig& c);

struct DualityReport {
  double residual = 0.0;
  double psi1 = 0.0;
  double cost_B = 0.0;
  double cost_A = 0.0;
  double B_plus_psi1 = 0.0;
  double A_minus_psi1 = 0.0;
  double conjugate_defect = 0.0;  // max |F*(f(m)) - (m f(m) - F(m))|
  bool passed = false;
};

DualityReport duality_crosscheck(const DynamicState& s, const SeparableHamiltonian& h, double residual,
                                 double tol = 1e-6, double residual_threshold = 1e-6);
DualityReport duality_crosscheck(const ExperimentConfig& c);

// Seeded data shared by the CLI tasks and the tests.
ScalarField initial_density(const TorusGrid& g, const DynamicSpec& d, std::uint64_t seed);
ScalarField terminal_cost(const TorusGrid& g, const DynamicSpec& d);
ScalarField random_band_limited(const TorusGrid& g, std::uint64_t seed, int kmax, double amplitude);

}  // namespace mfgvar
