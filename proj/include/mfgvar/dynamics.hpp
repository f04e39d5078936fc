#pragma once

#include <string>
#include <vector>

#include "mfgvar/functionals.hpp"

namespace mfgvar {

// MFG: -u_t - eps lap u + H = 0 ; MFC replaces H by H + m dH/dm.
enum class DynamicSystem { MFG, MFC };

struct DynamicOptions {
  double tol = 1e-8;
  int max_newton = 60;
  double min_step = 1e-6;
  double armijo = 1e-4;
  int max_picard = 400;
  double picard_relax = 0.5;
  bool allow_picard = true;
};

// PDE residuals in the same slice layout as the functional derivatives:
// hjb has N+2 slices (hjb[0] = 0, midpoints, terminal u_N - u^T) and fp has
// N+1 node slices.
struct DynamicResidual {
  std::vector<ScalarField> hjb;
  std::vector<ScalarField> fp;
  double max_norm = 0.0;
};

struct DynamicSolveResult {
  DynamicState state;
  bool converged = false;
  double residual = 0.0;
  int newton_iterations = 0;
  int picard_iterations = 0;
  std::vector<double> history;
};

DynamicResidual dynamic_residual(const DynamicState& s, const HamiltonianModel& h, DynamicSystem sys);

DynamicSolveResult solve_dynamic(const HamiltonianModel& h, const SpaceTimeGrid& grid, double eps,
                                 const ScalarField& m0, const ScalarField& uT, DynamicSystem sys,
                                 const DynamicOptions& opt = {});

inline DynamicSolveResult solve_mfg(const HamiltonianModel& h, const SpaceTimeGrid& grid, double eps,
                                    const ScalarField& m0, const ScalarField& uT, const DynamicOptions& opt = {}) {
  return solve_dynamic(h, grid, eps, m0, uT, DynamicSystem::MFG, opt);
}
inline DynamicSolveResult solve_mfc(const HamiltonianModel& h, const SpaceTimeGrid& grid, double eps,
                                    const ScalarField& m0, const ScalarField& uT, const DynamicOptions& opt = {}) {
  return solve_dynamic(h, grid, eps, m0, uT, DynamicSystem::MFC, opt);
}

struct PlannerComparison {
  double psi2_mfg = 0.0;
  double psi2_mfc = 0.0;
  double social_mfg = 0.0;
  double social_mfc = 0.0;
  bool inequality_holds = false;
};

PlannerComparison compare_equilibrium_vs_planner(const DynamicState& mfg, const DynamicState& mfc,
                                                 const HamiltonianModel& h, double tol = 1e-8);

// Stationary payoff evaluated on each interval: (m_{j+1/2}, (u_j + u_{j+1})/2).
std::vector<double> hamiltonian_along(const DynamicState& s, const HamiltonianModel& h);

// max over slices of |integral of m - 1|
double mass_drift(const DynamicState& s);

}  // namespace mfgvar
