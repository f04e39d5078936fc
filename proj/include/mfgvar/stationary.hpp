#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mfgvar/functionals.hpp"

namespace mfgvar {

struct StationaryOptions {
  double tol = 1e-8;  // max-norm of the projected gradient
  int max_iter = 20000;
  double armijo = 1e-4;
  // log-barrier -mu * int log m, divided by barrier_decrease until below
  // barrier_min, then a final pass without it. mu0 = 0 disables it.
  double barrier_mu0 = 0.0;
  double barrier_decrease = 0.1;
  double barrier_min = 1e-9;
  double curl_tol = 1e-6;
  double hbar_tol = 1e-6;  // allowed gap between multiplier and Psi2-hat
  std::optional<ScalarField> m_init;
  std::optional<VectorField> w_init;
};

// Both equations of the first-order stationary congestion system.
struct StationaryResidual {
  ScalarField hjb;  // |grad u + Q|^gamma / (gamma m^alpha) - f - Hbar
  ScalarField fp;   // -div(m^(1-alpha) |grad u + Q|^(gamma-2) (grad u + Q))
  double max_norm = 0.0;
};

StationaryResidual stationary_residual(const ScalarField& m, const ScalarField& u, double Hbar,
                                       const CongestionHamiltonian& h);

VectorField w_from_u(const ScalarField& m, const ScalarField& u, const CongestionHamiltonian& h);

struct PotentialRecovery {
  ScalarField u;
  double curl_defect = 0.0;  // max |target - grad u|
};
// Throws DomainError when the implied gradient is not integrable to curl_tol.
PotentialRecovery u_from_w(const ScalarField& m, const VectorField& w, const CongestionHamiltonian& h,
                           double curl_tol = 1e-6);

struct StationaryResult {
  std::string formulation;
  ScalarField m, u;
  std::optional<VectorField> w;
  std::optional<ScalarField> v;          // stream function (2-D)
  std::optional<std::array<double, 2>> R;
  double Hbar = 0.0;
  double Hbar_check = 0.0;  // Psi2-hat at the solution
  double objective = 0.0;   // Phi, or J for the potential problem
  double stationarity = 0.0;
  double curl_defect = 0.0;
  StationaryResidual residual;
  int iterations = 0;
  std::vector<double> history;  // objective at accepted iterates
};

// Convex flux program, 0 <= alpha < 1 < gamma.
StationaryResult solve_bb(const CongestionHamiltonian& h, const TorusGrid& grid, const StationaryOptions& opt = {});
// Same program with w = J(grad v + R), J the rotation by +pi/2; d = 2 only.
StationaryResult solve_bb_2d_stream(const CongestionHamiltonian& h, const TorusGrid& grid,
                                    const StationaryOptions& opt = {});
// Minimizes J = -Psi1-hat over (m, u) for 1 < alpha <= gamma.
StationaryResult solve_potential_a_gt_1(const CongestionHamiltonian& h, const TorusGrid& grid,
                                        const StationaryOptions& opt = {});

// Rotation conventions used by the stream formulation.
inline std::array<double, 2> rotate_plus(std::array<double, 2> a) { return {-a[1], a[0]}; }
inline std::array<double, 2> rotate_minus(std::array<double, 2> a) { return {a[1], -a[0]}; }

// Value of the stream functional  -R.Q'/(1-alpha) + int |grad v + R|^g'/((1-alpha) g' m^k) + F,
// with Q' = rotate_minus(Q).
double stream_functional(const ScalarField& m, const ScalarField& v, std::array<double, 2> R,
                         const CongestionHamiltonian& h);

}  // namespace mfgvar
