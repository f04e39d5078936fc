#pragma once

#include <optional>
#include <vector>

#include "mfgvar/hamiltonian.hpp"
#include "mfgvar/spectral.hpp"

namespace mfgvar {

// Time-dependent state on [0,T]. The density is staggered in time:
//   m[0]        = m(.,0), a data row (should equal m0)
//   m[1..N]     = m at interval midpoints t_{j+1/2}
//   m[N+1]      = m(.,T)
// and u lives on the nodes t_j, j = 0..N.
struct DynamicState {
  SpaceTimeGrid grid;
  double eps = 1.0;
  ScalarField m0, uT;
  std::vector<ScalarField> m;
  std::vector<ScalarField> u;

  int steps() const { return grid.time_points; }
  const TorusGrid& space() const { return grid.space; }
  // m and the averaged u on interval j (j = 0..N-1)
  const ScalarField& m_mid(int j) const { return m[j + 1]; }
  ScalarField u_mid(int j) const;
  const ScalarField& m_final() const { return m.back(); }
};

DynamicState make_dynamic_state(const SpaceTimeGrid& grid, double eps, const ScalarField& m0, const ScalarField& uT);

struct StationaryState {
  TorusGrid grid;
  double eps = 0.0;
  ScalarField m, u;
  double Hbar = 0.0;
};

// Value and Riesz representatives of the variational derivatives. For dynamic
// functionals dm has N+2 slices (dm[0] is identically 0: m(.,0) only enters
// through data) and du has N+1 node slices; stationary ones use one slice.
struct FunctionalReport {
  double value = 0.0;
  double value_alt = 0.0;  // second displayed form (integration by parts)
  double value_raw = 0.0;  // same functional with F not shifted to F(x,1) = 0
  std::vector<ScalarField> dm;
  std::vector<ScalarField> du;
  std::optional<VectorField> dw;
  std::optional<double> dHbar;
};

// Discrete pairings matching the quadrature of the functionals, so that
// d/ds Psi(z + s dz) = pair(report, dz) exactly.
double pair_m(const SpaceTimeGrid& g, const std::vector<ScalarField>& a, const std::vector<ScalarField>& b);
double pair_u(const SpaceTimeGrid& g, const std::vector<ScalarField>& a, const std::vector<ScalarField>& b);

FunctionalReport psi1(const DynamicState& s, const HamiltonianModel& h);
FunctionalReport psi2(const DynamicState& s, const HamiltonianModel& h);

FunctionalReport psi1_hat(const StationaryState& s, const HamiltonianModel& h);
FunctionalReport psi2_hat(const StationaryState& s, const HamiltonianModel& h);
FunctionalReport psi_tilde1(const StationaryState& s, const HamiltonianModel& h);
FunctionalReport psi_tilde2(const StationaryState& s, const HamiltonianModel& h);

// r_{m,u} = -grad_p H(x, grad u, m) on each interval midpoint
std::vector<VectorField> optimal_control(const DynamicState& s, const HamiltonianModel& h);
double social_cost(const DynamicState& s, const std::vector<VectorField>& r, const HamiltonianModel& h);

// Optimal-control costs of the separable problem, evaluated on the state.
double cost_B(const DynamicState& s, const std::vector<VectorField>& r, const SeparableHamiltonian& h);
// s_ctrl on midpoints; the u-part uses the state's u(.,0)
double cost_A(const DynamicState& s, const std::vector<ScalarField>& s_ctrl, const SeparableHamiltonian& h);

// Convex flux functional for 0 <= alpha < 1 and its potential counterpart.
FunctionalReport phi_bb(const ScalarField& m, const VectorField& w, const CongestionHamiltonian& h);
double j_functional(const StationaryState& s, const CongestionHamiltonian& h);

// Evaluate a scalar field of x through a node-wise callback.
template <class Fn>
ScalarField map_nodes(const TorusGrid& g, Fn&& fn) {
  ScalarField out(g);
  std::vector<double> x(g.dim());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.point(i, x);
    out[i] = fn(i, std::span<const double>(x));
  }
  return out;
}

}  // namespace mfgvar
