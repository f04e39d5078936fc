#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgvar/coupling.hpp"
#include "mfgvar/spectral.hpp"

namespace mfgvar {

// Fields live on T^{d+1}; the last axis is rescaled time t in [0,1).
// Hbar is the multiplier as it enters G (+Hbar in the HJB row); the ergodic
// constant of the original system is -Hbar, see map_to_original.
struct PeriodicState {
  TorusGrid grid;
  ScalarField U, M;
  double Hbar = 0.0;
  double T = 1.0;
  int dim() const { return grid.dim() - 1; }
};

PeriodicState trivial_periodic_state(int d, int n_x, int n_t, double T);

struct PeriodicResidual {
  ScalarField G1, G2;  // FP row, HJB row
  double G3 = 0.0;     // integral of M
  double max_norm = 0.0;
};

PeriodicResidual eval_G(const PeriodicState& s, const Coupling& f);

struct PotentialValue {
  double value = 0.0;
  ScalarField dU, dM;  // derivative of g, from its own formula
  double dHbar = 0.0;
};
PotentialValue eval_g(const PeriodicState& s, const Coupling& f);

// <G(s), (v, mu, l)> in the pairing v <-> G1, mu <-> G2, l <-> G3.
double pair_G(const PeriodicResidual& G, const ScalarField& v, const ScalarField& mu, double l);

// ---- linear theory ----

constexpr double kLambda1 = 4.0 * M_PI * M_PI;

double critical_period(double fprime1);
// sigma(T): the root of h(T, .) closest to zero
double sigma_branch(double T, double fprime1);
double sigma_slope_at_critical(double fprime1);
double h_function(double T, double sigma, double fprime1);
int crossing_number(double fprime1, int d);

// Temporal ODE of one spatial Fourier mode, T-scaled:
//   mu' + T lam mu + T lam v,   -v' + T lam v - T f'(1) mu.
struct ModeBlock {
  std::vector<int> k;
  double lambda = 0.0;
  double T = 1.0;
  double fprime1 = 0.0;
  // d/dt (mu, v) = ode_matrix * (mu, v) on the kernel
  Eigen::Matrix2d ode_matrix() const;
  // rows (G1, G2) of T*A for the temporal frequency 2 pi j
  std::pair<std::complex<double>, std::complex<double>> apply(int j, std::complex<double> mu,
                                                              std::complex<double> v) const;
};

// Orthonormal real trigonometric basis (mean inner product over the grid)
// with every Nyquist index removed. Column `constant` is the constant function.
struct FieldBasis {
  TorusGrid grid;
  Eigen::MatrixXd B;
  int constant = 0;
  int size() const { return static_cast<int>(B.cols()); }
  Eigen::VectorXd coefficients(const ScalarField& f) const;
  ScalarField field(const Eigen::VectorXd& c) const;
};
FieldBasis nyquist_free_basis(const TorusGrid& g);
// Fields even in x_axis and constant in the other spatial axes.
FieldBasis even_axis_basis(const TorusGrid& g, int axis);

// T * A(T) in coefficient space, unknowns (v without its mean, mu, l*lambda1)
// and rows (G1 without its mean, G2, lambda1 * G3). Symmetric.
struct LinearizedOperator {
  FieldBasis basis;
  double T = 0.0;
  double fprime1 = 0.0;
  Eigen::MatrixXd A;
  int n_v() const { return basis.size() - 1; }
  int n_mu() const { return basis.size(); }
};
LinearizedOperator assemble_A(double T, double fprime1, int d, int n_x, int n_t);

// T*A(T) applied mode by mode through ModeBlocks, on nodal fields.
struct LinearImage {
  ScalarField r1, r2;
  double r3 = 0.0;
};
LinearImage apply_A_modes(double T, double fprime1, const ScalarField& v, const ScalarField& mu, double l);
// Same operator from nodal spectral derivatives.
LinearImage apply_A_nodal(double T, double fprime1, const ScalarField& v, const ScalarField& mu, double l);

struct KernelInfo {
  int dimension = 0;
  Eigen::VectorXd singular_values;  // ascending
  Eigen::MatrixXd basis;            // coefficient vectors of the kernel
  int adjoint_dimension = 0;
  double zero_tol = 1e-8;
};
KernelInfo kernel_at(const LinearizedOperator& op, double zero_tol = 1e-8);

// Eigenvalues of T*A(T) with |sigma| < window, ascending.
std::vector<double> near_zero_eigenvalues(const LinearizedOperator& op, double window = 1.0);

// Closed-form kernel vectors for axis i: (v, mu) nodal fields, unnormalized.
// xs/ts pick cos (0) or sin (1) in space and time.
std::pair<ScalarField, ScalarField> kernel_vector(const TorusGrid& g, double fprime1, int axis, int xs, int ts,
                                                 int overtone = 1);
// Fraction of the kernel basis energy inside the span of the closed-form kernel vectors.
double kernel_energy_in_trig_span(const LinearizedOperator& op, const KernelInfo& k, int overtone = 1);

// ---- continuation ----

struct ContinuationOptions {
  int n_x = 16;
  int n_t = 16;
  int direction = 0;  // 0 .. 4d-1: axis = dir/4, x-sin = (dir/2)%2, t-sin = dir%2
  double tol = 1e-11;  // max-norm of G at an accepted point
  int max_newton = 40;
};

struct BranchPoint {
  PeriodicState state;
  double amplitude = 0.0;
  double residual = 0.0;
  double phase_multiplier = 0.0;
  double nonstationarity = 0.0;  // |M_t| / |M| in L2
  int newton_iterations = 0;
};

struct BifurcationBranch {
  double fprime1 = 0.0;
  double Tbar = 0.0;
  int d = 1;
  std::vector<BranchPoint> points;
  bool truncated = false;
  std::string message;
};

BifurcationBranch continue_branch(const Coupling& f, int d, const std::vector<double>& amplitudes,
                                  const ContinuationOptions& opt = {});

double nonstationarity(const ScalarField& M);

// ---- original variables ----

struct OriginalPeriodic {
  TorusGrid grid;  // same layout, last axis now s / T
  double T = 1.0;
  double Hbar = 0.0;  // ergodic constant of the original HJB
  double f1 = 0.0;
  ScalarField m, u;   // u(x,s) = U(x,s/T) - s f(1), quasi-periodic
  std::vector<double> times() const;
};

OriginalPeriodic map_to_original(const PeriodicState& s, const Coupling& f);

struct OriginalResidual {
  ScalarField hjb, fp;
  double max_slice_mass_defect = 0.0;
  double max_norm = 0.0;
};
// -u_s - lap u + |grad u|^2/2 - f(m) - Hbar and m_s - lap m - div(m grad u).
OriginalResidual periodic_residual(const OriginalPeriodic& o, const Coupling& f);

}  // namespace mfgvar
