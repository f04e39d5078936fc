#include "mfgvar/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace mfgvar {

namespace {

struct Ops {
  TorusGrid g;
  int d = 0;
  std::size_t n = 0;
  std::vector<Eigen::MatrixXd> D;
  Eigen::MatrixXd L;
  std::vector<double> X;

  explicit Ops(const TorusGrid& grid) : g(grid), d(grid.dim()), n(grid.size()) {
    for (int a = 0; a < d; ++a) D.push_back(derivative_matrix(g, a));
    L = laplacian_matrix(g);
    X.resize(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < d; ++a) X[i * d + a] = g.coord(i, a);
  }
  cspan x(std::size_t i) const { return cspan(&X[i * d], d); }
};

// Pointwise Hamiltonian data on one interval, at (grad ubar, m).
struct IntervalData {
  std::vector<double> H, Hm, Hmm, Gp, Gpm, Hpp;
};

IntervalData eval_interval(const Ops& ops, const HamiltonianModel& h, const ScalarField& ubar, const ScalarField& m,
                           bool with_second) {
  const int d = ops.d;
  const std::size_t n = ops.n;
  const VectorField gu = gradient(ubar);
  IntervalData e;
  e.H.resize(n);
  e.Hm.resize(n);
  e.Gp.resize(n * d);
  if (with_second) {
    e.Hmm.resize(n);
    e.Gpm.resize(n * d);
    e.Hpp.resize(n * d * d);
  }
  std::vector<double> p(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) p[a] = gu[a][i];
    const cspan x = ops.x(i);
    e.H[i] = h.H(x, p, m[i]);
    e.Hm[i] = h.d_m(x, p, m[i]);
    h.grad_p(x, p, m[i], mspan(&e.Gp[i * d], d));
    if (with_second) {
      e.Hmm[i] = h.d_mm(x, p, m[i]);
      h.d_m_grad_p(x, p, m[i], mspan(&e.Gpm[i * d], d));
      h.hess_pp(x, p, m[i], mspan(&e.Hpp[i * d * d], d * d));
    }
  }
  return e;
}

double theta(int k, int N) { return (k == 0 || k == N) ? 1.0 : 0.5; }
double tau(int k, int N, double dt) { return (k == 0 || k == N) ? 2.0 / dt : 1.0 / dt; }

// -eps lap m - div(m grad_p H) on one interval
ScalarField interval_flux_term(const ScalarField& m, const IntervalData& e, double eps, int d) {
  const TorusGrid& g = m.grid;
  VectorField V(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int a = 0; a < d; ++a) V[a][i] = m[i] * e.Gp[i * d + a];
  ScalarField c = laplacian(m) * (-eps);
  c -= divergence(V);
  return c;
}

ScalarField hjb_midpoint(const DynamicState& s, int j, const IntervalData& e, DynamicSystem sys) {
  const double dt = s.grid.dt();
  const ScalarField ub = s.u_mid(j);
  const ScalarField lap = laplacian(ub);
  const ScalarField& m = s.m_mid(j);
  ScalarField r(s.space());
  for (std::size_t i = 0; i < r.size(); ++i) {
    double ham = e.H[i];
    if (sys == DynamicSystem::MFC) ham += m[i] * e.Hm[i];
    r[i] = -(s.u[j + 1][i] - s.u[j][i]) / dt - s.eps * lap[i] + ham;
  }
  return r;
}

DynamicResidual residual_impl(const DynamicState& s, const HamiltonianModel& h, DynamicSystem sys, const Ops& ops) {
  const int N = s.steps();
  const double dt = s.grid.dt();
  DynamicResidual R;
  R.hjb.assign(N + 2, ScalarField(s.space()));
  R.fp.assign(N + 1, ScalarField(s.space()));
  for (int j = 0; j < N; ++j) {
    const IntervalData e = eval_interval(ops, h, s.u_mid(j), s.m_mid(j), false);
    R.hjb[j + 1] = hjb_midpoint(s, j, e, sys);
    const ScalarField c = interval_flux_term(s.m_mid(j), e, s.eps, ops.d);
    for (int k : {j, j + 1}) {
      const double th = theta(k, N);
      for (std::size_t i = 0; i < ops.n; ++i) R.fp[k][i] += th * c[i];
    }
  }
  R.hjb[N + 1] = s.u[N] - s.uT;
  for (int k = 0; k <= N; ++k) {
    const ScalarField& after = s.m[k + 1];
    const ScalarField& before = k == 0 ? s.m0 : s.m[k];
    const double t = tau(k, N, dt);
    for (std::size_t i = 0; i < ops.n; ++i) R.fp[k][i] += t * (after[i] - before[i]);
  }
  double mx = 0.0;
  for (const auto& f : R.hjb) mx = std::max(mx, f.max_abs());
  for (const auto& f : R.fp) mx = std::max(mx, f.max_abs());
  R.max_norm = mx;
  return R;
}

// Unknown ordering: block k (0..N) = [m[k+1], u[k]]; equation block k =
// [hjb[k+1], fp[k]].
Eigen::VectorXd flatten(const DynamicResidual& R, std::size_t n) {
  const int N = static_cast<int>(R.fp.size()) - 1;
  Eigen::VectorXd v(2 * n * (N + 1));
  for (int k = 0; k <= N; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      v(2 * n * k + i) = R.hjb[k + 1][i];
      v(2 * n * k + n + i) = R.fp[k][i];
    }
  return v;
}

void apply_step(DynamicState& s, const Eigen::VectorXd& delta, double step, std::size_t n) {
  const int N = s.steps();
  for (int k = 0; k <= N; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      s.m[k + 1][i] += step * delta(2 * n * k + i);
      s.u[k][i] += step * delta(2 * n * k + n + i);
    }
}

bool positive(const DynamicState& s, double floor) {
  for (std::size_t k = 1; k < s.m.size(); ++k)
    if (!(s.m[k].min() >= floor)) return false;
  return true;
}

class Assembler {
 public:
  explicit Assembler(std::size_t size) : size_(size) {}
  void block(std::size_t r0, std::size_t c0, const Eigen::MatrixXd& B) {
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      for (Eigen::Index i = 0; i < B.rows(); ++i)
        if (B(i, j) != 0.0) trip_.emplace_back(r0 + i, c0 + j, B(i, j));
  }
  void diag(std::size_t r0, std::size_t c0, const std::vector<double>& v, double scale = 1.0) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] != 0.0) trip_.emplace_back(r0 + i, c0 + i, scale * v[i]);
  }
  Eigen::SparseMatrix<double> build() const {
    Eigen::SparseMatrix<double> A(size_, size_);
    A.setFromTriplets(trip_.begin(), trip_.end());
    return A;
  }

 private:
  std::size_t size_;
  std::vector<Eigen::Triplet<double>> trip_;
};

// derivative of the HJB integrand in p, per axis, as n x n left factors
Eigen::MatrixXd hjb_p_part(const Ops& ops, const IntervalData& e, const ScalarField& m, DynamicSystem sys) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ops.n, ops.n);
  for (int a = 0; a < ops.d; ++a) {
    Eigen::VectorXd w(ops.n);
    for (std::size_t i = 0; i < ops.n; ++i) {
      w(i) = e.Gp[i * ops.d + a];
      if (sys == DynamicSystem::MFC) w(i) += m[i] * e.Gpm[i * ops.d + a];
    }
    M += 0.5 * w.asDiagonal() * ops.D[a];
  }
  return M;
}

// d/dm of (-eps lap m - div(m grad_p H))
Eigen::MatrixXd flux_m_part(const Ops& ops, const IntervalData& e, const ScalarField& m, double eps) {
  Eigen::MatrixXd M = -eps * ops.L;
  for (int a = 0; a < ops.d; ++a) {
    Eigen::VectorXd w(ops.n);
    for (std::size_t i = 0; i < ops.n; ++i) w(i) = e.Gp[i * ops.d + a] + m[i] * e.Gpm[i * ops.d + a];
    M -= ops.D[a] * w.asDiagonal();
  }
  return M;
}

// d/d(u_j) of (-div(m grad_p H(grad ubar))) for one endpoint j of the interval
Eigen::MatrixXd flux_u_part(const Ops& ops, const IntervalData& e, const ScalarField& m) {
  const int d = ops.d;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ops.n, ops.n);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Eigen::VectorXd w(ops.n);
      for (std::size_t i = 0; i < ops.n; ++i) w(i) = m[i] * e.Hpp[i * d * d + a * d + b];
      M -= 0.5 * ops.D[a] * w.asDiagonal() * ops.D[b];
    }
  return M;
}

Eigen::SparseMatrix<double> jacobian(const DynamicState& s, const HamiltonianModel& h, DynamicSystem sys,
                                     const Ops& ops) {
  const int N = s.steps();
  const std::size_t n = ops.n;
  const double dt = s.grid.dt();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Assembler A(2 * n * (N + 1));
  auto mcol = [&](int k) { return 2 * n * k; };
  auto ucol = [&](int k) { return 2 * n * k + n; };
  auto hrow = [&](int k) { return 2 * n * k; };
  auto frow = [&](int k) { return 2 * n * k + n; };

  for (int j = 0; j < N; ++j) {
    const ScalarField& m = s.m_mid(j);
    const IntervalData e = eval_interval(ops, h, s.u_mid(j), m, true);
    const Eigen::MatrixXd P = hjb_p_part(ops, e, m, sys);
    A.block(hrow(j), ucol(j), I / dt - 0.5 * s.eps * ops.L + P);
    A.block(hrow(j), ucol(j + 1), -I / dt - 0.5 * s.eps * ops.L + P);
    std::vector<double> dm(n);
    for (std::size_t i = 0; i < n; ++i)
      dm[i] = sys == DynamicSystem::MFG ? e.Hm[i] : 2.0 * e.Hm[i] + m[i] * e.Hmm[i];
    A.diag(hrow(j), mcol(j), dm);

    const Eigen::MatrixXd Cm = flux_m_part(ops, e, m, s.eps);
    const Eigen::MatrixXd Cu = flux_u_part(ops, e, m);
    for (int k : {j, j + 1}) {
      const double th = theta(k, N);
      A.block(frow(k), mcol(j), th * Cm);
      A.block(frow(k), ucol(j), th * Cu);
      A.block(frow(k), ucol(j + 1), th * Cu);
    }
  }
  A.block(hrow(N), ucol(N), I);
  for (int k = 0; k <= N; ++k) {
    const double t = tau(k, N, dt);
    A.block(frow(k), mcol(k), t * I);
    if (k > 0) A.block(frow(k), mcol(k - 1), -t * I);
  }
  return A.build();
}

// Solve the HJB step on interval j for u_j with u_{j+1} and m frozen.
void hjb_backward_step(DynamicState& s, int j, const HamiltonianModel& h, DynamicSystem sys, const Ops& ops) {
  const std::size_t n = ops.n;
  const double dt = s.grid.dt();
  s.u[j] = s.u[j + 1];
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < 50; ++it) {
    const IntervalData e = eval_interval(ops, h, s.u_mid(j), s.m_mid(j), true);
    const ScalarField r = hjb_midpoint(s, j, e, sys);
    const double scale = 1.0 + s.u[j + 1].max_abs() / dt;
    if (r.max_abs() <= 1e-14 * scale) break;
    const Eigen::MatrixXd J = I / dt - 0.5 * s.eps * ops.L + hjb_p_part(ops, e, s.m_mid(j), sys);
    const Eigen::VectorXd delta = J.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(r.values.data(), n));
    for (std::size_t i = 0; i < n; ++i) s.u[j][i] -= delta(i);
    if (delta.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + s.u[j].max_abs())) break;
  }
}

void hjb_backward_sweep(DynamicState& s, const HamiltonianModel& h, DynamicSystem sys, const Ops& ops) {
  const int N = s.steps();
  s.u[N] = s.uT;
  for (int j = N - 1; j >= 0; --j) hjb_backward_step(s, j, h, sys, ops);
}

// Forward FP sweep with u frozen; returns the new density slices.
std::vector<ScalarField> fp_forward_sweep(const DynamicState& s, const HamiltonianModel& h, const Ops& ops) {
  const int N = s.steps();
  const std::size_t n = ops.n;
  const double dt = s.grid.dt();
  std::vector<ScalarField> m = s.m;
  m[0] = s.m0;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  ScalarField prev_term(s.space());  // contribution of interval k-1 at node k
  for (int k = 0; k < N; ++k) {
    const double th = theta(k, N), t = tau(k, N, dt);
    const ScalarField before = k == 0 ? s.m0 : m[k];
    const ScalarField ub = s.u_mid(k);
    ScalarField mk = before;
    for (int it = 0; it < 50; ++it) {
      const IntervalData e = eval_interval(ops, h, ub, mk, true);
      const ScalarField c = interval_flux_term(mk, e, s.eps, ops.d);
      ScalarField r(s.space());
      for (std::size_t i = 0; i < n; ++i) r[i] = t * (mk[i] - before[i]) + th * c[i] + (k > 0 ? 0.5 * prev_term[i] : 0.0);
      if (r.max_abs() <= 1e-14 * (1.0 + t)) break;
      const Eigen::MatrixXd J = t * I + th * flux_m_part(ops, e, mk, s.eps);
      const Eigen::VectorXd delta = J.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(r.values.data(), n));
      for (std::size_t i = 0; i < n; ++i) mk[i] -= delta(i);
      if (!(mk.min() >= h.m_min())) throw DomainError("density lost positivity in the forward sweep");
      if (delta.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + mk.max_abs())) break;
    }
    m[k + 1] = mk;
    const IntervalData e = eval_interval(ops, h, ub, mk, false);
    prev_term = interval_flux_term(mk, e, s.eps, ops.d);
  }
  // terminal node: explicit half step from the last midpoint
  const double t = tau(N, N, dt);
  m[N + 1] = m[N] - prev_term * (theta(N, N) / t);
  return m;
}

}  // namespace

DynamicResidual dynamic_residual(const DynamicState& s, const HamiltonianModel& h, DynamicSystem sys) {
  Ops ops(s.space());
  return residual_impl(s, h, sys, ops);
}

DynamicSolveResult solve_dynamic(const HamiltonianModel& h, const SpaceTimeGrid& grid, double eps,
                                 const ScalarField& m0, const ScalarField& uT, DynamicSystem sys,
                                 const DynamicOptions& opt) {
  if (grid.periodic) throw DomainError("dynamic solver needs a finite horizon");
  if (!(eps >= 0.0)) throw DomainError("diffusion must be nonnegative");
  if (!(m0.min() > 0.0)) throw DomainError("initial density must be positive");
  if (std::abs(integrate(m0) - 1.0) > 1e-10) throw DomainError("initial density must have unit mass");
  const Ops ops(grid.space);
  const std::size_t n = ops.n;
  const int N = grid.time_points;

  DynamicState s = make_dynamic_state(grid, eps, m0, uT);
  for (int j = 0; j < N; ++j) s.m[j + 1] = heat_flow(m0, eps * (j + 0.5) * grid.dt());
  s.m[N + 1] = heat_flow(m0, eps * grid.horizon);
  hjb_backward_sweep(s, h, sys, ops);

  DynamicSolveResult out;
  DynamicResidual R = residual_impl(s, h, sys, ops);
  out.history.push_back(R.max_norm);

  auto picard = [&](double target) {
    for (int it = 0; it < opt.max_picard && R.max_norm > target; ++it) {
      std::vector<ScalarField> mnew = fp_forward_sweep(s, h, ops);
      for (int k = 1; k <= N + 1; ++k) s.m[k] = s.m[k] * (1.0 - opt.picard_relax) + mnew[k] * opt.picard_relax;
      hjb_backward_sweep(s, h, sys, ops);
      R = residual_impl(s, h, sys, ops);
      out.history.push_back(R.max_norm);
      ++out.picard_iterations;
    }
  };

  bool tried_picard = false;
  while (R.max_norm > opt.tol && out.newton_iterations < opt.max_newton) {
    const Eigen::SparseMatrix<double> J = jacobian(s, h, sys, ops);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolverFailure("Newton: singular Jacobian");
    const Eigen::VectorXd F = flatten(R, n);
    const Eigen::VectorXd delta = -lu.solve(F);
    const double f0 = F.squaredNorm();
    double step = 1.0;
    bool accepted = false;
    while (step >= opt.min_step) {
      DynamicState trial = s;
      apply_step(trial, delta, step, n);
      if (positive(trial, h.m_min())) {
        DynamicResidual Rt = residual_impl(trial, h, sys, ops);
        const double ft = flatten(Rt, n).squaredNorm();
        if (ft <= (1.0 - 2.0 * opt.armijo * step) * f0) {
          s = std::move(trial);
          R = std::move(Rt);
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    ++out.newton_iterations;
    out.history.push_back(R.max_norm);
    if (!accepted) {
      if (!opt.allow_picard || tried_picard) break;
      tried_picard = true;
      try {
        picard(std::max(opt.tol, 1e-3 * R.max_norm));
      } catch (const DomainError& e) {
        throw SolverFailure(std::string("Picard fallback failed: ") + e.what());
      }
    }
  }
  out.residual = R.max_norm;
  out.converged = R.max_norm <= opt.tol;
  out.state = std::move(s);
  if (!out.converged)
    throw SolverFailure("dynamic solver did not converge: residual " + std::to_string(out.residual) + " after " +
                        std::to_string(out.newton_iterations) + " Newton steps");
  return out;
}

PlannerComparison compare_equilibrium_vs_planner(const DynamicState& mfg, const DynamicState& mfc,
                                                 const HamiltonianModel& h, double tol) {
  if (mfg.space() != mfc.space() || mfg.grid.time_points != mfc.grid.time_points ||
      mfg.grid.horizon != mfc.grid.horizon)
    throw DomainError("equilibrium and planner states use different grids");
  if (std::abs(mfg.eps - mfc.eps) > 0.0 || (mfg.m0 - mfc.m0).max_abs() > 0.0 || (mfg.uT - mfc.uT).max_abs() > 0.0)
    throw DomainError("equilibrium and planner states use different data");
  PlannerComparison c;
  c.psi2_mfg = psi2(mfg, h).value;
  c.psi2_mfc = psi2(mfc, h).value;
  c.social_mfg = social_cost(mfg, optimal_control(mfg, h), h);
  c.social_mfc = social_cost(mfc, optimal_control(mfc, h), h);
  c.inequality_holds = c.psi2_mfg <= c.psi2_mfc + tol;
  return c;
}

std::vector<double> hamiltonian_along(const DynamicState& s, const HamiltonianModel& h) {
  std::vector<double> out;
  for (int j = 0; j < s.steps(); ++j) {
    StationaryState st{s.space(), s.eps, s.m_mid(j), s.u_mid(j), 0.0};
    out.push_back(psi1_hat(st, h).value);
  }
  return out;
}

double mass_drift(const DynamicState& s) {
  double mx = 0.0;
  for (const auto& m : s.m) mx = std::max(mx, std::abs(integrate(m) - 1.0));
  return mx;
}

}  // namespace mfgvar
