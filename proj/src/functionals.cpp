#include "mfgvar/functionals.hpp"

#include <cmath>

namespace mfgvar {

namespace {

std::vector<double> node_coords(const TorusGrid& g) {
  const int d = g.dim();
  std::vector<double> X(g.size() * d);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int a = 0; a < d; ++a) X[i * d + a] = g.coord(i, a);
  return X;
}

enum class Density { F_H, mH };

// Pointwise integrand Phi(x, grad u, m) of a payoff functional together with
// its m-derivative and its p-gradient (the flux).
struct IntervalTerms {
  double integral = 0.0;
  ScalarField dm;
  VectorField flux;
};

IntervalTerms interval_terms(Density kind, const ScalarField& u, const ScalarField& m, const HamiltonianModel& h,
                             const std::vector<double>& X) {
  const TorusGrid& g = u.grid;
  const int d = g.dim();
  if (h.dim() != d) throw DomainError("Hamiltonian dimension does not match grid dimension");
  const VectorField gu = gradient(u);
  IntervalTerms t{0.0, ScalarField(g), VectorField(g)};
  std::vector<double> p(d), gp(d);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cspan x(&X[i * d], d);
    for (int a = 0; a < d; ++a) p[a] = gu[a][i];
    const double mi = m[i];
    if (kind == Density::F_H) {
      acc += h.F_H(x, p, mi);
      t.dm[i] = h.H(x, p, mi);
      h.grad_p_F_H(x, p, mi, gp);
    } else {
      const double Hv = h.H(x, p, mi);
      acc += mi * Hv;
      t.dm[i] = Hv + mi * h.d_m(x, p, mi);
      h.grad_p(x, p, mi, gp);
      for (int a = 0; a < d; ++a) gp[a] *= mi;
    }
    for (int a = 0; a < d; ++a) t.flux[a][i] = gp[a];
  }
  t.integral = acc * g.cell_volume();
  return t;
}

double raw_shift(const TorusGrid& g, const HamiltonianModel& h, const std::vector<double>& X) {
  double s = 0.0;
  const int d = g.dim();
  for (std::size_t i = 0; i < g.size(); ++i) s += h.coupling().F_raw(cspan(&X[i * d], d), 1.0);
  return s * g.cell_volume();
}

void check_dynamic(const DynamicState& s) {
  const int N = s.steps();
  if (s.grid.periodic) throw DomainError("dynamic functionals need a finite horizon");
  if (static_cast<int>(s.m.size()) != N + 2 || static_cast<int>(s.u.size()) != N + 1)
    throw DomainError("dynamic state slice counts do not match the time grid");
  for (const auto& f : s.m)
    if (f.grid != s.space()) throw DomainError("density slice on a foreign grid");
  for (const auto& f : s.u)
    if (f.grid != s.space()) throw DomainError("value slice on a foreign grid");
  for (const auto& f : s.m)
    if (!(f.min() > 0.0)) throw DomainError("density must be strictly positive");
}

FunctionalReport dynamic_functional(const DynamicState& s, const HamiltonianModel& h, Density kind) {
  check_dynamic(s);
  const TorusGrid& g = s.space();
  const int N = s.steps();
  const double dt = s.grid.dt();
  const auto X = node_coords(g);

  FunctionalReport r;
  r.dm.assign(N + 2, ScalarField(g));
  r.du.assign(N + 1, ScalarField(g));
  double value = 0.0, alt = 0.0;

  for (int j = 0; j < N; ++j) {
    const ScalarField& mj = s.m_mid(j);
    const ScalarField ub = s.u_mid(j);
    const ScalarField du = s.u[j + 1] - s.u[j];
    const ScalarField lap_u = laplacian(ub);
    const ScalarField lap_m = laplacian(mj);
    IntervalTerms t = interval_terms(kind, ub, mj, h, X);

    value += -inner(mj, du) + dt * (-s.eps * inner(mj, lap_u) + t.integral);
    alt += dt * (-s.eps * inner(ub, lap_m) + t.integral);

    ScalarField& dm = r.dm[j + 1];
    for (std::size_t i = 0; i < g.size(); ++i) dm[i] = -du[i] / dt - s.eps * lap_u[i] + t.dm[i];

    const ScalarField div_flux = divergence(t.flux);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double half = 0.5 * dt * (-s.eps * lap_m[i] - div_flux[i]);
      r.du[j][i] += mj[i] + half;
      r.du[j + 1][i] += -mj[i] + half;
    }
  }
  const ScalarField& mN = s.m_final();
  value += inner(mN, s.u[N]) - inner(s.m0, s.u[0]) - inner(mN, s.uT);
  r.dm[N + 1] = s.u[N] - s.uT;

  // second form: sum_j <u_j, discrete m_t> + boundary pairing with m(.,0)
  alt += inner(s.u[0], s.m[1] - s.m[0]);
  for (int j = 1; j < N; ++j) alt += inner(s.u[j], s.m[j + 1] - s.m[j]);
  alt += inner(s.u[N], mN - s.m[N]);
  alt += inner(s.m[0], s.u[0]) - inner(s.m0, s.u[0]) - inner(mN, s.uT);

  for (std::size_t i = 0; i < g.size(); ++i) {
    r.du[0][i] -= s.m0[i];
    r.du[N][i] += mN[i];
  }
  r.du[0] *= 2.0 / dt;
  for (int j = 1; j < N; ++j) r.du[j] *= 1.0 / dt;
  r.du[N] *= 2.0 / dt;

  r.value = value;
  r.value_alt = alt;
  r.value_raw = kind == Density::F_H ? value - s.grid.horizon * raw_shift(g, h, X) : value;
  return r;
}

FunctionalReport stationary_functional(const StationaryState& s, const HamiltonianModel& h, Density kind) {
  if (s.m.grid != s.grid || s.u.grid != s.grid) throw DomainError("stationary state fields on a foreign grid");
  if (!(s.m.min() > 0.0)) throw DomainError("density must be strictly positive");
  const auto X = node_coords(s.grid);
  const ScalarField lap_u = laplacian(s.u), lap_m = laplacian(s.m);
  IntervalTerms t = interval_terms(kind, s.u, s.m, h, X);
  FunctionalReport r;
  r.value = -s.eps * inner(s.m, lap_u) + t.integral;
  r.value_alt = -s.eps * inner(s.u, lap_m) + t.integral;
  r.value_raw = kind == Density::F_H ? r.value - raw_shift(s.grid, h, X) : r.value;
  r.dm = {t.dm - s.eps * lap_u};
  r.du = {-s.eps * lap_m - divergence(t.flux)};
  return r;
}

FunctionalReport add_multiplier(FunctionalReport r, const StationaryState& s) {
  const double mass_defect = 1.0 - integrate(s.m);
  r.value += s.Hbar * mass_defect;
  r.value_alt += s.Hbar * mass_defect;
  r.value_raw += s.Hbar * mass_defect;
  for (double& v : r.dm[0].values) v -= s.Hbar;
  r.dHbar = mass_defect;
  return r;
}

}  // namespace

ScalarField DynamicState::u_mid(int j) const { return (u[j] + u[j + 1]) * 0.5; }

DynamicState make_dynamic_state(const SpaceTimeGrid& grid, double eps, const ScalarField& m0, const ScalarField& uT) {
  if (m0.grid != grid.space || uT.grid != grid.space) throw DomainError("data fields not on the spatial grid");
  DynamicState s;
  s.grid = grid;
  s.eps = eps;
  s.m0 = m0;
  s.uT = uT;
  s.m.assign(grid.time_points + 2, m0);
  s.u.assign(grid.time_points + 1, uT);
  return s;
}

double pair_m(const SpaceTimeGrid& g, const std::vector<ScalarField>& a, const std::vector<ScalarField>& b) {
  const int N = g.time_points;
  if (static_cast<int>(a.size()) != N + 2 || static_cast<int>(b.size()) != N + 2)
    throw DomainError("pair_m: slice count mismatch");
  double s = 0.0;
  for (int j = 1; j <= N; ++j) s += g.dt() * inner(a[j], b[j]);
  return s + inner(a[N + 1], b[N + 1]);
}

double pair_u(const SpaceTimeGrid& g, const std::vector<ScalarField>& a, const std::vector<ScalarField>& b) {
  const int N = g.time_points;
  if (static_cast<int>(a.size()) != N + 1 || static_cast<int>(b.size()) != N + 1)
    throw DomainError("pair_u: slice count mismatch");
  double s = 0.5 * (inner(a[0], b[0]) + inner(a[N], b[N]));
  for (int j = 1; j < N; ++j) s += inner(a[j], b[j]);
  return s * g.dt();
}

FunctionalReport psi1(const DynamicState& s, const HamiltonianModel& h) {
  return dynamic_functional(s, h, Density::F_H);
}
FunctionalReport psi2(const DynamicState& s, const HamiltonianModel& h) {
  return dynamic_functional(s, h, Density::mH);
}
FunctionalReport psi1_hat(const StationaryState& s, const HamiltonianModel& h) {
  return stationary_functional(s, h, Density::F_H);
}
FunctionalReport psi2_hat(const StationaryState& s, const HamiltonianModel& h) {
  return stationary_functional(s, h, Density::mH);
}
FunctionalReport psi_tilde1(const StationaryState& s, const HamiltonianModel& h) {
  return add_multiplier(psi1_hat(s, h), s);
}
FunctionalReport psi_tilde2(const StationaryState& s, const HamiltonianModel& h) {
  return add_multiplier(psi2_hat(s, h), s);
}

std::vector<VectorField> optimal_control(const DynamicState& s, const HamiltonianModel& h) {
  check_dynamic(s);
  const TorusGrid& g = s.space();
  const int d = g.dim();
  const auto X = node_coords(g);
  std::vector<VectorField> r;
  std::vector<double> p(d), gp(d);
  for (int j = 0; j < s.steps(); ++j) {
    const VectorField gu = gradient(s.u_mid(j));
    VectorField rj(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int a = 0; a < d; ++a) p[a] = gu[a][i];
      h.grad_p(cspan(&X[i * d], d), p, s.m_mid(j)[i], gp);
      for (int a = 0; a < d; ++a) rj[a][i] = -gp[a];
    }
    r.push_back(std::move(rj));
  }
  return r;
}

double social_cost(const DynamicState& s, const std::vector<VectorField>& r, const HamiltonianModel& h) {
  check_dynamic(s);
  if (static_cast<int>(r.size()) != s.steps()) throw DomainError("control needs one slice per time interval");
  const TorusGrid& g = s.space();
  const int d = g.dim();
  const auto X = node_coords(g);
  std::vector<double> q(d);
  double total = 0.0;
  for (int j = 0; j < s.steps(); ++j) {
    if (r[j].grid != g) throw DomainError("control slice on a foreign grid");
    const ScalarField& mj = s.m_mid(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int a = 0; a < d; ++a) q[a] = -r[j][a][i];
      acc += h.legendre(cspan(&X[i * d], d), q, mj[i]) * mj[i];
    }
    total += s.grid.dt() * acc * g.cell_volume();
  }
  return total + inner(s.uT, s.m_final());
}

double cost_B(const DynamicState& s, const std::vector<VectorField>& r, const SeparableHamiltonian& h) {
  check_dynamic(s);
  if (static_cast<int>(r.size()) != s.steps()) throw DomainError("control needs one slice per time interval");
  const TorusGrid& g = s.space();
  const int d = g.dim();
  const auto X = node_coords(g);
  std::vector<double> q(d);
  double total = 0.0;
  for (int j = 0; j < s.steps(); ++j) {
    const ScalarField& mj = s.m_mid(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int a = 0; a < d; ++a) q[a] = -r[j][a][i];
      acc += h.L0(q) * mj[i] + h.coupling().F(cspan(&X[i * d], d), mj[i]);
    }
    total += s.grid.dt() * acc * g.cell_volume();
  }
  return total + inner(s.uT, s.m_final());
}

double cost_A(const DynamicState& s, const std::vector<ScalarField>& s_ctrl, const SeparableHamiltonian& h) {
  check_dynamic(s);
  if (static_cast<int>(s_ctrl.size()) != s.steps()) throw DomainError("control needs one slice per time interval");
  const TorusGrid& g = s.space();
  const int d = g.dim();
  const auto X = node_coords(g);
  double total = 0.0;
  for (int j = 0; j < s.steps(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += h.coupling().conjugate(cspan(&X[i * d], d), s_ctrl[j][i]);
    total += s.grid.dt() * acc * g.cell_volume();
  }
  return total - inner(s.u[0], s.m0);
}

FunctionalReport phi_bb(const ScalarField& m, const VectorField& w, const CongestionHamiltonian& h) {
  const TorusGrid& g = m.grid;
  const int d = g.dim();
  if (w.grid != g || w.ncomp() != d) throw DomainError("flux field does not match the density grid");
  if (h.dim() != d) throw DomainError("Hamiltonian dimension does not match grid dimension");
  if (!(m.min() > 0.0)) throw DomainError("density must be strictly positive");
  const double a = h.alpha(), gc = h.gamma_conj();
  if (h.gamma() == 1.0) throw DomainError("flux functional needs gamma > 1");
  const double kappa = (gc - 1.0) * (1.0 - a);
  const auto X = node_coords(g);
  const auto& Q = h.Q();

  FunctionalReport r;
  r.dm = {ScalarField(g)};
  r.du = {};
  VectorField dw(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cspan x(&X[i * d], d);
    h.check_m(m[i]);
    double w2 = 0.0, wQ = 0.0;
    for (int c = 0; c < d; ++c) {
      w2 += w[c][i] * w[c][i];
      wQ += w[c][i] * Q[c];
    }
    const double wn = std::sqrt(w2);
    const double mk = std::pow(m[i], kappa);
    const double wg = std::pow(wn, gc);
    acc += -wQ / (1.0 - a) + wg / ((1.0 - a) * gc * mk) + h.coupling().F(x, m[i]);
    r.dm[0][i] = -(gc - 1.0) * wg / (gc * mk * m[i]) + h.coupling().f(x, m[i]);
    const double wgm2 = wn > 0.0 ? std::pow(wn, gc - 2.0) : 0.0;
    for (int c = 0; c < d; ++c) dw[c][i] = -Q[c] / (1.0 - a) + wgm2 * w[c][i] / ((1.0 - a) * mk);
  }
  r.value = acc * g.cell_volume();
  r.value_alt = r.value;
  r.value_raw = r.value - raw_shift(g, h, X);
  r.dw = std::move(dw);
  return r;
}

double j_functional(const StationaryState& s, const CongestionHamiltonian& h) {
  const TorusGrid& g = s.grid;
  const int d = g.dim();
  const auto X = node_coords(g);
  const VectorField gu = gradient(s.u);
  const auto& Q = h.Q();
  const double a = h.alpha(), gm = h.gamma();
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    h.check_m(s.m[i]);
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += (gu[c][i] + Q[c]) * (gu[c][i] + Q[c]);
    acc += std::pow(s.m[i], 1.0 - a) * std::pow(std::sqrt(n2), gm) / ((a - 1.0) * gm) +
           h.coupling().F(cspan(&X[i * d], d), s.m[i]);
  }
  return acc * g.cell_volume();
}

}  // namespace mfgvar
