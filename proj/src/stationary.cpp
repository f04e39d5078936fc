#include "mfgvar/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace mfgvar {

namespace {

using Vec = Eigen::VectorXd;

struct Eval {
  double value = 0.0;
  Vec grad;  // Riesz representative for the weighted inner product
};

struct Problem {
  Vec W;
  std::function<bool(const Vec&)> feasible;
  std::function<Eval(const Vec&, double)> eval;  // second argument: barrier weight
  std::function<Vec(const Vec&)> project;         // orthogonal projection onto the constraint tangent
  std::function<Vec(const Vec&)> direction;       // projected (and preconditioned) gradient
  std::function<double(const Vec&)> stationarity;
};

struct Minimum {
  Vec x;
  Eval at;
  int iterations = 0;
  double stationarity = 0.0;
  std::vector<double> history;
};

double dotw(const Vec& W, const Vec& a, const Vec& b) { return (W.array() * a.array() * b.array()).sum(); }

// Projected gradient descent with Barzilai-Borwein steps and a monotone
// line search. Near convergence the Armijo test is swamped by rounding in the
// objective, so the approximate Wolfe test on the slope is accepted too.
Minimum minimize(const Problem& P, Vec x, const StationaryOptions& opt) {
  Minimum out;
  double mu = opt.barrier_mu0;
  if (!P.feasible(x)) throw DomainError("initial point is not feasible");
  for (;;) {
    const double target = mu > 0.0 ? std::max(opt.tol, mu) : opt.tol;
    Eval e = P.eval(x, mu);
    Vec pg = P.direction(e.grad);
    // pairings go through the projection: the raw m-gradient carries the
    // multiplier as a large mean, which would swamp the tangential part
    double gpg = dotw(P.W, P.project(e.grad), pg);
    double t = 1.0;
    out.history.push_back(e.value);
    for (;;) {
      out.stationarity = P.stationarity(e.grad);
      if (out.stationarity <= target) break;
      if (out.iterations >= opt.max_iter)
        throw SolverFailure("stationary solver hit the iteration limit; projected gradient " +
                            std::to_string(out.stationarity));
      double tt = t;
      bool ok = false;
      Vec xn;
      Eval en;
      for (int ls = 0; ls < 80; ++ls) {
        xn = x - tt * pg;
        if (P.feasible(xn)) {
          en = P.eval(xn, mu);
          if (std::isfinite(en.value)) {
            if (en.value <= e.value - opt.armijo * tt * gpg) {
              ok = true;
              break;
            }
            const double slope = -dotw(P.W, P.project(en.grad), pg);
            if (en.value <= e.value + 1e-14 * (1.0 + std::abs(e.value)) && slope >= -0.9 * gpg && slope <= 0.8 * gpg) {
              ok = true;
              break;
            }
          }
        }
        tt *= 0.5;
      }
      if (!ok) throw SolverFailure("line search failed; projected gradient " + std::to_string(out.stationarity));
      const Vec s = xn - x;
      const Vec y = P.project(en.grad - e.grad);
      const double sy = dotw(P.W, s, y);
      const double ss = tt * tt * gpg;  // |s|^2 in the preconditioned metric
      t = sy > 0.0 ? ss / sy : 2.0 * tt;
      t = std::clamp(t, 1e-12, 1e12);
      x = std::move(xn);
      e = std::move(en);
      pg = P.direction(e.grad);
      gpg = dotw(P.W, P.project(e.grad), pg);
      out.history.push_back(e.value);
      ++out.iterations;
    }
    out.at = e;
    if (mu == 0.0) break;
    mu *= opt.barrier_decrease;
    if (mu < opt.barrier_min) mu = 0.0;
  }
  out.x = std::move(x);
  return out;
}

ScalarField slice(const TorusGrid& g, const Vec& x, std::size_t block) {
  ScalarField f(g);
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) f[i] = x(block * n + i);
  return f;
}

void put(Vec& x, std::size_t block, const ScalarField& f) {
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) x(block * n + i) = f[i];
}

ScalarField zero_mean(ScalarField f) {
  const double a = mean(f);
  for (double& v : f.values) v -= a;
  return f;
}

void check_density(const ScalarField& m, const HamiltonianModel& h) {
  if (!(m.min() > h.m_min())) throw DomainError("initial density must stay above the positivity floor");
  if (std::abs(integrate(m) - 1.0) > 1e-12) throw DomainError("initial density must have unit mass");
}

ScalarField initial_density(const TorusGrid& g, const StationaryOptions& opt) {
  if (opt.m_init) {
    if (opt.m_init->grid != g) throw DomainError("initial density on a foreign grid");
    return *opt.m_init;
  }
  ScalarField m(g);
  for (double& v : m.values) v = 1.0;
  return m;
}

bool density_ok(const Vec& x, std::size_t n, double floor) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(x(i) > floor)) return false;
  return true;
}

void barrier(Eval& e, const Vec& x, std::size_t n, double mu, double cell) {
  if (mu == 0.0) return;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::log(x(i));
    e.grad(i) -= mu / x(i);
  }
  e.value -= mu * acc * cell;
}

double max_abs(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

void finish(StationaryResult& r, const CongestionHamiltonian& h, const StationaryOptions& opt) {
  StationaryState st{r.m.grid, 0.0, r.m, r.u, r.Hbar};
  r.Hbar_check = psi2_hat(st, h).value;
  r.residual = stationary_residual(r.m, r.u, r.Hbar, h);
  if (std::abs(r.Hbar - r.Hbar_check) > opt.hbar_tol)
    throw SolverFailure("ergodic constant mismatch: multiplier " + std::to_string(r.Hbar) + " vs " +
                        std::to_string(r.Hbar_check));
}

void check_convex_range(const CongestionHamiltonian& h) {
  if (!(h.alpha() < 1.0)) throw ConfigError("flux formulation requires 0 <= alpha < 1");
  if (!(h.gamma() > 1.0))
    throw ConfigError("flux formulation requires gamma > 1; gamma = 1 is not strictly convex");
}

}  // namespace

StationaryResidual stationary_residual(const ScalarField& m, const ScalarField& u, double Hbar,
                                       const CongestionHamiltonian& h) {
  const TorusGrid& g = m.grid;
  const int d = g.dim();
  const VectorField gu = gradient(u);
  const auto& Q = h.Q();
  const double a = h.alpha(), gm = h.gamma();
  StationaryResidual r;
  r.hjb = ScalarField(g);
  VectorField flux(g);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.point(i, x);
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += (gu[c][i] + Q[c]) * (gu[c][i] + Q[c]);
    const double nn = std::sqrt(n2);
    r.hjb[i] = std::pow(nn, gm) / (gm * std::pow(m[i], a)) - h.coupling().f(x, m[i]) - Hbar;
    const double wgt = nn > 0.0 ? std::pow(m[i], 1.0 - a) * std::pow(nn, gm - 2.0) : 0.0;
    for (int c = 0; c < d; ++c) flux[c][i] = wgt * (gu[c][i] + Q[c]);
  }
  r.fp = divergence(flux) * -1.0;
  r.max_norm = std::max(r.hjb.max_abs(), r.fp.max_abs());
  return r;
}

VectorField w_from_u(const ScalarField& m, const ScalarField& u, const CongestionHamiltonian& h) {
  const TorusGrid& g = m.grid;
  const int d = g.dim();
  if (h.dim() != d) throw DomainError("Hamiltonian dimension does not match grid dimension");
  const VectorField gu = gradient(u);
  const auto& Q = h.Q();
  VectorField w(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    h.check_m(m[i]);
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += (gu[c][i] + Q[c]) * (gu[c][i] + Q[c]);
    const double nn = std::sqrt(n2);
    const double wgt = nn > 0.0 ? std::pow(m[i], 1.0 - h.alpha()) * std::pow(nn, h.gamma() - 2.0) : 0.0;
    for (int c = 0; c < d; ++c) w[c][i] = wgt * (gu[c][i] + Q[c]);
  }
  return w;
}

PotentialRecovery u_from_w(const ScalarField& m, const VectorField& w, const CongestionHamiltonian& h,
                           double curl_tol) {
  const TorusGrid& g = m.grid;
  const int d = g.dim();
  if (h.dim() != d || w.ncomp() != d) throw DomainError("flux field does not match the density grid");
  if (h.gamma() == 1.0) throw DomainError("inverse transform needs gamma > 1");
  const double gc = h.gamma_conj();
  const double e = (h.alpha() - 1.0) * (gc - 1.0);
  const auto& Q = h.Q();
  VectorField target(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    h.check_m(m[i]);
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += w[c][i] * w[c][i];
    const double nn = std::sqrt(n2);
    const double wgt = nn > 0.0 ? std::pow(m[i], e) * std::pow(nn, gc - 2.0) : 0.0;
    for (int c = 0; c < d; ++c) target[c][i] = wgt * w[c][i] - Q[c];
  }
  PotentialRecovery r;
  r.u = potential_from_gradient(target);
  r.curl_defect = (gradient(r.u) - target).max_abs();
  if (r.curl_defect > curl_tol)
    throw DomainError("flux field is not integrable: gradient defect " + std::to_string(r.curl_defect));
  return r;
}

StationaryResult solve_bb(const CongestionHamiltonian& h, const TorusGrid& g, const StationaryOptions& opt) {
  check_convex_range(h);
  const int d = g.dim();
  if (h.dim() != d) throw DomainError("Hamiltonian dimension does not match grid dimension");
  const std::size_t n = g.size();
  const double cell = g.cell_volume();

  ScalarField m = initial_density(g, opt);
  check_density(m, h);
  VectorField w = opt.w_init ? *opt.w_init : constant_vector(g, h.Q());
  if (w.grid != g || w.ncomp() != d) throw DomainError("initial flux on a foreign grid");
  if (divergence(w).max_abs() > 1e-10) throw DomainError("initial flux must be divergence free");

  Vec x(n * (d + 1));
  put(x, 0, m);
  for (int c = 0; c < d; ++c) put(x, c + 1, w[c]);

  auto unpack_w = [&](const Vec& v) {
    VectorField f(g);
    for (int c = 0; c < d; ++c) f[c] = slice(g, v, c + 1);
    return f;
  };

  Problem P;
  P.W = Vec::Constant(x.size(), cell);
  P.feasible = [&](const Vec& v) { return density_ok(v, n, h.m_min()); };
  P.eval = [&](const Vec& v, double mu) {
    const FunctionalReport r = phi_bb(slice(g, v, 0), unpack_w(v), h);
    Eval e;
    e.value = r.value;
    e.grad.resize(v.size());
    put(e.grad, 0, r.dm[0]);
    for (int c = 0; c < d; ++c) put(e.grad, c + 1, (*r.dw)[c]);
    barrier(e, v, n, mu, cell);
    return e;
  };
  P.direction = [&](const Vec& gr) {
    Vec out(gr.size());
    put(out, 0, zero_mean(slice(g, gr, 0)));
    const VectorField pw = project_div_free(unpack_w(gr));
    for (int c = 0; c < d; ++c) put(out, c + 1, pw[c]);
    return out;
  };
  P.project = P.direction;
  P.stationarity = [&](const Vec& gr) { return max_abs(P.direction(gr)); };

  Minimum M = minimize(P, x, opt);

  StationaryResult r;
  r.formulation = "bb";
  r.m = slice(g, M.x, 0);
  r.w = unpack_w(M.x);
  r.Hbar = -mean(slice(g, M.at.grad, 0));
  PotentialRecovery rec = u_from_w(r.m, *r.w, h, opt.curl_tol);
  r.u = std::move(rec.u);
  r.curl_defect = rec.curl_defect;
  r.objective = M.at.value;
  r.stationarity = M.stationarity;
  r.iterations = M.iterations;
  r.history = std::move(M.history);
  finish(r, h, opt);
  return r;
}

double stream_functional(const ScalarField& m, const ScalarField& v, std::array<double, 2> R,
                         const CongestionHamiltonian& h) {
  const TorusGrid& g = m.grid;
  if (g.dim() != 2 || h.dim() != 2) throw DomainError("stream formulation is two-dimensional");
  const double a = h.alpha(), gc = h.gamma_conj();
  const double kappa = (gc - 1.0) * (1.0 - a);
  const auto Qp = rotate_minus({h.Q()[0], h.Q()[1]});
  const VectorField gv = gradient(v);
  std::vector<double> x(2);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.point(i, x);
    h.check_m(m[i]);
    const double g0 = gv[0][i] + R[0], g1 = gv[1][i] + R[1];
    acc += std::pow(std::hypot(g0, g1), gc) / ((1.0 - a) * gc * std::pow(m[i], kappa)) + h.coupling().F(x, m[i]);
  }
  return -(R[0] * Qp[0] + R[1] * Qp[1]) / (1.0 - a) + acc * g.cell_volume();
}

StationaryResult solve_bb_2d_stream(const CongestionHamiltonian& h, const TorusGrid& g, const StationaryOptions& opt) {
  check_convex_range(h);
  if (g.dim() != 2 || h.dim() != 2) throw DomainError("stream formulation is two-dimensional");
  const std::size_t n = g.size();
  const double cell = g.cell_volume();
  const double a = h.alpha(), gc = h.gamma_conj();
  const double kappa = (gc - 1.0) * (1.0 - a);
  const auto Qp = rotate_minus({h.Q()[0], h.Q()[1]});

  ScalarField m = initial_density(g, opt);
  check_density(m, h);
  Vec x = Vec::Zero(2 * n + 2);
  put(x, 0, m);
  const auto R0 = rotate_minus({h.Q()[0], h.Q()[1]});
  x(2 * n) = R0[0];
  x(2 * n + 1) = R0[1];

  Problem P;
  P.W = Vec::Constant(x.size(), cell);
  P.W(2 * n) = P.W(2 * n + 1) = 1.0;
  P.feasible = [&](const Vec& v) { return density_ok(v, n, h.m_min()); };
  P.eval = [&](const Vec& v, double mu) {
    const ScalarField mm = slice(g, v, 0), vv = slice(g, v, 1);
    const std::array<double, 2> R{v(2 * n), v(2 * n + 1)};
    const VectorField gv = gradient(vv);
    VectorField dpsi(g);
    ScalarField dm(g);
    std::vector<double> xx(2);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g.point(i, xx);
      const double g0 = gv[0][i] + R[0], g1 = gv[1][i] + R[1];
      const double nn = std::hypot(g0, g1);
      const double mk = std::pow(mm[i], kappa);
      const double ng = std::pow(nn, gc);
      acc += ng / ((1.0 - a) * gc * mk) + h.coupling().F(xx, mm[i]);
      dm[i] = -kappa * ng / ((1.0 - a) * gc * mk * mm[i]) + h.coupling().f(xx, mm[i]);
      const double wg = nn > 0.0 ? std::pow(nn, gc - 2.0) / ((1.0 - a) * mk) : 0.0;
      dpsi[0][i] = wg * g0;
      dpsi[1][i] = wg * g1;
    }
    Eval e;
    e.value = -(R[0] * Qp[0] + R[1] * Qp[1]) / (1.0 - a) + acc * cell;
    e.grad.resize(v.size());
    put(e.grad, 0, dm);
    put(e.grad, 1, divergence(dpsi) * -1.0);
    e.grad(2 * n) = -Qp[0] / (1.0 - a) + integrate(dpsi[0]);
    e.grad(2 * n + 1) = -Qp[1] / (1.0 - a) + integrate(dpsi[1]);
    barrier(e, v, n, mu, cell);
    return e;
  };
  P.direction = [&](const Vec& gr) {
    Vec out(gr.size());
    put(out, 0, zero_mean(slice(g, gr, 0)));
    put(out, 1, inverse_laplacian(slice(g, gr, 1)) * -1.0);
    out(2 * n) = gr(2 * n);
    out(2 * n + 1) = gr(2 * n + 1);
    return out;
  };
  P.project = [&](const Vec& gr) {
    Vec out = gr;
    put(out, 0, zero_mean(slice(g, gr, 0)));
    return out;
  };
  P.stationarity = [&](const Vec& gr) {
    // the v-part is measured as a flux, like the w-gradient of the flux problem
    double s = zero_mean(slice(g, gr, 0)).max_abs();
    s = std::max(s, gradient(inverse_laplacian(slice(g, gr, 1))).max_abs());
    return std::max({s, std::abs(gr(2 * n)), std::abs(gr(2 * n + 1))});
  };

  Minimum M = minimize(P, x, opt);

  StationaryResult r;
  r.formulation = "stream2d";
  r.m = slice(g, M.x, 0);
  r.v = slice(g, M.x, 1);
  r.R = std::array<double, 2>{M.x(2 * n), M.x(2 * n + 1)};
  const VectorField gv = gradient(*r.v);
  VectorField w(g);
  for (std::size_t i = 0; i < n; ++i) {
    const auto wi = rotate_plus({gv[0][i] + (*r.R)[0], gv[1][i] + (*r.R)[1]});
    w[0][i] = wi[0];
    w[1][i] = wi[1];
  }
  r.w = std::move(w);
  r.Hbar = -mean(slice(g, M.at.grad, 0));
  PotentialRecovery rec = u_from_w(r.m, *r.w, h, opt.curl_tol);
  r.u = std::move(rec.u);
  r.curl_defect = rec.curl_defect;
  r.objective = M.at.value;
  r.stationarity = M.stationarity;
  r.iterations = M.iterations;
  r.history = std::move(M.history);
  finish(r, h, opt);
  return r;
}

StationaryResult solve_potential_a_gt_1(const CongestionHamiltonian& h, const TorusGrid& g,
                                        const StationaryOptions& opt) {
  if (!(h.alpha() > 1.0 && h.alpha() <= h.gamma()))
    throw ConfigError("potential formulation requires 1 < alpha <= gamma");
  if (h.dim() != g.dim()) throw DomainError("Hamiltonian dimension does not match grid dimension");
  const std::size_t n = g.size();
  const double cell = g.cell_volume();

  ScalarField m = initial_density(g, opt);
  check_density(m, h);
  Vec x = Vec::Zero(2 * n);
  put(x, 0, m);

  Problem P;
  P.W = Vec::Constant(x.size(), cell);
  P.feasible = [&](const Vec& v) { return density_ok(v, n, h.m_min()); };
  P.eval = [&](const Vec& v, double mu) {
    StationaryState st{g, 0.0, slice(g, v, 0), slice(g, v, 1), 0.0};
    const FunctionalReport r = psi1_hat(st, h);
    Eval e;
    e.value = -r.value;
    e.grad.resize(v.size());
    put(e.grad, 0, r.dm[0] * -1.0);
    put(e.grad, 1, r.du[0] * -1.0);
    barrier(e, v, n, mu, cell);
    return e;
  };
  P.direction = [&](const Vec& gr) {
    Vec out(gr.size());
    put(out, 0, zero_mean(slice(g, gr, 0)));
    put(out, 1, inverse_laplacian(slice(g, gr, 1)) * -1.0);
    return out;
  };
  P.project = [&](const Vec& gr) {
    Vec out = gr;
    put(out, 0, zero_mean(slice(g, gr, 0)));
    return out;
  };
  P.stationarity = [&](const Vec& gr) {
    return std::max(zero_mean(slice(g, gr, 0)).max_abs(), slice(g, gr, 1).max_abs());
  };

  Minimum M = minimize(P, x, opt);

  StationaryResult r;
  r.formulation = "potential";
  r.m = slice(g, M.x, 0);
  r.u = zero_mean(slice(g, M.x, 1));
  r.Hbar = -mean(slice(g, M.at.grad, 0));
  r.objective = j_functional(StationaryState{g, 0.0, r.m, r.u, 0.0}, h);
  r.stationarity = M.stationarity;
  r.iterations = M.iterations;
  r.history = std::move(M.history);
  finish(r, h, opt);
  return r;
}

}  // namespace mfgvar
