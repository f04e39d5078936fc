#include "mfgvar/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mfgvar {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

const std::span<const double> kNoX{};

void check_periodic_grid(const TorusGrid& g) {
  if (g.dim() < 2) throw DomainError("periodic fields need at least one space axis and the time axis");
}

// div(grad f) over the spatial axes; Nyquist modes drop out, which keeps
// the discrete G an exact gradient of the discrete g.
ScalarField lap_x(const ScalarField& f, int d) {
  ScalarField out(f.grid);
  for (int a = 0; a < d; ++a) out += partial(partial(f, a), a);
  return out;
}

double fval(const Coupling& f, double m) { return f.f(kNoX, m); }

void check_positive(const ScalarField& M) {
  if (!(M.min() > -1.0)) throw DomainError("density 1 + M lost positivity");
}

TorusGrid space_time_grid(int d, int n_x, int n_t) {
  if (d < 1) throw DomainError("spatial dimension must be positive");
  if (n_x < 4 || n_t < 4) throw DomainError("grid too coarse to resolve the first spatial and temporal modes");
  std::vector<int> shape(d, n_x);
  shape.push_back(n_t);
  return TorusGrid(shape);
}

ScalarField column(const TorusGrid& g, const Eigen::MatrixXd& B, int j) {
  ScalarField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = B(i, j);
  return f;
}

template <class Op>
Eigen::MatrixXd map_columns(const TorusGrid& g, const Eigen::MatrixXd& B, Op&& op) {
  Eigen::MatrixXd out(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    const ScalarField r = op(column(g, B, static_cast<int>(j)));
    out.col(j) = Eigen::Map<const Eigen::VectorXd>(r.values.data(), r.size());
  }
  return out;
}

Eigen::Map<const Eigen::VectorXd> as_vec(const ScalarField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values.data(), f.size());
}

std::vector<int> without(int n, int skip) {
  std::vector<int> idx;
  for (int j = 0; j < n; ++j)
    if (j != skip) idx.push_back(j);
  return idx;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& B, const std::vector<int>& idx) {
  Eigen::MatrixXd out(B.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = B.col(idx[j]);
  return out;
}

ScalarField shift_axis(const ScalarField& f, int axis, int by) {
  const TorusGrid& g = f.grid;
  const int n = g.n(axis);
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int j = g.index_along(i, axis);
    const int src = ((j - by) % n + n) % n;
    out[i] = f[i + (static_cast<long>(src) - j) * static_cast<long>(g.stride(axis))];
  }
  return out;
}

}  // namespace

PeriodicState trivial_periodic_state(int d, int n_x, int n_t, double T) {
  if (!(T > 0.0)) throw DomainError("period must be positive");
  PeriodicState s;
  s.grid = space_time_grid(d, n_x, n_t);
  s.U = ScalarField(s.grid);
  s.M = ScalarField(s.grid);
  s.T = T;
  return s;
}

PeriodicResidual eval_G(const PeriodicState& s, const Coupling& f) {
  check_periodic_grid(s.grid);
  if (!(s.T > 0.0)) throw DomainError("period must be positive");
  if (f.x_dependent()) throw DomainError("periodic problem needs an x-independent coupling");
  check_positive(s.M);
  const int d = s.dim();
  const std::size_t N = s.grid.size();
  const ScalarField Mt = partial(s.M, d), Ut = partial(s.U, d);
  const double f1 = fval(f, 1.0);
  PeriodicResidual r;
  r.G1 = Mt * (1.0 / s.T) - lap_x(s.M, d);
  r.G2 = Ut * (-1.0 / s.T) - lap_x(s.U, d);
  for (int a = 0; a < d; ++a) {
    const ScalarField gu = partial(s.U, a);
    r.G1 -= partial(hadamard(gu, s.M) + gu, a);
    for (std::size_t i = 0; i < N; ++i) r.G2[i] += 0.5 * gu[i] * gu[i];
  }
  for (std::size_t i = 0; i < N; ++i) r.G2[i] += -fval(f, s.M[i] + 1.0) + f1 + s.Hbar;
  r.G3 = mean(s.M);
  r.max_norm = std::max({r.G1.max_abs(), r.G2.max_abs(), std::abs(r.G3)});
  return r;
}

PotentialValue eval_g(const PeriodicState& s, const Coupling& f) {
  check_periodic_grid(s.grid);
  if (!(s.T > 0.0)) throw DomainError("period must be positive");
  check_positive(s.M);
  const int d = s.dim();
  const std::size_t N = s.grid.size();
  const ScalarField Ut = partial(s.U, d), Mt = partial(s.M, d);
  std::vector<ScalarField> gU, gM;
  for (int a = 0; a < d; ++a) {
    gU.push_back(partial(s.U, a));
    gM.push_back(partial(s.M, a));
  }
  const double f1 = fval(f, 1.0);
  PotentialValue p;
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    double dot = 0.0, sq = 0.0;
    for (int a = 0; a < d; ++a) {
      dot += gU[a][i] * gM[a][i];
      sq += gU[a][i] * gU[a][i];
    }
    const double m = s.M[i];
    acc += -Ut[i] * m / s.T + dot + 0.5 * sq * (m + 1.0) - f.F(kNoX, m + 1.0) + f1 * m + s.Hbar * m;
  }
  p.value = acc / static_cast<double>(N);
  // derivative, integrated by parts term by term
  p.dU = Mt * (1.0 / s.T);
  p.dM = Ut * (-1.0 / s.T);
  for (int a = 0; a < d; ++a) {
    ScalarField flux = gM[a];
    for (std::size_t i = 0; i < N; ++i) flux[i] += gU[a][i] * (s.M[i] + 1.0);
    p.dU -= partial(flux, a);
    p.dM -= partial(gU[a], a);
  }
  for (std::size_t i = 0; i < N; ++i) {
    double sq = 0.0;
    for (int a = 0; a < d; ++a) sq += gU[a][i] * gU[a][i];
    p.dM[i] += 0.5 * sq - fval(f, s.M[i] + 1.0) + f1 + s.Hbar;
  }
  p.dHbar = mean(s.M);
  return p;
}

double pair_G(const PeriodicResidual& G, const ScalarField& v, const ScalarField& mu, double l) {
  return mean(hadamard(G.G1, v)) + mean(hadamard(G.G2, mu)) + G.G3 * l;
}

// ---- linear theory ----

double critical_period(double fprime1) {
  if (!(fprime1 > -2.0 * kLambda1))
    throw DomainError("f'(1) must exceed -8 pi^2 (lower bound of the bifurcation window)");
  if (!(fprime1 < -kLambda1)) throw DomainError("f'(1) must be below -4 pi^2 (upper bound of the bifurcation window)");
  return 1.0 / std::sqrt(-kLambda1 - fprime1);
}

double h_function(double T, double sigma, double fprime1) {
  const double l = kLambda1;
  return T * T * l * (l + fprime1) + sigma * T * (l - fprime1) - sigma * sigma + 4.0 * M_PI * M_PI;
}

double sigma_branch(double T, double fprime1) {
  const double l = kLambda1;
  const double b = T * (l - fprime1);
  const double c = T * T * l * (l + fprime1) + 4.0 * M_PI * M_PI;
  const double disc = b * b + 4.0 * c;
  if (!(disc >= 0.0) || !(b > 0.0)) throw DomainError("no real eigenvalue branch near zero at this period");
  return -2.0 * c / (b + std::sqrt(disc));
}

double sigma_slope_at_critical(double fprime1) {
  const double l = kLambda1;
  return 2.0 * l * (-l - fprime1) / (l - fprime1);
}

int crossing_number(double fprime1, int d) {
  const double Tb = critical_period(fprime1);
  const double lo = sigma_branch(Tb * (1.0 - 1e-3), fprime1), hi = sigma_branch(Tb * (1.0 + 1e-3), fprime1);
  const int multiplicity = 4 * d;
  const int below = lo < 0.0 ? multiplicity : 0;
  const int above = hi < 0.0 ? multiplicity : 0;
  return below - above;
}

Eigen::Matrix2d ModeBlock::ode_matrix() const {
  Eigen::Matrix2d A;
  A << -T * lambda, -T * lambda, -T * fprime1, T * lambda;
  return A;
}

std::pair<std::complex<double>, std::complex<double>> ModeBlock::apply(int j, std::complex<double> mu,
                                                                       std::complex<double> v) const {
  const std::complex<double> dt(0.0, kTwoPi * j);
  return {dt * mu + T * lambda * mu + T * lambda * v, -dt * v + T * lambda * v - T * fprime1 * mu};
}

Eigen::VectorXd FieldBasis::coefficients(const ScalarField& f) const {
  if (f.grid != grid) throw DomainError("field on a foreign grid");
  return B.transpose() * as_vec(f) / static_cast<double>(grid.size());
}

ScalarField FieldBasis::field(const Eigen::VectorXd& c) const {
  const Eigen::VectorXd v = B * c;
  return ScalarField(grid, std::vector<double>(v.data(), v.data() + v.size()));
}

FieldBasis nyquist_free_basis(const TorusGrid& g) {
  const int D = g.dim();
  // wavevectors with every component strictly inside the Nyquist band, one per +-k pair
  std::vector<std::vector<int>> ks;
  std::vector<int> k(D);
  std::function<void(int)> rec = [&](int a) {
    if (a == D) {
      int first = 0;
      for (int c : k)
        if (c != 0) {
          first = c;
          break;
        }
      if (first > 0) ks.push_back(k);
      return;
    }
    for (int c = -g.n(a) / 2 + 1; c <= g.n(a) / 2 - 1; ++c) {
      k[a] = c;
      rec(a + 1);
    }
  };
  rec(0);
  FieldBasis fb;
  fb.grid = g;
  fb.constant = 0;
  fb.B.resize(g.size(), 1 + 2 * ks.size());
  fb.B.col(0).setOnes();
  std::vector<double> x(D);
  for (std::size_t q = 0; q < ks.size(); ++q)
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.point(i, x);
      double ph = 0.0;
      for (int a = 0; a < D; ++a) ph += ks[q][a] * x[a];
      fb.B(i, 1 + 2 * q) = std::sqrt(2.0) * std::cos(kTwoPi * ph);
      fb.B(i, 2 + 2 * q) = std::sqrt(2.0) * std::sin(kTwoPi * ph);
    }
  return fb;
}

FieldBasis even_axis_basis(const TorusGrid& g, int axis) {
  const int D = g.dim();
  const int t_axis = D - 1;
  if (axis < 0 || axis >= t_axis) throw DomainError("axis must be a spatial axis");
  std::vector<std::function<double(double)>> sx, st;
  sx.push_back([](double) { return 1.0; });
  for (int k = 1; k < g.n(axis) / 2; ++k) sx.push_back([k](double x) { return std::sqrt(2.0) * std::cos(kTwoPi * k * x); });
  st.push_back([](double) { return 1.0; });
  for (int j = 1; j < g.n(t_axis) / 2; ++j) {
    st.push_back([j](double t) { return std::sqrt(2.0) * std::cos(kTwoPi * j * t); });
    st.push_back([j](double t) { return std::sqrt(2.0) * std::sin(kTwoPi * j * t); });
  }
  FieldBasis fb;
  fb.grid = g;
  fb.constant = 0;
  fb.B.resize(g.size(), sx.size() * st.size());
  int col = 0;
  for (const auto& a : sx)
    for (const auto& b : st) {
      for (std::size_t i = 0; i < g.size(); ++i) fb.B(i, col) = a(g.coord(i, axis)) * b(g.coord(i, t_axis));
      ++col;
    }
  return fb;
}

LinearizedOperator assemble_A(double T, double fprime1, int d, int n_x, int n_t) {
  if (!(T > 0.0)) throw DomainError("period must be positive");
  const TorusGrid g = space_time_grid(d, n_x, n_t);
  LinearizedOperator op;
  op.basis = nyquist_free_basis(g);
  op.T = T;
  op.fprime1 = fprime1;
  const FieldBasis& fb = op.basis;
  const int K = fb.size();
  const double N = static_cast<double>(g.size());
  const std::vector<int> iu = without(K, fb.constant);
  const Eigen::MatrixXd BU = select_cols(fb.B, iu);
  const Eigen::MatrixXd DtB = map_columns(g, fb.B, [&](const ScalarField& f) { return partial(f, d); });
  const Eigen::MatrixXd LB = map_columns(g, fb.B, [&](const ScalarField& f) { return lap_x(f, d); });
  const Eigen::MatrixXd DtBU = select_cols(DtB, iu), LBU = select_cols(LB, iu);

  const int nv = K - 1, nm = K;
  op.A = Eigen::MatrixXd::Zero(nv + nm + 1, nv + nm + 1);
  op.A.block(0, 0, nv, nv) = BU.transpose() * (-T * LBU) / N;
  op.A.block(0, nv, nv, nm) = BU.transpose() * (DtB - T * LB) / N;
  op.A.block(nv, 0, nm, nv) = fb.B.transpose() * (-DtBU - T * LBU) / N;
  op.A.block(nv, nv, nm, nm) = -T * fprime1 * Eigen::MatrixXd::Identity(nm, nm);
  op.A(nv + fb.constant, nv + nm) = T * kLambda1;
  op.A(nv + nm, nv + fb.constant) = T * kLambda1;
  return op;
}

LinearImage apply_A_nodal(double T, double fprime1, const ScalarField& v, const ScalarField& mu, double l) {
  const int d = v.grid.dim() - 1;
  LinearImage r;
  r.r1 = partial(mu, d) - lap_x(mu, d) * T - lap_x(v, d) * T;
  r.r2 = partial(v, d) * -1.0 - lap_x(v, d) * T - mu * (T * fprime1);
  for (double& x : r.r2.values) x += T * l;
  r.r3 = T * mean(mu);
  return r;
}

LinearImage apply_A_modes(double T, double fprime1, const ScalarField& v, const ScalarField& mu, double l) {
  const TorusGrid& g = v.grid;
  const int D = g.dim(), d = D - 1;
  const auto vh = fourier_coefficients(v), mh = fourier_coefficients(mu);
  std::vector<Complex> r1(g.size()), r2(g.size());
  ModeBlock blk;
  blk.T = T;
  blk.fprime1 = fprime1;
  blk.k.assign(d, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double lam = 0.0;
    for (int a = 0; a < d; ++a) {
      const int j = g.index_along(i, a);
      blk.k[a] = g.wavenumber(a, j);
      if (!g.is_nyquist(a, j)) lam += kLambda1 * blk.k[a] * blk.k[a];
    }
    blk.lambda = lam;
    const int jt = g.index_along(i, d);
    const int w = g.is_nyquist(d, jt) ? 0 : g.wavenumber(d, jt);
    const auto out = blk.apply(w, mh[i], vh[i]);
    r1[i] = out.first;
    r2[i] = out.second;
  }
  r2[0] += T * l;
  LinearImage r;
  r.r1 = from_fourier(g, r1);
  r.r2 = from_fourier(g, r2);
  r.r3 = T * mh[0].real();
  return r;
}

KernelInfo kernel_at(const LinearizedOperator& op, double zero_tol) {
  KernelInfo k;
  k.zero_tol = zero_tol;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op.A, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::Index n = s.size();
  k.singular_values = s.reverse();
  for (Eigen::Index i = 0; i < n; ++i)
    if (k.singular_values(i) <= zero_tol) ++k.dimension;
  k.basis = svd.matrixV().rightCols(k.dimension);
  Eigen::BDCSVD<Eigen::MatrixXd> adj(op.A.transpose());
  const Eigen::VectorXd sa = adj.singularValues();
  for (Eigen::Index i = 0; i < sa.size(); ++i)
    if (sa(i) <= zero_tol) ++k.adjoint_dimension;
  return k;
}

std::vector<double> near_zero_eigenvalues(const LinearizedOperator& op, double window) {
  const Eigen::MatrixXd S = 0.5 * (op.A + op.A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) < window) out.push_back(es.eigenvalues()(i));
  return out;
}

std::pair<ScalarField, ScalarField> kernel_vector(const TorusGrid& g, double fprime1, int axis, int xs, int ts,
                                                 int overtone) {
  const int d = g.dim() - 1;
  if (axis < 0 || axis >= d) throw DomainError("kernel axis out of range");
  const double c = std::sqrt(-kLambda1 - fprime1) / kTwoPi;
  const int N = overtone;
  ScalarField v(g), mu(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coord(i, axis), t = g.coord(i, d);
    const double sp = xs ? std::sin(kTwoPi * x) : std::cos(kTwoPi * x);
    const double C = std::cos(kTwoPi * N * t), S = std::sin(kTwoPi * N * t);
    if (ts == 0) {
      mu[i] = C * sp;
      v[i] = (c * S - C) * sp;
    } else {
      mu[i] = S * sp;
      v[i] = (-c * C - S) * sp;
    }
  }
  return {v, mu};
}

double kernel_energy_in_trig_span(const LinearizedOperator& op, const KernelInfo& k, int overtone) {
  if (k.dimension == 0) return 0.0;
  const FieldBasis& fb = op.basis;
  const int d = fb.grid.dim() - 1;
  const int nv = op.n_v(), nm = op.n_mu();
  const std::vector<int> iu = without(fb.size(), fb.constant);
  Eigen::MatrixXd L(nv + nm + 1, 4 * d);
  L.setZero();
  int col = 0;
  for (int a = 0; a < d; ++a)
    for (int xs = 0; xs < 2; ++xs)
      for (int ts = 0; ts < 2; ++ts) {
        const auto [v, mu] = kernel_vector(fb.grid, op.fprime1, a, xs, ts, overtone);
        const Eigen::VectorXd cv = fb.coefficients(v), cm = fb.coefficients(mu);
        for (int j = 0; j < nv; ++j) L(j, col) = cv(iu[j]);
        L.block(nv, col, nm, 1) = cm;
        ++col;
      }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(L);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(L.rows(), L.cols());
  const double inside = (Q.transpose() * k.basis).squaredNorm();
  return inside / k.basis.squaredNorm();
}

// ---- continuation ----

double nonstationarity(const ScalarField& M) {
  const int t_axis = M.grid.dim() - 1;
  const double nm = l2_norm(M);
  return nm > 0.0 ? l2_norm(partial(M, t_axis)) / nm : 0.0;
}

namespace {

struct PinnedSystem {
  TorusGrid g;
  int d = 1;
  FieldBasis fb;
  std::vector<int> iu;
  Eigen::MatrixXd BU, DtB, LB;
  std::vector<Eigen::MatrixXd> DaB;
  Eigen::VectorXd phiU, phiM, psiU, psiM;
  const Coupling* f = nullptr;
  double amplitude = 0.0;

  int K() const { return fb.size(); }
  int nU() const { return K() - 1; }
  int size() const { return nU() + K() + 3; }

  PeriodicState state(const Eigen::VectorXd& X) const {
    PeriodicState s;
    s.grid = g;
    Eigen::VectorXd cU = Eigen::VectorXd::Zero(K());
    for (int j = 0; j < nU(); ++j) cU(iu[j]) = X(j);
    s.U = fb.field(cU);
    s.M = fb.field(X.segment(nU(), K()));
    s.Hbar = X(nU() + K());
    s.T = X(nU() + K() + 1);
    return s;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& X, double* nodal = nullptr) const {
    const PeriodicState s = state(X);
    const double c = X(nU() + K() + 2);
    PeriodicResidual G = eval_G(s, *f);
    G.G1 += partial(s.U, d) * c;
    G.G2 += partial(s.M, d) * c;
    if (nodal) *nodal = std::max({G.G1.max_abs(), G.G2.max_abs(), std::abs(G.G3)});
    const double N = static_cast<double>(g.size());
    Eigen::VectorXd R(size());
    R.head(nU()) = BU.transpose() * as_vec(G.G1) / N;
    R.segment(nU(), K()) = fb.B.transpose() * as_vec(G.G2) / N;
    R(nU() + K()) = G.G3;
    R(nU() + K() + 1) = phiU.dot(X.head(nU())) + phiM.dot(X.segment(nU(), K())) - amplitude;
    R(nU() + K() + 2) = psiU.dot(X.head(nU())) + psiM.dot(X.segment(nU(), K()));
    return R;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& X) const {
    const PeriodicState s = state(X);
    const double c = X(nU() + K() + 2);
    const double T = s.T;
    const double N = static_cast<double>(g.size());
    const std::size_t n = g.size();
    std::vector<Eigen::VectorXd> gU;
    for (int a = 0; a < d; ++a) gU.push_back(as_vec(partial(s.U, a)));
    const Eigen::VectorXd Mv = as_vec(s.M);
    Eigen::VectorXd fp(n);
    for (std::size_t i = 0; i < n; ++i) fp(i) = f->df(kNoX, s.M[i] + 1.0);

    // nodal images of each basis column
    Eigen::MatrixXd J1U = -select_cols(LB, iu) + c * select_cols(DtB, iu);
    Eigen::MatrixXd J2U = -select_cols(DtB, iu) / T - select_cols(LB, iu);
    Eigen::MatrixXd J1M = DtB / T - LB;
    Eigen::MatrixXd J2M = (-fp).asDiagonal() * fb.B + c * DtB;
    for (int a = 0; a < d; ++a) {
      const Eigen::MatrixXd DaU = select_cols(DaB[a], iu);
      const Eigen::MatrixXd MD = Mv.asDiagonal() * DaU;
      J1U -= map_columns(g, MD, [&](const ScalarField& h) { return partial(h, a); });
      const Eigen::MatrixXd GB = gU[a].asDiagonal() * fb.B;
      J1M -= map_columns(g, GB, [&](const ScalarField& h) { return partial(h, a); });
      J2U += gU[a].asDiagonal() * DaU;
    }
    const int nu = nU(), k = K();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size(), size());
    J.block(0, 0, nu, nu) = BU.transpose() * J1U / N;
    J.block(0, nu, nu, k) = BU.transpose() * J1M / N;
    J.block(nu, 0, k, nu) = fb.B.transpose() * J2U / N;
    J.block(nu, nu, k, k) = fb.B.transpose() * J2M / N;
    J.block(nu, nu + k, k, 1) = fb.B.transpose() * Eigen::VectorXd::Ones(n) / N;
    J.block(nu + k, nu, 1, k) = (fb.B.transpose() * Eigen::VectorXd::Ones(n) / N).transpose();
    // period column
    const Eigen::VectorXd Mt = as_vec(partial(s.M, d)), Ut = as_vec(partial(s.U, d));
    J.block(0, nu + k + 1, nu, 1) = BU.transpose() * (-Mt / (T * T)) / N;
    J.block(nu, nu + k + 1, k, 1) = fb.B.transpose() * (Ut / (T * T)) / N;
    // phase multiplier column
    J.block(0, nu + k + 2, nu, 1) = BU.transpose() * Ut / N;
    J.block(nu, nu + k + 2, k, 1) = fb.B.transpose() * Mt / N;
    // pinning and phase rows
    J.block(nu + k + 1, 0, 1, nu) = phiU.transpose();
    J.block(nu + k + 1, nu, 1, k) = phiM.transpose();
    J.block(nu + k + 2, 0, 1, nu) = psiU.transpose();
    J.block(nu + k + 2, nu, 1, k) = psiM.transpose();
    return J;
  }
};

}  // namespace

BifurcationBranch continue_branch(const Coupling& f, int d, const std::vector<double>& amplitudes,
                                  const ContinuationOptions& opt) {
  if (f.x_dependent()) throw DomainError("periodic problem needs an x-independent coupling");
  const double fp1 = f.df(kNoX, 1.0);
  BifurcationBranch br;
  br.fprime1 = fp1;
  br.Tbar = critical_period(fp1);
  br.d = d;
  if (opt.direction < 0 || opt.direction >= 4 * d) throw ConfigError("kernel direction must lie in [0, 4d)");
  const int axis = opt.direction / 4, xs = (opt.direction / 2) % 2, ts = opt.direction % 2;
  if ((xs && opt.n_x % 4) || (ts && opt.n_t % 4))
    throw ConfigError("sine directions need grid sizes divisible by 4");
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    if (!(amplitudes[i] >= 0.0)) throw ConfigError("amplitudes must be nonnegative");
    if (i > 0 && !(amplitudes[i] > amplitudes[i - 1])) throw ConfigError("amplitudes must be strictly increasing");
  }

  PinnedSystem P;
  P.g = space_time_grid(d, opt.n_x, opt.n_t);
  P.d = d;
  P.fb = even_axis_basis(P.g, axis);
  P.iu = without(P.fb.size(), P.fb.constant);
  P.BU = select_cols(P.fb.B, P.iu);
  P.DtB = map_columns(P.g, P.fb.B, [&](const ScalarField& h) { return partial(h, d); });
  P.LB = map_columns(P.g, P.fb.B, [&](const ScalarField& h) { return lap_x(h, d); });
  for (int a = 0; a < d; ++a) P.DaB.push_back(map_columns(P.g, P.fb.B, [&](const ScalarField& h) { return partial(h, a); }));
  P.f = &f;
  auto unit = [&](int tsel, Eigen::VectorXd& cu, Eigen::VectorXd& cm) {
    auto [v, mu] = kernel_vector(P.g, fp1, axis, 0, tsel);
    const double nrm = std::sqrt(mean(hadamard(v, v)) + mean(hadamard(mu, mu)));
    const Eigen::VectorXd a = P.fb.coefficients(v) / nrm;
    cu.resize(P.nU());
    for (int j = 0; j < P.nU(); ++j) cu(j) = a(P.iu[j]);
    cm = P.fb.coefficients(mu) / nrm;
  };
  unit(0, P.phiU, P.phiM);
  unit(1, P.psiU, P.psiM);

  Eigen::VectorXd X = Eigen::VectorXd::Zero(P.size());
  X(P.nU() + P.K() + 1) = br.Tbar;
  double prev_a = 0.0;
  for (double a : amplitudes) {
    BranchPoint pt;
    pt.amplitude = a;
    if (a == 0.0) {
      pt.state = trivial_periodic_state(d, opt.n_x, opt.n_t, br.Tbar);
      br.points.push_back(pt);
      continue;
    }
    if (prev_a == 0.0) {
      X.head(P.nU()) = a * P.phiU;
      X.segment(P.nU(), P.K()) = a * P.phiM;
    } else {
      X.head(P.nU() + P.K() + 1) *= a / prev_a;
    }
    P.amplitude = a;
    bool ok = false;
    double nodal = 0.0;
    try {
      Eigen::VectorXd R = P.residual(X, &nodal);
      for (int it = 0; it < opt.max_newton; ++it) {
        if (nodal <= opt.tol) {
          ok = true;
          break;
        }
        const Eigen::VectorXd dx = P.jacobian(X).fullPivLu().solve(R);
        double step = 1.0;
        const double r0 = R.norm();
        for (int ls = 0; ls < 20; ++ls) {
          const Eigen::VectorXd Xt = X - step * dx;
          try {
            double nt = 0.0;
            const Eigen::VectorXd Rt = P.residual(Xt, &nt);
            if (Rt.norm() < r0 || ls == 19) {
              X = Xt;
              R = Rt;
              nodal = nt;
              break;
            }
          } catch (const DomainError&) {
          }
          step *= 0.5;
        }
        ++pt.newton_iterations;
      }
      if (nodal <= opt.tol) ok = true;
    } catch (const DomainError& e) {
      br.message = e.what();
    }
    if (!ok) {
      br.truncated = true;
      if (br.message.empty()) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "Newton did not converge at amplitude %.3g; residual %.3e", a, nodal);
        br.message = buf;
      }
      break;
    }
    PeriodicState s = P.state(X);
    if (xs) {
      s.U = shift_axis(s.U, axis, opt.n_x / 4);
      s.M = shift_axis(s.M, axis, opt.n_x / 4);
    }
    if (ts) {
      s.U = shift_axis(s.U, d, opt.n_t / 4);
      s.M = shift_axis(s.M, d, opt.n_t / 4);
    }
    pt.state = std::move(s);
    pt.residual = eval_G(pt.state, f).max_norm;
    pt.phase_multiplier = X(P.nU() + P.K() + 2);
    pt.nonstationarity = nonstationarity(pt.state.M);
    br.points.push_back(std::move(pt));
    prev_a = a;
  }
  return br;
}

// ---- original variables ----

std::vector<double> OriginalPeriodic::times() const {
  const int nt = grid.n(grid.dim() - 1);
  std::vector<double> s(nt);
  for (int j = 0; j < nt; ++j) s[j] = T * j / nt;
  return s;
}

OriginalPeriodic map_to_original(const PeriodicState& s, const Coupling& f) {
  check_periodic_grid(s.grid);
  check_positive(s.M);
  OriginalPeriodic o;
  o.grid = s.grid;
  o.T = s.T;
  o.Hbar = -s.Hbar;
  o.f1 = fval(f, 1.0);
  o.m = s.M;
  o.u = s.U;
  const int t_axis = s.grid.dim() - 1;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    o.m[i] += 1.0;
    o.u[i] -= s.T * s.grid.coord(i, t_axis) * o.f1;
  }
  return o;
}

OriginalResidual periodic_residual(const OriginalPeriodic& o, const Coupling& f) {
  const TorusGrid& g = o.grid;
  const int d = g.dim() - 1;
  const std::size_t N = g.size();
  // u + s f(1) is periodic in s, so its derivative is spectral
  ScalarField per = o.u;
  for (std::size_t i = 0; i < N; ++i) per[i] += o.T * g.coord(i, d) * o.f1;
  const ScalarField us = partial(per, d) * (1.0 / o.T);
  const ScalarField ms = partial(o.m, d) * (1.0 / o.T);
  const VectorField gu = gradient(o.u, d);
  const ScalarField lu = laplacian(o.u, d), lm = laplacian(o.m, d);
  OriginalResidual r;
  r.hjb = ScalarField(g);
  r.fp = ms - lm;
  for (int a = 0; a < d; ++a) r.fp -= partial(hadamard(o.m, gu[a]), a);
  for (std::size_t i = 0; i < N; ++i) {
    double sq = 0.0;
    for (int a = 0; a < d; ++a) sq += gu[a][i] * gu[a][i];
    r.hjb[i] = -(us[i] - o.f1) - lu[i] + 0.5 * sq - fval(f, o.m[i]) - o.Hbar;
  }
  // mass of each time slice
  const int nt = g.n(d);
  std::vector<double> mass(nt, 0.0);
  for (std::size_t i = 0; i < N; ++i) mass[g.index_along(i, d)] += o.m[i];
  const double per_slice = static_cast<double>(N / nt);
  for (double m : mass) r.max_slice_mass_defect = std::max(r.max_slice_mass_defect, std::abs(m / per_slice - 1.0));
  r.max_norm = std::max(r.hjb.max_abs(), r.fp.max_abs());
  return r;
}

}  // namespace mfgvar
