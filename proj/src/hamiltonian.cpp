#include "mfgvar/hamiltonian.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mfgvar/spectral.hpp"

namespace mfgvar {

namespace {

double norm(cspan v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

// |v|^(e-2) with the limits at v = 0 that keep |v|^(e-2) v continuous for e > 1
double power_weight(double r, double e) {
  if (r > 0.0) return std::pow(r, e - 2.0);
  if (e == 2.0) return 1.0;
  if (e > 2.0) return 0.0;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

HamiltonianModel::HamiltonianModel(int dim, Coupling c, double m_min)
    : dim_(dim), coupling_(std::move(c)), m_min_(m_min) {
  if (dim < 1) throw ConfigError("Hamiltonian dimension must be positive");
  if (!(m_min > 0.0)) throw ConfigError("m_min must be positive");
}

void HamiltonianModel::check_m(double m) const {
  if (!(m >= m_min_)) throw DomainError("density value " + std::to_string(m) + " below positivity floor");
}

// ---- separable ----

SeparableHamiltonian::SeparableHamiltonian(int dim, Coupling c, double beta, double m_min)
    : HamiltonianModel(dim, std::move(c), m_min), beta_(beta) {
  if (!(beta > 1.0)) throw ConfigError("kinetic exponent beta must satisfy beta > 1");
}

double SeparableHamiltonian::H0(cspan p) const { return std::pow(norm(p), beta_) / beta_; }

void SeparableHamiltonian::grad_H0(cspan p, mspan out) const {
  const double w = power_weight(norm(p), beta_);
  for (int a = 0; a < dim_; ++a) out[a] = (p[a] == 0.0 ? 0.0 : w * p[a]);
}

double SeparableHamiltonian::L0(cspan q) const {
  const double bc = beta_ / (beta_ - 1.0);
  return std::pow(norm(q), bc) / bc;
}

double SeparableHamiltonian::H(cspan x, cspan p, double m) const {
  check_m(m);
  return H0(p) - coupling_.f(x, m);
}

void SeparableHamiltonian::grad_p(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  grad_H0(p, out);
}

double SeparableHamiltonian::d_m(cspan x, cspan, double m) const {
  check_m(m);
  return -coupling_.df(x, m);
}

double SeparableHamiltonian::d_mm(cspan x, cspan, double m) const {
  check_m(m);
  return -coupling_.d2f(x, m);
}

void SeparableHamiltonian::hess_pp(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  const double r = norm(p);
  const double w = power_weight(r, beta_);
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b) {
      double v = (a == b) ? w : 0.0;
      if (r > 0.0 && beta_ != 2.0) v += w * (beta_ - 2.0) * p[a] * p[b] / (r * r);
      out[a * dim_ + b] = v;
    }
}

void SeparableHamiltonian::d_m_grad_p(cspan, cspan, double m, mspan out) const {
  check_m(m);
  for (int a = 0; a < dim_; ++a) out[a] = 0.0;
}

double SeparableHamiltonian::F_H(cspan x, cspan p, double m) const {
  check_m(m);
  return m * H0(p) - coupling_.F(x, m);
}

void SeparableHamiltonian::grad_p_F_H(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  grad_H0(p, out);
  for (int a = 0; a < dim_; ++a) out[a] *= m;
}

double SeparableHamiltonian::legendre(cspan x, cspan q, double m) const {
  check_m(m);
  return L0(q) + coupling_.f(x, m);
}

// ---- congestion ----

CongestionHamiltonian::CongestionHamiltonian(std::vector<double> Q, double alpha, double gamma, Coupling c,
                                             double m_min)
    : HamiltonianModel(static_cast<int>(Q.size()), std::move(c), m_min),
      Q_(std::move(Q)), alpha_(alpha), gamma_(gamma) {
  if (!(gamma >= 1.0)) throw ConfigError("congestion exponent must satisfy gamma >= 1 (got " + std::to_string(gamma) + ")");
  if (!(alpha >= 0.0)) throw ConfigError("congestion exponent must satisfy alpha >= 0");
  if (alpha == 1.0) throw ConfigError("alpha = 1 is excluded: the (1-alpha)^-1 factor of F_H is singular");
  gamma_conj_ = gamma == 1.0 ? std::numeric_limits<double>::infinity() : gamma / (gamma - 1.0);
}

double CongestionHamiltonian::shifted_norm(cspan p) const {
  double s = 0.0;
  for (int a = 0; a < dim_; ++a) s += (p[a] + Q_[a]) * (p[a] + Q_[a]);
  return std::sqrt(s);
}

double CongestionHamiltonian::H(cspan x, cspan p, double m) const {
  check_m(m);
  return std::pow(shifted_norm(p), gamma_) / (gamma_ * std::pow(m, alpha_)) - coupling_.f(x, m);
}

void CongestionHamiltonian::grad_p(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  const double r = shifted_norm(p);
  const double w = r > 0.0 ? power_weight(r, gamma_) * std::pow(m, -alpha_) : 0.0;
  for (int a = 0; a < dim_; ++a) out[a] = w * (p[a] + Q_[a]);
}

double CongestionHamiltonian::d_m(cspan x, cspan p, double m) const {
  check_m(m);
  return -alpha_ * std::pow(shifted_norm(p), gamma_) / (gamma_ * std::pow(m, alpha_ + 1.0)) - coupling_.df(x, m);
}

double CongestionHamiltonian::d_mm(cspan x, cspan p, double m) const {
  check_m(m);
  return alpha_ * (alpha_ + 1.0) * std::pow(shifted_norm(p), gamma_) / (gamma_ * std::pow(m, alpha_ + 2.0)) -
         coupling_.d2f(x, m);
}

void CongestionHamiltonian::hess_pp(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  const double r = shifted_norm(p);
  const double w = power_weight(r, gamma_) * std::pow(m, -alpha_);
  for (int a = 0; a < dim_; ++a)
    for (int b = 0; b < dim_; ++b) {
      double v = (a == b) ? w : 0.0;
      if (r > 0.0 && gamma_ != 2.0) v += w * (gamma_ - 2.0) * (p[a] + Q_[a]) * (p[b] + Q_[b]) / (r * r);
      out[a * dim_ + b] = v;
    }
}

void CongestionHamiltonian::d_m_grad_p(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  const double r = shifted_norm(p);
  const double w = r > 0.0 ? -alpha_ * power_weight(r, gamma_) * std::pow(m, -alpha_ - 1.0) : 0.0;
  for (int a = 0; a < dim_; ++a) out[a] = w * (p[a] + Q_[a]);
}

double CongestionHamiltonian::F_H(cspan x, cspan p, double m) const {
  check_m(m);
  return std::pow(m, 1.0 - alpha_) * std::pow(shifted_norm(p), gamma_) / ((1.0 - alpha_) * gamma_) -
         coupling_.F(x, m);
}

void CongestionHamiltonian::grad_p_F_H(cspan, cspan p, double m, mspan out) const {
  check_m(m);
  const double r = shifted_norm(p);
  const double w = r > 0.0 ? power_weight(r, gamma_) * std::pow(m, 1.0 - alpha_) / (1.0 - alpha_) : 0.0;
  for (int a = 0; a < dim_; ++a) out[a] = w * (p[a] + Q_[a]);
}

double CongestionHamiltonian::legendre(cspan x, cspan q, double m) const {
  check_m(m);
  if (gamma_ == 1.0) throw DomainError("Legendre transform unsupported for gamma = 1 (not strictly convex)");
  double qQ = 0.0;
  for (int a = 0; a < dim_; ++a) qQ += q[a] * Q_[a];
  const double gc = gamma_conj_;
  return std::pow(m, alpha_ * (gc - 1.0)) * std::pow(norm(q), gc) / gc - qQ + coupling_.f(x, m);
}

// ---- monotonicity diagnostics ----

MonotonicityReport check_monotonicity(const HamiltonianModel& h, const std::vector<MonotonicitySample>& samples,
                                      double tol) {
  MonotonicityReport rep;
  rep.min_hess_eig = std::numeric_limits<double>::infinity();
  rep.max_dm_H = -std::numeric_limits<double>::infinity();
  rep.min_lions_eig = std::numeric_limits<double>::infinity();
  const int d = h.dim();
  std::vector<double> hess(d * d), dmg(d);
  for (const auto& s : samples) {
    h.hess_pp(s.x, s.p, s.m, hess);
    h.d_m_grad_p(s.x, s.p, s.m, dmg);
    const double dm = h.d_m(s.x, s.p, s.m);
    Eigen::MatrixXd Hm(d, d), Lm(d + 1, d + 1);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) Hm(a, b) = hess[a * d + b];
    Lm.topLeftCorner(d, d) = 2.0 * Hm;
    for (int a = 0; a < d; ++a) Lm(a, d) = Lm(d, a) = dmg[a];
    Lm(d, d) = -2.0 / s.m * dm;
    rep.min_hess_eig = std::min(rep.min_hess_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Hm).eigenvalues()(0));
    rep.min_lions_eig = std::min(rep.min_lions_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Lm).eigenvalues()(0));
    rep.max_dm_H = std::max(rep.max_dm_H, dm);
    ++rep.samples;
  }
  rep.convex_in_p = rep.min_hess_eig >= -tol;
  rep.decreasing_in_m = rep.max_dm_H <= tol;
  rep.lions_condition = rep.min_lions_eig >= -tol;
  return rep;
}

}  // namespace mfgvar
