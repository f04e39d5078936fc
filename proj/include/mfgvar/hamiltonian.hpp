#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfgvar/coupling.hpp"

namespace mfgvar {

using cspan = std::span<const double>;
using mspan = std::span<double>;

// H(x,p,m) with the derivatives the solvers and functionals need. Every
// evaluation throws DomainError when m drops below the configured floor.
class HamiltonianModel {
 public:
  explicit HamiltonianModel(int dim, Coupling c, double m_min);
  virtual ~HamiltonianModel() = default;

  int dim() const { return dim_; }
  const Coupling& coupling() const { return coupling_; }
  double m_min() const { return m_min_; }
  virtual std::string kind() const = 0;

  virtual double H(cspan x, cspan p, double m) const = 0;
  virtual void grad_p(cspan x, cspan p, double m, mspan out) const = 0;
  virtual double d_m(cspan x, cspan p, double m) const = 0;
  virtual double d_mm(cspan x, cspan p, double m) const = 0;
  // d x d, row-major
  virtual void hess_pp(cspan x, cspan p, double m, mspan out) const = 0;
  virtual void d_m_grad_p(cspan x, cspan p, double m, mspan out) const = 0;

  // m-antiderivative of H, normalized through F(x,1) = 0
  virtual double F_H(cspan x, cspan p, double m) const = 0;
  virtual void grad_p_F_H(cspan x, cspan p, double m, mspan out) const = 0;

  // L(x,q,m) = sup_p q.p - H(x,p,m)
  virtual double legendre(cspan x, cspan q, double m) const = 0;

  void check_m(double m) const;

 protected:
  int dim_;
  Coupling coupling_;
  double m_min_;
};

// H = |p|^beta / beta - f(x,m)
class SeparableHamiltonian final : public HamiltonianModel {
 public:
  SeparableHamiltonian(int dim, Coupling c, double beta = 2.0, double m_min = 1e-10);
  std::string kind() const override { return "separable"; }
  double beta() const { return beta_; }

  double H0(cspan p) const;
  void grad_H0(cspan p, mspan out) const;
  double L0(cspan q) const;

  double H(cspan x, cspan p, double m) const override;
  void grad_p(cspan x, cspan p, double m, mspan out) const override;
  double d_m(cspan x, cspan p, double m) const override;
  double d_mm(cspan x, cspan p, double m) const override;
  void hess_pp(cspan x, cspan p, double m, mspan out) const override;
  void d_m_grad_p(cspan x, cspan p, double m, mspan out) const override;
  double F_H(cspan x, cspan p, double m) const override;
  void grad_p_F_H(cspan x, cspan p, double m, mspan out) const override;
  double legendre(cspan x, cspan q, double m) const override;

 private:
  double beta_;
};

// H = |p+Q|^gamma / (gamma m^alpha) - f(x,m)
class CongestionHamiltonian final : public HamiltonianModel {
 public:
  CongestionHamiltonian(std::vector<double> Q, double alpha, double gamma, Coupling c, double m_min = 1e-10);
  std::string kind() const override { return "congestion"; }
  const std::vector<double>& Q() const { return Q_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }
  double gamma_conj() const { return gamma_conj_; }

  double H(cspan x, cspan p, double m) const override;
  void grad_p(cspan x, cspan p, double m, mspan out) const override;
  double d_m(cspan x, cspan p, double m) const override;
  double d_mm(cspan x, cspan p, double m) const override;
  void hess_pp(cspan x, cspan p, double m, mspan out) const override;
  void d_m_grad_p(cspan x, cspan p, double m, mspan out) const override;
  double F_H(cspan x, cspan p, double m) const override;
  void grad_p_F_H(cspan x, cspan p, double m, mspan out) const override;
  double legendre(cspan x, cspan q, double m) const override;

 private:
  double shifted_norm(cspan p) const;
  std::vector<double> Q_;
  double alpha_, gamma_, gamma_conj_;
};

struct MonotonicitySample {
  std::vector<double> x, p;
  double m = 1.0;
};

struct MonotonicityReport {
  double min_hess_eig = 0.0;     // min over samples of the smallest eigenvalue of D2_pp H
  double max_dm_H = 0.0;         // max over samples of dH/dm
  double min_lions_eig = 0.0;    // min eigenvalue of the Lions block matrix
  bool convex_in_p = false;
  bool decreasing_in_m = false;
  bool lions_condition = false;
  std::size_t samples = 0;
};

MonotonicityReport check_monotonicity(const HamiltonianModel& h, const std::vector<MonotonicitySample>& samples,
                                      double tol = 1e-12);

}  // namespace mfgvar
