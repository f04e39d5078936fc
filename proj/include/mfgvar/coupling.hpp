#pragma once

#include <span>
#include <vector>

namespace mfgvar {

// f(x,m) = sum_i c_i (m - center)^i + sum_j a_j trig_j(x), where each trig
// term is cos or sin of 2 pi k x_axis. F is the m-antiderivative with F(x,1) = 0.
class Coupling {
 public:
  struct TrigTerm {
    double amplitude = 0.0;
    int axis = 0;
    int k = 1;
    bool sine = false;
  };

  Coupling() = default;
  Coupling(std::vector<double> poly, double center = 0.0, std::vector<TrigTerm> trig = {});

  static Coupling linear(double slope, double offset = 0.0);
  // f(1) + f'(1)(m-1) + c3 (m-1)^3
  static Coupling cubic_about_one(double f1, double fprime1, double c3);

  double f(std::span<const double> x, double m) const;
  double df(std::span<const double> x, double m) const;
  double d2f(std::span<const double> x, double m) const;
  double F(std::span<const double> x, double m) const;
  // F without the F(x,1) = 0 shift
  double F_raw(std::span<const double> x, double m) const;
  // sup_{z >= 0} s z - F(x,z), computed by a 1-D root solve of f(x,z) = s
  double conjugate(std::span<const double> x, double s) const;

  bool x_dependent() const { return !trig_.empty(); }
  const std::vector<double>& poly() const { return poly_; }
  double center() const { return center_; }
  const std::vector<TrigTerm>& trig() const { return trig_; }

 private:
  double trig_sum(std::span<const double> x) const;
  std::vector<double> poly_{0.0};
  double center_ = 0.0;
  std::vector<TrigTerm> trig_;
};

}  // namespace mfgvar
