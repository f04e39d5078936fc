#include "mfgvar/coupling.hpp"

#include <cmath>
#include <numbers>

#include "mfgvar/spectral.hpp"

namespace mfgvar {

Coupling::Coupling(std::vector<double> poly, double center, std::vector<TrigTerm> trig)
    : poly_(std::move(poly)), center_(center), trig_(std::move(trig)) {
  if (poly_.empty()) poly_.push_back(0.0);
}

Coupling Coupling::linear(double slope, double offset) { return Coupling({offset, slope}); }

Coupling Coupling::cubic_about_one(double f1, double fprime1, double c3) {
  return Coupling({f1, fprime1, 0.0, c3}, 1.0);
}

double Coupling::trig_sum(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trig_) {
    if (t.axis < 0 || t.axis >= static_cast<int>(x.size())) throw DomainError("coupling trig axis out of range");
    const double th = 2.0 * std::numbers::pi * t.k * x[t.axis];
    s += t.amplitude * (t.sine ? std::sin(th) : std::cos(th));
  }
  return s;
}

double Coupling::f(std::span<const double> x, double m) const {
  const double y = m - center_;
  double v = 0.0;
  for (auto it = poly_.rbegin(); it != poly_.rend(); ++it) v = v * y + *it;
  return v + trig_sum(x);
}

double Coupling::df(std::span<const double>, double m) const {
  const double y = m - center_;
  double v = 0.0;
  for (std::size_t i = poly_.size(); i-- > 1;) v = v * y + static_cast<double>(i) * poly_[i];
  return v;
}

double Coupling::d2f(std::span<const double>, double m) const {
  const double y = m - center_;
  double v = 0.0;
  for (std::size_t i = poly_.size(); i-- > 2;) v = v * y + static_cast<double>(i * (i - 1)) * poly_[i];
  return v;
}

double Coupling::F_raw(std::span<const double> x, double m) const {
  const double y = m - center_;
  double v = 0.0;
  for (std::size_t i = poly_.size(); i-- > 0;) v = v * y + poly_[i] / static_cast<double>(i + 1);
  return v * y + trig_sum(x) * m;
}

double Coupling::F(std::span<const double> x, double m) const { return F_raw(x, m) - F_raw(x, 1.0); }

double Coupling::conjugate(std::span<const double> x, double s) const {
  // The maximizer of s z - F(z) over z >= 0 solves f(z) = s; for increasing f
  // it is unique. If f(0) >= s the sup sits at z = 0.
  if (f(x, 0.0) >= s) return -F(x, 0.0);
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (f(x, hi) < s) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw DomainError("conjugate: f does not reach the requested level");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(x, mid) < s ? lo : hi) = mid;
  }
  double z = 0.5 * (lo + hi);
  // polish with Newton where f' is informative
  for (int it = 0; it < 3; ++it) {
    const double d = df(x, z);
    if (d <= 0.0) break;
    const double zn = z - (f(x, z) - s) / d;
    if (zn < lo || zn > hi) break;
    z = zn;
  }
  return s * z - F(x, z);
}

}  // namespace mfgvar
