#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace mfgvar;

namespace {

// sup_p q p - H(p) in 1-D: coarse scan, then ternary refinement of the concave objective
double sup_oracle(const HamiltonianModel& h, double q, double m) {
  const double x[1] = {0.3};
  auto obj = [&](double p) {
    const double pp[1] = {p};
    return q * p - h.H(x, pp, m);
  };
  double best = -40.0, bv = obj(best);
  for (int i = 0; i <= 80000; ++i) {
    const double p = -40.0 + 80.0 * i / 80000.0;
    if (const double v = obj(p); v > bv) {
      bv = v;
      best = p;
    }
  }
  double lo = best - 1e-3, hi = best + 1e-3;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (obj(a) < obj(b))
      lo = a;
    else
      hi = b;
  }
  return obj(0.5 * (lo + hi));
}

}  // namespace

TEST_SUITE("hamiltonian") {
  TEST_CASE("closed-form evaluations") {
    const double x2[2] = {0.1, 0.2};
    CongestionHamiltonian c0({0.0, 0.0}, 0.5, 2.0, Coupling::linear(1.0));
    const double p0[2] = {0.0, 0.0};
    CHECK(c0.H(x2, p0, 1.0) == doctest::Approx(-1.0));
    double g[2];
    c0.grad_p(x2, p0, 1.0, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);

    SeparableHamiltonian s(2, Coupling::linear(0.0));
    const double p34[2] = {3.0, 4.0};
    CHECK(s.H(x2, p34, 0.7) == doctest::Approx(12.5));

    CongestionHamiltonian c1({1.0, 0.0}, 0.5, 2.0, Coupling::linear(1.0));
    CHECK(c1.H(x2, p0, 4.0) == doctest::Approx(0.25 - 4.0));
  }

  TEST_CASE("F_H closed forms and normalization") {
    const double x1[1] = {0.0};
    SeparableHamiltonian s(1, Coupling::linear(1.0));
    const double p[1] = {1.5};
    CHECK(s.F_H(x1, p, 1.0) == doctest::Approx(1.5 * 1.5 / 2));
    CongestionHamiltonian c(std::vector<double>{0.0}, 0.5, 2.0, Coupling::linear(0.0));
    const double p1[1] = {1.0};
    CHECK(c.F_H(x1, p1, 1.0) == doctest::Approx(1.0));
  }

  TEST_CASE("construction guards") {
    CHECK_THROWS_AS(CongestionHamiltonian(std::vector<double>{0.0}, 0.5, 0.5, Coupling::linear(1.0)), ConfigError);
    CHECK_THROWS_AS(CongestionHamiltonian(std::vector<double>{0.0}, 1.0, 2.0, Coupling::linear(1.0)), ConfigError);
    CongestionHamiltonian c(std::vector<double>{0.0}, 0.5, 2.0, Coupling::linear(1.0));
    const double x[1] = {0.0}, p[1] = {1.0};
    CHECK_THROWS_AS(c.H(x, p, 0.0), DomainError);
    CHECK_THROWS_AS(c.H(x, p, -1.0), DomainError);
  }

  TEST_CASE("finite differences in p and m, and dF_H/dm = H") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1.5, 1.5), M(0.3, 2.5);
    Coupling f({0.2, 1.0, 0.3}, 0.0, {{0.2, 0, 1, false}, {0.1, 1, 2, true}});
    SeparableHamiltonian s(2, f, 2.0);
    SeparableHamiltonian s3(2, f, 3.0);
    CongestionHamiltonian c({0.4, -0.3}, 0.5, 2.0, f);
    CongestionHamiltonian c2({0.4, -0.3}, 1.5, 2.5, f);
    const HamiltonianModel* models[] = {&s, &s3, &c, &c2};
    const double h = 1e-5;
    for (const HamiltonianModel* H : models) {
      for (int k = 0; k < 40; ++k) {
        double x[2] = {std::abs(U(rng)) / 1.5, std::abs(U(rng)) / 1.5};
        double p[2] = {U(rng), U(rng)};
        const double m = M(rng);
        double g[2];
        H->grad_p(x, p, m, g);
        for (int a = 0; a < 2; ++a) {
          double pp[2] = {p[0], p[1]}, pm[2] = {p[0], p[1]};
          pp[a] += h;
          pm[a] -= h;
          CHECK(th::rel((H->H(x, pp, m) - H->H(x, pm, m)) / (2 * h), g[a]) < 1e-6);
        }
        CHECK(th::rel((H->H(x, p, m + h) - H->H(x, p, m - h)) / (2 * h), H->d_m(x, p, m)) < 1e-6);
        CHECK(th::rel((H->F_H(x, p, m + h) - H->F_H(x, p, m - h)) / (2 * h), H->H(x, p, m)) < 1e-6);
        CHECK(th::rel((H->d_m(x, p, m + h) - H->d_m(x, p, m - h)) / (2 * h), H->d_mm(x, p, m)) < 1e-6);
      }
    }
  }

  TEST_CASE("Legendre transform against a direct sup") {
    SeparableHamiltonian s(1, Coupling::linear(1.0));
    const double x[1] = {0.0}, q0[1] = {0.0};
    CHECK(s.legendre(x, q0, 2.0) == doctest::Approx(2.0));
    const double q[1] = {1.7};
    CHECK(s.L0(q) == doctest::Approx(1.7 * 1.7 / 2));

    CongestionHamiltonian c(std::vector<double>{0.3}, 0.5, 2.0, Coupling::linear(1.0));
    SeparableHamiltonian s3(1, Coupling::linear(1.0), 3.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> P(-2.0, 2.0), M(0.4, 2.0);
    const HamiltonianModel* models[] = {&s, &s3, &c};
    for (const HamiltonianModel* H : models)
      for (int k = 0; k < 100; ++k) {
        const double p[1] = {P(rng)};
        const double m = M(rng);
        double g[1];
        H->grad_p(x, p, m, g);
        // Fenchel-Young equality at q = grad_p H
        const double fy = p[0] * g[0] - H->H(x, p, m);
        CHECK(std::abs(H->legendre(x, g, m) - fy) < 1e-8);
        CHECK(std::abs(sup_oracle(*H, g[0], m) - fy) < 1e-8);
      }
  }

  TEST_CASE("monotonicity diagnostics") {
    std::vector<MonotonicitySample> samples;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.0), M(0.3, 2.0);
    for (int k = 0; k < 50; ++k) samples.push_back({{0.5}, {U(rng)}, M(rng)});
    SeparableHamiltonian up(1, Coupling::linear(1.0));
    auto r = check_monotonicity(up, samples);
    CHECK(r.convex_in_p);
    CHECK(r.decreasing_in_m);
    CHECK(r.max_dm_H == doctest::Approx(-1.0));

    SeparableHamiltonian down(1, Coupling::cubic_about_one(0.0, -6 * M_PI * M_PI, 1.0));
    auto rd = check_monotonicity(down, samples);
    CHECK_FALSE(rd.decreasing_in_m);
    CHECK(rd.max_dm_H > 0.0);

    CongestionHamiltonian c(std::vector<double>{0.2}, 0.5, 2.0, Coupling::linear(1.0));
    auto rc = check_monotonicity(c, samples);
    CHECK(rc.convex_in_p);
    CHECK(rc.decreasing_in_m);
    CHECK(rc.lions_condition);
  }

  TEST_CASE("coupling antiderivative and conjugate") {
    Coupling f({0.5, 2.0, 0.0, 1.0}, 1.0, {{0.3, 0, 1, false}});
    const double x[1] = {0.2};
    CHECK(f.F(x, 1.0) == 0.0);
    const double h = 1e-5;
    for (double m : {0.4, 1.0, 1.7}) {
      CHECK(th::rel((f.F(x, m + h) - f.F(x, m - h)) / (2 * h), f.f(x, m)) < 1e-8);
      // F*(f(m)) = m f(m) - F(m) for increasing f
      CHECK(std::abs(f.conjugate(x, f.f(x, m)) - (m * f.f(x, m) - f.F(x, m))) < 1e-8);
    }
  }
}
