#include <functional>

#include "doctest.h"
#include "helpers.hpp"

using namespace mfgvar;

namespace {

// Richardson-extrapolated central difference of t -> phi(t) at 0
double slope(const std::function<double(double)>& phi, double h) {
  auto D = [&](double s) { return (phi(s) - phi(-s)) / (2 * s); };
  return (4 * D(h / 2) - D(h)) / 3;
}

DynamicState random_dynamic(const TorusGrid& g, int N, double T, std::uint64_t seed) {
  SpaceTimeGrid st(g, N, T);
  DynamicState s = make_dynamic_state(st, 0.3, th::density(g, seed), th::rnd(g, seed + 1, 0.4));
  for (int j = 0; j < N + 2; ++j) s.m[j] = th::density(g, seed + 10 + j, 0.4);
  s.m[0] = s.m0;
  for (int j = 0; j < N + 1; ++j) s.u[j] = th::rnd(g, seed + 100 + j, 0.6);
  return s;
}

DynamicState axpy(const DynamicState& s, double t, const std::vector<ScalarField>& dm,
                  const std::vector<ScalarField>& du) {
  DynamicState r = s;
  for (std::size_t j = 0; j < dm.size(); ++j) r.m[j] += dm[j] * t;
  for (std::size_t j = 0; j < du.size(); ++j) r.u[j] += du[j] * t;
  return r;
}

StationaryState random_stationary(const TorusGrid& g, std::uint64_t seed, double eps) {
  StationaryState s;
  s.grid = g;
  s.eps = eps;
  s.m = th::density(g, seed, 0.4);
  s.u = th::rnd(g, seed + 1, 0.6);
  s.Hbar = 0.37;
  return s;
}

}  // namespace

TEST_SUITE("functionals") {
  TEST_CASE("constant state values under the F(1) = 0 normalization") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st(g, 8, 1.0);
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    DynamicState s = make_dynamic_state(st, 1.0, ScalarField(g, 1.0), ScalarField(g));
    CHECK(psi2(s, h).value == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(psi1(s, h).value) < 1e-14);
    CHECK(psi1(s, h).value_raw == doctest::Approx(-0.5).epsilon(1e-14));

    StationaryState ss{g, 1.0, ScalarField(g, 1.0), ScalarField(g), 0.0};
    CHECK(psi2_hat(ss, h).value == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(*psi_tilde1(ss, h).dHbar == 0.0);
    CHECK(psi_tilde1(ss, h).value == psi1_hat(ss, h).value);
  }

  TEST_CASE("two displayed forms agree") {
    TorusGrid g(2, 8);
    CongestionHamiltonian c({0.3, 0.1}, 0.5, 2.0, Coupling({0.0, 1.0}, 0.0, {{0.1, 0, 1, false}}));
    SeparableHamiltonian s(2, Coupling::linear(1.0));
    for (const HamiltonianModel* h : {static_cast<const HamiltonianModel*>(&c), static_cast<const HamiltonianModel*>(&s)}) {
      DynamicState d = random_dynamic(g, 6, 0.8, 3);
      CHECK(std::abs(psi1(d, *h).value - psi1(d, *h).value_alt) < 1e-12);
      CHECK(std::abs(psi2(d, *h).value - psi2(d, *h).value_alt) < 1e-12);
      StationaryState st = random_stationary(g, 5, 0.4);
      CHECK(std::abs(psi1_hat(st, *h).value - psi1_hat(st, *h).value_alt) < 1e-12);
    }
  }

  TEST_CASE("dynamic derivatives against finite differences") {
    TorusGrid g(1, 16);
    const int N = 8;
    SeparableHamiltonian sep(1, Coupling({0.1, 1.0, 0.5}, 0.0, {{0.2, 0, 1, true}}));
    CongestionHamiltonian con(std::vector<double>{0.4}, 0.5, 2.0, Coupling::linear(1.0));
    for (const HamiltonianModel* h : {static_cast<const HamiltonianModel*>(&sep), static_cast<const HamiltonianModel*>(&con)}) {
      DynamicState s = random_dynamic(g, N, 1.0, 11);
      std::vector<ScalarField> dm(N + 2, ScalarField(g)), du(N + 1);
      for (int j = 1; j < N + 2; ++j) dm[j] = th::rnd(g, 300 + j, 0.2);
      for (int j = 0; j < N + 1; ++j) du[j] = th::rnd(g, 400 + j, 0.5);
      for (auto fn : {psi1, psi2}) {
        const FunctionalReport r = fn(s, *h);
        const double pred = pair_m(s.grid, r.dm, dm) + pair_u(s.grid, r.du, du);
        const double fd = slope([&](double t) { return fn(axpy(s, t, dm, du), *h).value; }, 1e-3);
        CHECK(th::rel(fd, pred) < 1e-6);
      }
    }
  }

  TEST_CASE("stationary derivatives against finite differences") {
    TorusGrid g(2, 12);
    CongestionHamiltonian con({0.5, -0.2}, 0.5, 2.0, Coupling({0.0, 1.0}, 0.0, {{0.1, 0, 1, false}}));
    CongestionHamiltonian con2({0.5, -0.2}, 1.5, 2.0, Coupling::linear(1.0));
    SeparableHamiltonian sep(2, Coupling::linear(1.0));
    using Fn = FunctionalReport (*)(const StationaryState&, const HamiltonianModel&);
    for (const HamiltonianModel* h : {static_cast<const HamiltonianModel*>(&con), static_cast<const HamiltonianModel*>(&con2),
                                      static_cast<const HamiltonianModel*>(&sep)})
      for (Fn fn : {Fn(psi1_hat), Fn(psi2_hat), Fn(psi_tilde1), Fn(psi_tilde2)}) {
        StationaryState s = random_stationary(g, 21, 0.2);
        const ScalarField dm = th::rnd(g, 22, 0.3), du = th::rnd(g, 23, 0.5);
        const double dH = 0.6;
        const FunctionalReport r = fn(s, *h);
        double pred = inner(r.dm[0], dm) + inner(r.du[0], du);
        if (r.dHbar) pred += *r.dHbar * dH;
        const double fd = slope(
            [&](double t) {
              StationaryState p = s;
              p.m += dm * t;
              p.u += du * t;
              p.Hbar += dH * t;
              return fn(p, *h).value;
            },
            1e-3);
        CHECK(th::rel(fd, pred) < 1e-6);
      }
  }

  TEST_CASE("concave in m, convex in u for a monotone model") {
    TorusGrid g(1, 16);
    SeparableHamiltonian h(1, Coupling({0.0, 1.0, 0.5}));
    for (std::uint64_t k = 0; k < 10; ++k) {
      DynamicState a = random_dynamic(g, 6, 1.0, 50 + 7 * k), b = random_dynamic(g, 6, 1.0, 500 + 3 * k);
      DynamicState mid = a;
      for (std::size_t j = 0; j < a.m.size(); ++j) mid.m[j] = (a.m[j] + b.m[j]) * 0.5;
      // same u: concavity in m of psi1
      DynamicState bm = a;
      bm.m = b.m;
      CHECK(psi1(mid, h).value >= 0.5 * (psi1(a, h).value + psi1(bm, h).value) - 1e-12);
      // same m: convexity in u of psi2
      DynamicState mu = a, bu = a;
      bu.u = b.u;
      for (std::size_t j = 0; j < a.u.size(); ++j) mu.u[j] = (a.u[j] + b.u[j]) * 0.5;
      CHECK(psi2(mu, h).value <= 0.5 * (psi2(a, h).value + psi2(bu, h).value) + 1e-12);
    }
  }

  TEST_CASE("separable: psi2 - psi1 does not depend on u") {
    TorusGrid g(1, 16);
    SeparableHamiltonian h(1, Coupling({0.2, 1.0, 0.3}, 0.0, {{0.1, 0, 2, false}}));
    DynamicState s = random_dynamic(g, 6, 1.0, 77);
    const auto a = psi1(s, h), b = psi2(s, h);
    for (std::size_t j = 0; j < a.du.size(); ++j) CHECK((a.du[j] - b.du[j]).max_abs() == 0.0);
  }

  TEST_CASE("congestion relation between psi1_hat and psi2_hat") {
    TorusGrid g(2, 12);
    const double alpha = 0.5;
    Coupling f({0.1, 1.0, 0.4}, 0.0, {{0.2, 1, 1, false}});
    CongestionHamiltonian h({0.3, 0.6}, alpha, 2.5, f);
    std::vector<double> x(2);
    for (std::uint64_t k = 0; k < 10; ++k) {
      StationaryState s = random_stationary(g, 900 + k, 0.0);
      double extra = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.point(i, x);
        const double m = s.m[i];
        extra += (m * f.f(x, m) / (1 - alpha) - f.F(x, m)) * g.cell_volume();
      }
      CHECK(std::abs(psi1_hat(s, h).value - (psi2_hat(s, h).value / (1 - alpha) + extra)) < 1e-10);
    }
  }

  TEST_CASE("separable Hbar expressions through F*") {
    TorusGrid g(1, 32);
    Coupling f({0.3, 1.0, 0.0, 0.5}, 1.0, {{0.2, 0, 1, false}});
    SeparableHamiltonian h(1, f);
    std::vector<double> x(1);
    auto check = [&](const StationaryState& s) {
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.point(i, x);
        const double m = s.m[i];
        a += (m * f.f(x, m) - f.F(x, m)) * g.cell_volume();
        b += f.conjugate(x, f.f(x, m)) * g.cell_volume();
      }
      const double p1 = psi1_hat(s, h).value, p2 = psi2_hat(s, h).value;
      CHECK(std::abs(p2 - (p1 - a)) < 1e-12);
      CHECK(std::abs(p2 - (p1 - b)) < 1e-8);
    };
    // the constant solution of the x-independent problem
    SeparableHamiltonian h0(1, Coupling::linear(1.0));
    StationaryState triv{g, 1.0, ScalarField(g, 1.0), ScalarField(g), -1.0};
    CHECK(psi2_hat(triv, h0).value == doctest::Approx(triv.Hbar));
    for (std::uint64_t k = 0; k < 5; ++k) check(random_stationary(g, 60 + k, 1.0));
  }

  TEST_CASE("social cost closed forms") {
    TorusGrid g(1, 8);
    const double T = 1.5;
    SpaceTimeGrid st(g, 6, T);
    DynamicState s = make_dynamic_state(st, 1.0, ScalarField(g, 1.0), ScalarField(g));
    std::vector<VectorField> r(6, VectorField(g));
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    CHECK(social_cost(s, r, h) == doctest::Approx(1.0 * T).epsilon(1e-14));
    SeparableHamiltonian zero(1, Coupling::linear(0.0));
    CHECK(social_cost(s, r, zero) == 0.0);
  }

  TEST_CASE("flux functional: zero state, convexity, gradient, J = -psi1_hat") {
    TorusGrid g(2, 12);
    CongestionHamiltonian h({0.8, -0.4}, 0.5, 2.0, Coupling({0.0, 1.0}, 0.0, {{0.1, 0, 1, false}}));
    CongestionHamiltonian hx({0.8, -0.4}, 0.5, 2.0, Coupling::linear(1.0));
    CHECK(std::abs(phi_bb(ScalarField(g, 1.0), VectorField(g), hx).value) < 1e-15);

    auto rand_w = [&](std::uint64_t seed) {
      VectorField w(g);
      w[0] = th::rnd(g, seed, 1.0);
      w[1] = th::rnd(g, seed + 1, 1.0);
      return w;
    };
    for (std::uint64_t k = 0; k < 20; ++k) {
      const ScalarField m1 = th::density(g, 100 + k, 0.5), m2 = th::density(g, 200 + k, 0.5);
      const VectorField w1 = rand_w(300 + 2 * k), w2 = rand_w(400 + 2 * k);
      const double mid = phi_bb((m1 + m2) * 0.5, (w1 + w2) * 0.5, h).value;
      CHECK(mid <= 0.5 * (phi_bb(m1, w1, h).value + phi_bb(m2, w2, h).value) + 1e-12);
    }

    const ScalarField m = th::density(g, 7, 0.5), dm = th::rnd(g, 8, 0.3);
    const VectorField w = rand_w(9), dw = rand_w(11);
    const FunctionalReport r = phi_bb(m, w, h);
    const double pred = inner(r.dm[0], dm) + inner(*r.dw, dw);
    const double fd = slope([&](double t) { return phi_bb(m + dm * t, w + dw * t, h).value; }, 1e-3);
    CHECK(th::rel(fd, pred) < 1e-6);

    CongestionHamiltonian h2({0.8, -0.4}, 1.5, 2.0, Coupling::linear(1.0));
    for (std::uint64_t k = 0; k < 50; ++k) {
      StationaryState s = random_stationary(g, 1000 + k, 0.0);
      CHECK(std::abs(j_functional(s, h2) + psi1_hat(s, h2).value) < 1e-10);
      CHECK(std::abs(j_functional(s, h) + psi1_hat(s, h).value) < 1e-10);
    }
  }
}
