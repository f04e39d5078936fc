#include "doctest.h"
#include "helpers.hpp"

using namespace mfgvar;

namespace {

ScalarField cos_bump(const TorusGrid& g, double amp) {
  return ScalarField::sample(g, [amp](auto x) { return 1.0 + amp * std::cos(2 * M_PI * x[0]); });
}

double max_abs(const std::vector<ScalarField>& v) {
  double r = 0.0;
  for (const auto& f : v) r = std::max(r, f.max_abs());
  return r;
}

double max_diff(const std::vector<ScalarField>& a, const std::vector<ScalarField>& b) {
  double r = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) r = std::max(r, (a[k] - b[k]).max_abs());
  return r;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("trivial solutions") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 16, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    const ScalarField one(g, 1.0), zero(g);
    // H(x,0,1) = -f(1) = -1, so u_t = -1 and u = T - t
    auto mfg = solve_mfg(h, st, 1.0, one, zero);
    REQUIRE(mfg.converged);
    for (int j = 0; j <= 16; ++j) {
      const double t = j / 16.0;
      CHECK((mfg.state.u[j] - ScalarField(g, 1.0 - t)).max_abs() < 1e-10);
    }
    for (const auto& m : mfg.state.m) CHECK((m - one).max_abs() < 1e-10);
    // the planner adds m f'(m) = 1
    auto mfc = solve_mfc(h, st, 1.0, one, zero);
    REQUIRE(mfc.converged);
    CHECK((mfc.state.u[0] - ScalarField(g, 2.0)).max_abs() < 1e-10);
  }

  TEST_CASE("solved MFG is a critical point of psi1") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 32, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    auto r = solve_mfg(h, st, 1.0, cos_bump(g, 0.2), ScalarField(g));
    REQUIRE(r.converged);
    CHECK(mass_drift(r.state) < 1e-12);
    auto p1 = psi1(r.state, h), p2 = psi2(r.state, h);
    auto R = dynamic_residual(r.state, h, DynamicSystem::MFG);
    CHECK(max_abs(p1.dm) <= 1e-7);
    CHECK(max_abs(p2.du) <= 1e-7);
    CHECK(max_diff(p1.dm, R.hjb) <= 1e-12);
    CHECK(max_diff(p1.du, R.fp) <= 1e-12);

    // away from the solution the identity still holds
    DynamicState s = r.state;
    for (std::size_t k = 1; k < s.m.size(); ++k) s.m[k] += th::rnd(g, 100 + k, 0.05);
    for (std::size_t k = 0; k + 1 < s.u.size(); ++k) s.u[k] += th::rnd(g, 300 + k, 0.2);
    auto q = psi1(s, h);
    auto Rs = dynamic_residual(s, h, DynamicSystem::MFG);
    CHECK(max_abs(q.dm) > 1e-3);
    CHECK(max_diff(q.dm, Rs.hjb) <= 1e-12);
    CHECK(max_diff(q.du, Rs.fp) <= 1e-12);
  }

  TEST_CASE("solved MFC is a critical point of psi2") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 32, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    auto r = solve_mfc(h, st, 0.5, cos_bump(g, 0.3), ScalarField(g));
    REQUIRE(r.converged);
    auto p2 = psi2(r.state, h);
    auto R = dynamic_residual(r.state, h, DynamicSystem::MFC);
    CHECK(max_abs(p2.dm) <= 1e-7);
    CHECK(max_abs(p2.du) <= 1e-7);
    CHECK(max_diff(p2.dm, R.hjb) <= 1e-12);
    CHECK(max_diff(p2.du, R.fp) <= 1e-12);
  }

  TEST_CASE("social cost identity") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 32, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    CongestionHamiltonian c(std::vector<double>{0.3}, 0.5, 2.0, Coupling::linear(1.0));
    const HamiltonianModel* models[] = {&h, &c};
    for (const HamiltonianModel* H : models)
      for (auto sys : {DynamicSystem::MFG, DynamicSystem::MFC}) {
        auto r = solve_dynamic(*H, st, 0.5, cos_bump(g, 0.2), ScalarField(g), sys);
        REQUIRE(r.converged);
        const double S = social_cost(r.state, optimal_control(r.state, *H), *H);
        CHECK(std::abs(S + psi2(r.state, *H).value) <= 1e-8);
      }
  }

  TEST_CASE("Hamiltonian is conserved along trajectories") {
    TorusGrid g(1, 32);
    SpaceTimeGrid st{g, 128, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    auto r = solve_mfg(h, st, 0.1, cos_bump(g, 0.6), ScalarField(g));
    REQUIRE(r.converged);
    auto hs = hamiltonian_along(r.state, h);
    double mean = 0.0;
    for (double v : hs) mean += v;
    mean /= static_cast<double>(hs.size());
    double dev = 0.0;
    for (double v : hs) dev = std::max(dev, std::abs(v - mean));
    CHECK(dev <= 1e-6);
  }

  TEST_CASE("second order in time") {
    TorusGrid g(1, 16);
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    const ScalarField m0 = cos_bump(g, 0.3);
    std::vector<double> u0;
    for (int nt : {64, 128, 256}) {
      auto r = solve_mfg(h, SpaceTimeGrid{g, nt, 1.0, false}, 0.5, m0, ScalarField(g));
      REQUIRE(r.converged);
      u0.push_back(r.state.u[0][3]);
    }
    const double ratio = (u0[0] - u0[1]) / (u0[1] - u0[2]);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.1));
  }

  TEST_CASE("planner inequality on seeded instances") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 32, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    DynamicSpec d;
    d.eps = 0.5;
    d.m0_random = 0.3;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const ScalarField m0 = initial_density(g, d, seed);
      CHECK(std::abs(integrate(m0) - 1.0) < 1e-14);
      auto a = solve_mfg(h, st, d.eps, m0, ScalarField(g));
      auto b = solve_mfc(h, st, d.eps, m0, ScalarField(g));
      REQUIRE(a.converged);
      REQUIRE(b.converged);
      auto cmp = compare_equilibrium_vs_planner(a.state, b.state, h);
      CHECK(cmp.psi2_mfg <= cmp.psi2_mfc + 1e-8);
      CHECK(cmp.inequality_holds);
      CHECK(cmp.social_mfc <= cmp.social_mfg + 1e-8);
    }
  }

  TEST_CASE("duality between the two control problems") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 32, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    auto r = solve_mfg(h, st, 0.5, cos_bump(g, 0.3), ScalarField(g));
    REQUIRE(r.converged);
    auto rep = duality_crosscheck(r.state, h, r.residual);
    CHECK(rep.passed);
    CHECK(std::abs(rep.B_plus_psi1) < 1e-10);
    CHECK(std::abs(rep.A_minus_psi1) < 1e-10);
  }

  TEST_CASE("bad inputs") {
    TorusGrid g(1, 16);
    SpaceTimeGrid st{g, 8, 1.0, false};
    SeparableHamiltonian h(1, Coupling::linear(1.0));
    CHECK_THROWS(solve_mfg(h, st, 0.5, ScalarField(g, -1.0), ScalarField(g)));
    CHECK_THROWS(solve_mfg(h, SpaceTimeGrid{g, 8, -1.0, false}, 0.5, ScalarField(g, 1.0), ScalarField(g)));
  }
}
