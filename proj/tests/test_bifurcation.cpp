#include "doctest.h"
#include "helpers.hpp"
#include "mfgvar/bifurcation.hpp"

using namespace mfgvar;

namespace {

const double kFp = -6 * M_PI * M_PI;

}  // namespace

TEST_SUITE("bifurcation") {
  TEST_CASE("critical period and branch closed forms") {
    const double Tb = critical_period(kFp);
    // T lam = 2 pi / sqrt(-f'/lam - 1) with lam = 4 pi^2
    CHECK(Tb == doctest::Approx(2 * M_PI / (std::sqrt(1.5 - 1.0) * 4 * M_PI * M_PI)).epsilon(1e-14));
    CHECK(std::abs(sigma_branch(Tb, kFp)) < 1e-12);
    CHECK(std::abs(h_function(Tb, 0.0, kFp)) < 1e-10);
    for (double r : {0.8, 0.95, 1.05, 1.3}) {
      const double s = sigma_branch(r * Tb, kFp);
      CHECK(std::abs(h_function(r * Tb, s, kFp)) < 1e-9);
      CHECK((s > 0) == (r > 1));
    }
    CHECK(sigma_slope_at_critical(kFp) == doctest::Approx(1.6 * M_PI * M_PI).epsilon(1e-10));
    const double e = 1e-6 * Tb;
    const double fd = (sigma_branch(Tb + e, kFp) - sigma_branch(Tb - e, kFp)) / (2 * e);
    CHECK(fd == doctest::Approx(1.6 * M_PI * M_PI).epsilon(1e-6));
    CHECK(crossing_number(kFp, 1) == 4);
    CHECK(crossing_number(kFp, 2) == 8);
    CHECK_THROWS(critical_period(-2 * M_PI * M_PI));
  }

  TEST_CASE("mode blocks") {
    ModeBlock b{{1}, kLambda1, 0.3, kFp};
    auto M = b.ode_matrix();
    CHECK(M(0, 0) == doctest::Approx(-0.3 * kLambda1));
    CHECK(M(1, 0) == doctest::Approx(-0.3 * kFp));
    // the k = 0 block: G1 is mu', G2 is -v'
    ModeBlock z{{0}, 0.0, 0.3, kFp};
    auto [r1, r2] = z.apply(2, {1.0, 0.0}, {0.0, 1.0});
    CHECK(std::abs(r1 - std::complex<double>(0, 4 * M_PI)) < 1e-14);
    CHECK(std::abs(r2 - std::complex<double>(4 * M_PI, 0) - std::complex<double>(0.3 * -kFp, 0)) < 1e-12);
  }

  TEST_CASE("operator assembly agrees with nodal derivatives") {
    TorusGrid g(std::vector<int>{16, 16});
    for (std::uint64_t s = 0; s < 3; ++s) {
      const ScalarField v = th::rnd(g, 40 + s, 0.5, 3), mu = th::rnd(g, 50 + s, 0.5, 3);
      auto a = apply_A_modes(0.7, kFp, v, mu, 0.3), b = apply_A_nodal(0.7, kFp, v, mu, 0.3);
      CHECK((a.r1 - b.r1).max_abs() < 1e-11);
      CHECK((a.r2 - b.r2).max_abs() < 1e-11);
      CHECK(std::abs(a.r3 - b.r3) < 1e-12);
    }
    auto op = assemble_A(0.7, kFp, 1, 16, 16);
    CHECK((op.A - op.A.transpose()).norm() < 1e-10 * op.A.norm());
  }

  TEST_CASE("kernel at the critical period") {
    const double Tb = critical_period(kFp);
    for (int d = 1; d <= 2; ++d) {
      auto op = assemble_A(Tb, kFp, d, d == 1 ? 16 : 8, d == 1 ? 16 : 8);
      auto k = kernel_at(op, 1e-8);
      CHECK(k.dimension == 4 * d);
      CHECK(k.adjoint_dimension == k.dimension);
      CHECK(k.singular_values(4 * d - 1) <= 1e-8);
      CHECK(k.singular_values(4 * d) >= 0.1);
      CHECK(kernel_energy_in_trig_span(op, k) >= 0.999);
    }
  }

  TEST_CASE("closed-form kernel vectors are annihilated") {
    const double Tb = critical_period(kFp);
    TorusGrid g(std::vector<int>{16, 16});
    for (int xs = 0; xs < 2; ++xs)
      for (int ts = 0; ts < 2; ++ts) {
        auto [v, mu] = kernel_vector(g, kFp, 0, xs, ts);
        auto r = apply_A_nodal(Tb, kFp, v, mu, 0.0);
        CHECK(r.r1.max_abs() < 1e-10);
        CHECK(r.r2.max_abs() < 1e-10);
        CHECK(std::abs(r.r3) < 1e-14);
        CHECK(v.max_abs() > 0.5);
      }
  }

  TEST_CASE("eigenvalue branch near the critical period") {
    const double Tb = critical_period(kFp);
    for (double r : {0.95, 1.05}) {
      auto ev = near_zero_eigenvalues(assemble_A(r * Tb, kFp, 1, 16, 16), 2.0);
      const double s = sigma_branch(r * Tb, kFp);
      REQUIRE(!ev.empty());
      double best = 1e300;
      for (double e : ev) best = std::min(best, std::abs(e - s));
      CHECK(best <= 1e-8);
      // all four kernel directions move together
      int count = 0;
      for (double e : ev) count += std::abs(e - s) <= 1e-8;
      CHECK(count == 4);
    }
    // slope from eigenvalues on a symmetric stencil
    const double e = 1e-4 * Tb;
    auto nearest = [&](double T) {
      auto ev = near_zero_eigenvalues(assemble_A(T, kFp, 1, 16, 16), 1.0);
      double b = ev.front();
      for (double x : ev)
        if (std::abs(x) < std::abs(b)) b = x;
      return b;
    };
    const double lo = nearest(Tb - e), hi = nearest(Tb + e);
    CHECK(lo < 0.0);
    CHECK(hi > 0.0);
    CHECK(th::rel((hi - lo) / (2 * e), 1.6 * M_PI * M_PI) <= 1e-4);
  }

  TEST_CASE("overtones and off-critical scan") {
    const double Tb = critical_period(kFp);
    for (int N : {2, 3}) {
      auto op = assemble_A(N * Tb, kFp, 1, 16, 16);
      auto k = kernel_at(op, 1e-8);
      CHECK(k.dimension == 4);
      CHECK(k.singular_values(4) >= 0.1);
      CHECK(kernel_energy_in_trig_span(op, k, N) >= 0.999);
    }
    int scanned = 0;
    for (int i = 0; i < 50; ++i) {
      const double r = 0.5 + 3.0 * (i + 0.5) / 50.0;
      if (std::abs(r - std::round(r)) < 0.05) continue;
      ++scanned;
      auto k = kernel_at(assemble_A(r * Tb, kFp, 1, 16, 16), 1e-8);
      CHECK(k.dimension == 0);
    }
    CHECK(scanned >= 40);
  }

  TEST_CASE("G is the derivative of g") {
    const Coupling f = Coupling::cubic_about_one(0.4, kFp, 1.0);
    TorusGrid g(std::vector<int>{16, 16});
    auto trivial = trivial_periodic_state(1, 16, 16, 0.8);
    CHECK(eval_G(trivial, f).max_norm == 0.0);
    for (std::uint64_t k = 0; k < 20; ++k) {
      PeriodicState s{g, th::rnd(g, 500 + k, 0.3, 3), th::rnd(g, 600 + k, 0.2, 3), 0.3, 0.8};
      const ScalarField v = th::rnd(g, 700 + k, 1.0, 3), mu = th::rnd(g, 800 + k, 1.0, 3);
      const double l = 0.7, h = 1e-5;
      PeriodicState pl = s, mi = s;
      pl.U += v * h;
      pl.M += mu * h;
      pl.Hbar += l * h;
      mi.U -= v * h;
      mi.M -= mu * h;
      mi.Hbar -= l * h;
      const double fd = (eval_g(pl, f).value - eval_g(mi, f).value) / (2 * h);
      const double an = pair_G(eval_G(s, f), v, mu, l);
      CHECK(th::rel(fd, an) <= 1e-8);
    }
    PeriodicState bad = trivial;
    bad.M = ScalarField(bad.grid, -1.5);
    CHECK_THROWS(eval_G(bad, f));
  }

  TEST_CASE("continuation from the critical period") {
    const double Tb = critical_period(kFp);
    const Coupling f = Coupling::cubic_about_one(0.0, kFp, 1.0);
    auto br = continue_branch(f, 1, {1e-3, 3e-3, 1e-2});
    REQUIRE_FALSE(br.truncated);
    REQUIRE(br.points.size() == 3);
    double prev = 0.0;
    for (const auto& p : br.points) {
      CHECK(p.residual <= 1e-10);
      CHECK(eval_G(p.state, f).max_norm <= 1e-10);
      const double dT = std::abs(p.state.T - Tb);
      CHECK(dT >= prev);
      prev = dT;
      CHECK(p.nonstationarity >= 0.1);
      auto o = map_to_original(p.state, f);
      auto r = periodic_residual(o, f);
      CHECK(r.max_norm <= 1e-8);
      CHECK(r.max_slice_mass_defect <= 1e-8);
      CHECK(o.m.min() > 0.0);
    }
    CHECK(std::abs(br.points[0].state.T - Tb) <= 1e-2);

    auto triv = map_to_original(trivial_periodic_state(1, 16, 16, Tb), Coupling::linear(1.0, 0.5));
    CHECK((triv.m - ScalarField(triv.grid, 1.0)).max_abs() == 0.0);
    CHECK(periodic_residual(triv, Coupling::linear(1.0, 0.5)).max_norm < 1e-12);

    CHECK_THROWS(continue_branch(f, 1, {3e-3, 1e-3}));
    ContinuationOptions bad;
    bad.direction = 4;
    CHECK_THROWS(continue_branch(f, 1, {1e-3}, bad));
  }

  TEST_CASE("continuation in two dimensions") {
    const Coupling f = Coupling::cubic_about_one(0.0, kFp, 1.0);
    ContinuationOptions o;
    o.direction = 5;
    auto br = continue_branch(f, 2, {1e-3}, o);
    REQUIRE_FALSE(br.truncated);
    CHECK(br.points[0].residual <= 1e-10);
    CHECK(br.points[0].nonstationarity >= 0.1);
  }
}
