#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "mfgvar/experiment.hpp"

namespace th {

using namespace mfgvar;

inline ScalarField rnd(const TorusGrid& g, std::uint64_t seed, double amp = 0.3, int kmax = 2) {
  return random_band_limited(g, seed, kmax, amp);
}

inline ScalarField density(const TorusGrid& g, std::uint64_t seed, double amp = 0.3) {
  ScalarField m = rnd(g, seed, amp);
  for (double& v : m.values) v += 1.0;
  m *= 1.0 / integrate(m);
  return m;
}

inline ScalarField wave(const TorusGrid& g, double (*fn)(std::span<const double>)) { return ScalarField::sample(g, fn); }

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace th
