#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "otflow/oracles.hpp"
#include "test_support.hpp"

using namespace otflow;
using std::numbers::pi;

namespace {

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(wrap_angle(a[k] - b[k])));
  return worst;
}

}  // namespace

TEST(CircleOracle, UniformIsIdentity) {
  const auto u = DensityField<1>::uniform();
  const auto r = circle_rearrangement(u, u, 128);
  EXPECT_LT(sup_diff(r.target, r.angles), 1e-10);
  EXPECT_LT(std::abs(r.shift), 1e-10);
  EXPECT_LT(r.cost, 1e-18);
}

TEST(CircleOracle, EqualDensitiesIsIdentity) {
  const auto b = DensityField<1>::parse("bump(kappa=3, mu=(0.6,0.8), amp=1.5)");
  const auto r = circle_rearrangement(b, b, 128);
  EXPECT_LT(sup_diff(r.target, r.angles), 1e-9);
  EXPECT_LT(r.cost, 1e-16);
}

TEST(CircleOracle, SelfConsistentAtFourTimesResolution) {
  const auto u = DensityField<1>::uniform();
  const auto t = DensityField<1>::parse("tilt(eps=0.5, e=(1,0))");
  const auto coarse = circle_rearrangement(u, t, 256);
  const auto fine = circle_rearrangement(u, t, 1024, 1024);
  std::vector<double> sub(256);
  for (int k = 0; k < 256; ++k) sub[k] = fine.target[4 * k];
  EXPECT_LE(sup_diff(coarse.target, sub), 1e-4);
}

TEST(CircleOracle, MonotoneAndMassPreserving) {
  const auto u = DensityField<1>::uniform();
  const auto t = DensityField<1>::parse("tilt(eps=0.5, e=(1,0))");
  const auto r = circle_rearrangement(u, t, 256);
  double turn = 0.0;
  for (int k = 0; k < 256; ++k) {
    const double step = wrap_angle(r.target[(k + 1) % 256] - r.target[k]);
    EXPECT_GT(step, 0.0);
    turn += step;
  }
  EXPECT_NEAR(turn, 2 * pi, 1e-10);
  // pushforward: target mass over [T_k, T_k+1] equals source mass over one cell
  const auto cdf = [&](double a, double b) {
    double acc = 0.0;
    const int m = 200;
    const double len = wrap_angle(b - a);
    for (int j = 0; j < m; ++j) {
      const double phi = a + (j + 0.5) * len / m;
      acc += t(SpherePoint<1>::from_unit(Ambient<1>(std::cos(phi), std::sin(phi))));
    }
    return acc * len / m;
  };
  for (int k = 0; k < 256; k += 17)
    EXPECT_NEAR(cdf(r.target[k], r.target[(k + 1) % 256]), 1.0 / 256, 1e-7) << k;
}

TEST(CircleOracle, RotationEquivariant) {
  const int n = 256;
  const int shift = 32;  // rotation by an exact number of cells
  const double alpha = 2 * pi * shift / n;
  const auto u = DensityField<1>::uniform();
  const auto t0 = DensityField<1>::parse("bump(kappa=2, mu=(1,0), amp=0.8)");
  const auto t1 = DensityField<1>::bump(2, Ambient<1>(std::cos(alpha), std::sin(alpha)), 0.8);
  const auto r0 = circle_rearrangement(u, t0, n);
  const auto r1 = circle_rearrangement(u, t1, n);
  double worst = 0.0;
  for (int k = 0; k < n; ++k)
    worst = std::max(worst, std::abs(wrap_angle(r1.target[(k + shift) % n] - r0.target[k] - alpha)));
  EXPECT_LT(worst, 1e-8);
  EXPECT_NEAR(r0.cost, r1.cost, 1e-10);
}

TEST(CircleOracle, RejectsTinyGrids) { EXPECT_THROW(circle_rearrangement(DensityField<1>(), DensityField<1>(), 1), Error); }

TEST(Linearization, Examples) {
  const SpherePoint<2> p(Ambient<2>(0.3, -0.4, 0.5));
  EXPECT_EQ(poisson_linearization(0.0)(p), 0.0);
  EXPECT_NEAR(poisson_linearization(0.05)(p), 0.025 * p[2], 1e-17);
  EXPECT_NEAR(poisson_linearization(0.1, Ambient<2>(2, 0, 0))(p), 0.05 * p[0], 1e-17);
  EXPECT_THROW(poisson_linearization(0.2), Error);
}

TEST(Linearization, SolvesLinearizedEquation) {
  // -Delta u1 = eps <x, e> when rho is uniform: Delta <x, e3> = -2 <x, e3>
  const auto flow = test_support::sphere_flow(CostId::SquaredDistance, 65, "uniform", "uniform");
  const auto lin = poisson_linearization(0.05);
  const auto u1 = flow.grid().sample([&](const SpherePoint<2>& p) { return lin(p); });
  const auto lap = assemble_L(flow, flow.initial_state()).apply(u1);
  for (int i : flow.grid().owned()) EXPECT_NEAR(-lap[i], 0.05 * flow.grid().point(i).sphere[2], 1e-3);
}
