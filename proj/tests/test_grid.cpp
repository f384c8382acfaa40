#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "otflow/density.hpp"
#include "otflow/grid.hpp"
#include "test_support.hpp"

using namespace otflow;
using std::numbers::pi;

namespace {

double z_of(const SpherePoint<2>& p) { return p[2]; }

// max |synced - exact| over fringe points after scrambling the fringe
double sync_error(int n) {
  const SphereGrid<2> g(n);
  auto f = g.sample(z_of);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.point(i).active()) f[i] = 1e3;
  g.sync(f);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.point(i).active()) worst = std::max(worst, std::abs(f[i] - z_of(g.point(i).sphere)));
  return worst;
}

}  // namespace

TEST(SphereGrid, TooCoarseIsStarved) {
  try {
    SphereGrid<2> g(33);
    FAIL() << "expected OverlapStarved";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverlapStarved);
  }
  EXPECT_NO_THROW(SphereGrid<2>(45));
}

TEST(SphereGrid, StoredPointsInsideCap) {
  const SphereGrid<2> g(65);
  const double cap = stereographic_cap_radius();
  for (const auto& p : g.points()) EXPECT_LE(p.coords().v.norm(), cap);
}

TEST(SphereGrid, OwnershipPartitionsSphere) {
  const SphereGrid<2> g(65);
  for (int i : g.owned()) {
    const auto& p = g.point(i);
    EXPECT_EQ(owning_chart(p.sphere), p.coords().chart);
    EXPECT_GT(p.weight, 0.0);
  }
  // cells straddling the chart boundary carry their clipped area even when the node itself is not owned
  double area = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_GE(g.point(i).weight, 0.0);
    area += g.point(i).weight;
  }
  EXPECT_NEAR(area, 4 * pi, 1e-12);
}

TEST(SphereGrid, NeighboursAreStored) {
  const SphereGrid<2> g(45);
  for (int i : g.active()) {
    const auto& nb = g.neighbors(i);
    for (int k = 0; k < 8; ++k) {
      ASSERT_GE(nb[k], 0);
      EXPECT_EQ(g.point(nb[k]).coords().chart, g.point(i).coords().chart);
    }
    EXPECT_NEAR(g.point(nb[0]).coords().v[0] - g.point(i).coords().v[0], g.spacing(), 1e-14);
  }
}

TEST(Quadrature, Examples) {
  for (int n : {45, 65, 129}) {
    const SphereGrid<2> g(n);
    EXPECT_NEAR(g.total_weight(), 4 * pi, 4 * pi * 1e-12) << n;
    EXPECT_NEAR(g.quadrature(g.sample(z_of)), 0.0, 1e-12) << n;
    EXPECT_NEAR(g.quadrature(g.sample([](const SpherePoint<2>& p) { return p[2] * p[2]; })), 4 * pi / 3, 1e-2) << n;
  }
}

TEST(Quadrature, SecondOrder) {
  auto err = [](int n) {
    const SphereGrid<2> g(n);
    return std::abs(g.quadrature(g.sample([](const SpherePoint<2>& p) { return p[2] * p[2]; })) - 4 * pi / 3);
  };
  const double e129 = err(129), e257 = err(257);
  EXPECT_NEAR(err(65) / e129, 4.0, 0.8);
  EXPECT_NEAR(e129 / e257, 4.0, 0.8);
}

TEST(Quadrature, Circle) {
  const SphereGrid<1> g(256);
  EXPECT_NEAR(g.total_weight(), 2 * pi, 1e-13);
  EXPECT_NEAR(g.quadrature(g.sample([](const SpherePoint<1>& p) { return p[0] * p[0]; })), pi, 1e-13);
}

TEST(Sync, ConstantIsExact) {
  const SphereGrid<2> g(65);
  std::vector<double> f(g.size(), 0.0);
  for (int i : g.active()) f[i] = 1.0;
  g.sync(f);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(f[i], 1.0);
  for (int i : g.active()) f[i] = -0.3711;
  g.sync(f);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(f[i], -0.3711);
}

TEST(Sync, FourthOrder) {
  const double coarse = sync_error(65), fine = sync_error(129);
  EXPECT_LT(coarse, 1e-5);
  // h halves: expect ~16x
  EXPECT_GT(coarse / fine, 11.0) << coarse << " " << fine;
}

TEST(Sync, OwnedValuesUntouched) {
  const SphereGrid<2> g(65);
  auto f = g.sample([](const SpherePoint<2>& p) { return std::sin(3 * p[0]) + p[1] * p[2]; });
  const auto before = f;
  g.sync(f);
  g.sync(f);
  for (int i : g.active()) EXPECT_EQ(f[i], before[i]);
  // donors draw on owned points of the other chart only
  for (const auto& d : g.donors()) {
    for (int s : d.source) {
      EXPECT_TRUE(g.point(s).owned());
      EXPECT_NE(g.point(s).coords().chart, g.point(d.target).coords().chart);
    }
  }
}

TEST(Sync, CircleIsNoop) {
  const SphereGrid<1> g(16);
  std::vector<double> f(g.size(), 2.0);
  g.sync(f);
  for (double v : f) EXPECT_EQ(v, 2.0);
}

TEST(Derivatives, SecondOrderOnChart) {
  // u = <x, e3> has chart Hessian we can compare with differences of the embedding
  for (int n : {65, 129}) {
    const SphereGrid<2> g(n);
    auto f = g.sample(z_of);
    double worst = 0.0;
    for (int i : g.active()) {
      const auto& fr = g.point(i).frame;
      const Mat<2> h = g.hessian(f, i);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) worst = std::max(worst, std::abs(h(a, b) - fr.ddx[a][b][2]));
    }
    EXPECT_LT(worst, n == 65 ? 2e-2 : 5e-3) << n;
  }
}

TEST(Density, UniformAndTilt) {
  const auto u = DensityField<2>::uniform();
  EXPECT_NEAR(u(SpherePoint<2>(Ambient<2>(1, 2, 3))), 1 / (4 * pi), 1e-15);
  const auto t = DensityField<2>::parse("tilt(eps=0.1, e=(0,0,1))");
  EXPECT_NEAR(t(SpherePoint<2>(Ambient<2>(0, 0, 1))), 1.1 / (4 * pi), 1e-14);
  EXPECT_LE(t.normalization_error(), 1e-12);
  const auto c = DensityField<1>::parse("tilt(eps=0.5, e=(1,0))");
  EXPECT_NEAR(c(SpherePoint<1>(Ambient<1>(1, 0))), 1.5 / (2 * pi), 1e-14);
  EXPECT_LE(c.normalization_error(), 1e-12);
}

TEST(Density, BumpNormalized) {
  const auto b = DensityField<2>::parse("bump(kappa=4, mu=(0,0,1), amp=0.3)");
  EXPECT_LE(b.normalization_error(), 1e-8);
  const SphereGrid<2> g(129);
  const double mass = g.quadrature(g.sample([&](const SpherePoint<2>& p) { return b(p); }));
  EXPECT_NEAR(mass, 1.0, 1e-3);
  for (int i : g.active()) EXPECT_GT(b(g.point(i).sphere), 0.0);
}

TEST(Density, ChartDensityIncludesMetric) {
  const auto t = DensityField<2>::parse("tilt(eps=0.1, e=(0,0,1))");
  const ChartCoords<2> c{ChartId::A, Vec<2>(0.3, -0.5)};
  EXPECT_NEAR(t.chart_density(c), t(chart_to_sphere(c)) * sqrt_det_metric(c), 1e-15);
  // chart log gradient against differences
  const auto fr = chart_frame(c);
  const Vec<2> gl = t.chart_log_gradient(fr);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    auto p = c, m = c;
    p.v[k] += h;
    m.v[k] -= h;
    EXPECT_NEAR((t.log_chart_density(p) - t.log_chart_density(m)) / (2 * h), gl[k], 1e-8);
  }
}

TEST(Density, SpecRoundTrip) {
  for (const char* s : {"uniform", "tilt(eps=0.05, e=(0.6,0,0.8))", "bump(kappa=2.5, mu=(1,0,0), amp=-0.2)"}) {
    const auto d = DensityField<2>::parse(s);
    const auto e = DensityField<2>::parse(d.spec());
    EXPECT_EQ(d.spec(), e.spec());
    EXPECT_EQ(d.normalization(), e.normalization());
  }
}

TEST(Density, RejectsBadSpecs) {
  for (const char* s : {"tilt(eps=1.5, e=(0,0,1))", "bump(kappa=-1, mu=(0,0,1), amp=0.3)", "bump(kappa=1, mu=(0,0,1), amp=-1)",
                        "tilt(eps=0.1, e=(0,0))", "gauss", "tilt(eps=0.1, e=(0,0,1)) extra", "tilt(eps=, e=(0,0,1))",
                        "tilt(eps=0.1, e=(0,0,0))"}) {
    try {
      DensityField<2>::parse(s);
      ADD_FAILURE() << "accepted " << s;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << s;
    }
  }
}
