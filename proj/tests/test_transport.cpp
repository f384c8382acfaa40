#include <cmath>
#include <numbers>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "otflow/transport_map.hpp"
#include "test_support.hpp"

using namespace otflow;
using std::numbers::pi;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

double dist(const SpherePoint<2>& a, const SpherePoint<2>& b) { return (a.coords() - b.coords()).norm(); }

}  // namespace

TEST(CExp, Examples) {
  const SpherePoint<2> x(Ambient<2>(0.2, -0.4, 0.7));
  EXPECT_EQ(dist(cexp_closed_form(x, Ambient<2>::Zero()), x), 0.0);
  const SpherePoint<2> n(Ambient<2>(0, 0, 1));
  EXPECT_LT(dist(cexp_closed_form(n, Ambient<2>(pi / 2, 0, 0)), SpherePoint<2>(Ambient<2>(1, 0, 0))), 1e-15);
  EXPECT_EQ(code_of([&] { cexp_closed_form(n, Ambient<2>(pi - 1e-9, 0, 0)); }), ErrorCode::CutLocusReached);
}

TEST(SolveTarget, SquaredDistanceFixedPoint) {
  const ChartCoords<2> x{ChartId::B, Vec<2>(0.4, -0.2)};
  const auto sol = solve_target<2>(CostId::SquaredDistance, x, Vec<2>::Zero(), x);
  EXPECT_LT(dist(chart_to_sphere(sol.frame.coords), chart_to_sphere(x)), 1e-14);
  EXPECT_EQ(sol.iterations, 0);
}

TEST(SolveTarget, ReflectorZeroGradientGivesAntipode) {
  const ChartCoords<2> x{ChartId::A, Vec<2>(0.3, 0.5)};
  const auto anti = chart_to_sphere(x).antipode();
  // start a little away from the answer so Newton has work to do
  const auto warm = to_owning_chart(SpherePoint<2>(anti.coords() + Ambient<2>(0.05, -0.03, 0.02)));
  const auto sol = solve_target<2>(CostId::ReflectorAntenna, x, Vec<2>::Zero(), warm);
  EXPECT_LT(dist(chart_to_sphere(sol.frame.coords), anti), 1e-10);
  EXPECT_GT(sol.iterations, 0);
  EXPECT_LE(sol.residual, 1e-11);
}

TEST(SolveTarget, MatchesClosedFormForRandomGradients) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int k = 0; k < 200; ++k) {
    const auto x = to_owning_chart(test_support::random_point(rng));
    const auto fr = chart_frame(x);
    const Vec<2> du(u(rng), u(rng));
    const auto want = cexp_closed_form(fr, du);
    const auto sol = solve_target(CostId::SquaredDistance, fr, du, x);
    EXPECT_LT(dist(chart_to_sphere(sol.frame.coords), want), 1e-9) << k;
    EXPECT_LE(sol.residual, 1e-11);
  }
}

TEST(SolveTarget, SwitchesChartAcrossThePole) {
  // target far across the sphere from x: warm start in x's chart must leave it
  const ChartCoords<2> x{ChartId::A, Vec<2>(0.1, 0.0)};
  const auto fr = chart_frame(x);
  // covector for a geodesic of length 2.4 along the first chart axis: Du = g v with |v|_g = 2.4
  const double lambda = chart_metric(x)(0, 0);
  const Vec<2> du(lambda * 2.4 / std::sqrt(lambda), 0.0);
  const auto want = cexp_closed_form(fr, du);
  const auto sol = solve_target(CostId::SquaredDistance, fr, du, x);
  EXPECT_LT(dist(chart_to_sphere(sol.frame.coords), want), 1e-9);
  EXPECT_LE(sol.frame.coords.v.norm(), 1.1);
  EXPECT_EQ(sol.frame.coords.chart, ChartId::B);
}

TEST(SolveTarget, NewtonBudget) {
  NewtonOptions opt;
  opt.max_iterations = 0;
  const ChartCoords<2> x{ChartId::A, Vec<2>(0.3, 0.5)};
  const auto warm = to_owning_chart(SpherePoint<2>(chart_to_sphere(x).antipode().coords() + Ambient<2>(0.1, 0, 0)));
  EXPECT_EQ(code_of([&] { solve_target<2>(CostId::ReflectorAntenna, x, Vec<2>::Zero(), warm, opt); }),
            ErrorCode::NewtonDiverged);
}

TEST(SolveTarget, Circle) {
  const ChartCoords<1> x{ChartId::P, Vec<1>(2.9)};
  const auto sol = solve_target(CostId::SquaredDistance, x, Vec<1>(0.6), x);
  // T = x + u' wrapped
  EXPECT_NEAR(sol.frame.coords.v[0], wrap_angle(3.5), 1e-12);
}

TEST(InitialTarget, PerCost) {
  const SpherePoint<2> x(Ambient<2>(0.6, 0, 0.8));
  EXPECT_LT(dist(chart_to_sphere(initial_target(CostId::SquaredDistance, x)), x), 1e-15);
  EXPECT_LT(dist(chart_to_sphere(initial_target(CostId::ReflectorAntenna, x)), x.antipode()), 1e-15);
}

TEST(DetDT, Examples) {
  const ChartCoords<2> c{ChartId::A, Vec<2>(0.2, 0.1)};
  const Mat<2> g = chart_metric(c);
  EXPECT_NEAR(det_DT<2>(g, -g), 1.0, 1e-15);
  EXPECT_NEAR(det_DT<2>(2.0 * g, -g), 4.0, 1e-14);
  const Mat<2> saddle = (Mat<2>() << 1, 0, 0, -1).finished();
  EXPECT_EQ(code_of([&] { det_DT<2>(saddle, -g); }), ErrorCode::NonConvexState);
  EXPECT_EQ(code_of([&] { det_DT<2>(Mat<2>::Zero(), -g); }), ErrorCode::NonConvexState);
}

TEST(MapJacobian, IdentityAtDiagonal) {
  const ChartCoords<2> c{ChartId::B, Vec<2>(-0.4, 0.3)};
  const Mat<2> g = chart_metric(c);
  EXPECT_TRUE(map_jacobian<2>(g, -g).isApprox(Mat<2>::Identity(), 1e-15));
}
