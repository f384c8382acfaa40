#pragma once

// Points, charts and metric data on the round spheres S^1 and S^2.
//
// S^2 is covered by two stereographic charts: chart A projects from the north
// pole (its origin is the south pole) and chart B projects from the south pole.
// S^1 uses a single periodic angle chart P.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

#include "otflow/errors.hpp"

namespace otflow {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;
template <int Dim>
using Ambient = Eigen::Matrix<double, Dim + 1, 1>;

inline constexpr double kZCut = 0.3;
inline constexpr double kPoleTolerance = 1e-9;
inline constexpr double kTangencyTolerance = 1e-10;

/// Chart-coordinate radius of validity of a stereographic chart (z <= kZCut).
inline double stereographic_cap_radius() { return std::sqrt((1.0 + kZCut) / (1.0 - kZCut)); }

enum class ChartId : std::uint8_t { A, B, P };

inline const char* to_string(ChartId id) {
  switch (id) {
    case ChartId::A: return "A";
    case ChartId::B: return "B";
    case ChartId::P: return "P";
  }
  return "?";
}

inline ChartId other_chart(ChartId id) { return id == ChartId::A ? ChartId::B : ChartId::A; }

/// Unit vector in R^{Dim+1}.
template <int Dim>
class SpherePoint {
 public:
  SpherePoint() { x_.setZero(); x_[Dim] = -1.0; }

  /// Normalizes `v`; throws TangencyViolation for a (near) zero vector.
  explicit SpherePoint(const Ambient<Dim>& v) {
    const double n = v.norm();
    if (!(n > 1e-300)) throw Error(ErrorCode::TangencyViolation, "cannot normalize a zero vector");
    x_ = v / n;
  }

  /// Wraps a vector that is already unit length to rounding; keeps its bits.
  static SpherePoint from_unit(const Ambient<Dim>& v) {
    SpherePoint p;
    p.x_ = v;
    if (std::abs(v.norm() - 1.0) > 1e-12) p.x_ /= v.norm();
    return p;
  }

  const Ambient<Dim>& coords() const { return x_; }
  double operator[](int k) const { return x_[k]; }
  SpherePoint antipode() const { return from_unit(-x_); }

 private:
  Ambient<Dim> x_;
};

template <int Dim>
struct ChartCoords {
  ChartId chart = Dim == 1 ? ChartId::P : ChartId::A;
  Vec<Dim> v = Vec<Dim>::Zero();
};

// Scalar-generic embeddings so the same expression tree serves double,
// Taylor jets and extended-precision finite differences.

template <class S>
std::array<S, 3> stereographic_embed(ChartId chart, const S& a, const S& b) {
  const S r2 = a * a + b * b;
  const S s = r2 + 1.0;
  if (chart == ChartId::A) return {2.0 * a / s, 2.0 * b / s, (r2 - 1.0) / s};
  return {2.0 * a / s, 2.0 * b / s, (1.0 - r2) / s};
}

template <class S>
std::array<S, 2> circle_embed(const S& phi) {
  using std::cos;
  using std::sin;
  return {cos(phi), sin(phi)};
}

inline SpherePoint<2> chart_to_sphere(const ChartCoords<2>& c) {
  const auto e = stereographic_embed<double>(c.chart, c.v[0], c.v[1]);
  return SpherePoint<2>::from_unit(Ambient<2>(e[0], e[1], e[2]));
}

inline SpherePoint<1> chart_to_sphere(const ChartCoords<1>& c) {
  const auto e = circle_embed<double>(c.v[0]);
  return SpherePoint<1>::from_unit(Ambient<1>(e[0], e[1]));
}

inline double wrap_angle(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  phi = std::remainder(phi, two_pi);
  if (phi <= -std::numbers::pi) phi += two_pi;
  return phi;
}

inline ChartCoords<2> sphere_to_chart(const SpherePoint<2>& p, ChartId chart) {
  const double sign = chart == ChartId::A ? 1.0 : -1.0;
  // Chart A projects from (0,0,1), chart B from (0,0,-1).
  const Ambient<2> pole(0.0, 0.0, sign);
  if ((p.coords() - pole).norm() < kPoleTolerance)
    throw Error(ErrorCode::PoleSingular, std::string("point is the projection pole of chart ") + to_string(chart));
  const double denom = 1.0 - sign * p[2];
  ChartCoords<2> c;
  c.chart = chart;
  c.v = Vec<2>(p[0] / denom, p[1] / denom);
  return c;
}

inline ChartCoords<1> sphere_to_chart(const SpherePoint<1>& p, ChartId = ChartId::P) {
  ChartCoords<1> c;
  c.chart = ChartId::P;
  c.v[0] = std::atan2(p[1], p[0]);
  return c;
}

/// The chart in which a point of S^2 is owned (z <= 0 belongs to A).
inline ChartId owning_chart(const SpherePoint<2>& p) { return p[2] <= 0.0 ? ChartId::A : ChartId::B; }
inline ChartId owning_chart(const SpherePoint<1>&) { return ChartId::P; }

template <int Dim>
ChartCoords<Dim> to_owning_chart(const SpherePoint<Dim>& p) {
  return sphere_to_chart(p, owning_chart(p));
}

/// Re-expresses chart coordinates in chart `to` (A <-> B is radial inversion).
inline ChartCoords<2> chart_transition(const ChartCoords<2>& c, ChartId to) {
  if (c.chart == to) return c;
  const double r2 = c.v.squaredNorm();
  if (r2 < kPoleTolerance * kPoleTolerance)
    throw Error(ErrorCode::PoleSingular, "chart origin maps to the other chart's pole");
  ChartCoords<2> out;
  out.chart = to;
  out.v = c.v / r2;
  return out;
}

/// Jacobian d(to-coords)/d(from-coords) of the A <-> B transition at `c`.
inline Mat<2> transition_jacobian(const ChartCoords<2>& c) {
  const double r2 = c.v.squaredNorm();
  const double r4 = r2 * r2;
  Mat<2> j;
  j(0, 0) = (r2 - 2.0 * c.v[0] * c.v[0]) / r4;
  j(0, 1) = -2.0 * c.v[0] * c.v[1] / r4;
  j(1, 0) = j(0, 1);
  j(1, 1) = (r2 - 2.0 * c.v[1] * c.v[1]) / r4;
  return j;
}

/// Conformal factor of the round metric in a stereographic chart.
inline double conformal_factor(const Vec<2>& v) {
  const double s = 1.0 + v.squaredNorm();
  return 4.0 / (s * s);
}

inline Mat<2> chart_metric(const ChartCoords<2>& c) { return conformal_factor(c.v) * Mat<2>::Identity(); }
inline Mat<1> chart_metric(const ChartCoords<1>&) { return Mat<1>::Identity(); }

inline double sqrt_det_metric(const ChartCoords<2>& c) { return conformal_factor(c.v); }
inline double sqrt_det_metric(const ChartCoords<1>&) { return 1.0; }

/// Gradient of ln sqrt(det g) in chart coordinates.
inline Vec<2> log_sqrt_det_metric_gradient(const ChartCoords<2>& c) {
  return (-4.0 / (1.0 + c.v.squaredNorm())) * c.v;
}
inline Vec<1> log_sqrt_det_metric_gradient(const ChartCoords<1>&) { return Vec<1>::Zero(); }

/// Embedding X(chart coords) together with its first and second chart derivatives.
template <int Dim>
struct ChartFrame {
  ChartCoords<Dim> coords;
  Ambient<Dim> x;
  std::array<Ambient<Dim>, Dim> dx;
  std::array<std::array<Ambient<Dim>, Dim>, Dim> ddx;
};

inline ChartFrame<2> chart_frame(const ChartCoords<2>& c) {
  ChartFrame<2> fr;
  fr.coords = c;
  const double a = c.v[0];
  const double b = c.v[1];
  const auto e = stereographic_embed<double>(c.chart, a, b);
  fr.x = Ambient<2>(e[0], e[1], e[2]);

  const double f = 1.0 / (1.0 + a * a + b * b);
  const double f2 = f * f;
  const double f3 = f2 * f;
  const double fa = -2.0 * a * f2;
  const double fb = -2.0 * b * f2;
  const double faa = -2.0 * f2 + 8.0 * a * a * f3;
  const double fab = 8.0 * a * b * f3;
  const double fbb = -2.0 * f2 + 8.0 * b * b * f3;
  // z = +-(1 - 2f): chart A has sign +1, chart B sign -1.
  const double zs = c.chart == ChartId::A ? -2.0 : 2.0;

  fr.dx[0] = Ambient<2>(2.0 * f + 2.0 * a * fa, 2.0 * b * fa, zs * fa);
  fr.dx[1] = Ambient<2>(2.0 * a * fb, 2.0 * f + 2.0 * b * fb, zs * fb);
  fr.ddx[0][0] = Ambient<2>(4.0 * fa + 2.0 * a * faa, 2.0 * b * faa, zs * faa);
  fr.ddx[0][1] = Ambient<2>(2.0 * fb + 2.0 * a * fab, 2.0 * fa + 2.0 * b * fab, zs * fab);
  fr.ddx[1][0] = fr.ddx[0][1];
  fr.ddx[1][1] = Ambient<2>(2.0 * a * fbb, 4.0 * fb + 2.0 * b * fbb, zs * fbb);
  return fr;
}

inline ChartFrame<1> chart_frame(const ChartCoords<1>& c) {
  ChartFrame<1> fr;
  fr.coords = c;
  const auto e = circle_embed<double>(c.v[0]);
  fr.x = Ambient<1>(e[0], e[1]);
  fr.dx[0] = Ambient<1>(-e[1], e[0]);
  fr.ddx[0][0] = -fr.x;
  return fr;
}

/// Great-circle distance; 2 atan2(|p-q|, |p+q|) is accurate near 0 and pi.
template <int Dim>
double geodesic_distance(const SpherePoint<Dim>& p, const SpherePoint<Dim>& q) {
  return 2.0 * std::atan2((p.coords() - q.coords()).norm(), (p.coords() + q.coords()).norm());
}

/// Riemannian exponential map; `v` is an ambient vector tangent at `p`.
template <int Dim>
SpherePoint<Dim> exp_map(const SpherePoint<Dim>& p, const Ambient<Dim>& v) {
  if (std::abs(v.dot(p.coords())) > kTangencyTolerance)
    throw Error(ErrorCode::TangencyViolation, "exp_map: vector is not tangent at the base point");
  const double len = v.norm();
  if (len == 0.0) return p;
  return SpherePoint<Dim>(std::cos(len) * p.coords() + (std::sin(len) / len) * v);
}

/// Pushes chart components of a tangent vector to an ambient vector.
template <int Dim>
Ambient<Dim> push_forward(const ChartFrame<Dim>& fr, const Vec<Dim>& v) {
  Ambient<Dim> out = Ambient<Dim>::Zero();
  for (int i = 0; i < Dim; ++i) out += v[i] * fr.dx[i];
  return out;
}

}  // namespace otflow
