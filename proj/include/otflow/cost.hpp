#pragma once

// Transport costs c(x, xbar) on the unit sphere and their chart derivatives.
//
// Both costs are functions of the squared chord q = |x - xbar|^2:
//   SquaredDistance   c = dist^2 / 2 with dist = 2 asin(sqrt(q) / 2)
//   ReflectorAntenna  c = -log|x - xbar| = -log(q) / 2
// Writing them through q keeps the squared distance smooth on the diagonal.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"
#include "otflow/jet.hpp"

namespace otflow {

enum class CostId { SquaredDistance, ReflectorAntenna };

inline constexpr double kSingularPairTolerance = 1e-8;

inline const char* to_string(CostId id) {
  return id == CostId::SquaredDistance ? "squared_distance" : "reflector_antenna";
}

inline CostId parse_cost_id(std::string_view s) {
  if (s == "squared_distance") return CostId::SquaredDistance;
  if (s == "reflector_antenna") return CostId::ReflectorAntenna;
  throw Error(ErrorCode::ConfigError, "unknown cost '" + std::string(s) + "'");
}

/// Distance proxy to sing(c): the cut locus for SquaredDistance, the diagonal for ReflectorAntenna.
template <int Dim>
double sing_distance(CostId cost, const SpherePoint<Dim>& x, const SpherePoint<Dim>& xbar) {
  const double d = geodesic_distance(x, xbar);
  return cost == CostId::SquaredDistance ? std::numbers::pi - d : d;
}

namespace detail {

// Generic cost profile value, shared by double and extended-precision paths.
template <class Real>
Real profile_value(CostId cost, const Real& q) {
  using std::asin;
  using std::log;
  using std::sqrt;
  if (cost == CostId::SquaredDistance) {
    const Real d = 2.0 * asin(sqrt(q) / 2.0);
    return 0.5 * d * d;
  }
  return -0.5 * log(q);
}

template <class Real, int N>
Real squared_chord(const std::array<Real, N>& x, const std::array<Real, N>& y) {
  Real q = 0.0;
  for (int k = 0; k < N; ++k) {
    const Real d = x[k] - y[k];
    q = q + d * d;
  }
  return q;
}

}  // namespace detail

/// Taylor coefficients at q0 of the profile F with c = F(q).
template <int Order>
std::array<double, Order + 1> profile_coeffs(CostId cost, double q0) {
  std::array<double, Order + 1> f{};
  if (cost == CostId::ReflectorAntenna) {
    f = taylor::log<Order>(q0);
    for (auto& x : f) x *= -0.5;
    f[0] = detail::profile_value<double>(cost, q0);
    return f;
  }
  if (q0 < 1.0) {
    // dist^2 = sum_{n>=1} a_n q^n, a_1 = 1, a_{n+1} = a_n n^2 / ((2n+1)(2n+2)).
    double a = 1.0;
    for (int n = 1; n <= 64; ++n) {
      double binom = 1.0;  // C(n, k)
      for (int k = 1; k <= Order && k <= n; ++k) {
        binom = binom * (n - k + 1) / k;
        f[k] += 0.5 * a * binom * std::pow(q0, n - k);
      }
      a = a * n * n / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
    }
    f[0] = detail::profile_value<double>(cost, q0);
    return f;
  }
  const auto q = Series<Order>::variable(0, q0);
  const Series<Order> d = 2.0 * asin(sqrt(q) / 2.0);
  const Series<Order> c = 0.5 * d * d;
  for (int k = 0; k <= Order; ++k) f[k] = c[k];
  return f;
}

/// F, F' and F'' of the cost profile at q.
struct ProfileDerivs {
  double f;
  double df;
  double d2f;
};

inline ProfileDerivs profile_derivs(CostId cost, double q) {
  if (cost == CostId::ReflectorAntenna) return {-0.5 * std::log(q), -0.5 / q, 0.5 / (q * q)};
  const double d = 2.0 * std::asin(std::sqrt(q) / 2.0);
  const double f = 0.5 * d * d;
  if (q < 1.0) {
    double g1 = 0.0;
    double g2 = 0.0;
    double a = 1.0;
    double qp1 = 1.0;  // q^(n-1)
    double qp2 = 0.0;  // q^(n-2)
    for (int n = 1; n <= 80; ++n) {
      const double t1 = n * a * qp1;
      g1 += t1;
      g2 += n * (n - 1) * a * qp2;
      if (n >= 4 && t1 * n < 1e-18 * g1) break;
      a = a * n * n / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
      qp2 = qp1;
      qp1 *= q;
    }
    return {f, 0.5 * g1, 0.5 * g2};
  }
  const double sd = std::sin(d);
  const double cd = std::cos(d);
  return {f, 0.5 * d / sd, 0.5 * (sd - d * cd) / (2.0 * sd * sd * sd)};
}

/// Closed-form cost value. The squared distance is finite (pi^2/2) on its cut
/// locus and is returned there; the reflector cost throws SingularPair within
/// 1e-8 of the diagonal. Derivatives throw on either singular set.
template <int Dim>
double eval_cost(CostId cost, const SpherePoint<Dim>& x, const SpherePoint<Dim>& xbar) {
  if (cost == CostId::ReflectorAntenna && sing_distance(cost, x, xbar) < kSingularPairTolerance)
    throw Error(ErrorCode::SingularPair, "cost evaluated on sing(c)");
  std::array<double, Dim + 1> a{};
  std::array<double, Dim + 1> b{};
  for (int k = 0; k <= Dim; ++k) {
    a[k] = x[k];
    b[k] = xbar[k];
  }
  return detail::profile_value<double>(cost, detail::squared_chord<double, Dim + 1>(a, b));
}

/// Ambient embedding of chart coordinates for any scalar type.
template <class S, int Dim>
std::array<S, Dim + 1> embed(ChartId chart, const std::array<S, Dim>& v) {
  if constexpr (Dim == 2) {
    return stereographic_embed<S>(chart, v[0], v[1]);
  } else {
    return circle_embed<S>(v[0]);
  }
}

/// All partials of c up to total order 4 in the source chart (indices i, j)
/// and target chart (barred indices s, p, r).
template <int Dim>
struct CostJet {
  static constexpr int kVars = 2 * Dim;
  using JetType = Jet<kVars, 4>;
  using Exponent = typename JetType::Table::Exponent;

  ChartId x_chart{};
  ChartId y_chart{};
  JetType jet;

  double c = 0.0;
  Vec<Dim> cx;                                     // c_i
  Vec<Dim> cy;                                     // c_s
  Mat<Dim> cxx;                                    // c_ij
  Mat<Dim> cxy;                                    // c_{i s}, rows source
  Mat<Dim> cyy;                                    // c_{s p}
  std::array<Mat<Dim>, Dim> cxxy;                  // cxxy[s](i, j) = c_{ij s}
  std::array<Mat<Dim>, Dim> cxyy;                  // cxyy[i](s, p) = c_{i s p}
  std::array<std::array<Mat<Dim>, Dim>, Dim> cxxyy;  // cxxyy[p][r](i, j) = c_{ij p r}

  /// Partial derivative by multi-index (source exponents first).
  double partial(const Exponent& e) const { return jet.partial(e); }
};

namespace detail {

template <int Dim>
typename CostJet<Dim>::Exponent exponent_of(std::initializer_list<int> vars) {
  typename CostJet<Dim>::Exponent e{};
  for (int v : vars) ++e[v];
  return e;
}

}  // namespace detail

/// Cost jet by truncated Taylor arithmetic through the chart embeddings.
template <int Dim>
CostJet<Dim> eval_cost_jet(CostId cost, const ChartCoords<Dim>& cx, const ChartCoords<Dim>& cy) {
  using J = typename CostJet<Dim>::JetType;
  if (sing_distance(cost, chart_to_sphere(cx), chart_to_sphere(cy)) < kSingularPairTolerance)
    throw Error(ErrorCode::SingularPair, "cost jet requested on sing(c)");

  std::array<J, Dim> xs;
  std::array<J, Dim> ys;
  for (int i = 0; i < Dim; ++i) {
    xs[i] = J::variable(i, cx.v[i]);
    ys[i] = J::variable(Dim + i, cy.v[i]);
  }
  const auto X = embed<J, Dim>(cx.chart, xs);
  const auto Y = embed<J, Dim>(cy.chart, ys);
  const J q = detail::squared_chord<J, Dim + 1>(X, Y);

  CostJet<Dim> out;
  out.x_chart = cx.chart;
  out.y_chart = cy.chart;
  out.jet = compose(q, profile_coeffs<4>(cost, q.value()));

  using detail::exponent_of;
  const auto& j = out.jet;
  out.c = j.value();
  for (int i = 0; i < Dim; ++i) {
    out.cx[i] = j.partial(exponent_of<Dim>({i}));
    out.cy[i] = j.partial(exponent_of<Dim>({Dim + i}));
    for (int k = 0; k < Dim; ++k) {
      out.cxx(i, k) = j.partial(exponent_of<Dim>({i, k}));
      out.cxy(i, k) = j.partial(exponent_of<Dim>({i, Dim + k}));
      out.cyy(i, k) = j.partial(exponent_of<Dim>({Dim + i, Dim + k}));
    }
  }
  for (int a = 0; a < Dim; ++a)
    for (int b = 0; b < Dim; ++b)
      for (int k = 0; k < Dim; ++k) {
        out.cxxy[k](a, b) = j.partial(exponent_of<Dim>({a, b, Dim + k}));
        out.cxyy[k](a, b) = j.partial(exponent_of<Dim>({k, Dim + a, Dim + b}));
        for (int l = 0; l < Dim; ++l) out.cxxyy[k][l](a, b) = j.partial(exponent_of<Dim>({a, b, Dim + k, Dim + l}));
      }
  return out;
}

/// Value, first derivatives, c_ij and c_{i s}: the data the flow needs at every point.
template <int Dim>
struct CostDerivs {
  double q = 0.0;
  double c = 0.0;
  Vec<Dim> cx;
  Vec<Dim> cy;
  Mat<Dim> cxx;
  Mat<Dim> cxy;
};

/// Closed-form chain rule through q; agrees with eval_cost_jet to rounding.
template <int Dim>
CostDerivs<Dim> eval_cost_derivs(CostId cost, const ChartFrame<Dim>& fx, const ChartFrame<Dim>& fy) {
  const Ambient<Dim> diff = fx.x - fy.x;
  CostDerivs<Dim> out;
  out.q = diff.squaredNorm();
  const bool singular = cost == CostId::SquaredDistance
                            ? 4.0 - out.q < kSingularPairTolerance * kSingularPairTolerance
                            : out.q < kSingularPairTolerance * kSingularPairTolerance;
  if (singular) throw Error(ErrorCode::SingularPair, "cost derivatives requested on sing(c)");

  const ProfileDerivs p = profile_derivs(cost, out.q);
  out.c = p.f;
  Vec<Dim> qx;
  Vec<Dim> qy;
  for (int i = 0; i < Dim; ++i) {
    qx[i] = 2.0 * diff.dot(fx.dx[i]);
    qy[i] = -2.0 * diff.dot(fy.dx[i]);
  }
  out.cx = p.df * qx;
  out.cy = p.df * qy;
  for (int i = 0; i < Dim; ++i)
    for (int k = 0; k < Dim; ++k) {
      const double qxx = 2.0 * (fx.dx[i].dot(fx.dx[k]) + diff.dot(fx.ddx[i][k]));
      const double qxy = -2.0 * fx.dx[i].dot(fy.dx[k]);
      out.cxx(i, k) = p.d2f * qx[i] * qx[k] + p.df * qxx;
      out.cxy(i, k) = p.d2f * qx[i] * qy[k] + p.df * qxy;
    }
  return out;
}

}  // namespace otflow
