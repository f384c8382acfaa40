#pragma once

// Reference solutions independent of the flow:
//  - optimal transport on the circle by monotone rearrangement with a shift scan,
//  - the first-order potential for a small tilt of the uniform density on S^2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "otflow/density.hpp"
#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"

namespace otflow {

struct CircleOracleResult {
  std::vector<double> angles;  // -pi + k h
  std::vector<double> target;  // T(angle), wrapped to (-pi, pi]
  double shift = 0.0;
  double cost = 0.0;
};

namespace detail {

/// Cumulative distribution of a circle density from -pi, with an accurate inverse.
class CircleCdf {
 public:
  explicit CircleCdf(const DensityField<1>& f, int cells = 4096) : f_(f), cells_(cells) {
    h_ = 2.0 * std::numbers::pi / cells_;
    table_.resize(cells_ + 1, 0.0);
    for (int k = 0; k < cells_; ++k) table_[k + 1] = table_[k] + segment(node(k), node(k + 1));
    total_ = table_.back();
  }

  double density(double phi) const { return f_(point(phi)); }

  /// F(phi) for phi in [-pi, pi], normalized so that F(pi) = 1.
  double operator()(double phi) const {
    const int k = std::clamp(static_cast<int>(std::floor((phi + std::numbers::pi) / h_)), 0, cells_ - 1);
    return (table_[k] + segment(node(k), phi)) / total_;
  }

  /// Inverse on [0, 1): Newton inside the bracketing cell, safeguarded by bisection.
  double inverse(double s) const {
    const double target = s * total_;
    const int k = std::clamp(static_cast<int>(std::upper_bound(table_.begin(), table_.end(), target) - table_.begin()) - 1,
                             0, cells_ - 1);
    double lo = node(k), hi = node(k + 1);
    double x = lo + h_ * (target - table_[k]) / (table_[k + 1] - table_[k]);
    for (int it = 0; it < 60; ++it) {
      const double r = table_[k] + segment(node(k), x) - target;
      if (r > 0.0) hi = x;
      else lo = x;
      double next = x - r / (density(x));
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) < 1e-16) {
        x = next;
        break;
      }
      x = next;
    }
    return x;
  }

 private:
  static SpherePoint<1> point(double phi) { return SpherePoint<1>::from_unit(Ambient<1>(std::cos(phi), std::sin(phi))); }
  double node(int k) const { return -std::numbers::pi + k * h_; }
  double segment(double a, double b) const {
    return boost::math::quadrature::gauss<double, 10>::integrate([&](double t) { return density(t); }, a, b);
  }

  DensityField<1> f_;
  int cells_;
  double h_ = 0.0;
  double total_ = 1.0;
  std::vector<double> table_;
};

}  // namespace detail

/// Circularly monotone map T_k = Fbar^{-1}((F + k) mod 1) minimizing the quadratic cost over k.
inline CircleOracleResult circle_rearrangement(const DensityField<1>& rho, const DensityField<1>& rhobar, int n,
                                               int shifts = 256) {
  if (n < 2 || shifts < 2) throw Error(ErrorCode::ConfigError, "circle oracle needs n >= 2 and shifts >= 2");
  const detail::CircleCdf src(rho);
  const detail::CircleCdf dst(rhobar);
  const double h = 2.0 * std::numbers::pi / n;
  CircleOracleResult out;
  out.angles.resize(n);
  std::vector<double> cdf(n), weight(n);
  for (int k = 0; k < n; ++k) {
    out.angles[k] = -std::numbers::pi + k * h;
    cdf[k] = src(out.angles[k]);
    weight[k] = src.density(out.angles[k]) * h;
  }

  auto map_for = [&](double shift, std::vector<double>* t) {
    double cost = 0.0;
    for (int k = 0; k < n; ++k) {
      double s = cdf[k] + shift;
      s -= std::floor(s);
      const double y = wrap_angle(dst.inverse(s));
      const double d = wrap_angle(y - out.angles[k]);
      cost += 0.5 * d * d * weight[k];
      if (t) (*t)[k] = y;
    }
    return cost;
  };

  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int j = 0; j < shifts; ++j) {
    const double c = map_for(-0.5 + static_cast<double>(j) / shifts, nullptr);
    if (c < best_cost) {
      best_cost = c;
      best = j;
    }
  }
  // Golden-section refinement on the bracket around the best scanned shift.
  const double step = 1.0 / shifts;
  double a = -0.5 + best * step - step, b = -0.5 + best * step + step;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = map_for(c, nullptr), fd = map_for(d, nullptr);
  while (b - a > 1e-13) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = map_for(c, nullptr);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = map_for(d, nullptr);
    }
  }
  double shift = 0.5 * (a + b);
  if (best_cost < map_for(shift, nullptr)) shift = -0.5 + best * step;
  out.target.resize(n);
  out.cost = map_for(shift, &out.target);
  out.shift = shift;
  return out;
}

/// First-order potential (eps/2) <x, e> for rho uniform and rhobar = (1 + eps <x, e>) / 4 pi.
class LinearizedPotential {
 public:
  LinearizedPotential(double eps, const Ambient<2>& e) : eps_(eps), e_(e.normalized()) {}
  double operator()(const SpherePoint<2>& p) const { return 0.5 * eps_ * e_.dot(p.coords()); }
  double eps() const { return eps_; }
  const Ambient<2>& direction() const { return e_; }

 private:
  double eps_;
  Ambient<2> e_;
};

inline LinearizedPotential poisson_linearization(double eps, const Ambient<2>& e = Ambient<2>::UnitZ()) {
  if (!(std::abs(eps) <= 0.1)) throw Error(ErrorCode::ConfigError, "linearization oracle needs |eps| <= 0.1");
  if (!(e.norm() > 0.0)) throw Error(ErrorCode::ConfigError, "linearization direction must be nonzero");
  return LinearizedPotential(eps, e);
}

}  // namespace otflow
