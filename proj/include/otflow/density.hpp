#pragma once

// Smooth positive probability densities on S^1 and S^2, stored as closed-form
// intrinsic densities (per unit round volume) with closed-form normalization.
//
//   uniform                          1
//   tilt(eps, e)                     1 + eps <x, e>
//   bump(kappa, mu, amp)             1 + amp exp(kappa (<x, mu> - 1))
//
// A chart density is f * sqrt(det g), i.e. the density against dx in that chart.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"

namespace otflow {

enum class DensityKind { Uniform, Tilt, Bump };

template <int Dim>
class DensityField {
 public:
  DensityField() { normalize(); }

  static DensityField uniform() { return DensityField(); }

  static DensityField tilt(double eps, const Ambient<Dim>& e) {
    DensityField d;
    d.kind_ = DensityKind::Tilt;
    d.eps_ = eps;
    d.dir_ = unit_direction(e);
    if (!(std::abs(eps) < 1.0)) throw Error(ErrorCode::ConfigError, "tilt density needs |eps| < 1");
    d.normalize();
    return d;
  }

  static DensityField bump(double kappa, const Ambient<Dim>& mu, double amp) {
    DensityField d;
    d.kind_ = DensityKind::Bump;
    d.kappa_ = kappa;
    d.dir_ = unit_direction(mu);
    d.amp_ = amp;
    if (!(kappa >= 0.0)) throw Error(ErrorCode::ConfigError, "bump density needs kappa >= 0");
    if (!(amp > -1.0)) throw Error(ErrorCode::ConfigError, "bump density needs amp > -1");
    d.normalize();
    return d;
  }

  /// Parses "uniform", "tilt(eps=0.1, e=(0,0,1))" or "bump(kappa=4, mu=(0,0,1), amp=0.3)".
  static DensityField parse(std::string_view text);

  DensityKind kind() const { return kind_; }
  double eps() const { return eps_; }
  double kappa() const { return kappa_; }
  double amp() const { return amp_; }
  const Ambient<Dim>& direction() const { return dir_; }
  double normalization() const { return norm_; }

  /// Canonical spec string; parse(spec()) reproduces the field exactly.
  std::string spec() const;

  double raw(const SpherePoint<Dim>& p) const {
    switch (kind_) {
      case DensityKind::Uniform: return 1.0;
      case DensityKind::Tilt: return 1.0 + eps_ * dir_.dot(p.coords());
      case DensityKind::Bump: return 1.0 + amp_ * std::exp(kappa_ * (dir_.dot(p.coords()) - 1.0));
    }
    return 1.0;
  }

  /// Normalized intrinsic density.
  double operator()(const SpherePoint<Dim>& p) const { return raw(p) / norm_; }
  double log_value(const SpherePoint<Dim>& p) const { return std::log(raw(p)) - std::log(norm_); }

  /// Ambient gradient of ln f (dot it with a tangent vector to differentiate).
  Ambient<Dim> log_gradient(const SpherePoint<Dim>& p) const {
    switch (kind_) {
      case DensityKind::Uniform: return Ambient<Dim>::Zero();
      case DensityKind::Tilt: return (eps_ / raw(p)) * dir_;
      case DensityKind::Bump: {
        const double e = amp_ * std::exp(kappa_ * (dir_.dot(p.coords()) - 1.0));
        return (kappa_ * e / (1.0 + e)) * dir_;
      }
    }
    return Ambient<Dim>::Zero();
  }

  double chart_density(const ChartCoords<Dim>& c) const {
    return (*this)(chart_to_sphere(c)) * sqrt_det_metric(c);
  }

  double log_chart_density(const ChartCoords<Dim>& c) const {
    return log_value(chart_to_sphere(c)) + std::log(sqrt_det_metric(c));
  }

  /// Chart gradient of ln(chart density).
  Vec<Dim> chart_log_gradient(const ChartFrame<Dim>& fr) const {
    const Ambient<Dim> g = log_gradient(SpherePoint<Dim>::from_unit(fr.x));
    Vec<Dim> out = log_sqrt_det_metric_gradient(fr.coords);
    for (int i = 0; i < Dim; ++i) out[i] += g.dot(fr.dx[i]);
    return out;
  }

  /// High-order quadrature of a function over the whole sphere (independent of any flow grid).
  template <class F>
  static double integrate(F&& fn) {
    if constexpr (Dim == 1) {
      constexpr int n = 2048;
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        const double phi = -std::numbers::pi + 2.0 * std::numbers::pi * k / n;
        acc += fn(SpherePoint<1>::from_unit(Ambient<1>(std::cos(phi), std::sin(phi))));
      }
      return acc * 2.0 * std::numbers::pi / n;
    } else {
      // Gauss-Kronrod in z, periodic trapezoid in longitude.
      constexpr int n = 256;
      auto ring = [&](double z) {
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
          const double phi = 2.0 * std::numbers::pi * k / n;
          acc += fn(SpherePoint<2>::from_unit(Ambient<2>(s * std::cos(phi), s * std::sin(phi), z)));
        }
        return acc * 2.0 * std::numbers::pi / n;
      };
      return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(ring, -1.0, 1.0, 6, 1e-13);
    }
  }

  /// |integral of f - 1| by the high-order quadrature.
  double normalization_error() const {
    return std::abs(integrate([&](const SpherePoint<Dim>& p) { return (*this)(p); }) - 1.0);
  }

 private:
  static Ambient<Dim> unit_direction(const Ambient<Dim>& v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw Error(ErrorCode::ConfigError, "density direction must be nonzero");
    return v / n;
  }

  void normalize() {
    constexpr double area = Dim == 2 ? 4.0 * std::numbers::pi : 2.0 * std::numbers::pi;
    if (kind_ == DensityKind::Uniform) {
      norm_ = area;
    } else if (kind_ == DensityKind::Tilt) {
      norm_ = area;  // the linear term integrates to zero
    } else if constexpr (Dim == 2) {
      // the bump depends on <x, mu> only; its mass is 2 pi amp times the integral of exp(kappa (t - 1)) over [-1, 1]
      const double shell = kappa_ > 0.0 ? -std::expm1(-2.0 * kappa_) / kappa_ : 2.0;
      norm_ = area + 2.0 * std::numbers::pi * amp_ * shell;
    } else {
      // integral of exp(kappa (cos phi - 1)) over the circle is 2 pi e^-kappa I0(kappa)
      norm_ = area + 2.0 * std::numbers::pi * amp_ * std::exp(-kappa_) * boost::math::cyl_bessel_i(0, kappa_);
    }
  }

  DensityKind kind_ = DensityKind::Uniform;
  double eps_ = 0.0;
  double kappa_ = 0.0;
  double amp_ = 0.0;
  Ambient<Dim> dir_ = Ambient<Dim>::UnitX();
  double norm_ = 1.0;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <int Dim>
std::string format_vector(const Ambient<Dim>& v) {
  std::string s = "(";
  for (int k = 0; k <= Dim; ++k) {
    if (k) s += ",";
    s += format_double(v[k]);
  }
  return s + ")";
}

// Minimal reader for name(key=value, key=(a,b,c)).
class SpecReader {
 public:
  explicit SpecReader(std::string_view s) : s_(s) {}

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool done() {
    skip();
    return pos_ >= s_.size();
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string word() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }
  double number() {
    skip();
    const std::string rest(s_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    pos_ += used;
    return v;
  }
  std::vector<double> tuple() {
    std::vector<double> out;
    expect('(');
    do out.push_back(number());
    while (accept(','));
    expect(')');
    return out;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ConfigError,
                "density spec '" + std::string(s_) + "': " + what + " at offset " + std::to_string(pos_));
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <int Dim>
DensityField<Dim> DensityField<Dim>::parse(std::string_view text) {
  detail::SpecReader in(text);
  const std::string name = in.word();
  double eps = 0.0, kappa = 0.0, amp = 0.0;
  Ambient<Dim> dir = Ambient<Dim>::Zero();
  dir[Dim] = 1.0;
  bool have_eps = false, have_kappa = false, have_amp = false;
  if (in.accept('(')) {
    if (!in.accept(')')) {
      do {
        const std::string key = in.word();
        in.expect('=');
        if (key == "e" || key == "mu") {
          const auto v = in.tuple();
          if (static_cast<int>(v.size()) != Dim + 1)
            in.fail("direction needs " + std::to_string(Dim + 1) + " components");
          for (int k = 0; k <= Dim; ++k) dir[k] = v[k];
        } else if (key == "eps") {
          eps = in.number();
          have_eps = true;
        } else if (key == "kappa") {
          kappa = in.number();
          have_kappa = true;
        } else if (key == "amp") {
          amp = in.number();
          have_amp = true;
        } else {
          in.fail("unknown parameter '" + key + "'");
        }
      } while (in.accept(','));
      in.expect(')');
    }
  }
  if (!in.done()) in.fail("trailing characters");
  if (name == "uniform") return uniform();
  if (name == "tilt") {
    if (!have_eps) in.fail("tilt needs eps");
    return tilt(eps, dir);
  }
  if (name == "bump") {
    if (!have_kappa || !have_amp) in.fail("bump needs kappa and amp");
    return bump(kappa, dir, amp);
  }
  in.fail("unknown density '" + name + "'");
}

template <int Dim>
std::string DensityField<Dim>::spec() const {
  using detail::format_double;
  switch (kind_) {
    case DensityKind::Uniform: return "uniform";
    case DensityKind::Tilt: return "tilt(eps=" + format_double(eps_) + ", e=" + detail::format_vector<Dim>(dir_) + ")";
    case DensityKind::Bump:
      return "bump(kappa=" + format_double(kappa_) + ", mu=" + detail::format_vector<Dim>(dir_) +
             ", amp=" + format_double(amp_) + ")";
  }
  return "uniform";
}

}  // namespace otflow
