#pragma once

// Uniform chart lattices on S^2 (two stereographic charts) and S^1 (one
// periodic angle chart).
//
// S^2 layout per chart, in chart radius r:
//   r <= 1                 owned: the chart is authoritative there (z <= 0 for A, z > 0 for B)
//   1 < r <= 1 + 4h        overlap: evolved in both charts, never used for reductions
//   one lattice ring more  fringe: filled from the other chart's owned values
// Quadrature weights are the exact round-sphere areas of the lattice cells
// clipped to the owned disk, so the weights of each chart sum to 2 pi.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"

namespace otflow {

enum class PointKind : std::uint8_t { Owned, Overlap, Fringe };

template <int Dim>
struct GridPoint {
  ChartFrame<Dim> frame;
  SpherePoint<Dim> sphere;
  std::array<int, Dim> lattice{};
  PointKind kind = PointKind::Owned;
  double sqrt_det_g = 1.0;
  double weight = 0.0;          // quadrature weight in steradians (radians on S^1)
  double seam_cells = 1e300;    // distance to the ownership boundary, in lattice cells

  const ChartCoords<Dim>& coords() const { return frame.coords; }
  bool active() const { return kind != PointKind::Fringe; }
  bool owned() const { return kind == PointKind::Owned; }
};

namespace detail {

// Integral of the round area form over a straight chart segment, via the
// primitive 2 (x dy - y dx) / (1 + x^2 + y^2) of 4 dx dy / (1 + r^2)^2.
inline double segment_flux(const Vec<2>& p0, const Vec<2>& p1) {
  const Vec<2> d = p1 - p0;
  const double cross = p0[0] * d[1] - p0[1] * d[0];
  if (cross == 0.0) return 0.0;
  const double a = d.squaredNorm();
  const double b = 2.0 * p0.dot(d);
  const double disc = 4.0 * (a + cross * cross);
  const double sq = std::sqrt(disc);
  const double integral = (2.0 / sq) * (std::atan((2.0 * a + b) / sq) - std::atan(b / sq));
  return 2.0 * cross * integral;
}

/// Round-sphere area of the axis-aligned chart box [x0,x1]x[y0,y1] clipped to the unit disk.
inline double clipped_cell_area(double x0, double x1, double y0, double y1) {
  const std::array<Vec<2>, 4> corners = {Vec<2>(x0, y0), Vec<2>(x1, y0), Vec<2>(x1, y1), Vec<2>(x0, y1)};
  double area = 0.0;
  std::vector<double> crossings;
  for (int e = 0; e < 4; ++e) {
    const Vec<2>& p0 = corners[e];
    const Vec<2>& p1 = corners[(e + 1) % 4];
    const Vec<2> d = p1 - p0;
    const double a = d.squaredNorm();
    const double b = 2.0 * p0.dot(d);
    const double c = p0.squaredNorm() - 1.0;
    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    const double t1 = (-b - sq) / (2.0 * a);
    const double t2 = (-b + sq) / (2.0 * a);
    const double lo = std::max(0.0, t1);
    const double hi = std::min(1.0, t2);
    if (hi > lo) area += segment_flux(p0 + lo * d, p0 + hi * d);
    for (double t : {t1, t2})
      if (t > 0.0 && t < 1.0) {
        const Vec<2> p = p0 + t * d;
        crossings.push_back(std::atan2(p[1], p[0]));
      }
  }
  auto inside_box = [&](double phi) {
    const double x = std::cos(phi);
    const double y = std::sin(phi);
    return x > x0 && x < x1 && y > y0 && y < y1;
  };
  // On the unit circle the primitive reduces to d(phi).
  if (crossings.empty()) {
    if (inside_box(0.0) && inside_box(std::numbers::pi / 2) && inside_box(std::numbers::pi) &&
        inside_box(-std::numbers::pi / 2))
      area += 2.0 * std::numbers::pi;
    return area;
  }
  std::sort(crossings.begin(), crossings.end());
  const std::size_t n = crossings.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double a0 = crossings[k];
    const double a1 = k + 1 < n ? crossings[k + 1] : crossings[0] + 2.0 * std::numbers::pi;
    if (inside_box(0.5 * (a0 + a1))) area += a1 - a0;
  }
  return area;
}

/// Cubic Lagrange weights for nodes at -1, 0, 1, 2 evaluated at t in [0, 1).
inline std::array<double, 4> cubic_weights(double t) {
  return {-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
          -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
}

}  // namespace detail

template <int Dim>
class SphereGrid {
 public:
  static constexpr int dim = Dim;
  static constexpr int kNeighbors = Dim == 2 ? 8 : 2;
  static constexpr int kOverlapCells = 4;

  struct Donor {
    int target = -1;
    std::array<int, 16> source{};
    std::array<double, 16> weight{};
  };

  /// `resolution` lattice points per chart axis (S^2) or around the circle (S^1).
  explicit SphereGrid(int resolution) : n_(resolution) {
    if constexpr (Dim == 2) {
      build_stereographic();
    } else {
      build_circle();
    }
  }

  int resolution() const { return n_; }
  double spacing() const { return h_; }
  /// Chart coordinate of lattice index 0 along each axis.
  double lattice_origin() const { return origin_; }
  std::size_t size() const { return points_.size(); }
  const GridPoint<Dim>& point(std::size_t i) const { return points_[i]; }
  const std::vector<GridPoint<Dim>>& points() const { return points_; }
  const std::vector<int>& active() const { return active_; }
  const std::vector<int>& owned() const { return owned_; }
  const std::vector<Donor>& donors() const { return donors_; }
  std::vector<ChartId> charts() const {
    if constexpr (Dim == 2) return {ChartId::A, ChartId::B};
    return {ChartId::P};
  }
  const std::array<int, kNeighbors>& neighbors(int i) const { return neighbors_[i]; }

  /// Storage index of a lattice node, or -1 when the node is not stored.
  int lattice_index(ChartId chart, const std::array<int, Dim>& ij) const {
    if constexpr (Dim == 2) {
      if (ij[0] < 0 || ij[1] < 0 || ij[0] >= n_ || ij[1] >= n_) return -1;
      const int c = chart == ChartId::A ? 0 : 1;
      return lookup_[(c * n_ + ij[0]) * n_ + ij[1]];
    } else {
      return ((ij[0] % n_) + n_) % n_;
    }
  }

  /// Central-difference chart gradient at an active point.
  Vec<Dim> gradient(std::span<const double> f, int i) const {
    const auto& nb = neighbors_[i];
    Vec<Dim> g;
    g[0] = (f[nb[0]] - f[nb[1]]) / (2.0 * h_);
    if constexpr (Dim == 2) g[1] = (f[nb[2]] - f[nb[3]]) / (2.0 * h_);
    return g;
  }

  /// Central-difference chart Hessian at an active point.
  Mat<Dim> hessian(std::span<const double> f, int i) const {
    const auto& nb = neighbors_[i];
    const double h2 = h_ * h_;
    Mat<Dim> hs;
    hs(0, 0) = (f[nb[0]] - 2.0 * f[i] + f[nb[1]]) / h2;
    if constexpr (Dim == 2) {
      hs(1, 1) = (f[nb[2]] - 2.0 * f[i] + f[nb[3]]) / h2;
      hs(0, 1) = (f[nb[4]] - f[nb[5]] - f[nb[6]] + f[nb[7]]) / (4.0 * h2);
      hs(1, 0) = hs(0, 1);
    }
    return hs;
  }

  /// Fills fringe values from the other chart's owned values (bicubic).
  /// Owned and overlap values are read only; a no-op on S^1.
  void sync(std::span<double> f) const {
    for (const Donor& d : donors_) {
      // written relative to one donor so constants come through bit-exact
      const double base = f[d.source[0]];
      double acc = 0.0;
      for (int k = 1; k < 16; ++k) acc += d.weight[k] * (f[d.source[k]] - base);
      f[d.target] = base + acc;
    }
  }

  /// Sum of weight * value over points with nonzero weight.
  double quadrature(std::span<const double> f) const {
    double acc = 0.0;
    for (int i : quadrature_points_) acc += points_[i].weight * f[i];
    return acc;
  }

  double total_weight() const {
    double acc = 0.0;
    for (int i : quadrature_points_) acc += points_[i].weight;
    return acc;
  }

  /// Field sampled from a function of the sphere point at every stored point.
  std::vector<double> sample(const std::function<double(const SpherePoint<Dim>&)>& fn) const {
    std::vector<double> out(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) out[i] = fn(points_[i].sphere);
    return out;
  }

 private:
  void add_point(ChartCoords<Dim> c, std::array<int, Dim> ij, PointKind kind) {
    GridPoint<Dim> p;
    p.frame = chart_frame(c);
    p.sphere = chart_to_sphere(c);
    p.lattice = ij;
    p.kind = kind;
    p.sqrt_det_g = sqrt_det_metric(c);
    points_.push_back(p);
  }

  void build_circle() {
    if (n_ < 8) throw Error(ErrorCode::OverlapStarved, "circle grid needs at least 8 points");
    h_ = 2.0 * std::numbers::pi / n_;
    origin_ = -std::numbers::pi;
    for (int k = 0; k < n_; ++k) {
      ChartCoords<1> c;
      c.chart = ChartId::P;
      c.v[0] = origin_ + k * h_;
      add_point(c, {k}, PointKind::Owned);
      points_.back().weight = h_;
    }
    neighbors_.resize(n_);
    for (int k = 0; k < n_; ++k) {
      neighbors_[k] = {(k + 1) % n_, (k + n_ - 1) % n_};
      active_.push_back(k);
      owned_.push_back(k);
      quadrature_points_.push_back(k);
    }
  }

  void build_stereographic() {
    if (n_ < 16) throw Error(ErrorCode::OverlapStarved, "stereographic grid resolution too small");
    const double cap = stereographic_cap_radius();
    origin_ = -cap;
    h_ = 2.0 * cap / (n_ - 1);
    const double r_active = 1.0 + kOverlapCells * h_;
    lookup_.assign(2 * n_ * n_, -1);

    auto coord = [&](int i) { return origin_ + i * h_; };
    auto radius = [&](int i, int j) { return std::hypot(coord(i), coord(j)); };
    auto is_active = [&](int i, int j) {
      return i >= 0 && j >= 0 && i < n_ && j < n_ && radius(i, j) <= r_active;
    };

    for (int c = 0; c < 2; ++c) {
      const ChartId chart = c == 0 ? ChartId::A : ChartId::B;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          const double r = radius(i, j);
          PointKind kind;
          if (r < 1.0 || (r == 1.0 && chart == ChartId::A)) {
            kind = PointKind::Owned;
          } else if (r <= r_active) {
            kind = PointKind::Overlap;
          } else {
            bool touches = false;
            for (int di = -1; di <= 1; ++di)
              for (int dj = -1; dj <= 1; ++dj) touches = touches || is_active(i + di, j + dj);
            if (!touches) continue;
            if (r > cap) throw Error(ErrorCode::OverlapStarved, "fringe ring leaves the chart validity disk");
            kind = PointKind::Fringe;
          }
          ChartCoords<2> cc;
          cc.chart = chart;
          cc.v = Vec<2>(coord(i), coord(j));
          lookup_[(c * n_ + i) * n_ + j] = static_cast<int>(points_.size());
          add_point(cc, {i, j}, kind);
          points_.back().seam_cells = std::abs(r - 1.0) / h_;
        }
    }

    neighbors_.resize(points_.size());
    for (std::size_t idx = 0; idx < points_.size(); ++idx) {
      const auto& p = points_[idx];
      if (p.kind == PointKind::Owned) owned_.push_back(static_cast<int>(idx));
      if (!p.active()) continue;
      active_.push_back(static_cast<int>(idx));
      const int i = p.lattice[0];
      const int j = p.lattice[1];
      const std::array<std::array<int, 2>, 8> offs = {
          {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
      for (int k = 0; k < 8; ++k) {
        const int nb = lattice_index(p.coords().chart, {i + offs[k][0], j + offs[k][1]});
        if (nb < 0) throw Error(ErrorCode::OverlapStarved, "active point without a complete stencil");
        neighbors_[idx][k] = nb;
      }
    }

    for (std::size_t idx = 0; idx < points_.size(); ++idx) {
      const auto& p = points_[idx];
      if (p.kind != PointKind::Fringe) continue;
      const ChartCoords<2> other = chart_transition(p.coords(), other_chart(p.coords().chart));
      const double fi = (other.v[0] - origin_) / h_;
      const double fj = (other.v[1] - origin_) / h_;
      const int i0 = static_cast<int>(std::floor(fi));
      const int j0 = static_cast<int>(std::floor(fj));
      const auto wi = detail::cubic_weights(fi - i0);
      const auto wj = detail::cubic_weights(fj - j0);
      Donor d;
      d.target = static_cast<int>(idx);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const int s = lattice_index(other.chart, {i0 - 1 + a, j0 - 1 + b});
          if (s < 0 || points_[s].kind != PointKind::Owned)
            throw Error(ErrorCode::OverlapStarved, "fringe point lacks an owned bicubic stencil");
          d.source[a * 4 + b] = s;
          d.weight[a * 4 + b] = wi[a] * wj[b];
        }
      donors_.push_back(d);
    }

    for (std::size_t idx = 0; idx < points_.size(); ++idx) {
      auto& p = points_[idx];
      const double x = p.coords().v[0];
      const double y = p.coords().v[1];
      if (std::hypot(x, y) > 1.0 + h_) continue;
      p.weight = detail::clipped_cell_area(x - 0.5 * h_, x + 0.5 * h_, y - 0.5 * h_, y + 0.5 * h_);
      if (p.weight > 0.0) {
        if (!p.active()) throw Error(ErrorCode::OverlapStarved, "quadrature cell centred on a fringe point");
        quadrature_points_.push_back(static_cast<int>(idx));
      }
    }
  }

  int n_;
  double h_ = 0.0;
  double origin_ = 0.0;
  std::vector<GridPoint<Dim>> points_;
  std::vector<int> lookup_;
  std::vector<std::array<int, kNeighbors>> neighbors_;
  std::vector<int> active_;
  std::vector<int> owned_;
  std::vector<int> quadrature_points_;
  std::vector<Donor> donors_;
};

/// Per-point scalar over a grid (all stored points, fringe included).
using GridScalar = std::vector<double>;

}  // namespace otflow
