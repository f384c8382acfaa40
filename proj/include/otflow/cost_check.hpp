#pragma once

// Independent validation of the cost jet engine: every jet entry is compared
// with a fourth-order central finite difference of the closed-form cost,
// evaluated in binary128 so that roundoff does not swamp fourth derivatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <vector>

#include <boost/multiprecision/float128.hpp>

#include "otflow/cost.hpp"

namespace otflow {

using Quad = boost::multiprecision::float128;

namespace detail {

/// Unit-spacing central stencil for the k-th derivative, fourth-order accurate,
/// on offsets -m..m with m = (k + 1) / 2 + 1.
inline std::vector<Quad> central_stencil(int k) {
  const int m = (k + 1) / 2 + 1;
  const int n = 2 * m + 1;
  std::vector<std::vector<Quad>> a(n, std::vector<Quad>(n + 1, Quad(0)));
  Quad fact = 1;
  for (int q = 2; q <= k; ++q) fact *= q;
  for (int p = 0; p < n; ++p) {
    for (int j = 0; j < n; ++j) {
      Quad x = j - m;
      Quad pw = 1;
      for (int e = 0; e < p; ++e) pw *= x;
      a[p][j] = pw;
    }
    a[p][n] = p == k ? fact : Quad(0);
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (abs(a[r][col]) > abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const Quad f = a[r][col] / a[col][col];
      for (int c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<Quad> w(n);
  for (int j = 0; j < n; ++j) w[j] = a[j][n] / a[j][j];
  return w;
}

template <int Dim>
Quad eval_cost_quad(CostId cost, ChartId xc, ChartId yc, const std::array<Quad, 2 * Dim>& v) {
  std::array<Quad, Dim> xs;
  std::array<Quad, Dim> ys;
  for (int i = 0; i < Dim; ++i) {
    xs[i] = v[i];
    ys[i] = v[Dim + i];
  }
  const auto X = embed<Quad, Dim>(xc, xs);
  const auto Y = embed<Quad, Dim>(yc, ys);
  return profile_value<Quad>(cost, squared_chord<Quad, Dim + 1>(X, Y));
}

}  // namespace detail

/// Finite-difference partials of the closed-form cost in binary128, with the
/// function values cached on the offset lattice shared by all stencils.
template <int Dim>
class FdCostPartials {
 public:
  static constexpr int kVars = 2 * Dim;
  static constexpr int kSpan = 7;  // offsets -3..3 cover every stencil up to order 4
  using Exponent = typename CostJet<Dim>::Exponent;

  FdCostPartials(CostId cost, const ChartCoords<Dim>& cx, const ChartCoords<Dim>& cy, double step = 1e-4)
      : cost_(cost), cx_(cx), cy_(cy), h_(step) {
    for (int k = 1; k <= 4; ++k) stencils_[k] = detail::central_stencil(k);
    int cells = 1;
    for (int v = 0; v < kVars; ++v) cells *= kSpan;
    cache_.resize(cells);
    have_.assign(cells, 0);
    for (int i = 0; i < Dim; ++i) {
      base_[i] = cx.v[i];
      base_[Dim + i] = cy.v[i];
    }
  }

  /// Partial derivative for a multi-index (source variables first), total order <= 4.
  /// Order 0 returns the double closed form.
  double partial(const Exponent& e) {
    int deg = 0;
    for (int v = 0; v < kVars; ++v) deg += e[v];
    if (deg == 0) return eval_cost(cost_, chart_to_sphere(cx_), chart_to_sphere(cy_));
    // Tensor product of one-dimensional stencils over the differentiated variables.
    std::array<int, kVars> lo{};
    std::array<int, kVars> off{};
    for (int v = 0; v < kVars; ++v) {
      lo[v] = e[v] == 0 ? 0 : -static_cast<int>(stencils_[e[v]].size() / 2);
      off[v] = lo[v];
    }
    Quad acc = 0;
    for (;;) {
      Quad w = 1;
      for (int v = 0; v < kVars; ++v)
        if (e[v] > 0) w *= stencils_[e[v]][off[v] - lo[v]];
      if (w != 0) acc += w * value_at(off);
      int v = 0;
      for (; v < kVars; ++v) {
        if (e[v] == 0) continue;
        if (++off[v] <= -lo[v]) break;
        off[v] = lo[v];
      }
      if (v == kVars) break;
    }
    Quad hp = 1;
    for (int q = 0; q < deg; ++q) hp *= h_;
    return static_cast<double>(acc / hp);
  }

  /// Partial by variable list, e.g. {0, 1, Dim} for c_{x0 x1 y0}.
  double partial(std::initializer_list<int> vars) {
    Exponent e{};
    for (int v : vars) ++e[v];
    return partial(e);
  }

 private:
  Quad value_at(const std::array<int, kVars>& off) {
    int code = 0;
    for (int v = 0; v < kVars; ++v) code = code * kSpan + (off[v] + 3);
    if (!have_[code]) {
      std::array<Quad, kVars> p;
      for (int v = 0; v < kVars; ++v) p[v] = base_[v] + off[v] * h_;
      cache_[code] = detail::eval_cost_quad<Dim>(cost_, cx_.chart, cy_.chart, p);
      have_[code] = 1;
    }
    return cache_[code];
  }

  CostId cost_;
  ChartCoords<Dim> cx_;
  ChartCoords<Dim> cy_;
  Quad h_;
  std::array<std::vector<Quad>, 5> stencils_;
  std::array<Quad, kVars> base_;
  std::vector<Quad> cache_;
  std::vector<char> have_;
};

template <int Dim>
struct FdCheckReport {
  double max_discrepancy = 0.0;  // max |jet - fd| / max(1, |fd|)
  typename CostJet<Dim>::Exponent worst{};
  std::array<double, 5> per_order{};  // same measure restricted to each total order
};

/// Compares every jet entry up to `max_order` against finite differences with `step`.
template <int Dim>
FdCheckReport<Dim> fd_cross_check(CostId cost, const ChartCoords<Dim>& cx, const ChartCoords<Dim>& cy,
                                  int max_order = 4, double step = 1e-4) {
  using Table = typename CostJet<Dim>::JetType::Table;
  const CostJet<Dim> jet = eval_cost_jet(cost, cx, cy);
  FdCostPartials<Dim> fd(cost, cx, cy, step);
  FdCheckReport<Dim> report;
  for (int m = 0; m < Table::size; ++m) {
    const auto& e = Table::exponents[m];
    const int deg = Table::degree(m);
    if (deg > max_order) continue;
    const double ref = fd.partial(e);
    const double err = std::abs(jet.jet.partial(e) - ref) / std::max(1.0, std::abs(ref));
    report.per_order[deg] = std::max(report.per_order[deg], err);
    if (err > report.max_discrepancy) {
      report.max_discrepancy = err;
      report.worst = e;
    }
  }
  return report;
}

}  // namespace otflow
