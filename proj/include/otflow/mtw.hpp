#pragma once

// The MTW (2,2)-tensor of a cost, sampled positivity checks, and the pullback
// identity (Id x T)^* h = w for the mixed-Hessian pseudo-metric h.
//
//   MTW(V, eta) = (-c_{ij rbar pbar} + c_{ij sbar} c^{sbar m} c_{m pbar rbar}) V^i V^j xi^pbar xi^rbar,
//   xi^pbar = c^{pbar k} eta_k,  with c^{sbar m} the inverse of c_{m sbar}.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "otflow/cost.hpp"
#include "otflow/cost_check.hpp"
#include "otflow/errors.hpp"
#include "otflow/flow.hpp"
#include "otflow/geometry.hpp"

namespace otflow {

inline constexpr double kMtwSingMargin = 0.05;
inline constexpr double kNearDegenerateTolerance = 1e-10;

template <int Dim>
struct MtwSample {
  ChartCoords<Dim> x;
  ChartCoords<Dim> xbar;
  Vec<Dim> v = Vec<Dim>::Zero();    // vector at x
  Vec<Dim> eta = Vec<Dim>::Zero();  // covector at x
  double value = 0.0;
  double normalized = 0.0;
};

namespace detail {

// Contraction shared by the jet and finite-difference evaluations. `cxy` has
// rows in the source index; the third and fourth derivatives use the CostJet layout.
template <int Dim>
double mtw_contract(const Mat<Dim>& cxy, const std::array<Mat<Dim>, Dim>& cxxy, const std::array<Mat<Dim>, Dim>& cxyy,
                    const std::array<std::array<Mat<Dim>, Dim>, Dim>& cxxyy, const Vec<Dim>& v, const Vec<Dim>& eta) {
  if (std::abs(cxy.determinant()) < kNearDegenerateTolerance)
    throw Error(ErrorCode::NearDegenerateMixedHessian, "mixed Hessian is nearly singular");
  const Mat<Dim> inv = cxy.inverse();  // inv(sbar, m)
  const Vec<Dim> xi = inv * eta;
  double total = 0.0;
  for (int p = 0; p < Dim; ++p)
    for (int r = 0; r < Dim; ++r) {
      Mat<Dim> a = -cxxyy[p][r];
      for (int sb = 0; sb < Dim; ++sb)
        for (int m = 0; m < Dim; ++m) a += cxxy[sb] * (inv(sb, m) * cxyy[m](p, r));
      total += v.dot(a * v) * xi[p] * xi[r];
    }
  return total;
}

template <int Dim>
double mtw_norms(const ChartCoords<Dim>& x, const Vec<Dim>& v, const Vec<Dim>& eta) {
  const Mat<Dim> g = chart_metric(x);
  return v.dot(g * v) * eta.dot(g.inverse() * eta);
}

template <int Dim>
void check_mtw_pair(CostId cost, const ChartCoords<Dim>& x, const ChartCoords<Dim>& xbar) {
  if (sing_distance(cost, chart_to_sphere(x), chart_to_sphere(xbar)) < kMtwSingMargin)
    throw Error(ErrorCode::SingularPair, "MTW evaluation too close to sing(c)");
}

}  // namespace detail

template <int Dim>
double mtw_value(CostId cost, const ChartCoords<Dim>& x, const ChartCoords<Dim>& xbar, const Vec<Dim>& v,
                 const Vec<Dim>& eta) {
  detail::check_mtw_pair(cost, x, xbar);
  const CostJet<Dim> j = eval_cost_jet(cost, x, xbar);
  return detail::mtw_contract<Dim>(j.cxy, j.cxxy, j.cxyy, j.cxxyy, v, eta);
}

/// value / (|V|_g^2 |eta|_g^2).
template <int Dim>
double mtw_normalized(CostId cost, const ChartCoords<Dim>& x, const ChartCoords<Dim>& xbar, const Vec<Dim>& v,
                      const Vec<Dim>& eta) {
  return mtw_value(cost, x, xbar, v, eta) / detail::mtw_norms(x, v, eta);
}

/// The same contraction with every cost derivative taken from binary128 finite differences.
template <int Dim>
double mtw_value_fd(CostId cost, const ChartCoords<Dim>& x, const ChartCoords<Dim>& xbar, const Vec<Dim>& v,
                    const Vec<Dim>& eta, double step = 1e-3) {
  detail::check_mtw_pair(cost, x, xbar);
  FdCostPartials<Dim> fd(cost, x, xbar, step);
  Mat<Dim> cxy;
  std::array<Mat<Dim>, Dim> cxxy, cxyy;
  std::array<std::array<Mat<Dim>, Dim>, Dim> cxxyy;
  for (int a = 0; a < Dim; ++a)
    for (int b = 0; b < Dim; ++b) {
      cxy(a, b) = fd.partial({a, Dim + b});
      for (int k = 0; k < Dim; ++k) {
        cxxy[k](a, b) = fd.partial({a, b, Dim + k});
        cxyy[k](a, b) = fd.partial({k, Dim + a, Dim + b});
        for (int l = 0; l < Dim; ++l) cxxyy[k][l](a, b) = fd.partial({a, b, Dim + k, Dim + l});
      }
    }
  return detail::mtw_contract<Dim>(cxy, cxxy, cxyy, cxxyy, v, eta);
}

struct MtwDeltaResult {
  double delta = std::numeric_limits<double>::infinity();  // min normalized value
  MtwSample<2> argmin;
  int samples = 0;
};

namespace detail {

inline SpherePoint<2> random_sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  for (;;) {
    const Ambient<2> v(n01(rng), n01(rng), n01(rng));
    if (v.norm() > 1e-6) return SpherePoint<2>(v);
  }
}

}  // namespace detail

/// Draws base pairs uniformly with sing_distance >= `margin`, unit V and eta with eta(V) = 0,
/// and returns the smallest normalized MTW value. Deterministic for a given seed.
inline MtwDeltaResult sample_mtw_delta(CostId cost, int num_samples, double margin, std::uint64_t seed = 42) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  MtwDeltaResult out;
  for (int k = 0; k < num_samples; ++k) {
    SpherePoint<2> x, xbar;
    do {
      x = detail::random_sphere_point(rng);
      xbar = detail::random_sphere_point(rng);
    } while (sing_distance(cost, x, xbar) < margin);
    MtwSample<2> s;
    s.x = to_owning_chart(x);
    s.xbar = to_owning_chart(xbar);
    Vec<2> v(n01(rng), n01(rng));
    Vec<2> eta(n01(rng), n01(rng));
    v.normalize();
    eta -= eta.dot(v) * v;  // Gram-Schmidt: eta(V) = 0
    eta.normalize();
    s.v = v;
    s.eta = eta;
    s.value = mtw_value(cost, s.x, s.xbar, v, eta);
    s.normalized = s.value / detail::mtw_norms(s.x, v, eta);
    ++out.samples;
    if (s.normalized < out.delta) {
      out.delta = s.normalized;
      out.argmin = s;
    }
  }
  return out;
}

enum class JacobianSource { FiniteDifference, FromW };

/// max over owned points of |sym(-c_{i sbar} DT^sbar_k) - w_ik|.
template <int Dim>
double pullback_h_check(const Flow<Dim>& flow, const FlowState<Dim>& s,
                        JacobianSource source = JacobianSource::FiniteDifference) {
  const auto& g = flow.grid();
  double worst = 0.0;
  for (int i : g.owned()) {
    Mat<Dim> dt;
    if (source == JacobianSource::FromW) {
      dt = map_jacobian<Dim>(s.w[i], s.c_mixed[i]);
    } else {
      const ChartFrame<Dim> fr = chart_frame(s.target[i]);
      Mat<Dim> gram;
      for (int a = 0; a < Dim; ++a)
        for (int b = 0; b < Dim; ++b) gram(a, b) = fr.dx[a].dot(fr.dx[b]);
      const Mat<Dim> gram_inv = gram.inverse();
      const auto& nb = g.neighbors(i);
      for (int k = 0; k < Dim; ++k) {
        const Ambient<Dim> d =
            (s.target_point(nb[2 * k]).coords() - s.target_point(nb[2 * k + 1]).coords()) / (2.0 * g.spacing());
        Vec<Dim> proj;
        for (int a = 0; a < Dim; ++a) proj[a] = fr.dx[a].dot(d);
        dt.col(k) = gram_inv * proj;
      }
    }
    const Mat<Dim> p = -s.c_mixed[i] * dt;
    const Mat<Dim> sym = 0.5 * (p + p.transpose());
    worst = std::max(worst, (sym - s.w[i]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace otflow
