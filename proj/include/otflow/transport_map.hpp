#pragma once

// Recovering the target point T(x) from a chart covector Du through the
// contact relation  Du + D_x c(x, T(x)) = 0.

#include <cmath>
#include <numbers>

#include "otflow/cost.hpp"
#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"

namespace otflow {

inline constexpr double kCutLocusGuard = 1e-6;
inline constexpr double kSingularJacobianTolerance = 1e-10;

/// Metric gradient of u as an ambient vector: raise Du with the chart metric and push forward.
template <int Dim>
Ambient<Dim> raise_covector(const ChartFrame<Dim>& fr, const Vec<Dim>& du) {
  const Vec<Dim> v = chart_metric(fr.coords).inverse() * du;
  return push_forward(fr, v);
}

/// c-exponential of the squared-distance cost: exp_x(grad u).
template <int Dim>
SpherePoint<Dim> cexp_closed_form(const SpherePoint<Dim>& x, const Ambient<Dim>& grad_u) {
  if (grad_u.norm() >= std::numbers::pi - kCutLocusGuard)
    throw Error(ErrorCode::CutLocusReached, "gradient length reaches the cut locus");
  return exp_map(x, grad_u);
}

/// Chart version: Du is a covector in the chart of `fr`.
template <int Dim>
SpherePoint<Dim> cexp_closed_form(const ChartFrame<Dim>& fr, const Vec<Dim>& du) {
  return cexp_closed_form(SpherePoint<Dim>::from_unit(fr.x), raise_covector(fr, du));
}

struct NewtonOptions {
  double tolerance = 1e-11;   // residual norm accepted as converged
  double polish_below = 1e-14;  // residuals above this get one extra full step once converged
  int max_iterations = 50;
  double switch_radius = 1.1;  // stereographic radius beyond which the iterate changes chart
};

template <int Dim>
struct TargetSolution {
  ChartFrame<Dim> frame;   // target point, in the chart the solve finished in
  CostDerivs<Dim> derivs;  // cost data at (x, T(x))
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

template <int Dim>
ChartCoords<Dim> normalize_target_chart(ChartCoords<Dim> y, double switch_radius) {
  if constexpr (Dim == 2) {
    if (y.v.norm() > switch_radius) y = chart_transition(y, other_chart(y.chart));
  } else {
    y.v[0] = wrap_angle(y.v[0]);
  }
  return y;
}

}  // namespace detail

/// Newton iteration on the target chart coordinates for r(xbar) = Du + c_i(x, xbar).
template <int Dim>
TargetSolution<Dim> solve_target(CostId cost, const ChartFrame<Dim>& x, const Vec<Dim>& du,
                                 const ChartCoords<Dim>& warm, const NewtonOptions& opt = {}) {
  TargetSolution<Dim> sol;
  sol.frame = chart_frame(detail::normalize_target_chart(warm, opt.switch_radius));
  sol.derivs = eval_cost_derivs(cost, x, sol.frame);
  Vec<Dim> r = du + sol.derivs.cx;
  sol.residual = r.norm();
  bool polished = false;

  while (!(sol.residual <= opt.polish_below) && !(sol.residual <= opt.tolerance && polished)) {
    if (sol.iterations >= opt.max_iterations) {
      if (sol.residual <= opt.tolerance) break;
      throw Error(ErrorCode::NewtonDiverged, "contact relation did not converge");
    }
    const Mat<Dim>& jac = sol.derivs.cxy;
    if (std::abs(jac.determinant()) < kSingularJacobianTolerance)
      throw Error(ErrorCode::SingularJacobian, "mixed Hessian is singular along the Newton path");
    const Vec<Dim> step = -jac.inverse() * r;

    const bool polishing = sol.residual <= opt.tolerance;
    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < (polishing ? 1 : 30) && !accepted; ++halving, lambda *= 0.5) {
      ChartCoords<Dim> y = sol.frame.coords;
      y.v += lambda * step;
      try {
        const ChartFrame<Dim> fr = chart_frame(detail::normalize_target_chart(y, opt.switch_radius));
        const CostDerivs<Dim> d = eval_cost_derivs(cost, x, fr);
        const Vec<Dim> rt = du + d.cx;
        if (rt.norm() < (1.0 - 1e-4 * lambda) * sol.residual || (polishing && rt.norm() < sol.residual)) {
          sol.frame = fr;
          sol.derivs = d;
          r = rt;
          sol.residual = rt.norm();
          accepted = true;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularPair && e.code() != ErrorCode::PoleSingular) throw;
      }
    }
    if (polishing) {
      polished = true;
      if (accepted) ++sol.iterations;
      continue;
    }
    if (!accepted) {
      if (sol.residual <= opt.tolerance) break;
      throw Error(ErrorCode::NewtonDiverged, "line search failed to reduce the contact residual");
    }
    ++sol.iterations;
  }
  return sol;
}

/// Same, starting from chart coordinates of the source point.
template <int Dim>
TargetSolution<Dim> solve_target(CostId cost, const ChartCoords<Dim>& cx, const Vec<Dim>& du,
                                 const ChartCoords<Dim>& warm, const NewtonOptions& opt = {}) {
  return solve_target(cost, chart_frame(cx), du, warm, opt);
}

/// Default warm start for u = 0: x itself for the squared distance, its antipode for the reflector.
template <int Dim>
ChartCoords<Dim> initial_target(CostId cost, const SpherePoint<Dim>& x) {
  const SpherePoint<Dim> t = cost == CostId::SquaredDistance ? x : x.antipode();
  return to_owning_chart(t);
}

/// |det DT| in chart coordinates from w and the mixed Hessian.
template <int Dim>
double det_DT(const Mat<Dim>& w, const Mat<Dim>& c_mixed) {
  const double dw = w.determinant();
  if (!(dw > 0.0)) throw Error(ErrorCode::NonConvexState, "det w is not positive");
  return dw / std::abs(c_mixed.determinant());
}

/// Chart Jacobian DT = -(c_mixed)^{-1} w of the target chart coordinates.
template <int Dim>
Mat<Dim> map_jacobian(const Mat<Dim>& w, const Mat<Dim>& c_mixed) {
  return -c_mixed.inverse() * w;
}

}  // namespace otflow
