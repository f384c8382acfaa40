#pragma once

// The parabolic flow u_t = theta on a chart grid.
//
//   w     = D^2 u + c_xx(x, T(x))
//   theta = ln det w - ln rho(x) + ln rhobar(T(x)) - ln |det c_{x xbar}(x, T(x))|
//
// with chart densities rho, rhobar and T from the contact relation. Every
// active point (owned or overlap) is evolved in its own chart; fringe values
// come from the other chart through SphereGrid::sync.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "otflow/cost.hpp"
#include "otflow/density.hpp"
#include "otflow/errors.hpp"
#include "otflow/geometry.hpp"
#include "otflow/grid.hpp"
#include "otflow/transport_map.hpp"

namespace otflow {

inline constexpr double kEigFloor = 1e-8;
inline constexpr int kMaxHalvings = 10;

/// Eigenvalues (min, max) of a symmetric matrix in closed form.
template <int Dim>
std::pair<double, double> symmetric_eigenvalues(const Mat<Dim>& m) {
  if constexpr (Dim == 1) {
    return {m(0, 0), m(0, 0)};
  } else {
    const double mean = 0.5 * (m(0, 0) + m(1, 1));
    const double half = 0.5 * (m(0, 0) - m(1, 1));
    const double rad = std::hypot(half, 0.5 * (m(0, 1) + m(1, 0)));
    return {mean - rad, mean + rad};
  }
}

/// Eigenvalues of g^{-1} w, the chart-independent stretch of w.
template <int Dim>
std::pair<double, double> intrinsic_eigenvalues(const Mat<Dim>& w, const ChartCoords<Dim>& c) {
  const double lambda = sqrt_det_metric(c);  // conformal factor on S^2, 1 on S^1
  auto [lo, hi] = symmetric_eigenvalues<Dim>(w);
  if constexpr (Dim == 2) {
    lo /= lambda;
    hi /= lambda;
  }
  return {lo, hi};
}

template <int Dim>
struct FlowState {
  std::shared_ptr<const SphereGrid<Dim>> grid;

  // Per stored point. u and theta are synced into the fringe; the others are
  // meaningful on active points only.
  std::vector<double> u;
  std::vector<double> theta;
  std::vector<ChartCoords<Dim>> target;
  std::vector<Mat<Dim>> w;
  std::vector<Mat<Dim>> c_mixed;
  std::vector<double> residual;
  std::vector<int> newton_iterations;

  double t = 0.0;
  long step_count = 0;
  double dt_last = 0.0;

  // Reductions over owned points (Newton statistics over active points).
  double theta_min = 0.0;
  double theta_max = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
  double sing_min = 0.0;
  double residual_max = 0.0;
  double newton_mean = 0.0;
  int newton_max = 0;

  double oscillation() const { return theta_max - theta_min; }
  double max_abs_theta() const { return std::max(std::abs(theta_min), std::abs(theta_max)); }

  SpherePoint<Dim> target_point(int i) const { return chart_to_sphere(target[i]); }
};

template <int Dim>
class Flow {
 public:
  Flow(CostId cost, std::shared_ptr<const SphereGrid<Dim>> grid, DensityField<Dim> source, DensityField<Dim> target,
       double cfl_safety = 0.8)
      : cost_(cost), grid_(std::move(grid)), source_(std::move(source)), target_(std::move(target)),
        cfl_safety_(cfl_safety) {
    if (!(cfl_safety_ > 0.0 && cfl_safety_ <= 1.0))
      throw Error(ErrorCode::ConfigError, "cfl safety must lie in (0, 1]");
    log_source_.resize(grid_->size(), 0.0);
    for (int i : grid_->active()) log_source_[i] = source_.log_chart_density(grid_->point(i).coords());
  }

  CostId cost() const { return cost_; }
  const SphereGrid<Dim>& grid() const { return *grid_; }
  std::shared_ptr<const SphereGrid<Dim>> grid_ptr() const { return grid_; }
  const DensityField<Dim>& source() const { return source_; }
  const DensityField<Dim>& target() const { return target_; }
  double cfl_safety() const { return cfl_safety_; }

  /// State for the potential `u0` (values at every stored point; fringe is re-synced).
  FlowState<Dim> initial_state(std::vector<double> u0) const {
    if (u0.size() != grid_->size()) throw Error(ErrorCode::ConfigError, "initial potential has the wrong size");
    FlowState<Dim> s;
    s.grid = grid_;
    s.u = std::move(u0);
    grid_->sync(s.u);
    allocate(s);
    for (int i : grid_->active()) s.target[i] = initial_target(cost_, grid_->point(i).sphere);
    evaluate(s, s.target);
    return s;
  }

  FlowState<Dim> initial_state() const { return initial_state(std::vector<double>(grid_->size(), 0.0)); }

  /// Recomputes T, w and theta from s.u. `warm` supplies Newton starting points.
  void evaluate(FlowState<Dim>& s, const std::vector<ChartCoords<Dim>>& warm) const {
    const auto& g = *grid_;
    double th_lo = std::numeric_limits<double>::infinity(), th_hi = -th_lo;
    double eig_lo = th_lo, eig_hi = -th_lo, sing_lo = th_lo, res_hi = 0.0;
    long newton_total = 0;
    int newton_hi = 0;

    for (int i : g.active()) {
      const GridPoint<Dim>& p = g.point(i);
      const Vec<Dim> du = g.gradient(s.u, i);
      const Mat<Dim> d2u = g.hessian(s.u, i);

      ChartCoords<Dim> start = warm[i];
      if (cost_ == CostId::SquaredDistance) start = to_owning_chart(cexp_closed_form(p.frame, du));
      const TargetSolution<Dim> sol = solve_target(cost_, p.frame, du, start);

      const Mat<Dim> w = d2u + sol.derivs.cxx;
      const auto [lo, hi] = intrinsic_eigenvalues<Dim>(w, p.coords());
      if (!(lo > kEigFloor))
        throw Error(ErrorCode::NonConvexState, "w lost positive definiteness");
      const double log_target = target_.log_value(SpherePoint<Dim>::from_unit(sol.frame.x)) +
                                std::log(sqrt_det_metric(sol.frame.coords));
      const double th = std::log(w.determinant()) - log_source_[i] + log_target -
                        std::log(std::abs(sol.derivs.cxy.determinant()));
      if (!std::isfinite(th)) throw Error(ErrorCode::NonConvexState, "theta is not finite");

      s.target[i] = sol.frame.coords;
      s.w[i] = w;
      s.c_mixed[i] = sol.derivs.cxy;
      s.theta[i] = th;
      s.residual[i] = sol.residual;
      s.newton_iterations[i] = sol.iterations;
      newton_total += sol.iterations;
      newton_hi = std::max(newton_hi, sol.iterations);
      if (!p.owned()) continue;
      th_lo = std::min(th_lo, th);
      th_hi = std::max(th_hi, th);
      eig_lo = std::min(eig_lo, lo);
      eig_hi = std::max(eig_hi, hi);
      res_hi = std::max(res_hi, sol.residual);
      sing_lo = std::min(sing_lo, sing_distance(cost_, p.sphere, SpherePoint<Dim>::from_unit(sol.frame.x)));
    }
    g.sync(s.theta);
    s.theta_min = th_lo;
    s.theta_max = th_hi;
    s.eig_min = eig_lo;
    s.eig_max = eig_hi;
    s.sing_min = sing_lo;
    s.residual_max = res_hi;
    s.newton_mean = static_cast<double>(newton_total) / static_cast<double>(g.active().size());
    s.newton_max = newton_hi;
  }

  /// sigma h^2 / (2 max trace(w^{-1})) over active points.
  double stable_dt(const FlowState<Dim>& s, double sigma) const {
    double worst = 0.0;
    for (int i : grid_->active()) worst = std::max(worst, s.w[i].inverse().trace());
    const double h = grid_->spacing();
    return sigma * h * h / (2.0 * worst);
  }
  double stable_dt(const FlowState<Dim>& s) const { return stable_dt(s, cfl_safety_); }

  /// One explicit Euler update with a fixed dt; no backtracking.
  void advance(const FlowState<Dim>& from, FlowState<Dim>& to, double dt) const {
    if (to.u.size() != from.u.size()) {
      to.grid = grid_;
      allocate(to);
    }
    to.u = from.u;
    for (int i : grid_->active()) to.u[i] += dt * from.theta[i];
    grid_->sync(to.u);
    evaluate(to, from.target);
    to.t = from.t + dt;
    to.step_count = from.step_count + 1;
    to.dt_last = dt;
  }

  FlowState<Dim> advance(const FlowState<Dim>& from, double dt) const {
    FlowState<Dim> to;
    advance(from, to, dt);
    return to;
  }

  /// Euler step with dt = stable_dt, halving dt on failure up to ten times.
  void step(const FlowState<Dim>& from, FlowState<Dim>& to) const {
    double dt = stable_dt(from);
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, dt *= 0.5) {
      try {
        advance(from, to, dt);
        return;
      } catch (const Error& e) {
        if (!recoverable(e.code())) throw;
      }
    }
    throw Error(ErrorCode::StepFailed, "step failed after " + std::to_string(kMaxHalvings) + " halvings of dt");
  }

  FlowState<Dim> step(const FlowState<Dim>& from) const {
    FlowState<Dim> to;
    step(from, to);
    return to;
  }

 private:
  static bool recoverable(ErrorCode c) {
    return c == ErrorCode::NonConvexState || c == ErrorCode::NewtonDiverged || c == ErrorCode::SingularJacobian ||
           c == ErrorCode::CutLocusReached || c == ErrorCode::SingularPair;
  }

  void allocate(FlowState<Dim>& s) const {
    const std::size_t n = grid_->size();
    s.grid = grid_;
    s.u.resize(n, 0.0);
    s.theta.assign(n, 0.0);
    s.target.resize(n);
    s.w.assign(n, Mat<Dim>::Zero());
    s.c_mixed.assign(n, Mat<Dim>::Zero());
    s.residual.assign(n, 0.0);
    s.newton_iterations.assign(n, 0);
  }

  CostId cost_;
  std::shared_ptr<const SphereGrid<Dim>> grid_;
  DensityField<Dim> source_;
  DensityField<Dim> target_;
  double cfl_safety_;
  std::vector<double> log_source_;
};

}  // namespace otflow
