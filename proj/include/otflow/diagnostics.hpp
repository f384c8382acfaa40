#pragma once

// Linearized operator of theta, run-time monitors and decay fitting.
//
// With B = (c_{i sbar})^{-1} evaluated at (x, T(x)), perturbing u by v gives
//   L v = w^{ij} v_ij - b^k v_k,
//   b^k = [ w^{ij} c_{ij sbar} + d_sbar ln rhobar - B_{rbar i} c_{i rbar sbar} ] B_{sbar k},
// all in the target chart of each point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "otflow/cost.hpp"
#include "otflow/errors.hpp"
#include "otflow/flow.hpp"
#include "otflow/grid.hpp"

namespace otflow {

template <int Dim>
class LinearOperator {
 public:
  LinearOperator() = default;
  explicit LinearOperator(std::shared_ptr<const SphereGrid<Dim>> grid)
      : grid_(std::move(grid)), second_(grid_->size(), Mat<Dim>::Zero()), first_(grid_->size(), Vec<Dim>::Zero()) {}

  /// Coefficient of v_ij (symmetric) and of v_k (enters with a minus sign).
  const Mat<Dim>& second_order(int i) const { return second_[i]; }
  const Vec<Dim>& first_order(int i) const { return first_[i]; }
  Mat<Dim>& second_order(int i) { return second_[i]; }
  Vec<Dim>& first_order(int i) { return first_[i]; }

  /// L v at active points (zero elsewhere); `v` must already hold fringe values.
  std::vector<double> apply(const std::vector<double>& v) const {
    std::vector<double> out(v.size(), 0.0);
    for (int i : grid_->active()) {
      const Mat<Dim> hs = grid_->hessian(v, i);
      const Vec<Dim> gr = grid_->gradient(v, i);
      out[i] = (second_[i].cwiseProduct(hs)).sum() - first_[i].dot(gr);
    }
    return out;
  }

  const SphereGrid<Dim>& grid() const { return *grid_; }

 private:
  std::shared_ptr<const SphereGrid<Dim>> grid_;
  std::vector<Mat<Dim>> second_;
  std::vector<Vec<Dim>> first_;
};

template <int Dim>
LinearOperator<Dim> assemble_L(const Flow<Dim>& flow, const FlowState<Dim>& s) {
  const auto& g = flow.grid();
  LinearOperator<Dim> op(flow.grid_ptr());
  for (int i : g.active()) {
    const Mat<Dim>& w = s.w[i];
    if (!(w.determinant() > 0.0) || !(w.trace() > 0.0))
      throw Error(ErrorCode::NonConvexState, "linearization needs a positive definite w");
    const CostJet<Dim> jet = eval_cost_jet(flow.cost(), g.point(i).coords(), s.target[i]);
    const Mat<Dim> winv = w.inverse();
    const Mat<Dim> binv = jet.cxy.inverse();  // binv(sbar, i)
    const Vec<Dim> dlog_target = flow.target().chart_log_gradient(chart_frame(s.target[i]));
    Vec<Dim> beta;
    for (int sb = 0; sb < Dim; ++sb) {
      double acc = winv.cwiseProduct(jet.cxxy[sb]).sum() + dlog_target[sb];
      for (int rb = 0; rb < Dim; ++rb)
        for (int a = 0; a < Dim; ++a) acc -= binv(rb, a) * jet.cxyy[a](rb, sb);
      beta[sb] = acc;
    }
    op.second_order(i) = winv;
    op.first_order(i) = binv.transpose() * beta;
  }
  return op;
}

template <int Dim>
struct ThetaEvolutionCheck {
  double max_discrepancy = 0.0;
  std::vector<double> discrepancy;  // NaN outside the compared set
  std::vector<int> compared;        // owned points away from the seam
};

inline constexpr double kSeamExclusionCells = 3.0;

/// One explicit step of size dt; compares (theta_new - theta_old) / dt with L theta_old.
template <int Dim>
ThetaEvolutionCheck<Dim> check_theta_evolution(const Flow<Dim>& flow, const FlowState<Dim>& s, double dt) {
  const auto& g = flow.grid();
  const LinearOperator<Dim> op = assemble_L(flow, s);
  const std::vector<double> ltheta = op.apply(s.theta);
  const FlowState<Dim> next = flow.advance(s, dt);
  ThetaEvolutionCheck<Dim> out;
  out.discrepancy.assign(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (int i : g.owned()) {
    if (g.point(i).seam_cells <= kSeamExclusionCells) continue;
    const double d = (next.theta[i] - s.theta[i]) / dt - ltheta[i];
    out.discrepancy[i] = d;
    out.compared.push_back(i);
    out.max_discrepancy = std::max(out.max_discrepancy, std::abs(d));
  }
  return out;
}

/// max - min over owned points.
template <int Dim>
double oscillation(const SphereGrid<Dim>& g, const std::vector<double>& field) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i : g.owned()) {
    lo = std::min(lo, field[i]);
    hi = std::max(hi, field[i]);
  }
  return hi - lo;
}

struct DecayFit {
  double beta = 0.0;
  double r_squared = 0.0;
  double log_prefactor = 0.0;
  int samples = 0;
};

/// Least squares of ln H against t on the tail half of the samples with H > 10 eps.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& h) {
  if (t.size() != h.size()) throw Error(ErrorCode::InsufficientData, "time and H series differ in length");
  std::vector<double> ts, ys;
  const double floor = 10.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < t.size(); ++k)
    if (h[k] > floor && std::isfinite(h[k])) {
      ts.push_back(t[k]);
      ys.push_back(std::log(h[k]));
    }
  if (ts.size() < 10) throw Error(ErrorCode::InsufficientData, "decay fit needs at least 10 samples above roundoff");
  const std::size_t start = ts.size() / 2;
  const double n = static_cast<double>(ts.size() - start);
  double mt = 0.0, my = 0.0;
  for (std::size_t k = start; k < ts.size(); ++k) {
    mt += ts[k];
    my += ys[k];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = start; k < ts.size(); ++k) {
    stt += (ts[k] - mt) * (ts[k] - mt);
    sty += (ts[k] - mt) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (!(stt > 0.0)) throw Error(ErrorCode::InsufficientData, "decay fit needs distinct sample times");
  DecayFit fit;
  const double slope = sty / stt;
  fit.beta = -slope;
  fit.log_prefactor = my - slope * mt;
  fit.samples = static_cast<int>(n);
  double ssr = 0.0;
  for (std::size_t k = start; k < ts.size(); ++k) {
    const double r = ys[k] - (fit.log_prefactor + slope * ts[k]);
    ssr += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : (ssr == 0.0 ? 1.0 : 0.0);
  return fit;
}

struct DiagnosticsRecord {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  double oscillation = 0.0;  // H
  double theta_min = 0.0;
  double theta_max = 0.0;
  double eig_min = 0.0;  // of g^{-1} w
  double eig_max = 0.0;
  double sing_min = 0.0;
  double conservation_residual = 0.0;  // |int e^theta rho dVol - 1|
  double newton_mean = 0.0;
  int newton_max = 0;
  double contact_residual_max = 0.0;
};

/// Integral of e^theta rho dVol over the sphere by the grid quadrature.
template <int Dim>
double pushed_mass(const Flow<Dim>& flow, const FlowState<Dim>& s) {
  const auto& g = flow.grid();
  std::vector<double> f(g.size(), 0.0);
  for (int i : g.active()) f[i] = std::exp(s.theta[i]) * flow.source()(g.point(i).sphere);
  return g.quadrature(f);
}

template <int Dim>
DiagnosticsRecord monitors(const Flow<Dim>& flow, const FlowState<Dim>& s) {
  DiagnosticsRecord r;
  r.step = s.step_count;
  r.t = s.t;
  r.dt = s.dt_last;
  r.oscillation = s.oscillation();
  r.theta_min = s.theta_min;
  r.theta_max = s.theta_max;
  r.eig_min = s.eig_min;
  r.eig_max = s.eig_max;
  r.sing_min = s.sing_min;
  r.conservation_residual = std::abs(pushed_mass(flow, s) - 1.0);
  r.newton_mean = s.newton_mean;
  r.newton_max = s.newton_max;
  r.contact_residual_max = s.residual_max;
  return r;
}

struct DegreeReport {
  double mass = 0.0;  // int |det DT| rhobar(T) dVol
  int sheets = 0;     // nearest integer
};

/// Pushforward mass with a central-difference Jacobian of the T field; ~k for a k-sheeted cover.
template <int Dim>
DegreeReport degree_proxy(const SphereGrid<Dim>& g, const std::vector<SpherePoint<Dim>>& target,
                          const DensityField<Dim>& target_density) {
  std::vector<double> f(g.size(), 0.0);
  for (int i : g.active()) {
    if (g.point(i).weight == 0.0) continue;
    const auto& nb = g.neighbors(i);
    std::array<Ambient<Dim>, Dim> d;
    // fourth-order central differences; weighted cells sit deep inside the overlap band so +-2 is stored
    for (int k = 0; k < Dim; ++k) {
      const int f1 = nb[2 * k], b1 = nb[2 * k + 1];
      const int f2 = g.neighbors(f1)[2 * k], b2 = g.neighbors(b1)[2 * k + 1];
      d[k] = (8.0 * (target[f1].coords() - target[b1].coords()) - (target[f2].coords() - target[b2].coords())) /
             (12.0 * g.spacing());
    }
    Mat<Dim> gram;
    for (int a = 0; a < Dim; ++a)
      for (int b = 0; b < Dim; ++b) gram(a, b) = d[a].dot(d[b]);
    const double jac = std::sqrt(std::max(0.0, gram.determinant())) / g.point(i).sqrt_det_g;
    f[i] = jac * target_density(target[i]);
  }
  DegreeReport rep;
  rep.mass = g.quadrature(f);
  rep.sheets = static_cast<int>(std::lround(rep.mass));
  return rep;
}

template <int Dim>
DegreeReport degree_proxy(const Flow<Dim>& flow, const FlowState<Dim>& s) {
  const auto& g = flow.grid();
  std::vector<SpherePoint<Dim>> pts(g.size());
  for (int i : g.active()) pts[i] = s.target_point(i);
  return degree_proxy(g, pts, flow.target());
}

}  // namespace otflow
